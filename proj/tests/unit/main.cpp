#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "earlydet/log.hpp"

int main(int argc, char** argv) {
  earlydet::quiet_logging() = true;
  doctest::Context context(argc, argv);
  return context.run();
}

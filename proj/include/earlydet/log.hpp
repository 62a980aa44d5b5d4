#pragma once

#include <cstdio>
#include <string>

namespace earlydet {

inline bool& quiet_logging() {
  static bool quiet = false;
  return quiet;
}

inline void log_info(const std::string& message) {
  if (!quiet_logging()) std::fprintf(stderr, "[earlydet] %s\n", message.c_str());
}

inline void log_warn(const std::string& message) {
  std::fprintf(stderr, "[earlydet] warning: %s\n", message.c_str());
}

}  // namespace earlydet

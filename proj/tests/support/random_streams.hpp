#pragma once

// Random network-output streams for property tests of the detector.

#include <random>

#include "earlydet/inference.hpp"

namespace earlydet::testing {

inline StreamPredictions random_predictions(std::mt19937_64& rng, int frames, int classes) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  StreamPredictions p;
  p.p_fg = Vector(frames);
  p.class_posterior = Matrix(classes, frames);
  p.distances = Matrix(2, frames);
  for (int m = 0; m < frames; ++m) {
    // Occasional exact zeros exercise the p_fg = 0 path.
    p.p_fg[m] = u(rng) < 0.1 ? 0.0 : u(rng);
    double total = 0.0;
    for (int c = 0; c < classes; ++c) {
      p.class_posterior(c, m) = u(rng) + 1e-3;
      total += p.class_posterior(c, m);
    }
    p.class_posterior.col(m) /= total;
    p.distances(0, m) = u(rng);
    p.distances(1, m) = u(rng);
  }
  return p;
}

// Direct evaluation of f_c(n) = sum over m of w_c(m) [n in ROI(m)], adding
// frames in index order.
inline std::vector<std::vector<double>> batch_scores(const StreamPredictions& p,
                                                     const NormalizationConstants& k,
                                                     int length) {
  const int classes = p.num_classes();
  std::vector<std::vector<double>> f(classes, std::vector<double>(length, 0.0));
  for (int m = 0; m < p.frame_count(); ++m) {
    const auto d = restore_distances({p.distances(0, m), p.distances(1, m)}, k);
    for (int n = 0; n < length; ++n) {
      // Membership by the real-valued inequality m - d_on <= n <= m + d_off.
      if (n < m - d.on || n > m + d.off) continue;
      for (int c = 0; c < classes; ++c) f[c][n] += p.p_fg[m] * p.class_posterior(c, m);
    }
  }
  return f;
}

}  // namespace earlydet::testing

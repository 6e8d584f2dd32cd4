// tests/testing.h
//
// Copyright 2026 The uctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include "uctc/common.h"
#include "uctc/ctc.h"

namespace uctc::testing {

inline Eigen::MatrixXd random_logits(Rng& rng, int T, int K, double scale = 2.0) {
  Eigen::MatrixXd logits(T, K);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) logits(t, k) = rng.uniform(-scale, scale);
  }
  return logits;
}

inline LogProbLattice random_lattice(Rng& rng, int T, int K, double scale = 2.0) {
  return log_softmax(random_logits(rng, T, K, scale));
}

// Blank-free target, resampled until feasible for T frames.
inline std::vector<int> random_feasible_target(Rng& rng, int K, int max_len, int T, int blank) {
  while (true) {
    const int len = rng.uniform_int(0, max_len);
    std::vector<int> target;
    for (int i = 0; i < len; ++i) {
      int id = rng.uniform_int(0, K - 1);
      if (id == blank) id = (id + 1) % K;
      target.push_back(id);
    }
    if (target_feasible(len, count_adjacent_repeats(target), T)) return target;
  }
}

// Max relative error between an analytic and a numeric gradient entry. The
// floor keeps near-zero entries out of the denominator: central differences
// at eps = 1e-5 over a loss of order 1 carry an absolute noise floor around
// 1e-10, so entries that small are indistinguishable from zero while any
// genuinely wrong derivative term still shows up orders of magnitude above
// the 1e-4 threshold.
inline double gradient_error(double analytic, double numeric, double floor = 1e-4) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace uctc::testing

// uctc/ctc.cc
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

#include "uctc/ctc.h"

#include <algorithm>
#include <cmath>

namespace uctc {

int count_adjacent_repeats(const std::vector<int>& target) {
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++repeats;
  }
  return repeats;
}

bool target_feasible(int target_len, int adjacent_repeats, int num_frames) {
  return target_len + adjacent_repeats <= num_frames;
}

CtcResult ctc_loss(const LogProbLattice& lattice, const std::vector<int>& target, int blank) {
  const int T = lattice.num_frames();
  const int K = lattice.num_labels();
  const int U = static_cast<int>(target.size());
  require(T >= 1, "ctc_loss: empty lattice");
  require(blank >= 0 && blank < K, "ctc_loss: blank index out of range");
  for (int y : target) {
    require(y >= 0 && y < K, "ctc_loss: target id out of range");
    require(y != blank, "ctc_loss: target contains the blank");
  }
  const int repeats = count_adjacent_repeats(target);
  if (!target_feasible(U, repeats, T)) {
    throw InfeasibleTargetError("infeasible target: needs at least " +
                                std::to_string(U + repeats) + " frames, lattice has " +
                                std::to_string(T));
  }

  // Blank-augmented label sequence: blank, y1, blank, y2, ..., yU, blank.
  const int S = 2 * U + 1;
  auto label_at = [&](int s) { return (s % 2 == 0) ? blank : target[s / 2]; };
  const Eigen::MatrixXd& lp = lattice.log_probs;

  Eigen::MatrixXd alpha(T, S);
  alpha.setConstant(kLogZero);
  alpha(0, 0) = lp(0, label_at(0));
  if (S > 1) alpha(0, 1) = lp(0, label_at(1));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_sum_exp(a, alpha(t - 1, s - 1));
      if (s >= 2 && label_at(s) != blank && label_at(s) != label_at(s - 2)) {
        a = log_sum_exp(a, alpha(t - 1, s - 2));
      }
      alpha(t, s) = (a == kLogZero) ? kLogZero : a + lp(t, label_at(s));
    }
  }

  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_sum_exp(log_p, alpha(T - 1, S - 2));
  if (log_p == kLogZero) {
    fail("ctc_loss: target has zero probability under the lattice "
         "(a target token may be masked out)");
  }

  // beta(t, s): log prob of completing from state s using frames t+1..T-1,
  // excluding the emission at frame t, so alpha + beta sums to log P at any t.
  Eigen::MatrixXd beta(T, S);
  beta.setConstant(kLogZero);
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + lp(t + 1, label_at(s));
      if (s + 1 < S) {
        b = log_sum_exp(b, beta(t + 1, s + 1) + lp(t + 1, label_at(s + 1)));
      }
      if (s + 2 < S && label_at(s + 2) != blank && label_at(s + 2) != label_at(s)) {
        b = log_sum_exp(b, beta(t + 1, s + 2) + lp(t + 1, label_at(s + 2)));
      }
      beta(t, s) = b;
    }
  }

  CtcResult result;
  result.loss = -log_p;
  // grad = softmax(logits) - gamma, where gamma(t,k) is the posterior mass of
  // augmented states labeled k at frame t. exp(-inf) = 0 keeps masked labels
  // at exactly zero gradient.
  result.grad_logits.resize(T, K);
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd gamma = Eigen::VectorXd::Constant(K, kLogZero);
    for (int s = 0; s < S; ++s) {
      const double occ = alpha(t, s) + beta(t, s);
      if (occ != kLogZero) {
        double& cell = gamma(label_at(s));
        cell = log_sum_exp(cell, occ);
      }
    }
    for (int k = 0; k < K; ++k) {
      const double p = std::exp(lp(t, k));
      const double g = (gamma(k) == kLogZero) ? 0.0 : std::exp(gamma(k) - log_p);
      result.grad_logits(t, k) = p - g;
    }
  }
  return result;
}

double ctc_brute_force(const LogProbLattice& lattice, const std::vector<int>& target, int blank) {
  const int T = lattice.num_frames();
  const int K = lattice.num_labels();
  require(T >= 1, "ctc_brute_force: empty lattice");
  double paths = 1.0;
  for (int t = 0; t < T; ++t) {
    paths *= K;
    require(paths <= 1e7, "ctc_brute_force: K^T exceeds 10^7, refusing");
  }

  const Eigen::MatrixXd& lp = lattice.log_probs;
  std::vector<int> path(T, 0);
  double total = 0.0;
  while (true) {
    bool matches = false;
    {
      // Collapse: remove adjacent repeats, then blanks; compare on the fly.
      size_t u = 0;
      bool ok = true;
      int prev = -1;
      for (int t = 0; t < T && ok; ++t) {
        const int c = path[t];
        if (c != prev) {
          if (c != blank) {
            if (u < target.size() && target[u] == c) {
              ++u;
            } else {
              ok = false;
            }
          }
          prev = c;
        }
      }
      matches = ok && u == target.size();
    }
    if (matches) {
      double log_path = 0.0;
      for (int t = 0; t < T; ++t) log_path += lp(t, path[t]);
      total += std::exp(log_path);
    }
    int pos = T - 1;
    while (pos >= 0 && path[pos] == K - 1) {
      path[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++path[pos];
  }
  if (total <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(total);
}

std::vector<int> collapse_alignment(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int c : path) {
    if (c != prev) {
      if (c != blank) out.push_back(c);
      prev = c;
    }
  }
  return out;
}

std::vector<int> greedy_decode(const LogProbLattice& lattice, int blank) {
  const int T = lattice.num_frames();
  const int K = lattice.num_labels();
  std::vector<int> path(T);
  for (int t = 0; t < T; ++t) {
    int best = 0;
    double best_lp = lattice.log_probs(t, 0);
    for (int k = 1; k < K; ++k) {
      if (lattice.log_probs(t, k) > best_lp) {
        best_lp = lattice.log_probs(t, k);
        best = k;
      }
    }
    path[t] = best;
  }
  return collapse_alignment(path, blank);
}

LogProbLattice apply_mask(const Eigen::MatrixXd& logits, const LanguageMask& mask) {
  const int T = static_cast<int>(logits.rows());
  const int K = static_cast<int>(logits.cols());
  require(static_cast<int>(mask.bits.size()) == K,
          "apply_mask: mask length " + std::to_string(mask.bits.size()) +
              " does not match K = " + std::to_string(K));
  LogProbLattice lattice;
  lattice.log_probs.resize(T, K);
  for (int t = 0; t < T; ++t) {
    double max_allowed = kLogZero;
    for (int k = 0; k < K; ++k) {
      if (mask.bits[k] && logits(t, k) > max_allowed) max_allowed = logits(t, k);
    }
    require(max_allowed != kLogZero, "apply_mask: mask allows no labels");
    double sum = 0.0;
    for (int k = 0; k < K; ++k) {
      if (mask.bits[k]) sum += std::exp(logits(t, k) - max_allowed);
    }
    const double log_z = max_allowed + std::log(sum);
    for (int k = 0; k < K; ++k) {
      lattice.log_probs(t, k) = mask.bits[k] ? logits(t, k) - log_z : kLogZero;
    }
  }
  return lattice;
}

LogProbLattice log_softmax(const Eigen::MatrixXd& logits) {
  LanguageMask all;
  all.bits.assign(logits.cols(), 1);
  return apply_mask(logits, all);
}

}  // namespace uctc

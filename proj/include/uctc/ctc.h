// uctc/ctc.h
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

#include <Eigen/Dense>

#include "uctc/common.h"
#include "uctc/labelset.h"

namespace uctc {

// Per-frame log-posteriors over the token inventory, T x K. Rows normalize
// to 1 in probability space; masked entries are exactly -inf.
struct LogProbLattice {
  Eigen::MatrixXd log_probs;

  int num_frames() const { return static_cast<int>(log_probs.rows()); }
  int num_labels() const { return static_cast<int>(log_probs.cols()); }
};

struct CtcResult {
  double loss = 0.0;                // -ln P(target | lattice)
  Eigen::MatrixXd grad_logits;      // T x K, d loss / d pre-softmax logit
};

// Thrown when |target| + (adjacent equal pairs) > T. Distinct from numeric
// failure so callers can skip too-short utterances.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

int count_adjacent_repeats(const std::vector<int>& target);

bool target_feasible(int target_len, int adjacent_repeats, int num_frames);

// CTC negative log-likelihood over the blank-augmented state graph, with the
// exact gradient with respect to pre-softmax logits (the lattice must be the
// log-softmax of those logits; masked entries get zero gradient). Throws
// InfeasibleTargetError when the target cannot fit in T frames and Error
// when the target has zero probability (e.g. it contains a masked token).
CtcResult ctc_loss(const LogProbLattice& lattice, const std::vector<int>& target, int blank);

// Enumeration oracle: sums P(pi) over all K^T alignments whose collapse
// (remove repeats, then blanks) equals the target. Refuses K^T > 10^7.
// Returns +inf when no alignment matches.
double ctc_brute_force(const LogProbLattice& lattice, const std::vector<int>& target, int blank);

// Per-frame argmax (ties to the lowest index), collapse adjacent repeats,
// delete blanks.
std::vector<int> greedy_decode(const LogProbLattice& lattice, int blank);

// Collapse rule used by decoding: remove adjacent repeats, then blanks.
std::vector<int> collapse_alignment(const std::vector<int>& path, int blank);

// Masked log-softmax: disallowed logits become -inf before normalization, so
// allowed posteriors renormalize to 1 and masked posteriors are exactly 0.
LogProbLattice apply_mask(const Eigen::MatrixXd& logits, const LanguageMask& mask);

// Plain log-softmax (all labels allowed).
LogProbLattice log_softmax(const Eigen::MatrixXd& logits);

}  // namespace uctc

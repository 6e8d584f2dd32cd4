// tests/ctc_test.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testing.h"
#include "uctc/ctc.h"

using namespace uctc;

namespace {

LogProbLattice uniform_lattice(int T, int K) {
  Eigen::MatrixXd lp = Eigen::MatrixXd::Constant(T, K, -std::log(static_cast<double>(K)));
  return LogProbLattice{lp};
}

}  // namespace

TEST_CASE("brute force oracle reproduces hand-enumerated path sums") {
  // T=1, K=2, uniform, target [a=1]: single path 'a', probability 1/2.
  CHECK(ctc_brute_force(uniform_lattice(1, 2), {1}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // T=2, K=2, uniform, target [a]: paths a.blank, blank.a, a.a -> 3/4.
  CHECK(ctc_brute_force(uniform_lattice(2, 2), {1}, 0) ==
        doctest::Approx(-std::log(3.0 / 4.0)).epsilon(1e-12));
  // Empty target, T=2, uniform K=2: only blank.blank -> 1/4.
  CHECK(ctc_brute_force(uniform_lattice(2, 2), {}, 0) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("brute force loss is zero for a deterministic one-hot lattice") {
  Eigen::MatrixXd lp = Eigen::MatrixXd::Constant(3, 3, kLogZero);
  lp(0, 1) = 0.0;
  lp(1, 0) = 0.0;
  lp(2, 2) = 0.0;
  const LogProbLattice lattice{lp};
  // Collapse of the single possible path [1, blank, 2] is [1, 2].
  CHECK(ctc_brute_force(lattice, {1, 2}, 0) == doctest::Approx(0.0));
}

TEST_CASE("brute force refuses oversized enumeration") {
  CHECK_THROWS_AS(ctc_brute_force(uniform_lattice(20, 10), {1}, 0), Error);
}

TEST_CASE("ctc_loss matches the frozen hand-computed values") {
  CHECK(ctc_loss(uniform_lattice(1, 2), {1}, 0).loss ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(ctc_loss(uniform_lattice(2, 2), {1}, 0).loss ==
        doctest::Approx(0.2876820724517809).epsilon(1e-12));
  CHECK(ctc_loss(uniform_lattice(2, 2), {}, 0).loss ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));
}

TEST_CASE("ctc_loss equals the enumeration oracle on random instances") {
  Rng rng(20260808);
  for (int trial = 0; trial < 300; ++trial) {
    const int T = rng.uniform_int(1, 8);
    const int K = rng.uniform_int(2, 4);
    const LogProbLattice lattice = testing::random_lattice(rng, T, K);
    const std::vector<int> target = testing::random_feasible_target(rng, K, 3, T, 0);
    const double expected = ctc_brute_force(lattice, target, 0);
    const double actual = ctc_loss(lattice, target, 0).loss;
    REQUIRE(std::abs(actual - expected) <= 1e-8);
  }
}

TEST_CASE("ctc_loss on a random T=6 K=4 instance matches the oracle tightly") {
  Rng rng(7);
  const LogProbLattice lattice = testing::random_lattice(rng, 6, 4);
  const std::vector<int> target = {2, 1, 3};
  CHECK(std::abs(ctc_loss(lattice, target, 0).loss - ctc_brute_force(lattice, target, 0)) <= 1e-8);
}

TEST_CASE("analytic logit gradient matches central finite differences") {
  Rng rng(99);
  const double eps = 1e-5;
  for (int trial = 0; trial < 30; ++trial) {
    const int T = rng.uniform_int(1, 6);
    const int K = rng.uniform_int(2, 4);
    Eigen::MatrixXd logits = testing::random_logits(rng, T, K);
    const std::vector<int> target = testing::random_feasible_target(rng, K, 3, T, 0);

    const CtcResult result = ctc_loss(log_softmax(logits), target, 0);
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd plus = logits;
        Eigen::MatrixXd minus = logits;
        plus(t, k) += eps;
        minus(t, k) -= eps;
        const double numeric = (ctc_loss(log_softmax(plus), target, 0).loss -
                                ctc_loss(log_softmax(minus), target, 0).loss) /
                               (2 * eps);
        REQUIRE(testing::gradient_error(result.grad_logits(t, k), numeric) <= 1e-4);
      }
    }
  }
}

TEST_CASE("gradient rows sum to zero (softmax property)") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = rng.uniform_int(1, 8);
    const int K = rng.uniform_int(2, 4);
    const LogProbLattice lattice = testing::random_lattice(rng, T, K);
    const std::vector<int> target = testing::random_feasible_target(rng, K, 3, T, 0);
    const CtcResult result = ctc_loss(lattice, target, 0);
    for (int t = 0; t < T; ++t) {
      CHECK(std::abs(result.grad_logits.row(t).sum()) <= 1e-8);
    }
  }
}

TEST_CASE("gradient through a masked lattice matches finite differences and is zero on masked") {
  Rng rng(123);
  LanguageMask mask;
  mask.bits = {1, 1, 0, 1};  // label 2 masked; blank 0 allowed
  const double eps = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const int T = rng.uniform_int(2, 5);
    Eigen::MatrixXd logits = testing::random_logits(rng, T, 4);
    const std::vector<int> target = {1, 3};
    if (!target_feasible(2, 0, T)) continue;
    const CtcResult result = ctc_loss(apply_mask(logits, mask), target, 0);
    for (int t = 0; t < T; ++t) {
      CHECK(result.grad_logits(t, 2) == 0.0);
      for (int k = 0; k < 4; ++k) {
        Eigen::MatrixXd plus = logits;
        Eigen::MatrixXd minus = logits;
        plus(t, k) += eps;
        minus(t, k) -= eps;
        const double numeric = (ctc_loss(apply_mask(plus, mask), target, 0).loss -
                                ctc_loss(apply_mask(minus, mask), target, 0).loss) /
                               (2 * eps);
        REQUIRE(testing::gradient_error(result.grad_logits(t, k), numeric) <= 1e-4);
      }
    }
  }
}

TEST_CASE("infeasible targets raise InfeasibleTargetError") {
  CHECK_THROWS_AS(ctc_loss(uniform_lattice(1, 3), {1, 2}, 0), InfeasibleTargetError);
  // Adjacent repeats need a separating blank frame.
  CHECK_THROWS_AS(ctc_loss(uniform_lattice(2, 3), {1, 1}, 0), InfeasibleTargetError);
  CHECK_NOTHROW(ctc_loss(uniform_lattice(3, 3), {1, 1}, 0));
}

TEST_CASE("feasibility is monotone in T") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = rng.uniform_int(0, 5);
    std::vector<int> target;
    for (int i = 0; i < len; ++i) target.push_back(rng.uniform_int(1, 3));
    const int repeats = count_adjacent_repeats(target);
    for (int T = 1; T < 12; ++T) {
      if (target_feasible(len, repeats, T)) {
        CHECK(target_feasible(len, repeats, T + 1));
      }
    }
  }
}

TEST_CASE("a masked-out target token is a clear error, not an infinite loss") {
  LanguageMask mask;
  mask.bits = {1, 1, 0};
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(3, 3);
  const LogProbLattice lattice = apply_mask(logits, mask);
  CHECK_THROWS_WITH_AS(ctc_loss(lattice, {2}, 0), doctest::Contains("zero probability"), Error);
}

TEST_CASE("greedy decode collapses repeats then removes blanks") {
  auto one_hot_path = [](const std::vector<int>& path, int K) {
    Eigen::MatrixXd lp = Eigen::MatrixXd::Constant(static_cast<int>(path.size()), K, -10.0);
    for (size_t t = 0; t < path.size(); ++t) lp(static_cast<int>(t), path[t]) = -0.01;
    return log_softmax(lp);
  };
  CHECK(greedy_decode(one_hot_path({1, 1, 0, 1}, 2), 0) == std::vector<int>{1, 1});
  CHECK(greedy_decode(one_hot_path({0, 0}, 2), 0) == std::vector<int>{});
  CHECK(greedy_decode(one_hot_path({1, 2, 2, 0, 2}, 3), 0) == std::vector<int>{1, 2, 2});
}

TEST_CASE("greedy decode breaks ties toward the lowest index") {
  Eigen::MatrixXd lp = Eigen::MatrixXd::Constant(1, 4, -std::log(4.0));
  CHECK(greedy_decode(LogProbLattice{lp}, 0) == std::vector<int>{});  // blank wins the tie
  Eigen::MatrixXd lp2 = lp;
  lp2(0, 0) = -100.0;  // blank out of the race; labels 1..3 tied
  CHECK(greedy_decode(log_softmax(lp2), 0) == std::vector<int>{1});
}

TEST_CASE("collapse never emits blanks and fixes blank-free repeat-free sequences") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int T = rng.uniform_int(0, 12);
    std::vector<int> path;
    for (int t = 0; t < T; ++t) path.push_back(rng.uniform_int(0, 3));
    const std::vector<int> collapsed = collapse_alignment(path, 0);
    for (int id : collapsed) CHECK(id != 0);
    // A blank-free sequence without adjacent repeats is a fixed point.
    if (collapsed == collapse_alignment(collapsed, 0)) {
      CHECK(count_adjacent_repeats(collapsed) == 0);
    }
    std::vector<int> no_repeats;
    for (int id : collapsed) {
      if (no_repeats.empty() || no_repeats.back() != id) no_repeats.push_back(id);
    }
    CHECK(collapse_alignment(no_repeats, 0) == no_repeats);
  }
}

TEST_CASE("apply_mask renormalizes over the allowed labels") {
  LanguageMask mask;
  mask.bits = {1, 1, 1, 0};
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(2, 4);
  const LogProbLattice lattice = apply_mask(logits, mask);
  for (int t = 0; t < 2; ++t) {
    for (int k = 0; k < 3; ++k) {
      CHECK(std::exp(lattice.log_probs(t, k)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    CHECK(lattice.log_probs(t, 3) == kLogZero);
  }
}

TEST_CASE("apply_mask with an all-ones mask is the ordinary log-softmax") {
  Rng rng(41);
  Eigen::MatrixXd logits = testing::random_logits(rng, 3, 5);
  LanguageMask all;
  all.bits.assign(5, 1);
  const LogProbLattice a = apply_mask(logits, all);
  const LogProbLattice b = log_softmax(logits);
  CHECK((a.log_probs - b.log_probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked rows stay normalized and decoding never emits a masked token") {
  Rng rng(307);
  for (int trial = 0; trial < 500; ++trial) {
    const int K = rng.uniform_int(3, 8);
    const int T = rng.uniform_int(1, 10);
    LanguageMask mask;
    mask.bits.assign(static_cast<size_t>(K), 0);
    mask.bits[0] = 1;
    for (int k = 1; k < K; ++k) mask.bits[static_cast<size_t>(k)] = rng.uniform() < 0.6 ? 1 : 0;
    const Eigen::MatrixXd logits = testing::random_logits(rng, T, K, 4.0);
    const LogProbLattice lattice = apply_mask(logits, mask);
    for (int t = 0; t < T; ++t) {
      double sum = 0.0;
      for (int k = 0; k < K; ++k) {
        if (mask.bits[static_cast<size_t>(k)]) {
          sum += std::exp(lattice.log_probs(t, k));
        } else {
          CHECK(lattice.log_probs(t, k) == kLogZero);
        }
      }
      CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
    for (int id : greedy_decode(lattice, 0)) {
      CHECK(mask.bits[static_cast<size_t>(id)] == 1);
    }
  }
}

// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "cqec/anneal.hpp"
#include "cqec/core.hpp"
#include "doctest.h"

using namespace cqec;

namespace {
constexpr double kGamma = 0.04e6;
constexpr double kDt = 3.2e-8;
}  // namespace

TEST_CASE("syndromes of basis states") {
  CHECK(syndromes_of(ErrorState(0)) == Syndromes{1, 1});
  CHECK(syndromes_of(ErrorState(3)) == Syndromes{-1, 1});
  CHECK(syndromes_of(ErrorState(4)) == Syndromes{-1, 1});
  CHECK(syndromes_of(ErrorState(5)) == Syndromes{-1, -1});
  CHECK(syndromes_of(ErrorState(2)) == Syndromes{-1, -1});
  CHECK(syndromes_of(ErrorState(1)) == Syndromes{1, -1});
  for (int i = 0; i < 8; ++i) {
    CHECK(syndromes_of(ErrorState(i)) == syndromes_of(ErrorState(i ^ 7)));
  }
}

TEST_CASE("apply_flip toggles one bit and is an involution") {
  CHECK(apply_flip(ErrorState(0), 1).index() == 4);
  CHECK(apply_flip(ErrorState(4), 1).index() == 0);
  CHECK(apply_flip(ErrorState(5), 2).index() == 7);
  for (int i = 0; i < 8; ++i) {
    for (int q = 1; q <= 3; ++q) {
      CHECK(apply_flip(apply_flip(ErrorState(i), q), q) == ErrorState(i));
    }
  }
  CHECK_THROWS_AS(apply_flip(ErrorState(0), 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_flip(ErrorState(0), 4), std::invalid_argument);
  CHECK_THROWS_AS(ErrorState(8), std::invalid_argument);
}

TEST_CASE("correcting mask returns each syndrome pattern to the code space") {
  for (int i = 0; i < 8; ++i) {
    const ErrorState s(i);
    const ErrorState fixed = apply_mask(s, correcting_mask(syndromes_of(s)));
    CHECK(syndromes_of(fixed) == Syndromes{1, 1});
  }
  CHECK(correcting_mask({-1, 1}) == flip_mask(1));
  CHECK(correcting_mask({-1, -1}) == flip_mask(2));
  CHECK(correcting_mask({1, -1}) == flip_mask(3));
}

TEST_CASE("bit-flip rate matrix") {
  const RateMatrix q = rate_matrix(ErrorKind::BitFlip, kGamma);
  for (int i = 0; i < 8; ++i) {
    CHECK(q.entries(i, i) == doctest::Approx(-3 * kGamma));
    CHECK(std::abs(q.entries.row(i).sum()) < 1e-9);
  }
  CHECK(q.entries(0, 1) == doctest::Approx(kGamma));
  CHECK(q.entries(0, 3) == 0.0);
  CHECK(rate_matrix(ErrorKind::BitFlip, 0.0).entries.isZero());
  CHECK_THROWS_AS(rate_matrix(ErrorKind::BitFlip, -1.0), std::invalid_argument);
}

TEST_CASE("damping rate matrix") {
  const RateMatrix q = rate_matrix(ErrorKind::Damping, kGamma);
  CHECK(q.entries.row(0).isZero());
  CHECK(q.entries(7, 7) == doctest::Approx(-3 * kGamma));
  CHECK(q.entries(7, 3) == doctest::Approx(kGamma));
  CHECK(q.entries(3, 7) == 0.0);
  for (int i = 0; i < 8; ++i) CHECK(std::abs(q.entries.row(i).sum()) < 1e-9);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (i != j) CHECK(q.entries(i, j) >= 0.0);
    }
  }
}

TEST_CASE("transition matrix") {
  const RateMatrix q = rate_matrix(ErrorKind::BitFlip, kGamma);
  CHECK(transition_matrix(q, 0.0).entries.isApprox(Matrix8::Identity(), 1e-15));
  const TransitionMatrix j = transition_matrix(q, kDt);
  const double p = std::pow((1 + std::exp(-2 * kGamma * kDt)) / 2, 3);
  CHECK(j.entries(0, 0) == doctest::Approx(p).epsilon(1e-12));
  CHECK(j.entries(0, 0) == doctest::Approx(0.996169).epsilon(1e-6));
  for (int r = 0; r < 8; ++r) {
    CHECK(std::abs(j.entries.row(r).sum() - 1.0) < 1e-12);
    for (int c = 0; c < 8; ++c) {
      CHECK(j.entries(r, c) >= 0.0);
      CHECK(j.entries(r, c) <= 1.0);
    }
  }
  // XOR relabeling symmetry: J(i ^ m, j ^ m) = J(i, j).
  for (int m = 0; m < 8; ++m) {
    for (int r = 0; r < 8; ++r) {
      for (int c = 0; c < 8; ++c) {
        CHECK(std::abs(j.entries(r ^ m, c ^ m) - j.entries(r, c)) < 1e-15);
      }
    }
  }
}

TEST_CASE("transition matrix semigroup property") {
  for (ErrorKind kind : {ErrorKind::BitFlip, ErrorKind::Damping}) {
    const RateMatrix q = rate_matrix(kind, 0.3e6);
    const Matrix8 a = transition_matrix(q, 0.7e-6).entries;
    const Matrix8 b = transition_matrix(q, 2.1e-6).entries;
    const Matrix8 ab = transition_matrix(q, 2.8e-6).entries;
    CHECK((a * b - ab).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("RngStream reproducibility") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs |= x != c.normal();
  }
  CHECK(differs);
  CHECK(a.seed() == 42);
  CHECK(a.stream_id() == 7);
}

TEST_CASE("sample_step_errors") {
  RngStream rng(1, 0);
  for (int i = 0; i < 1000; ++i) CHECK(sample_step_errors(ErrorState(5), 0.0, kDt, rng) == ErrorState(5));

  // Per-qubit flip probability P(n odd) and the no-net-flip probability.
  const double gdt = 0.00128;
  const int n = 1000000;
  int flips1 = 0, none = 0;
  for (int i = 0; i < n; ++i) {
    const ErrorState s = sample_step_errors(ErrorState(0), gdt / kDt, kDt, rng);
    flips1 += s.bit(1);
    none += s.index() == 0;
  }
  const double p1 = (1 - std::exp(-2 * gdt)) / 2;
  CHECK(p1 == doctest::Approx(0.0012784).epsilon(1e-4));
  CHECK(std::abs(flips1 / double(n) - p1) < 3 * std::sqrt(p1 * (1 - p1) / n));
  const double p0 = std::pow((1 + std::exp(-2 * gdt)) / 2, 3);
  CHECK(std::abs(none / double(n) - p0) < 3 * std::sqrt(p0 * (1 - p0) / n));
}

TEST_CASE("Monte Carlo populations follow J(T) row 0") {
  const double gamma = 0.2e6;
  const int steps = 100;
  const int n = 100000;
  std::array<int, 8> counts{};
  for (int k = 0; k < n; ++k) {
    RngStream rng(3, k);
    ErrorState s(0);
    for (int t = 0; t < steps; ++t) s = sample_step_errors(s, gamma, kDt, rng);
    ++counts[s.index()];
  }
  const Matrix8 j = transition_matrix(rate_matrix(ErrorKind::BitFlip, gamma), steps * kDt).entries;
  for (int i = 0; i < 8; ++i) {
    const double p = j(0, i);
    CHECK(std::abs(counts[i] / double(n) - p) < 3 * std::sqrt(p * (1 - p) / n) + 1e-12);
  }
}

TEST_CASE("damping chain matches the analytic excited population") {
  const double gamma = 0.04e6, t_total = 30e-6;
  const int steps = static_cast<int>(t_total / kDt);
  const int n = 3000;
  int excited = 0;
  for (int k = 0; k < n; ++k) {
    RngStream rng(9, k);
    ErrorState s(7);
    for (int t = 0; t < steps; ++t) s = sample_step_damping(s, gamma, kDt, rng);
    excited += is_excited(s);
  }
  const double p = analytic_pexc(ErrorKind::Damping, gamma, steps * kDt);
  CHECK(std::abs(excited / double(n) - p) < 3 * std::sqrt(p * (1 - p) / n));
  // Ground state is absorbing.
  RngStream rng(1, 1);
  CHECK(sample_step_damping(ErrorState(0), 1e9, kDt, rng) == ErrorState(0));
}

TEST_CASE("error kind names") {
  CHECK(error_kind_from_string(to_string(ErrorKind::BitFlip)) == ErrorKind::BitFlip);
  CHECK(error_kind_from_string(to_string(ErrorKind::Damping)) == ErrorKind::Damping);
  CHECK_THROWS(error_kind_from_string("thermal"));
}

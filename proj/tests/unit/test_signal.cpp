// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>

#include "cqec/signal.hpp"
#include "doctest.h"

using namespace cqec;

TEST_CASE("scheme defaults") {
  const SchemeConfig a = SchemeConfig::defaults(Scheme::A);
  CHECK(a.noise_variance() == doctest::Approx(5.9375));
  for (double c : a.cov_lags) CHECK(c == 0.0);
  const SchemeConfig b = SchemeConfig::defaults(Scheme::B);
  for (int i = 0; i < 4; ++i) CHECK(b.cov_lags[i] == kReferenceCorrelations[i]);
  CHECK(has_transients(Scheme::C));
  CHECK(!has_transients(Scheme::B));
  CHECK(has_drift(Scheme::D));
  CHECK(scheme_from_string("C") == Scheme::C);
  CHECK_THROWS(scheme_from_string("E"));
}

TEST_CASE("scheme D drift runs linearly across the sequence") {
  SchemeConfig d = SchemeConfig::defaults(Scheme::D);
  d.n_sequences = 10;
  CHECK(d.drift(0) == 0.0);
  CHECK(d.drift(10) == doctest::Approx(0.4));
  CHECK(d.drift(5) == doctest::Approx(0.2));
  CHECK(SchemeConfig::defaults(Scheme::A).drift(3) == 0.0);
}

TEST_CASE("resonator response") {
  const ResonatorParams p;
  const ResonatorResponse r0 = resonator_response(0.0, p);
  CHECK(std::abs(r0.alpha_e) < 1e-15);
  CHECK(std::abs(r0.alpha_g) < 1e-15);
  const ResonatorResponse inf = resonator_steady_state(p);
  const ResonatorResponse late = resonator_response(100.0 / p.kappa, p);
  CHECK(std::abs(late.alpha_e - inf.alpha_e) < 1e-12);
  const std::complex<double> steady_e = -2.0 * p.epsilon / std::complex<double>(2 * p.chi, -p.kappa);
  CHECK(std::abs(inf.alpha_e - steady_e) < 1e-15);

  // Log-linear tail decays at kappa / 2.
  const double t1 = 2e-6, t2 = 4e-6;
  const double d1 = std::abs(resonator_response(t1, p).alpha_e - inf.alpha_e);
  const double d2 = std::abs(resonator_response(t2, p).alpha_e - inf.alpha_e);
  CHECK(std::log(d1 / d2) / (t2 - t1) == doctest::Approx(p.kappa / 2).epsilon(1e-9));

  ResonatorParams bad = p;
  bad.kappa = 0.0;
  bad.chi = 0.0;
  CHECK_THROWS(resonator_response(1e-7, bad));
}

TEST_CASE("transient templates") {
  const SchemeConfig c = SchemeConfig::defaults(Scheme::C);
  const auto table = build_transient_templates(c.resonator, c.dt);
  CHECK(table.size() == 24);
  for (const auto& [key, t] : table) {
    REQUIRE(t.means.size() == static_cast<std::size_t>(kTransientSteps));
    const Syndromes pre = syndromes_of(t.pre), post = syndromes_of(t.post);
    CHECK(std::abs(t.means.back()[0] - post.s1) < 0.05);
    CHECK(std::abs(t.means.back()[1] - post.s2) < 0.05);
    if (pre.s1 == post.s1) {
      for (const auto& m : t.means) CHECK(m[0] == post.s1);
    }
    if (pre.s2 == post.s2) {
      for (const auto& m : t.means) CHECK(m[1] == post.s2);
    }
  }
  // X2 on |100>: S1 sweeps from -1 to +1, S2 from +1 to -1.
  const TransientTemplate& t46 = table.at({4, 6});
  CHECK(t46.means.back()[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(t46.means.back()[1] == doctest::Approx(-1.0).epsilon(0.05));

  // Forward and reverse flips of the same pair are sign mirrors on the
  // channel that changes.
  const TransientTemplate& fwd = table.at({0, 4});
  const TransientTemplate& rev = table.at({4, 0});
  for (int k = 0; k < kTransientSteps; ++k) {
    CHECK(fwd.means[k][0] == doctest::Approx(-rev.means[k][0]).epsilon(1e-12));
  }
}

TEST_CASE("transient library covers every transition") {
  const SchemeConfig c = SchemeConfig::defaults(Scheme::C);
  const TransientLibrary lib(c.resonator, c.dt);
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      if (a == b) continue;
      const TransientTemplate& t = lib.get(ErrorState(a), ErrorState(b));
      CHECK(t.pre == ErrorState(a));
      CHECK(t.post == ErrorState(b));
      CHECK(t.means.size() == static_cast<std::size_t>(kTransientSteps));
    }
  }
}

TEST_CASE("conditional gaussian") {
  const ConditionalGaussian white(5.94, {0, 0, 0, 0});
  CHECK(white.conditional_variance(0) == doctest::Approx(5.94));
  CHECK(white.conditional_variance(4) == doctest::Approx(5.94));
  const double h[4] = {1.3, -0.2, 0.7, 2.0};
  CHECK(white.conditional_mean(std::span<const double>(h, 4)) == 0.0);

  const ConditionalGaussian lag1(5.94, {0.61, 0, 0, 0}, 1);
  CHECK(lag1.conditional_variance(1) == doctest::Approx(3.729).epsilon(1e-3));
  CHECK(lag1.conditional_mean(std::span<const double>(h, 1)) == doctest::Approx(0.61 * 1.3));

  const ConditionalGaussian full(5.94, kReferenceCorrelations);
  CHECK(full.conditional_variance(0) == doctest::Approx(5.94));
  for (int d = 1; d <= 4; ++d) {
    CHECK(full.conditional_variance(d) <= full.conditional_variance(d - 1) + 1e-12);
  }
  CHECK(full.conditional_variance(1) == doctest::Approx(5.94 * (1 - 0.61 * 0.61)));

  CHECK_THROWS(ConditionalGaussian(5.94, {0.99, 0.0, 0.99, 0.0}));
}

TEST_CASE("scheme B noise autocovariance") {
  SchemeConfig b = SchemeConfig::defaults(Scheme::B);
  b.gamma = 0.0;
  const int n = 1000000;
  RngStream rng(5, 0);
  const Trajectory t = generate_trajectory(b, TransientLibrary(), ErrorState(0), n, 0, rng);
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = t.steps[i].i1 - t.steps[i].mean1;

  // Lags beyond four follow the Yule-Walker extension of the four-sample
  // conditional model: rho_k = sum_i w_i rho_{k-i}.
  Eigen::Matrix4d toeplitz;
  Eigen::Vector4d c;
  std::array<double, 9> rho{1.0, b.cov_lags[0], b.cov_lags[1], b.cov_lags[2], b.cov_lags[3]};
  for (int i = 0; i < 4; ++i) {
    c(i) = rho[i + 1];
    for (int j = 0; j < 4; ++j) toeplitz(i, j) = rho[std::abs(i - j)];
  }
  const Eigen::Vector4d w = toeplitz.ldlt().solve(c);
  for (int k = 5; k <= 8; ++k) {
    rho[k] = 0.0;
    for (int i = 0; i < 4; ++i) rho[k] += w(i) * rho[k - 1 - i];
  }

  const double var = b.noise_variance();
  for (int lag = 1; lag <= 8; ++lag) {
    double acc = 0.0;
    for (int i = lag; i < n; ++i) acc += x[i] * x[i - lag];
    const double r = acc / (n - lag) / var;
    // Bartlett standard error is about sqrt(1.9 / n) for this process.
    CHECK(std::abs(r - rho[lag]) < 3 * std::sqrt(2.0 / n));
    if (lag > 4) CHECK(std::abs(r) < 0.05);
  }
}

TEST_CASE("scheme A noiseless means and white noise variance") {
  SchemeConfig a = SchemeConfig::defaults(Scheme::A);
  const int n = 100000;
  RngStream rng(6, 0);
  const Trajectory t = generate_trajectory(a, TransientLibrary(), ErrorState(0), n, 0, rng);
  double sum = 0.0, sq = 0.0;
  for (const auto& s : t.steps) {
    CHECK(s.mean1 == 1.0);
    CHECK(s.mean2 == 1.0);
    CHECK(s.true_state == 0);
    sum += s.i1;
    sq += (s.i1 - 1.0) * (s.i1 - 1.0);
  }
  const double var = a.noise_variance();
  CHECK(std::abs(sum / n - 1.0) < 3 * std::sqrt(var / n));
  CHECK(std::abs(sq / n - var) < 3 * std::sqrt(2.0 / n) * var);
}

TEST_CASE("regeneration is byte identical") {
  SchemeConfig c = SchemeConfig::defaults(Scheme::C);
  c.gamma = 0.5e6;
  const auto states = all_basis_states();
  const Dataset d1 = generate_dataset(c, states, 16, 300, 77, 1);
  const Dataset d2 = generate_dataset(c, states, 16, 300, 77, 3);
  REQUIRE(d1.trajectories.size() == d2.trajectories.size());
  for (std::size_t k = 0; k < d1.trajectories.size(); ++k) {
    const auto& a = d1.trajectories[k].steps;
    const auto& b = d2.trajectories[k].steps;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].i1 == b[i].i1);
      CHECK(a[i].i2 == b[i].i2);
      CHECK(a[i].true_state == b[i].true_state);
    }
    CHECK(d1.trajectories[k].initial_state() == states[k % 8]);
  }
}

TEST_CASE("drift shifts means only") {
  SchemeConfig d = SchemeConfig::defaults(Scheme::D);
  d.n_sequences = 4;
  SchemeConfig c = d;
  c.scheme = Scheme::C;
  const TransientLibrary lib = TransientLibrary::from_config(d);
  RngStream r1(8, 1), r2(8, 1);
  const Trajectory td = generate_trajectory(d, lib, ErrorState(0), 500, 2, r1);
  const Trajectory tc = generate_trajectory(c, lib, ErrorState(0), 500, 2, r2);
  for (int i = 0; i < 500; ++i) {
    CHECK(td.steps[i].mean1 == doctest::Approx(tc.steps[i].mean1 + d.drift(2)));
    CHECK(td.steps[i].i1 - td.steps[i].mean1 == doctest::Approx(tc.steps[i].i1 - tc.steps[i].mean1));
  }
}

TEST_CASE("injected datasets") {
  SchemeConfig c = SchemeConfig::defaults(Scheme::C);
  c.gamma = 1e6;  // ignored: injected datasets carry no random errors
  const Dataset none = generate_injected_dataset(c, ErrorState(0), std::nullopt, 5, 200, 3);
  for (const auto& t : none.trajectories) {
    for (const auto& s : t.steps) CHECK(s.true_state == 0);
  }
  const int k = 50;
  const Dataset one = generate_injected_dataset(c, ErrorState(0), InjectedFlip{2, k}, 5, 200, 3);
  const TransientLibrary lib = TransientLibrary::from_config(c);
  const TransientTemplate& tpl = lib.get(ErrorState(0), ErrorState(2));
  for (const auto& t : one.trajectories) {
    int changes = 0;
    for (std::size_t i = 1; i < t.steps.size(); ++i) changes += t.steps[i].true_state != t.steps[i - 1].true_state;
    CHECK(changes == 1);
    CHECK(t.steps[k - 1].true_state == 0);
    CHECK(t.steps[k].true_state == 2);
    for (int j = 0; j < kTransientSteps && k + j < 200; ++j) {
      CHECK(t.steps[k + j].mean1 == doctest::Approx(tpl.means[j][0]));
      CHECK(t.steps[k + j].mean2 == doctest::Approx(tpl.means[j][1]));
    }
  }
}

TEST_CASE("averaged injected signals recover the template") {
  SchemeConfig c = SchemeConfig::defaults(Scheme::C);
  const int n = 5000, k = 20, steps = 20 + kTransientSteps;
  const Dataset ds = generate_injected_dataset(c, ErrorState(0), InjectedFlip{2, k}, n, steps, 4);
  const TransientLibrary lib = TransientLibrary::from_config(c);
  const TransientTemplate& tpl = lib.get(ErrorState(0), ErrorState(2));
  const double se = std::sqrt(c.noise_variance() / n);
  int outside = 0;
  for (int j = 0; j < kTransientSteps; ++j) {
    double avg = 0.0;
    for (const auto& t : ds.trajectories) avg += t.steps[k + j].i2;
    avg /= n;
    outside += std::abs(avg - tpl.means[j][1]) > 4 * se;
  }
  CHECK(outside == 0);
}

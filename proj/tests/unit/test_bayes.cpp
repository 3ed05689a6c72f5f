// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "cqec/bayes.hpp"
#include "cqec/threshold.hpp"
#include "doctest.h"

using namespace cqec;

namespace {

Posterior random_posterior(RngStream& rng) {
  Posterior p;
  for (int i = 0; i < 8; ++i) p.p[i] = rng.uniform() + 1e-3;
  p.p /= p.p.sum();
  return p;
}

ChannelHistory history_of(std::initializer_list<double> xs) {
  ChannelHistory h;
  for (double x : xs) h.push(x);
  return h;
}

}  // namespace

TEST_CASE("predict") {
  const TransitionMatrix id;
  RngStream rng(1, 0);
  const Posterior p = random_posterior(rng);
  CHECK((predict(p, id).p - p.p).cwiseAbs().maxCoeff() < 1e-15);

  const TransitionMatrix j = transition_matrix(rate_matrix(ErrorKind::BitFlip, 0.04e6), 3.2e-8);
  const Posterior d = predict(Posterior::delta(ErrorState(0)), j);
  CHECK(d.p[1] == doctest::Approx(j.entries(0, 1)));
  CHECK(d.p[2] == doctest::Approx(d.p[1]));
  CHECK(d.p[4] == doctest::Approx(d.p[1]));

  const Posterior u = predict(Posterior{}, j);
  for (int i = 0; i < 8; ++i) CHECK(u.p[i] == doctest::Approx(0.125));
}

TEST_CASE("one-step predict approaches the generator row action") {
  const RateMatrix q = rate_matrix(ErrorKind::BitFlip, 0.3e6);
  RngStream rng(2, 0);
  const Posterior p = random_posterior(rng);
  double prev = 0.0;
  for (double dt : {1e-7, 5e-8}) {
    const RowVector8 euler = p.p + p.p * q.entries * dt;
    const double err = (predict(p, transition_matrix(q, dt)).p - euler).cwiseAbs().maxCoeff();
    CHECK(err < 1.0 * std::pow(q.gamma * dt, 2) * 10);
    if (prev > 0) CHECK(err / prev == doctest::Approx(0.25).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("likelihood") {
  const ConditionalGaussian white(5.94, {0, 0, 0, 0});
  ChannelHistory empty;
  const double x = 0.37;
  const double expected = std::exp(-(x - 1) * (x - 1) / (2 * 5.94)) / std::sqrt(2 * M_PI * 5.94);
  CHECK(likelihood(x, ErrorState(0), 1, empty, white) == doctest::Approx(expected));
  // Hypothesis 4 has S1 = -1.
  const double neg = std::exp(-(x + 1) * (x + 1) / (2 * 5.94)) / std::sqrt(2 * M_PI * 5.94);
  CHECK(likelihood(x, ErrorState(4), 1, empty, white) == doctest::Approx(neg));

  // Lag-1: mu = S + rho (m - S).
  const double rho = 0.61;
  const ConditionalGaussian lag1(5.94, {rho, 0, 0, 0}, 1);
  const ChannelHistory h = history_of({-0.8});
  CHECK(conditional_mean(1.0, h, lag1) == doctest::Approx(1 + rho * (-0.8 - 1)));
  CHECK(conditional_mean(-1.0, h, lag1) == doctest::Approx(-1 + rho * (-0.8 + 1)));

  // Likelihood ratio equals the closed-form Bayes factor.
  const double ratio = log_likelihood(x, ErrorState(0), 1, h, lag1) -
                       log_likelihood(x, ErrorState(4), 1, h, lag1);
  CHECK(ratio == doctest::Approx(log_bayes_factor(x, -0.8, rho, 5.94)).epsilon(1e-12));
}

TEST_CASE("log bayes factor") {
  CHECK(log_bayes_factor(0.9, 0.4, 0.0, 5.94) == doctest::Approx(2 * 0.9 / 5.94));
  CHECK(expected_log_bayes_factor(0.3, 5.94) == doctest::Approx(2 * 0.7 / (5.94 * 1.3)));
  CHECK_THROWS(log_bayes_factor(0.1, 0.1, -1.0, 5.94));

  // Sampling oracle at rho = 0.5.
  const double rho = 0.5, tau = 5.94;
  RngStream rng(3, 0);
  const int n = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e0 = std::sqrt(tau) * rng.normal();
    const double e1 = rho * e0 + std::sqrt(tau * (1 - rho * rho)) * rng.normal();
    const double v = log_bayes_factor(1 + e1, 1 + e0, rho, tau);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - expected_log_bayes_factor(rho, tau)) < 3 * se);
}

TEST_CASE("update") {
  const ConditionalGaussian white(5.94, {0, 0, 0, 0});
  ChannelHistory h1, h2;
  RngStream rng(4, 0);
  const Posterior prior = random_posterior(rng);

  // Flat likelihoods: a huge variance makes the densities equal.
  const ConditionalGaussian flat(1e30, {0, 0, 0, 0});
  CHECK((update(prior, 0.5, -0.5, h1, h2, flat).p - prior.p).cwiseAbs().maxCoeff() < 1e-12);

  const Posterior sharp = update(Posterior{}, -40.0, 40.0, h1, h2, white);
  CHECK(syndromes_of(decide(sharp)) == Syndromes{-1, 1});
  CHECK(std::abs(sharp.sum() - 1.0) < 1e-10);

  // Extreme inputs stay normalized (log domain).
  const Posterior extreme = update(prior, 1e6, -1e6, h1, h2, white);
  CHECK(std::abs(extreme.sum() - 1.0) < 1e-10);
  for (int i = 0; i < 8; ++i) CHECK(std::isfinite(extreme.p[i]));
}

TEST_CASE("posterior converges on scheme A samples") {
  SchemeConfig a = SchemeConfig::defaults(Scheme::A);
  a.gamma = 0.04e6;
  BayesDecoder d(BayesConfig::matching(a));
  d.reset(ErrorState(0), DecoderMode::Tracking);
  a.gamma = 0.0;
  RngStream rng(5, 0);
  const Trajectory t = generate_trajectory(a, TransientLibrary(), ErrorState(4), 400, 0, rng);
  for (const auto& s : t.steps) d.step(s.i1, s.i2);
  const Posterior& p = d.posterior();
  double mass = 0.0;
  for (int i = 0; i < 8; ++i) {
    if (syndromes_of(ErrorState(i)) == Syndromes{-1, 1}) mass += p.p[i];
  }
  CHECK(mass > 0.99);
}

TEST_CASE("permutation on correction") {
  Posterior p;
  for (int i = 0; i < 8; ++i) p.p[i] = i + 1;
  p.p /= p.p.sum();
  const Posterior q = permute_on_correction(p, 2);
  for (auto [a, b] : {std::pair{0, 2}, {1, 3}, {4, 6}, {5, 7}}) {
    CHECK(q.p[a] == p.p[b]);
    CHECK(q.p[b] == p.p[a]);
  }
  CHECK(permute_on_correction(q, 2).p == p.p);
  const Posterior u = permute_on_correction(Posterior{}, 3);
  CHECK(u.p == Posterior{}.p);
  CHECK(permute_by_mask(p, flip_mask(2) | flip_mask(3)).p == permute_on_correction(permute_on_correction(p, 2), 3).p);
}

TEST_CASE("permutation equivariance of the update") {
  // Updating then permuting by X_q equals permuting first and feeding signals
  // whose syndromes were flipped by the same correction.
  const ConditionalGaussian noise(5.94, kReferenceCorrelations);
  RngStream rng(6, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Posterior prior = random_posterior(rng);
    const int q = 1 + trial % 3;
    const int s1 = (q == 1 || q == 2) ? -1 : 1;
    const int s2 = (q == 2 || q == 3) ? -1 : 1;
    ChannelHistory h1, h2, g1, g2;
    for (int k = 0; k < 4; ++k) {
      const double a = 3 * rng.normal(), b = 3 * rng.normal();
      h1.push(a);
      h2.push(b);
      g1.push(s1 * a);
      g2.push(s2 * b);
    }
    const double i1 = 3 * rng.normal(), i2 = 3 * rng.normal();
    const Posterior lhs = permute_on_correction(update(prior, i1, i2, h1, h2, noise), q);
    const Posterior rhs = update(permute_on_correction(prior, q), s1 * i1, s2 * i2, g1, g2, noise);
    CHECK((lhs.p - rhs.p).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("decide") {
  CHECK(decide(Posterior::delta(ErrorState(0))) == ErrorState(0));
  CHECK(decide(Posterior::delta(ErrorState(5))) == ErrorState(5));
  Posterior tie;
  tie.p.setZero();
  tie.p[0] = 0.5;
  tie.p[4] = 0.5;
  CHECK(decide(tie) == ErrorState(0));
}

TEST_CASE("normalization over a long closed-loop run") {
  SchemeConfig b = SchemeConfig::defaults(Scheme::B);
  b.gamma = 0.5e6;
  BayesConfig cfg = BayesConfig::matching(b);
  BayesDecoder d(cfg);
  d.reset(ErrorState(0), DecoderMode::Active);
  RngStream rng(7, 0);
  SignalSource src(b, nullptr, 0, ErrorState(0));
  ErrorState truth(0);
  double worst = 0.0;
  for (int k = 0; k < 5000; ++k) {
    truth = sample_step_errors(truth, b.gamma, b.dt, rng);
    const Measurement m = src.measure(truth, rng);
    const StepResult r = d.step(m.i1, m.i2);
    truth = apply_mask(truth, r.correction);
    worst = std::max(worst, std::abs(d.posterior().sum() - 1.0));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("bayes matches or beats the double threshold per step") {
  SchemeConfig a = SchemeConfig::defaults(Scheme::A);
  a.gamma = 0.04e6;
  const Dataset ds = generate_dataset(a, all_basis_states(), 200, 625, 31);
  BayesDecoder b(BayesConfig::matching(a));
  ThresholdConfig tc;
  tc.tau = 0.3e-6;
  tc.theta1 = -0.8;
  tc.theta2 = 0.8;
  ThresholdDecoder t(tc);
  double acc[2] = {0, 0};
  std::size_t n = 0;
  for (const auto& traj : ds.trajectories) {
    b.reset(traj.initial_state(), DecoderMode::Tracking);
    t.reset(traj.initial_state(), DecoderMode::Tracking);
    for (const auto& s : traj.steps) {
      acc[0] += b.step(s.i1, s.i2).estimate.index() == s.true_state;
      acc[1] += t.step(s.i1, s.i2).estimate.index() == s.true_state;
      ++n;
    }
  }
  CHECK(acc[0] / n > acc[1] / n);
}

TEST_CASE("config matching") {
  const BayesConfig a = BayesConfig::matching(SchemeConfig::defaults(Scheme::A));
  const BayesConfig b = BayesConfig::matching(SchemeConfig::defaults(Scheme::B));
  CHECK(b.history_depth == 4);
  CHECK(b.cov_lags[0] == doctest::Approx(0.61));
  CHECK(a.cov_lags[0] == 0.0);
  BayesConfig bad = a;
  bad.cov_lags = {0.99, 0.0, 0.99, 0.0};
  bad.history_depth = 4;
  CHECK_THROWS(BayesDecoder{bad});
}

// SPDX-License-Identifier: Apache-2.0

#include "cqec/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cqec {

Posterior Posterior::delta(ErrorState s) {
  Posterior p;
  p.p.setZero();
  p.p(s.index()) = 1.0;
  return p;
}

BayesConfig BayesConfig::matching(const SchemeConfig& scheme) {
  BayesConfig c;
  c.gamma_assumed = scheme.gamma;
  c.tau_m = scheme.tau_m;
  c.dt = scheme.dt;
  c.cov_lags = scheme.cov_lags;
  c.kind = scheme.error_kind;
  c.history_depth = has_correlations(scheme.scheme) ? 4 : 0;
  if (has_transients(scheme.scheme)) {
    c.tau_ignore = kTransientSteps;
    c.tau_streak = 3;
  }
  return c;
}

void BayesConfig::validate() const {
  if (!(gamma_assumed >= 0.0)) throw std::invalid_argument("gamma_assumed must be >= 0");
  if (!(tau_m > 0.0) || !(dt > 0.0)) throw std::invalid_argument("tau_m and dt must be positive");
  if (history_depth < 0 || history_depth > 4) {
    throw std::invalid_argument("history_depth must be in [0,4]");
  }
  if (tau_ignore < 0 || tau_streak < 1) throw std::invalid_argument("invalid tau_ignore/tau_streak");
}

Posterior predict(const Posterior& post, const TransitionMatrix& j) {
  Posterior out;
  out.p = post.p * j.entries;
  out.p /= out.p.sum();
  return out;
}

void ChannelHistory::push(double x) {
  values.push(x);
  for (int i = 3; i > 0; --i) frame[i] = frame[i - 1];
  frame[0] = 1.0;
}

void ChannelHistory::flip_frame() {
  for (double& f : frame) f = -f;
}

namespace {

// Mean of the next sample is a*S + b for syndrome S.
struct AffineMean {
  double a = 1.0;
  double b = 0.0;
};

AffineMean affine_mean(const ChannelHistory& h, const ConditionalGaussian& noise, int& depth) {
  depth = std::min(h.values.size(), noise.max_depth());
  const std::span<const double> w = noise.weights(depth);
  AffineMean m;
  for (int i = 0; i < depth; ++i) {
    m.a -= w[i] * h.frame[i];
    m.b += w[i] * h.values[i];
  }
  return m;
}

double log_gauss(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

}  // namespace

double conditional_mean(double s, const ChannelHistory& history, const ConditionalGaussian& noise) {
  int depth = 0;
  const AffineMean m = affine_mean(history, noise, depth);
  return m.a * s + m.b;
}

double log_likelihood(double x, ErrorState state, int channel, const ChannelHistory& history,
                      const ConditionalGaussian& noise) {
  if (channel != 1 && channel != 2) throw std::invalid_argument("channel must be 1 or 2");
  const Syndromes s = syndromes_of(state);
  int depth = 0;
  const AffineMean m = affine_mean(history, noise, depth);
  const double var = noise.conditional_variance(depth);
  if (!(var > 0.0)) throw std::domain_error("non-positive conditional variance");
  return log_gauss(x, m.a * (channel == 1 ? s.s1 : s.s2) + m.b, var);
}

Posterior update(const Posterior& prior, double i1, double i2, const ChannelHistory& h1,
                 const ChannelHistory& h2, const ConditionalGaussian& noise) {
  int d1 = 0, d2 = 0;
  const AffineMean m1 = affine_mean(h1, noise, d1);
  const AffineMean m2 = affine_mean(h2, noise, d2);
  const double v1 = noise.conditional_variance(d1);
  const double v2 = noise.conditional_variance(d2);
  // Index 0 is S = +1, index 1 is S = -1.
  const std::array<double, 2> l1{log_gauss(i1, m1.a + m1.b, v1), log_gauss(i1, -m1.a + m1.b, v1)};
  const std::array<double, 2> l2{log_gauss(i2, m2.a + m2.b, v2), log_gauss(i2, -m2.a + m2.b, v2)};

  std::array<double, 8> lp;
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 8; ++i) {
    const Syndromes s = syndromes_of(ErrorState(i));
    lp[i] = std::log(prior.p(i)) + l1[s.s1 < 0] + l2[s.s2 < 0];
    top = std::max(top, lp[i]);
  }
  if (!std::isfinite(top)) throw std::domain_error("posterior update: prior has no support");
  Posterior out;
  for (int i = 0; i < 8; ++i) out.p(i) = std::exp(lp[i] - top);
  out.p /= out.p.sum();
  return out;
}

Posterior permute_by_mask(const Posterior& post, int mask) {
  Posterior out;
  for (int s = 0; s < 8; ++s) out.p(s) = post.p(s ^ (mask & 7));
  return out;
}

Posterior permute_on_correction(const Posterior& post, int qubit) {
  return permute_by_mask(post, flip_mask(qubit));
}

ErrorState decide(const Posterior& post) {
  int best = 0;
  for (int i = 1; i < 8; ++i) {
    if (post.p(i) > post.p(best)) best = i;
  }
  return ErrorState(best);
}

double log_bayes_factor(double i_t, double i_prev, double rho, double tau) {
  if (rho <= -1.0 || rho >= 1.0) throw std::invalid_argument("log_bayes_factor: |rho| must be < 1");
  return 2.0 * (i_t - rho * i_prev) / (tau * (1.0 + rho));
}

double expected_log_bayes_factor(double rho, double tau) {
  return 2.0 * (1.0 - rho) / (tau * (1.0 + rho));
}

// ---------------------------------------------------------------------------

BayesDecoder::BayesDecoder(BayesConfig cfg)
    : cfg_(cfg),
      j_(transition_matrix(rate_matrix(cfg.kind, cfg.gamma_assumed), cfg.dt)),
      noise_(cfg.noise_variance(), cfg.cov_lags, cfg.history_depth),
      gate_(cfg.tau_ignore, cfg.tau_streak) {
  cfg_.validate();
}

void BayesDecoder::reset(ErrorState initial, DecoderMode mode) {
  mode_ = mode;
  belief_ = initial;
  post_ = Posterior::delta(initial);
  gate_.reset();
  for (auto& h : history_) {
    h.clear();
    h.frame.fill(1.0);
  }
}

StepResult BayesDecoder::step(double i1, double i2) {
  if (gate_.consume_ignored()) {
    // Errors can still happen while the input is discarded.
    post_ = predict(post_, j_);
    for (auto& h : history_) h.clear();
    return {belief_, 0, true};
  }
  post_ = update(predict(post_, j_), i1, i2, history_[0], history_[1], noise_);
  history_[0].push(i1);
  history_[1].push(i2);

  const ErrorState proposal = decide(post_);
  if (!gate_.propose(proposal, belief_)) return {belief_, 0, false};
  if (mode_ == DecoderMode::Tracking) {
    belief_ = proposal;
    gate_.propose(belief_, belief_);
    return {belief_, 0, false};
  }
  const int mask = proposal.index() ^ belief_.index();
  post_ = permute_by_mask(post_, mask);
  const Syndromes flipped = syndromes_of(ErrorState(mask));
  if (flipped.s1 < 0) history_[0].flip_frame();
  if (flipped.s2 < 0) history_[1].flip_frame();
  gate_.accepted();
  return {belief_, mask, false};
}

std::unique_ptr<Decoder> BayesDecoder::clone() const { return std::make_unique<BayesDecoder>(cfg_); }

}  // namespace cqec

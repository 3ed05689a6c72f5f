// SPDX-License-Identifier: Apache-2.0
//
// Discrete Bayesian filter over the eight error states: Markov prediction
// with the transition matrix, then conditional-Gaussian likelihoods of the
// two syndrome signals given their recent history.

#pragma once

#include <array>
#include <cmath>
#include <span>

#include "cqec/decoder.hpp"
#include "cqec/signal.hpp"

namespace cqec {

struct Posterior {
  RowVector8 p = RowVector8::Constant(0.125);

  static Posterior delta(ErrorState s);
  double sum() const { return p.sum(); }
};

struct BayesConfig {
  double gamma_assumed = 0.04e6;  // 1/s
  double tau_m = 1.9e-7;          // s
  double dt = 3.2e-8;             // s
  std::array<double, 4> cov_lags{0.0, 0.0, 0.0, 0.0};
  ErrorKind kind = ErrorKind::BitFlip;
  int history_depth = 4;
  int tau_ignore = 0;
  int tau_streak = 1;

  /// Filter that knows the generating parameters of `scheme`.
  static BayesConfig matching(const SchemeConfig& scheme);
  double noise_variance() const { return tau_m / dt; }
  void validate() const;
};

/// p~(j) = sum_i p(i) J_ij, renormalized.
Posterior predict(const Posterior& post, const TransitionMatrix& j);

/// Past samples of one channel, most recent first, each tagged with the sign
/// that maps its mean into the current correction frame.
struct ChannelHistory {
  History values;
  std::array<double, 4> frame{1.0, 1.0, 1.0, 1.0};

  void push(double x);
  void clear() { values.clear(); }
  /// Negates the frame of every stored sample (a correction flipped this
  /// channel's syndrome).
  void flip_frame();
};

/// Conditional mean of the next sample of a channel whose current syndrome
/// is `s`, given the history.
double conditional_mean(double s, const ChannelHistory& history, const ConditionalGaussian& noise);

/// Log of the Gaussian likelihood density of sample `x` under the hypothesis
/// `state`, for channel 1 or 2.
double log_likelihood(double x, ErrorState state, int channel, const ChannelHistory& history,
                      const ConditionalGaussian& noise);

inline double likelihood(double x, ErrorState state, int channel, const ChannelHistory& history,
                         const ConditionalGaussian& noise) {
  return std::exp(log_likelihood(x, state, channel, history, noise));
}

/// Bayes update of a predicted prior with one measurement pair. Works in the
/// log domain and renormalizes.
Posterior update(const Posterior& prior, double i1, double i2, const ChannelHistory& h1,
                 const ChannelHistory& h2, const ConditionalGaussian& noise);

/// p'(s) = p(s XOR mask).
Posterior permute_on_correction(const Posterior& post, int qubit);
Posterior permute_by_mask(const Posterior& post, int mask);

/// Argmax; ties go to the lower index.
ErrorState decide(const Posterior& post);

/// Log Bayes factor of S = +1 over S = -1 for one sample given the previous
/// one under lag-1 correlation rho; `tau` is the per-sample variance.
double log_bayes_factor(double i_t, double i_prev, double rho, double tau);

/// Expected log Bayes factor when the true syndrome is +1.
double expected_log_bayes_factor(double rho, double tau);

class BayesDecoder final : public Decoder {
 public:
  explicit BayesDecoder(BayesConfig cfg);

  void reset(ErrorState initial, DecoderMode mode) override;
  StepResult step(double i1, double i2) override;
  ErrorState estimate() const override { return belief_; }
  std::string name() const override { return "bayes"; }
  std::unique_ptr<Decoder> clone() const override;

  const Posterior& posterior() const { return post_; }
  const BayesConfig& config() const { return cfg_; }

 private:
  BayesConfig cfg_;
  TransitionMatrix j_;
  ConditionalGaussian noise_;
  CorrectionGate gate_;
  DecoderMode mode_ = DecoderMode::Tracking;
  Posterior post_;
  ErrorState belief_;
  std::array<ChannelHistory, 2> history_;
};

}  // namespace cqec

// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>

#include "cqec/rnn.hpp"

namespace cqec {

std::array<double, 2> recalibrate(double i1, double i2, const std::array<int, 3>& counts) {
  const bool flip1 = ((counts[0] + counts[1]) & 1) != 0;
  const bool flip2 = ((counts[1] + counts[2]) & 1) != 0;
  return {flip1 ? -i1 : i1, flip2 ? -i2 : i2};
}

ActiveWrapperState::ActiveWrapperState(ErrorState initial_state, int tau_ignore, int tau_streak)
    : initial(initial_state), last_prediction(initial_state), gate(tau_ignore, tau_streak) {}

ActiveStepResult active_step(ActiveWrapperState& w, const NetworkParams& params,
                             HiddenState& hidden, double i1, double i2) {
  if (w.gate.consume_ignored()) return {w.last_prediction, 0, true};
  const auto [r1, r2] = recalibrate(i1, i2, w.counts);
  const Eigen::VectorXd x = encode_input(r1, r2, w.initial, params);
  const Vector8 p = forward_step(params, x, hidden);
  Eigen::Index arg = 0;
  p.maxCoeff(&arg);
  const ErrorState prediction(static_cast<int>(arg));
  if (!w.gate.propose(prediction, w.last_prediction)) return {prediction, 0, false};

  const int mask = prediction.index() ^ w.last_prediction.index();
  for (int q = 1; q <= 3; ++q) {
    if (mask & flip_mask(q)) ++w.counts[q - 1];
  }
  w.last_prediction = prediction;
  w.gate.accepted();
  return {prediction, mask, false};
}

RnnDecoder::RnnDecoder(std::shared_ptr<const NetworkParams> params, int tau_ignore, int tau_streak)
    : params_(std::move(params)), tau_ignore_(tau_ignore), tau_streak_(tau_streak) {
  if (!params_) throw std::invalid_argument("RnnDecoder: no network");
  params_->validate();
  (void)CorrectionGate{tau_ignore, tau_streak};  // validates the gate settings
}

void RnnDecoder::reset(ErrorState initial, DecoderMode mode) {
  mode_ = mode;
  // Tracking never issues corrections, so only the streak rule applies.
  wrapper_ = ActiveWrapperState(initial, mode == DecoderMode::Active ? tau_ignore_ : 0, tau_streak_);
  hidden_ = HiddenState::zeros(*params_);
}

StepResult RnnDecoder::step(double i1, double i2) {
  if (mode_ == DecoderMode::Active) {
    const ActiveStepResult r = active_step(wrapper_, *params_, hidden_, i1, i2);
    return {wrapper_.initial, r.correction, r.ignored};
  }
  x_.resize(params_->input_size());
  encode_input(i1, i2, wrapper_.initial, *params_, x_.data());
  const Vector8 p = forward_step(*params_, x_, hidden_);
  Eigen::Index arg = 0;
  p.maxCoeff(&arg);
  const ErrorState prediction(static_cast<int>(arg));
  if (wrapper_.gate.propose(prediction, wrapper_.last_prediction)) {
    wrapper_.last_prediction = prediction;
    wrapper_.gate.propose(prediction, prediction);
  }
  return {wrapper_.last_prediction, 0, false};
}

ErrorState RnnDecoder::estimate() const {
  return mode_ == DecoderMode::Tracking ? wrapper_.last_prediction : wrapper_.initial;
}

std::unique_ptr<Decoder> RnnDecoder::clone() const {
  return std::make_unique<RnnDecoder>(params_, tau_ignore_, tau_streak_);
}

}  // namespace cqec

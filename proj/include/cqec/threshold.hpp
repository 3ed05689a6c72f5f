// SPDX-License-Identifier: Apache-2.0
//
// Double-threshold decoder: first-order low-pass filtering of both syndrome
// signals followed by a two-threshold quadrant rule.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cqec/decoder.hpp"
#include "cqec/signal.hpp"

namespace cqec {

struct ThresholdConfig {
  double tau = 0.5e-6;  // s
  double theta1 = -0.5;
  double theta2 = 0.5;
  double dt = 3.2e-8;  // s
  int tau_ignore = 0;
  int tau_streak = 1;

  void validate() const;
};

struct FilterState {
  double filt1 = 1.0;
  double filt2 = 1.0;
};

/// Exact one-step solution of tau * dI/dt = I_raw - I for piecewise-constant
/// input.
FilterState filter_step(FilterState state, double i1, double i2, double tau, double dt);

/// Syndromes diagnosed from filtered signals, or nullopt when either value
/// sits inside (theta1, theta2).
std::optional<Syndromes> classify(FilterState filtered, const ThresholdConfig& cfg);

/// Filter values after a correction: the syndromes of the reference state.
FilterState correct_and_reset(Syndromes reference);

class ThresholdDecoder final : public Decoder {
 public:
  explicit ThresholdDecoder(ThresholdConfig cfg);

  void reset(ErrorState initial, DecoderMode mode) override;
  StepResult step(double i1, double i2) override;
  ErrorState estimate() const override { return belief_; }
  std::string name() const override { return "dt"; }
  std::unique_ptr<Decoder> clone() const override;

  const FilterState& filter() const { return filter_; }
  const ThresholdConfig& config() const { return cfg_; }

 private:
  ThresholdConfig cfg_;
  CorrectionGate gate_;
  DecoderMode mode_ = DecoderMode::Tracking;
  ErrorState belief_;
  FilterState filter_;
};

// ---------------------------------------------------------------------------
// Parameter search

struct ThresholdGrid {
  std::vector<double> taus;    // s
  std::vector<double> theta2;  // theta1 = -theta2 unless asymmetric
  bool asymmetric = false;
  std::vector<double> theta1;  // used when asymmetric

  /// 20 averaging times in [0.1, 2] us and 9 thresholds in [0.1, 0.9].
  static ThresholdGrid defaults();
};

/// Objective to maximize for one candidate configuration.
using ThresholdObjective = std::function<double(const ThresholdConfig&)>;

struct ThresholdSearchResult {
  ThresholdConfig best;
  double best_score = 0.0;
  std::size_t evaluated = 0;
};

/// Exhaustive search. Ties go to the larger tau, then to the more symmetric
/// threshold pair. `base` supplies dt and the gate settings.
ThresholdSearchResult optimize_params(const ThresholdGrid& grid, const ThresholdConfig& base,
                                      const ThresholdObjective& objective);

/// Mean final tracking fidelity of a configuration on recorded trajectories.
double tracking_fidelity(const ThresholdConfig& cfg, std::span<const Trajectory> data);

}  // namespace cqec

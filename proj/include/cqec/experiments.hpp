// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: tracking, active protection against damping or
// bit-flips, detection statistics and annealing. Every run is a pure function
// of (spec, seed); trajectory k of sweep point g draws from its own stream, so
// the worker count never changes results.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cqec/anneal.hpp"
#include "cqec/bayes.hpp"
#include "cqec/rnn.hpp"
#include "cqec/signal.hpp"
#include "cqec/threshold.hpp"

namespace cqec {

enum class Task { Tracking, T1Extension, BitFlipProtection, Annealing, DetectionStats };

const char* to_string(Task task);
Task task_from_string(const std::string& name);
bool is_active(Task task);

struct DecoderSetup {
  /// dt | bayes | rnn | none
  std::string kind = "bayes";
  /// Column label; defaults to kind.
  std::string label;
  /// Fixed double-threshold parameters; optimized per sweep point if unset.
  std::optional<ThresholdConfig> threshold;
  std::shared_ptr<const NetworkParams> network;

  std::string name() const { return label.empty() ? kind : label; }
};

struct ExperimentSpec {
  Task task = Task::Tracking;
  SchemeConfig scheme = SchemeConfig::defaults(Scheme::A);
  std::vector<DecoderSetup> decoders;
  std::vector<double> gammas;  // 1/s
  double t_total = 20e-6;      // s
  std::size_t n_traj = 3000;
  std::uint64_t seed = 1;
  int workers = 1;

  /// Gate overrides; negative selects the default (94/3 for Schemes C and D
  /// in active tasks, 0/1 otherwise).
  int tau_ignore = -1;
  int tau_streak = -1;

  /// Double-threshold optimization on independent trajectories.
  ThresholdGrid grid = ThresholdGrid::defaults();
  std::size_t dt_train_traj = 1000;
  double dt_train_t_total = 20e-6;

  /// Logical-rate extraction: linear fit of P_exc over rate_time +- rate_window.
  double rate_time = 3e-6;
  double rate_window = 1e-6;

  /// Detection statistics: one flip of qubit (k mod 3) + 1 at inject_time and
  /// no background errors; otherwise random flips at the swept rate.
  bool inject = true;
  double inject_time = 3e-6;

  double omega0 = 0.04 * 4.7e6;  // annealing, rad/s

  /// Keep every n-th point of emitted time series.
  int series_stride = 1;

  ErrorKind error_kind() const;
  int steps() const;
  void validate() const;
};

struct ScalarMetric {
  std::string decoder;
  double gamma = 0.0;  // 1/s
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

struct TimeSeries {
  std::string decoder;
  double gamma = 0.0;
  std::string metric;
  std::vector<double> t_us;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct Histogram {
  std::string decoder;
  double gamma = 0.0;
  std::string metric;
  double bin_width_us = 0.0;
  std::vector<std::size_t> counts;  // bin i covers [i, i+1) * width
};

struct FitDiagnostic {
  std::string decoder;
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t points = 0;
  bool ok = false;
};

/// Per-trajectory values behind a scalar metric, in trajectory order. Kept in
/// memory only so callers can form paired comparisons between decoders.
struct Outcomes {
  std::string decoder;
  double gamma = 0.0;
  std::string metric;
  std::vector<double> values;
};

struct MetricsReport {
  Task task = Task::Tracking;
  Scheme scheme = Scheme::A;
  std::vector<ScalarMetric> scalars;
  std::vector<TimeSeries> series;
  std::vector<Histogram> histograms;
  std::vector<FitDiagnostic> fits;
  /// Double-threshold parameters used at each sweep point.
  std::vector<std::pair<double, ThresholdConfig>> threshold_params;
  std::vector<Outcomes> outcomes;

  const ScalarMetric* find(const std::string& decoder, double gamma,
                           const std::string& metric) const;
  const TimeSeries* find_series(const std::string& decoder, double gamma,
                                const std::string& metric) const;
  const Outcomes* find_outcomes(const std::string& decoder, double gamma,
                                const std::string& metric) const;
  const FitDiagnostic* find_fit(const std::string& decoder, const std::string& name) const;
};

/// Mean and sample-std / sqrt(n).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};
MeanStderr mean_stderr(const std::vector<double>& samples);

/// Stream id of trajectory k, channel c at sweep point g.
std::uint64_t trajectory_stream(std::size_t g, std::size_t k, int channel);

/// Gate settings for a scheme and task after applying the spec overrides.
std::pair<int, int> gate_settings(const ExperimentSpec& spec);

/// Decoder for one sweep point; `dt` must be set for kind "dt". Returns null
/// for kind "none".
std::unique_ptr<Decoder> make_decoder(const DecoderSetup& setup, const ExperimentSpec& spec,
                                      double gamma, const ThresholdConfig* dt);

/// Double-threshold parameters for sweep point g: the fixed ones if given,
/// else the grid optimum of the task objective on dt_train_traj fresh
/// trajectories.
ThresholdConfig threshold_for(const ExperimentSpec& spec, const DecoderSetup& setup,
                              std::size_t g);

/// Closed-loop runs from |111>; `setup == nullptr` leaves errors
/// uncorrected. Returns the per-trajectory excited indicator at steps
/// 0..n (row-major, n_traj x (n + 1)).
std::vector<std::uint8_t> active_indicators(const ExperimentSpec& spec, std::size_t g,
                                            const Decoder* prototype, std::size_t n_traj,
                                            int n_steps, std::uint64_t seed);

/// Least-squares weights w_j with slope = sum_j w_j y(t_j) over the points
/// t_j = j dt inside [center - half, center + half]; returns (first step, w).
std::pair<int, std::vector<double>> slope_weights(double center, double half, double dt,
                                                  int n_steps);

/// Weighted least-squares slope of log y vs log x with stderr; points with
/// non-positive y are dropped.
FitDiagnostic loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& y_stderr);

MetricsReport run_tracking(const ExperimentSpec& spec);
MetricsReport run_t1(const ExperimentSpec& spec);
MetricsReport run_bitflip(const ExperimentSpec& spec);
MetricsReport run_detection_stats(const ExperimentSpec& spec);
MetricsReport run_annealing(const ExperimentSpec& spec);

/// Dispatches on spec.task.
MetricsReport run_experiment(const ExperimentSpec& spec);

}  // namespace cqec

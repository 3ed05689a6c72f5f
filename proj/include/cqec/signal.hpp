// SPDX-License-Identifier: Apache-2.0
//
// Synthetic syndrome measurement records. Signals are in normalized units: a
// steady-state mean equals the syndrome eigenvalue and the per-sample noise
// variance is tau_m / dt.

#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cqec/core.hpp"

namespace cqec {

enum class Scheme { A, B, C, D };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);
inline bool has_correlations(Scheme s) { return s != Scheme::A; }
inline bool has_transients(Scheme s) { return s == Scheme::C || s == Scheme::D; }
inline bool has_drift(Scheme s) { return s == Scheme::D; }

/// Dispersive readout resonator. Angular quantities in rad/s.
struct ResonatorParams {
  double epsilon = 1.0;
  double delta_r = 0.0;
  double chi = 3.14159265358979e6;
  double kappa = 3.0e6;
};

/// Number of measurements that follow a flip on its transient template.
inline constexpr int kTransientSteps = 94;

/// Reference noise correlations at lags 1..4, as fractions of the per-sample
/// variance.
inline constexpr std::array<double, 4> kReferenceCorrelations{0.61, 0.25, 0.1, 0.05};

struct SchemeConfig {
  Scheme scheme = Scheme::A;
  double tau_m = 1.9e-7;  // s
  double dt = 3.2e-8;     // s
  double gamma = 0.0;     // 1/s, per qubit
  ErrorKind error_kind = ErrorKind::BitFlip;
  /// Lag-1..4 noise covariances in units of the per-sample variance.
  std::array<double, 4> cov_lags{0.0, 0.0, 0.0, 0.0};
  ResonatorParams resonator;
  /// Optional CSV of transient means overriding the resonator synthesis.
  std::string transient_file;
  double drift_total = 0.4;
  std::size_t n_sequences = 1;

  /// Paper defaults for a scheme: correlations for B-D, transients for C-D.
  static SchemeConfig defaults(Scheme scheme);

  double noise_variance() const { return tau_m / dt; }
  /// Drift added to both channels of sequence i (Scheme D only).
  double drift(std::size_t sequence_index) const;
  /// Throws std::invalid_argument on inconsistent values.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Resonator transients

struct ResonatorResponse {
  std::complex<double> alpha_e;
  std::complex<double> alpha_g;
};

/// Closed-form field amplitudes after the drive is switched on at t = 0:
/// the solution of d(alpha)/dt = -i eps - i (delta_r +- chi) alpha - kappa alpha / 2
/// from alpha(0) = 0, with + for e and - for g.
ResonatorResponse resonator_response(double t, const ResonatorParams& params);

/// Long-time limit of resonator_response.
ResonatorResponse resonator_steady_state(const ResonatorParams& params);

struct TransientTemplate {
  ErrorState pre;
  ErrorState post;
  std::vector<std::array<double, 2>> means;  // kTransientSteps entries
};

using TransientKey = std::pair<int, int>;  // (pre index, post index)

/// Templates for the 24 single-flip transitions.
std::map<TransientKey, TransientTemplate> build_transient_templates(const ResonatorParams& params,
                                                                    double dt);

/// Template for an arbitrary transition, synthesized channel by channel.
TransientTemplate synthesize_template(ErrorState pre, ErrorState post,
                                      const ResonatorParams& params, double dt);

/// Every pre != post transition, with optional file overrides.
class TransientLibrary {
 public:
  TransientLibrary() = default;
  TransientLibrary(const ResonatorParams& params, double dt);

  static TransientLibrary from_config(const SchemeConfig& cfg);

  const TransientTemplate& get(ErrorState pre, ErrorState post) const;
  void set(const TransientTemplate& t);

  /// Rows `pre,post,step,mean1,mean2`.
  void load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

 private:
  std::vector<TransientTemplate> table_ = std::vector<TransientTemplate>(64);
};

// ---------------------------------------------------------------------------
// Correlated noise

/// Gaussian process conditioned on up to four past samples of a stationary
/// Toeplitz covariance with diagonal `variance`.
class ConditionalGaussian {
 public:
  ConditionalGaussian() : ConditionalGaussian(1.0, {0, 0, 0, 0}) {}
  ConditionalGaussian(double variance, const std::array<double, 4>& correlations,
                      int max_depth = 4);

  int max_depth() const { return max_depth_; }
  double variance() const { return variance_; }
  /// Regression weights on the most recent `depth` samples, most recent first.
  std::span<const double> weights(int depth) const;
  double conditional_variance(int depth) const { return cond_var_[depth]; }
  /// c^T Sigma^-1 h for a centered history (most recent first).
  double conditional_mean(std::span<const double> history) const;

 private:
  double variance_;
  int max_depth_;
  std::array<std::array<double, 4>, 5> weights_{};
  std::array<double, 5> cond_var_{};
};

/// One draw of centered noise given the last <= 4 centered samples, most
/// recent first.
double correlated_noise_step(std::span<const double> history, const SchemeConfig& cfg,
                             RngStream& rng);

/// Fixed-capacity history, most recent first.
class History {
 public:
  void push(double x) {
    for (int i = 3; i > 0; --i) values_[i] = values_[i - 1];
    values_[0] = x;
    if (size_ < 4) ++size_;
  }
  void clear() { size_ = 0; }
  int size() const { return size_; }
  std::span<const double> view(int depth) const {
    return {values_.data(), static_cast<std::size_t>(std::min(depth, size_))};
  }
  double operator[](int i) const { return values_[i]; }
  double& operator[](int i) { return values_[i]; }

 private:
  std::array<double, 4> values_{};
  int size_ = 0;
};

// ---------------------------------------------------------------------------
// Trajectories

struct Measurement {
  double mean1 = 1.0;
  double mean2 = 1.0;
  double i1 = 0.0;
  double i2 = 0.0;
};

/// Closed-loop measurement generator for one trajectory. The caller owns the
/// physical state; every call produces the measurement pair for the step the
/// state occupies, starting a transient whenever the state differs from the
/// previous call's.
class SignalSource {
 public:
  SignalSource(const SchemeConfig& cfg, const TransientLibrary* transients,
               std::size_t sequence_index, ErrorState initial);

  Measurement measure(ErrorState state, RngStream& rng);

  /// Means without noise for the current step (advances the transient).
  std::array<double, 2> next_means(ErrorState state);

 private:
  const TransientLibrary* transients_;
  ConditionalGaussian noise_;
  double drift_;
  ErrorState last_;
  const TransientTemplate* active_ = nullptr;
  int transient_step_ = 0;
  std::array<History, 2> history_;
};

struct StepRecord {
  std::uint8_t true_state = 0;
  double mean1 = 0.0;
  double mean2 = 0.0;
  double i1 = 0.0;
  double i2 = 0.0;
};

struct InjectedFlip {
  int qubit = 1;
  int step = 0;
};

struct TrajectoryMeta {
  Scheme scheme = Scheme::A;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::size_t sequence_index = 0;
  ErrorState initial;
  std::optional<InjectedFlip> injected;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  TrajectoryMeta meta;

  ErrorState initial_state() const { return meta.initial; }
};

Trajectory generate_trajectory(const SchemeConfig& cfg, const TransientLibrary& transients,
                               ErrorState initial, int n_steps, std::size_t sequence_index,
                               RngStream& rng, std::optional<InjectedFlip> injected = {});

struct Dataset {
  SchemeConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
};

/// Random-error trajectories; trajectory k starts in initial_states[k % size]
/// and draws from stream k of `seed`.
Dataset generate_dataset(const SchemeConfig& cfg, std::span<const ErrorState> initial_states,
                         std::size_t n_traj, int n_steps, std::uint64_t seed, int workers = 1);

/// Trajectories without random errors and exactly one deterministic flip
/// (or none).
Dataset generate_injected_dataset(SchemeConfig cfg, ErrorState initial,
                                  std::optional<InjectedFlip> flip, std::size_t n_traj,
                                  int n_steps, std::uint64_t seed, int workers = 1);

/// The eight basis states in index order.
std::array<ErrorState, 8> all_basis_states();

}  // namespace cqec

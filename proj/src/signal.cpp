// SPDX-License-Identifier: Apache-2.0

#include "cqec/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "cqec/parallel.hpp"

namespace cqec {

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::A: return "A";
    case Scheme::B: return "B";
    case Scheme::C: return "C";
    case Scheme::D: return "D";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "A" || name == "a") return Scheme::A;
  if (name == "B" || name == "b") return Scheme::B;
  if (name == "C" || name == "c") return Scheme::C;
  if (name == "D" || name == "d") return Scheme::D;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected A, B, C or D)");
}

SchemeConfig SchemeConfig::defaults(Scheme scheme) {
  SchemeConfig cfg;
  cfg.scheme = scheme;
  if (has_correlations(scheme)) cfg.cov_lags = kReferenceCorrelations;
  return cfg;
}

double SchemeConfig::drift(std::size_t sequence_index) const {
  if (!has_drift(scheme) || n_sequences == 0) return 0.0;
  return drift_total * static_cast<double>(sequence_index) / static_cast<double>(n_sequences);
}

void SchemeConfig::validate() const {
  if (!(tau_m > 0.0)) throw std::invalid_argument("tau_m must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
  if (gamma * dt >= 0.1) {
    std::cerr << "warning: gamma*dt = " << gamma * dt
              << " is outside the small-step regime (< 0.1)\n";
  }
  if (scheme == Scheme::A && std::any_of(cov_lags.begin(), cov_lags.end(),
                                         [](double c) { return c != 0.0; })) {
    throw std::invalid_argument("Scheme A has white noise; cov_lags must be zero");
  }
  // Throws if the Toeplitz embedding is not positive definite.
  ConditionalGaussian(noise_variance(), cov_lags);
}

// ---------------------------------------------------------------------------

namespace {

// Solution of d(alpha)/dt = -i eps - (i rate + kappa/2) alpha from alpha(0) = 0.
std::complex<double> field(double t, double epsilon, double rate, double kappa) {
  using namespace std::complex_literals;
  const std::complex<double> denom = 2.0 * rate - 1i * kappa;
  if (std::abs(denom) == 0.0) throw std::domain_error("resonator_response: zero denominator");
  return (2.0 * epsilon / denom) * (std::exp(-1i * rate * t) * std::exp(-kappa * t / 2.0) - 1.0);
}

std::complex<double> field_steady(double epsilon, double rate, double kappa) {
  using namespace std::complex_literals;
  const std::complex<double> denom = 2.0 * rate - 1i * kappa;
  if (std::abs(denom) == 0.0) throw std::domain_error("resonator_response: zero denominator");
  return -2.0 * epsilon / denom;
}

// Normalized ring-up of the field for `parity` (+1 -> ground, -1 -> excited)
// projected on the quadrature that separates the two steady states: 0 at
// t = 0, 1 in steady state.
double ring_up(double t, int parity, const ResonatorParams& p) {
  const ResonatorResponse ss = resonator_steady_state(p);
  const std::complex<double> axis = ss.alpha_e - ss.alpha_g;
  if (std::abs(axis) == 0.0) throw std::domain_error("resonator states are indistinguishable");
  const std::complex<double> u = std::conj(axis / std::abs(axis));
  const ResonatorResponse r = resonator_response(t, p);
  const std::complex<double> a = parity > 0 ? r.alpha_g : r.alpha_e;
  const std::complex<double> a_ss = parity > 0 ? ss.alpha_g : ss.alpha_e;
  const double norm = std::real(u * a_ss);
  if (norm == 0.0) throw std::domain_error("steady field has no component on the measured quadrature");
  return std::real(u * a) / norm;
}

}  // namespace

ResonatorResponse resonator_response(double t, const ResonatorParams& params) {
  if (!(params.kappa > 0.0)) throw std::invalid_argument("resonator kappa must be positive");
  return {field(t, params.epsilon, params.delta_r + params.chi, params.kappa),
          field(t, params.epsilon, params.delta_r - params.chi, params.kappa)};
}

ResonatorResponse resonator_steady_state(const ResonatorParams& params) {
  if (!(params.kappa > 0.0)) throw std::invalid_argument("resonator kappa must be positive");
  return {field_steady(params.epsilon, params.delta_r + params.chi, params.kappa),
          field_steady(params.epsilon, params.delta_r - params.chi, params.kappa)};
}

TransientTemplate synthesize_template(ErrorState pre, ErrorState post,
                                      const ResonatorParams& params, double dt) {
  const Syndromes a = syndromes_of(pre);
  const Syndromes b = syndromes_of(post);
  const std::array<int, 2> from{a.s1, a.s2};
  const std::array<int, 2> to{b.s1, b.s2};
  TransientTemplate t{pre, post, std::vector<std::array<double, 2>>(kTransientSteps)};
  for (int n = 0; n < kTransientSteps; ++n) {
    for (int k = 0; k < 2; ++k) {
      if (from[k] == to[k]) {
        t.means[n][k] = from[k];
      } else {
        const double f = ring_up(n * dt, to[k], params);
        t.means[n][k] = from[k] + (to[k] - from[k]) * f;
      }
    }
  }
  return t;
}

std::map<TransientKey, TransientTemplate> build_transient_templates(const ResonatorParams& params,
                                                                    double dt) {
  std::map<TransientKey, TransientTemplate> out;
  for (int pre = 0; pre < 8; ++pre) {
    for (int qubit = 1; qubit <= 3; ++qubit) {
      const ErrorState a(pre);
      const ErrorState b = apply_flip(a, qubit);
      out.emplace(TransientKey{pre, b.index()}, synthesize_template(a, b, params, dt));
    }
  }
  return out;
}

TransientLibrary::TransientLibrary(const ResonatorParams& params, double dt) {
  for (int pre = 0; pre < 8; ++pre) {
    for (int post = 0; post < 8; ++post) {
      if (pre == post) continue;
      table_[pre * 8 + post] = synthesize_template(ErrorState(pre), ErrorState(post), params, dt);
    }
  }
}

TransientLibrary TransientLibrary::from_config(const SchemeConfig& cfg) {
  if (!has_transients(cfg.scheme)) return {};
  TransientLibrary lib(cfg.resonator, cfg.dt);
  if (!cfg.transient_file.empty()) lib.load_csv(cfg.transient_file);
  return lib;
}

const TransientTemplate& TransientLibrary::get(ErrorState pre, ErrorState post) const {
  const TransientTemplate& t = table_[pre.index() * 8 + post.index()];
  if (t.means.empty()) throw std::logic_error("no transient template for this transition");
  return t;
}

void TransientLibrary::set(const TransientTemplate& t) {
  if (t.means.size() != static_cast<std::size_t>(kTransientSteps)) {
    throw std::invalid_argument("transient templates must have exactly 94 steps");
  }
  table_[t.pre.index() * 8 + t.post.index()] = t;
}

void TransientLibrary::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transient file '" + path + "'");
  std::map<TransientKey, TransientTemplate> loaded;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("pre", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    int pre, post, step;
    double m1, m2;
    if (!(row >> pre >> post >> step >> m1 >> m2) || step < 0 || step >= kTransientSteps) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed template row");
    }
    auto [it, fresh] = loaded.try_emplace(TransientKey{pre, post});
    if (fresh) {
      it->second = {ErrorState(pre), ErrorState(post),
                    std::vector<std::array<double, 2>>(kTransientSteps)};
    }
    it->second.means[step] = {m1, m2};
  }
  for (const auto& [key, t] : loaded) set(t);
}

void TransientLibrary::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write transient file '" + path + "'");
  out.precision(17);
  out << "pre,post,step,mean1,mean2\n";
  for (const auto& t : table_) {
    for (std::size_t n = 0; n < t.means.size(); ++n) {
      out << t.pre.index() << ',' << t.post.index() << ',' << n << ',' << t.means[n][0] << ','
          << t.means[n][1] << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

ConditionalGaussian::ConditionalGaussian(double variance, const std::array<double, 4>& correlations,
                                         int max_depth)
    : variance_(variance), max_depth_(max_depth) {
  if (!(variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  if (max_depth < 0 || max_depth > 4) throw std::invalid_argument("history depth must be in [0,4]");
  cond_var_[0] = variance;
  const auto rho = [&](int lag) { return lag == 0 ? 1.0 : correlations[lag - 1]; };
  for (int d = 1; d <= max_depth; ++d) {
    Eigen::MatrixXd sigma(d, d);
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) {
      c(i) = variance * rho(i + 1);
      for (int j = 0; j < d; ++j) sigma(i, j) = variance * rho(std::abs(i - j));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("noise covariances are not positive definite");
    }
    const Eigen::VectorXd w = llt.solve(c);
    const double v = variance - c.dot(w);
    if (!(v > 0.0)) throw std::invalid_argument("non-positive conditional noise variance");
    for (int i = 0; i < d; ++i) weights_[d][i] = w(i);
    cond_var_[d] = v;
  }
  for (int d = max_depth + 1; d <= 4; ++d) {
    weights_[d] = weights_[max_depth];
    cond_var_[d] = cond_var_[max_depth];
  }
}

std::span<const double> ConditionalGaussian::weights(int depth) const {
  depth = std::min(depth, max_depth_);
  return {weights_[depth].data(), static_cast<std::size_t>(depth)};
}

double ConditionalGaussian::conditional_mean(std::span<const double> history) const {
  const int d = std::min<int>(static_cast<int>(history.size()), max_depth_);
  double m = 0.0;
  for (int i = 0; i < d; ++i) m += weights_[d][i] * history[i];
  return m;
}

double correlated_noise_step(std::span<const double> history, const SchemeConfig& cfg,
                             RngStream& rng) {
  if (history.size() > 4) throw std::invalid_argument("history longer than four samples");
  const ConditionalGaussian model(cfg.noise_variance(), cfg.cov_lags);
  const int d = static_cast<int>(history.size());
  return model.conditional_mean(history) + std::sqrt(model.conditional_variance(d)) * rng.normal();
}

// ---------------------------------------------------------------------------

SignalSource::SignalSource(const SchemeConfig& cfg, const TransientLibrary* transients,
                           std::size_t sequence_index, ErrorState initial)
    : transients_(has_transients(cfg.scheme) ? transients : nullptr),
      noise_(cfg.noise_variance(), cfg.cov_lags, has_correlations(cfg.scheme) ? 4 : 0),
      drift_(cfg.drift(sequence_index)),
      last_(initial) {
  if (has_transients(cfg.scheme) && transients == nullptr) {
    throw std::invalid_argument("Schemes C and D need a transient library");
  }
}

std::array<double, 2> SignalSource::next_means(ErrorState state) {
  if (state != last_) {
    if (transients_ != nullptr) {
      active_ = &transients_->get(last_, state);
      transient_step_ = 0;
    }
    last_ = state;
  }
  std::array<double, 2> m;
  if (active_ != nullptr) {
    m = active_->means[transient_step_];
    if (++transient_step_ >= static_cast<int>(active_->means.size())) active_ = nullptr;
  } else {
    const Syndromes s = syndromes_of(state);
    m = {static_cast<double>(s.s1), static_cast<double>(s.s2)};
  }
  m[0] += drift_;
  m[1] += drift_;
  return m;
}

Measurement SignalSource::measure(ErrorState state, RngStream& rng) {
  const std::array<double, 2> m = next_means(state);
  std::array<double, 2> noise;
  for (int k = 0; k < 2; ++k) {
    const int d = std::min(history_[k].size(), noise_.max_depth());
    noise[k] = noise_.conditional_mean(history_[k].view(d)) +
               std::sqrt(noise_.conditional_variance(d)) * rng.normal();
    history_[k].push(noise[k]);
  }
  return {m[0], m[1], m[0] + noise[0], m[1] + noise[1]};
}

Trajectory generate_trajectory(const SchemeConfig& cfg, const TransientLibrary& transients,
                               ErrorState initial, int n_steps, std::size_t sequence_index,
                               RngStream& rng, std::optional<InjectedFlip> injected) {
  Trajectory traj;
  traj.meta = {cfg.scheme, rng.seed(), rng.stream_id(), sequence_index, initial, injected};
  traj.steps.reserve(static_cast<std::size_t>(std::max(n_steps, 0)));
  SignalSource source(cfg, &transients, sequence_index, initial);
  ErrorState state = initial;
  for (int t = 0; t < n_steps; ++t) {
    state = sample_step(cfg.error_kind, state, cfg.gamma, cfg.dt, rng);
    if (injected && injected->step == t) state = apply_flip(state, injected->qubit);
    const Measurement m = source.measure(state, rng);
    traj.steps.push_back({static_cast<std::uint8_t>(state.index()), m.mean1, m.mean2, m.i1, m.i2});
  }
  return traj;
}

Dataset generate_dataset(const SchemeConfig& cfg, std::span<const ErrorState> initial_states,
                         std::size_t n_traj, int n_steps, std::uint64_t seed, int workers) {
  if (initial_states.empty()) throw std::invalid_argument("no initial states given");
  cfg.validate();
  Dataset ds{cfg, seed, std::vector<Trajectory>(n_traj)};
  ds.cfg.n_sequences = n_traj;
  const TransientLibrary transients = TransientLibrary::from_config(cfg);
  parallel_for(n_traj, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    ds.trajectories[k] = generate_trajectory(ds.cfg, transients,
                                             initial_states[k % initial_states.size()], n_steps,
                                             k, rng);
  });
  return ds;
}

Dataset generate_injected_dataset(SchemeConfig cfg, ErrorState initial,
                                  std::optional<InjectedFlip> flip, std::size_t n_traj,
                                  int n_steps, std::uint64_t seed, int workers) {
  if (flip && (flip->step < 0 || flip->step >= n_steps)) {
    throw std::invalid_argument("injected flip step must lie inside the trajectory");
  }
  if (flip) flip_mask(flip->qubit);
  cfg.gamma = 0.0;
  cfg.validate();
  Dataset ds{cfg, seed, std::vector<Trajectory>(n_traj)};
  ds.cfg.n_sequences = n_traj;
  const TransientLibrary transients = TransientLibrary::from_config(cfg);
  parallel_for(n_traj, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    ds.trajectories[k] = generate_trajectory(ds.cfg, transients, initial, n_steps, k, rng, flip);
  });
  return ds;
}

std::array<ErrorState, 8> all_basis_states() {
  std::array<ErrorState, 8> out;
  for (int i = 0; i < 8; ++i) out[i] = ErrorState(i);
  return out;
}

}  // namespace cqec

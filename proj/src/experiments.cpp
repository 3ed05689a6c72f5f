// SPDX-License-Identifier: Apache-2.0

#include "cqec/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cqec/parallel.hpp"

namespace cqec {

namespace {

constexpr double kMicro = 1e-6;

std::uint64_t sweep_seed(std::uint64_t seed, std::size_t g, std::uint64_t purpose) {
  return splitmix64(seed ^ splitmix64(purpose * 0x100000001b3ULL + g));
}

constexpr std::uint64_t kPurposeTracking = 1;
constexpr std::uint64_t kPurposeThreshold = 2;

SchemeConfig scheme_at(const ExperimentSpec& spec, double gamma, std::size_t n_sequences) {
  SchemeConfig cfg = spec.scheme;
  cfg.gamma = gamma;
  cfg.error_kind = spec.error_kind();
  cfg.n_sequences = std::max<std::size_t>(1, n_sequences);
  return cfg;
}

std::vector<std::string> decoder_names(const ExperimentSpec& spec) {
  std::vector<std::string> names;
  for (const auto& d : spec.decoders) names.push_back(d.name());
  return names;
}

bool has_kind(const ExperimentSpec& spec, const std::string& kind) {
  return std::any_of(spec.decoders.begin(), spec.decoders.end(),
                     [&](const DecoderSetup& d) { return d.kind == kind; });
}

/// Mean and stderr per column of a row-major 0/1 matrix.
TimeSeries indicator_series(const std::vector<std::uint8_t>& ind, std::size_t n_traj,
                            int n_steps, double dt, int stride) {
  TimeSeries s;
  const std::size_t cols = static_cast<std::size_t>(n_steps) + 1;
  std::vector<std::size_t> picks;
  for (std::size_t j = 0; j < cols; j += static_cast<std::size_t>(stride)) picks.push_back(j);
  if (picks.back() != cols - 1) picks.push_back(cols - 1);  // always keep the final point
  for (std::size_t j : picks) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < n_traj; ++k) ones += ind[k * cols + j];
    const double n = static_cast<double>(n_traj);
    const double p = static_cast<double>(ones) / n;
    const double var = n > 1 ? p * (1.0 - p) * n / (n - 1.0) : 0.0;
    s.t_us.push_back(static_cast<double>(j) * dt / kMicro);
    s.mean.push_back(p);
    s.stderr_.push_back(std::sqrt(var / n));
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(Task task) {
  switch (task) {
    case Task::Tracking: return "tracking";
    case Task::T1Extension: return "t1-extension";
    case Task::BitFlipProtection: return "bit-flip-protection";
    case Task::Annealing: return "annealing";
    case Task::DetectionStats: return "detection-stats";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  if (name == "tracking") return Task::Tracking;
  if (name == "t1-extension" || name == "t1") return Task::T1Extension;
  if (name == "bit-flip-protection" || name == "bitflip") return Task::BitFlipProtection;
  if (name == "annealing" || name == "anneal") return Task::Annealing;
  if (name == "detection-stats" || name == "detection") return Task::DetectionStats;
  throw std::invalid_argument("unknown task '" + name + "'");
}

bool is_active(Task task) { return task != Task::Tracking; }

ErrorKind ExperimentSpec::error_kind() const {
  return task == Task::T1Extension ? ErrorKind::Damping : ErrorKind::BitFlip;
}

int ExperimentSpec::steps() const { return static_cast<int>(std::llround(t_total / scheme.dt)); }

void ExperimentSpec::validate() const {
  scheme.validate();
  if (n_traj < 100) throw std::invalid_argument("n_traj must be at least 100");
  if (gammas.empty()) throw std::invalid_argument("gamma sweep is empty");
  for (double g : gammas) {
    if (!(g >= 0.0)) throw std::invalid_argument("gamma values must be non-negative");
  }
  if (decoders.empty()) throw std::invalid_argument("no decoders configured");
  for (const auto& d : decoders) {
    if (d.kind != "dt" && d.kind != "bayes" && d.kind != "rnn" && d.kind != "none") {
      throw std::invalid_argument("unknown decoder kind '" + d.kind + "'");
    }
    if (d.kind == "rnn" && !d.network) {
      throw std::invalid_argument("decoder '" + d.name() + "' needs a network");
    }
    if (d.kind == "none" && task == Task::Tracking) {
      throw std::invalid_argument("tracking needs a decoder");
    }
  }
  if (steps() < 1) throw std::invalid_argument("t_total shorter than one step");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (series_stride < 1) throw std::invalid_argument("series_stride must be >= 1");
  if (dt_train_traj < 1 || !(dt_train_t_total > 0.0)) {
    throw std::invalid_argument("threshold training set must be non-empty");
  }
  if (task == Task::BitFlipProtection) {
    if (!(rate_window > 0.0) || rate_time - rate_window < 0.0 ||
        rate_time + rate_window > t_total * (1.0 + 1e-12)) {
      throw std::invalid_argument("logical-rate window must lie inside [0, t_total]");
    }
  }
  if (task == Task::DetectionStats && inject) {
    const auto k = std::llround(inject_time / scheme.dt);
    if (k < 0 || k >= steps()) throw std::invalid_argument("inject_time outside the run");
  }
  if (task == Task::Annealing && !(omega0 > 0.0)) {
    throw std::invalid_argument("omega0 must be positive");
  }
}

// ---------------------------------------------------------------------------

const ScalarMetric* MetricsReport::find(const std::string& decoder, double gamma,
                                        const std::string& metric) const {
  for (const auto& s : scalars) {
    if (s.decoder == decoder && s.metric == metric && std::abs(s.gamma - gamma) <= 1e-9 * gamma) {
      return &s;
    }
  }
  return nullptr;
}

const TimeSeries* MetricsReport::find_series(const std::string& decoder, double gamma,
                                             const std::string& metric) const {
  for (const auto& s : series) {
    if (s.decoder == decoder && s.metric == metric && std::abs(s.gamma - gamma) <= 1e-9 * gamma) {
      return &s;
    }
  }
  return nullptr;
}

const Outcomes* MetricsReport::find_outcomes(const std::string& decoder, double gamma,
                                             const std::string& metric) const {
  for (const auto& o : outcomes) {
    if (o.decoder == decoder && o.metric == metric && std::abs(o.gamma - gamma) <= 1e-9 * gamma) {
      return &o;
    }
  }
  return nullptr;
}

const FitDiagnostic* MetricsReport::find_fit(const std::string& decoder,
                                             const std::string& name) const {
  for (const auto& f : fits) {
    if (f.decoder == decoder && f.name == name) return &f;
  }
  return nullptr;
}

MeanStderr mean_stderr(const std::vector<double>& samples) {
  MeanStderr r;
  if (samples.empty()) return r;
  const double n = static_cast<double>(samples.size());
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - r.mean) * (x - r.mean);
    r.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

std::uint64_t trajectory_stream(std::size_t g, std::size_t k, int channel) {
  return (static_cast<std::uint64_t>(g) << 40) | (static_cast<std::uint64_t>(k) << 2) |
         static_cast<std::uint64_t>(channel & 3);
}

std::pair<int, int> gate_settings(const ExperimentSpec& spec) {
  const bool transients = is_active(spec.task) && has_transients(spec.scheme.scheme);
  int ignore = transients ? kTransientSteps : 0;
  int streak = transients ? 3 : 1;
  if (spec.tau_ignore >= 0) ignore = spec.tau_ignore;
  if (spec.tau_streak >= 0) streak = spec.tau_streak;
  return {ignore, streak};
}

std::unique_ptr<Decoder> make_decoder(const DecoderSetup& setup, const ExperimentSpec& spec,
                                      double gamma, const ThresholdConfig* dt) {
  const auto [ignore, streak] = gate_settings(spec);
  if (setup.kind == "none") return nullptr;
  if (setup.kind == "dt") {
    if (dt == nullptr) throw std::invalid_argument("double-threshold parameters missing");
    ThresholdConfig c = *dt;
    c.dt = spec.scheme.dt;
    c.tau_ignore = ignore;
    c.tau_streak = streak;
    return std::make_unique<ThresholdDecoder>(c);
  }
  if (setup.kind == "bayes") {
    BayesConfig c = BayesConfig::matching(scheme_at(spec, gamma, 1));
    c.tau_ignore = ignore;
    c.tau_streak = streak;
    return std::make_unique<BayesDecoder>(c);
  }
  if (setup.kind == "rnn") {
    if (!setup.network) throw std::invalid_argument("rnn decoder without a network");
    return std::make_unique<RnnDecoder>(setup.network, ignore, streak);
  }
  throw std::invalid_argument("unknown decoder kind '" + setup.kind + "'");
}

// ---------------------------------------------------------------------------
// Closed-loop protection runs

std::vector<std::uint8_t> active_indicators(const ExperimentSpec& spec, std::size_t g,
                                            const Decoder* prototype, std::size_t n_traj,
                                            int n_steps, std::uint64_t seed) {
  const double gamma = spec.gammas.at(g);
  const SchemeConfig cfg = scheme_at(spec, gamma, n_traj);
  const TransientLibrary transients = TransientLibrary::from_config(cfg);
  const ErrorKind kind = spec.error_kind();
  const ErrorState start(7);
  const std::size_t cols = static_cast<std::size_t>(n_steps) + 1;
  std::vector<std::uint8_t> ind(n_traj * cols, 0);

  parallel_for(n_traj, spec.workers, [&](std::size_t k) {
    RngStream err_rng(seed, trajectory_stream(g, k, 0));
    RngStream noise_rng(seed, trajectory_stream(g, k, 1));
    std::unique_ptr<Decoder> dec = prototype ? prototype->clone() : nullptr;
    if (dec) dec->reset(start, DecoderMode::Active);
    SignalSource source(cfg, &transients, k, start);
    ErrorState state = start;
    std::uint8_t* row = ind.data() + k * cols;
    row[0] = 1;
    for (int s = 0; s < n_steps; ++s) {
      state = sample_step(kind, state, gamma, cfg.dt, err_rng);
      if (dec) {
        const Measurement m = source.measure(state, noise_rng);
        const StepResult r = dec->step(m.i1, m.i2);
        if (r.correction != 0) state = apply_mask(state, r.correction);
      }
      row[s + 1] = is_excited(state) ? 1 : 0;
    }
  });
  return ind;
}

std::pair<int, std::vector<double>> slope_weights(double center, double half, double dt,
                                                  int n_steps) {
  const int lo = std::max(0, static_cast<int>(std::ceil((center - half) / dt - 1e-9)));
  const int hi = std::min(n_steps, static_cast<int>(std::floor((center + half) / dt + 1e-9)));
  if (hi - lo < 1) throw std::runtime_error("rate window holds fewer than two points");
  const int m = hi - lo + 1;
  double tbar = 0.0;
  for (int j = lo; j <= hi; ++j) tbar += j * dt;
  tbar /= m;
  double sxx = 0.0;
  for (int j = lo; j <= hi; ++j) sxx += (j * dt - tbar) * (j * dt - tbar);
  std::vector<double> w(m);
  for (int j = lo; j <= hi; ++j) w[j - lo] = (j * dt - tbar) / sxx;
  return {lo, w};
}

FitDiagnostic loglog_fit(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& y_stderr) {
  FitDiagnostic f;
  f.name = "loglog_slope";
  std::vector<double> lx, ly, w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    const double rel = i < y_stderr.size() ? y_stderr[i] / y[i] : 0.0;
    w.push_back(rel > 0.0 ? 1.0 / (rel * rel) : 1.0);
  }
  f.points = lx.size();
  if (lx.size() < 2) return f;
  // Unit weights everywhere when any point lacks an error estimate.
  if (std::any_of(y_stderr.begin(), y_stderr.end(), [](double s) { return !(s > 0.0); })) {
    std::fill(w.begin(), w.end(), 1.0);
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sw += w[i];
    sx += w[i] * lx[i];
    sy += w[i] * ly[i];
  }
  const double xbar = sx / sw, ybar = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += w[i] * (lx[i] - xbar) * (lx[i] - xbar);
    sxy += w[i] * (lx[i] - xbar) * (ly[i] - ybar);
  }
  if (!(sxx > 0.0)) return f;
  f.value = sxy / sxx;
  f.stderr_ = std::sqrt(1.0 / sxx);
  f.ok = std::isfinite(f.value);
  return f;
}

// ---------------------------------------------------------------------------
// Double-threshold parameters

ThresholdConfig threshold_for(const ExperimentSpec& spec, const DecoderSetup& setup,
                              std::size_t g) {
  if (setup.threshold) return *setup.threshold;
  const double gamma = spec.gammas.at(g);
  const auto [ignore, streak] = gate_settings(spec);
  ThresholdConfig base;
  base.dt = spec.scheme.dt;
  base.tau_ignore = ignore;
  base.tau_streak = streak;
  const std::uint64_t seed = sweep_seed(spec.seed, g, kPurposeThreshold);

  if (spec.task == Task::Tracking) {
    const SchemeConfig cfg = scheme_at(spec, gamma, spec.dt_train_traj);
    const auto states = all_basis_states();
    const Dataset train = generate_dataset(cfg, states, spec.dt_train_traj, spec.steps(), seed,
                                           spec.workers);
    return optimize_params(spec.grid, base,
                           [&](const ThresholdConfig& c) {
                             return tracking_fidelity(c, train.trajectories);
                           })
        .best;
  }

  // Active tasks: final P_exc of closed-loop runs with bit-flips (damping for
  // the T1 task) at the sweep rate.
  ExperimentSpec sub = spec;
  if (spec.task == Task::Annealing || spec.task == Task::DetectionStats) {
    sub.task = Task::BitFlipProtection;
  }
  const int n_steps = std::min(
      spec.steps(), static_cast<int>(std::llround(spec.dt_train_t_total / spec.scheme.dt)));
  return optimize_params(spec.grid, base,
                         [&](const ThresholdConfig& c) {
                           ThresholdDecoder dec(c);
                           const auto ind =
                               active_indicators(sub, g, &dec, spec.dt_train_traj, n_steps, seed);
                           const std::size_t cols = static_cast<std::size_t>(n_steps) + 1;
                           std::size_t ones = 0;
                           for (std::size_t k = 0; k < spec.dt_train_traj; ++k) {
                             ones += ind[k * cols + cols - 1];
                           }
                           return static_cast<double>(ones) /
                                  static_cast<double>(spec.dt_train_traj);
                         })
      .best;
}

namespace {

/// Per sweep point: the double-threshold parameters (if any dt decoder) and
/// prototypes for every configured decoder.
struct SweepDecoders {
  std::optional<ThresholdConfig> dt;
  std::vector<std::unique_ptr<Decoder>> protos;
};

SweepDecoders prepare(const ExperimentSpec& spec, std::size_t g, MetricsReport& report) {
  SweepDecoders out;
  for (const auto& d : spec.decoders) {
    std::optional<ThresholdConfig> cfg;
    if (d.kind == "dt") {
      cfg = threshold_for(spec, d, g);
      report.threshold_params.emplace_back(spec.gammas[g], *cfg);
    }
    out.protos.push_back(make_decoder(d, spec, spec.gammas[g], cfg ? &*cfg : nullptr));
  }
  return out;
}

MetricsReport new_report(const ExperimentSpec& spec) {
  spec.validate();
  MetricsReport r;
  r.task = spec.task;
  r.scheme = spec.scheme.scheme;
  return r;
}

/// Bare single qubit from |1>: the same error process on one qubit.
std::vector<std::uint8_t> bare_indicators(const ExperimentSpec& spec, std::size_t g, int n_steps,
                                          std::uint64_t seed) {
  const double gamma = spec.gammas[g];
  const std::size_t cols = static_cast<std::size_t>(n_steps) + 1;
  std::vector<std::uint8_t> ind(spec.n_traj * cols, 0);
  parallel_for(spec.n_traj, spec.workers, [&](std::size_t k) {
    RngStream rng(seed, trajectory_stream(g, k, 2));
    ErrorState state(flip_mask(1));
    std::uint8_t* row = ind.data() + k * cols;
    row[0] = 1;
    for (int s = 0; s < n_steps; ++s) {
      state = sample_step(spec.error_kind(), state, gamma, spec.scheme.dt, rng);
      state = ErrorState(state.index() & flip_mask(1));
      row[s + 1] = state.index() != 0 ? 1 : 0;
    }
  });
  return ind;
}

struct ActiveCurves {
  std::vector<std::string> names;
  std::vector<std::vector<std::uint8_t>> indicators;
};

ActiveCurves run_active_point(const ExperimentSpec& spec, std::size_t g, MetricsReport& report) {
  const int n = spec.steps();
  ActiveCurves c;
  SweepDecoders decs = prepare(spec, g, report);
  for (std::size_t i = 0; i < spec.decoders.size(); ++i) {
    c.names.push_back(spec.decoders[i].name());
    c.indicators.push_back(
        active_indicators(spec, g, decs.protos[i].get(), spec.n_traj, n, spec.seed));
  }
  if (!has_kind(spec, "none")) {
    c.names.push_back("uncorrected");
    c.indicators.push_back(active_indicators(spec, g, nullptr, spec.n_traj, n, spec.seed));
  }
  c.names.push_back("bare");
  c.indicators.push_back(bare_indicators(spec, g, n, spec.seed));
  return c;
}

void add_active_metrics(const ExperimentSpec& spec, std::size_t g, const ActiveCurves& c,
                        MetricsReport& report) {
  const int n = spec.steps();
  const std::size_t cols = static_cast<std::size_t>(n) + 1;
  const double gamma = spec.gammas[g];
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    TimeSeries s = indicator_series(c.indicators[i], spec.n_traj, n, spec.scheme.dt,
                                    spec.series_stride);
    s.decoder = c.names[i];
    s.gamma = gamma;
    s.metric = "p_exc";
    std::vector<double> final_vals(spec.n_traj);
    for (std::size_t k = 0; k < spec.n_traj; ++k) final_vals[k] = c.indicators[i][k * cols + n];
    const MeanStderr f = mean_stderr(final_vals);
    report.scalars.push_back({c.names[i], gamma, "final_p_exc", f.mean, f.stderr_, spec.n_traj});
    report.outcomes.push_back({c.names[i], gamma, "final_p_exc", std::move(final_vals)});
    report.series.push_back(std::move(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

MetricsReport run_tracking(const ExperimentSpec& spec) {
  MetricsReport report = new_report(spec);
  const auto states = all_basis_states();
  const int n = spec.steps();
  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    const double gamma = spec.gammas[g];
    const SchemeConfig cfg = scheme_at(spec, gamma, spec.n_traj);
    const Dataset data = generate_dataset(cfg, states, spec.n_traj, n,
                                          sweep_seed(spec.seed, g, kPurposeTracking), spec.workers);

    // Decoder-independent statistics of the true trajectories.
    std::vector<double> flips(spec.n_traj);
    for (std::size_t k = 0; k < spec.n_traj; ++k) {
      int prev = data.trajectories[k].initial_state().index(), count = 0;
      for (const auto& r : data.trajectories[k].steps) {
        count += std::popcount(static_cast<unsigned>(prev ^ r.true_state));
        prev = r.true_state;
      }
      flips[k] = count;
    }
    const MeanStderr fl = mean_stderr(flips);
    report.scalars.push_back({"truth", gamma, "error_count", fl.mean, fl.stderr_, spec.n_traj});

    SweepDecoders decs = prepare(spec, g, report);
    for (std::size_t i = 0; i < spec.decoders.size(); ++i) {
      std::vector<double> hit(spec.n_traj);
      const Decoder* proto = decs.protos[i].get();
      parallel_for(spec.n_traj, spec.workers, [&](std::size_t k) {
        const Trajectory& t = data.trajectories[k];
        auto dec = proto->clone();
        dec->reset(t.initial_state(), DecoderMode::Tracking);
        for (const auto& r : t.steps) dec->step(r.i1, r.i2);
        const int truth = t.steps.empty() ? t.initial_state().index() : t.steps.back().true_state;
        hit[k] = dec->estimate().index() == truth ? 1.0 : 0.0;
      });
      const MeanStderr m = mean_stderr(hit);
      report.scalars.push_back(
          {spec.decoders[i].name(), gamma, "final_fidelity", m.mean, m.stderr_, spec.n_traj});
      report.outcomes.push_back({spec.decoders[i].name(), gamma, "final_fidelity", std::move(hit)});
    }
  }
  return report;
}

MetricsReport run_t1(const ExperimentSpec& spec) {
  if (spec.task != Task::T1Extension) throw std::invalid_argument("run_t1: task mismatch");
  MetricsReport report = new_report(spec);
  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    const ActiveCurves c = run_active_point(spec, g, report);
    add_active_metrics(spec, g, c, report);
  }
  return report;
}

MetricsReport run_bitflip(const ExperimentSpec& spec) {
  if (spec.task != Task::BitFlipProtection) throw std::invalid_argument("run_bitflip: task mismatch");
  MetricsReport report = new_report(spec);
  const int n = spec.steps();
  const std::size_t cols = static_cast<std::size_t>(n) + 1;
  const auto [lo, w] = slope_weights(spec.rate_time, spec.rate_window, spec.scheme.dt, n);

  std::vector<std::string> names;
  std::vector<std::vector<double>> rate(spec.gammas.size()), rate_se(spec.gammas.size());
  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    const ActiveCurves c = run_active_point(spec, g, report);
    add_active_metrics(spec, g, c, report);
    names = c.names;
    for (std::size_t i = 0; i < c.names.size(); ++i) {
      // Gamma_L = -dP/dt; a per-trajectory slope keeps the stderr honest
      // about the correlation between neighbouring points.
      std::vector<double> slopes(spec.n_traj);
      for (std::size_t k = 0; k < spec.n_traj; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * c.indicators[i][k * cols + lo + j];
        slopes[k] = -s;
      }
      const MeanStderr m = mean_stderr(slopes);
      report.scalars.push_back(
          {c.names[i], spec.gammas[g], "logical_rate", m.mean, m.stderr_, spec.n_traj});
      rate[g].push_back(m.mean);
      rate_se[g].push_back(m.stderr_);
    }
  }

  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<double> y, se;
    for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
      y.push_back(rate[g][i]);
      se.push_back(rate_se[g][i]);
    }
    FitDiagnostic f = loglog_fit(spec.gammas, y, se);
    f.decoder = names[i];
    report.fits.push_back(f);

    // Gamma_L = c gamma^2 by unweighted least squares, c in us.
    double num = 0.0, den = 0.0;
    for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
      const double x2 = spec.gammas[g] * spec.gammas[g];
      num += y[g] * x2;
      den += x2 * x2;
    }
    FitDiagnostic q;
    q.decoder = names[i];
    q.name = "quadratic_coefficient_us";
    q.points = spec.gammas.size();
    q.ok = den > 0.0;
    q.value = q.ok ? num / den / kMicro : 0.0;
    report.fits.push_back(q);
  }
  return report;
}

MetricsReport run_detection_stats(const ExperimentSpec& spec) {
  if (spec.task != Task::DetectionStats) throw std::invalid_argument("run_detection_stats: task mismatch");
  MetricsReport report = new_report(spec);
  const int n = spec.steps();
  const double dt = spec.scheme.dt;
  const double t_us = spec.t_total / kMicro;
  const int inject_step = static_cast<int>(std::llround(spec.inject_time / dt));
  const ErrorState start(7);

  struct PerTraj {
    std::vector<int> detection_steps;
    std::vector<int> false_alarm_steps;
    int errors = 0;
    int missed = 0;
  };

  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    const double gamma = spec.gammas[g];
    const double background = spec.inject ? 0.0 : gamma;
    const SchemeConfig cfg = scheme_at(spec, background, spec.n_traj);
    const TransientLibrary transients = TransientLibrary::from_config(cfg);
    SweepDecoders decs = prepare(spec, g, report);

    for (std::size_t i = 0; i < spec.decoders.size(); ++i) {
      const Decoder* proto = decs.protos[i].get();
      if (proto == nullptr) continue;
      std::vector<PerTraj> res(spec.n_traj);
      parallel_for(spec.n_traj, spec.workers, [&](std::size_t k) {
        RngStream err_rng(spec.seed, trajectory_stream(g, k, 0));
        RngStream noise_rng(spec.seed, trajectory_stream(g, k, 1));
        auto dec = proto->clone();
        dec->reset(start, DecoderMode::Active);
        SignalSource source(cfg, &transients, k, start);
        ErrorState state = start;
        // Step of the uncorrected physical flip per qubit; -1 none, -2 a
        // flip introduced by a wrong correction.
        std::array<int, 3> pending{-1, -1, -1};
        PerTraj& out = res[k];
        for (int s = 0; s < n; ++s) {
          int mask = state.index() ^ sample_step(ErrorKind::BitFlip, state, background, dt,
                                                 err_rng).index();
          if (spec.inject && s == inject_step) mask ^= flip_mask(static_cast<int>(k % 3) + 1);
          for (int q = 1; q <= 3; ++q) {
            if (!(mask & flip_mask(q))) continue;
            pending[q - 1] = pending[q - 1] == -1 ? s : -1;
            if (pending[q - 1] == s) ++out.errors;
          }
          state = apply_mask(state, mask);
          const Measurement m = source.measure(state, noise_rng);
          const StepResult r = dec->step(m.i1, m.i2);
          if (r.correction == 0) continue;
          if (state == start) out.false_alarm_steps.push_back(s);
          for (int q = 1; q <= 3; ++q) {
            if (!(r.correction & flip_mask(q))) continue;
            int& p = pending[q - 1];
            if (p >= 0) {
              out.detection_steps.push_back(s - p + 1);
              p = -1;
            } else {
              p = p == -1 ? -2 : -1;
            }
          }
          state = apply_mask(state, r.correction);
        }
        for (int p : pending) out.missed += p >= 0 ? 1 : 0;
      });

      const std::string name = spec.decoders[i].name();
      std::vector<double> det, fa_rate;
      std::size_t errors = 0, missed = 0, false_alarms = 0;
      Histogram hd{name, gamma, "detection_time", dt / kMicro, {}};
      Histogram hf{name, gamma, "false_alarm_time", 1.0, {}};
      hf.counts.assign(static_cast<std::size_t>(std::ceil(t_us)), 0);
      for (const auto& r : res) {
        for (int d : r.detection_steps) {
          det.push_back(d * dt / kMicro);
          if (hd.counts.size() <= static_cast<std::size_t>(d)) hd.counts.resize(d + 1, 0);
          ++hd.counts[d];
        }
        for (int s : r.false_alarm_steps) {
          const auto bin = std::min(hf.counts.size() - 1, static_cast<std::size_t>(s * dt / kMicro));
          ++hf.counts[bin];
        }
        errors += r.errors;
        missed += r.missed;
        false_alarms += r.false_alarm_steps.size();
        fa_rate.push_back(static_cast<double>(r.false_alarm_steps.size()) / t_us);
      }
      const MeanStderr dm = mean_stderr(det);
      const MeanStderr fm = mean_stderr(fa_rate);
      report.scalars.push_back({name, gamma, "mean_detection_time_us", dm.mean, dm.stderr_, det.size()});
      report.scalars.push_back({name, gamma, "false_alarm_rate_per_us", fm.mean, fm.stderr_, spec.n_traj});
      report.scalars.push_back({name, gamma, "errors", static_cast<double>(errors), 0.0, spec.n_traj});
      report.scalars.push_back({name, gamma, "detections", static_cast<double>(det.size()), 0.0, spec.n_traj});
      report.scalars.push_back({name, gamma, "missed", static_cast<double>(missed), 0.0, spec.n_traj});
      report.scalars.push_back({name, gamma, "false_alarms", static_cast<double>(false_alarms), 0.0, spec.n_traj});
      report.histograms.push_back(std::move(hd));
      report.histograms.push_back(std::move(hf));
    }
  }
  return report;
}

MetricsReport run_annealing(const ExperimentSpec& spec) {
  if (spec.task != Task::Annealing) throw std::invalid_argument("run_annealing: task mismatch");
  MetricsReport report = new_report(spec);
  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    const double gamma = spec.gammas[g];
    AnnealConfig acfg;
    acfg.omega0 = spec.omega0;
    acfg.t_total = spec.t_total;
    acfg.dt = spec.scheme.dt;
    acfg.gamma = gamma;
    const PropagatorTable table(acfg);
    const double r = 1.0 / std::sqrt(2.0);
    const PureState target = embed_logical(evolve_logical(table, Qubit(r, r)));
    const SchemeConfig cfg = scheme_at(spec, gamma, spec.n_traj);
    const TransientLibrary transients = TransientLibrary::from_config(cfg);

    std::vector<double> bare(spec.n_traj);
    parallel_for(spec.n_traj, spec.workers, [&](std::size_t k) {
      RngStream rng(spec.seed, trajectory_stream(g, k, 2));
      bare[k] = target_and_bare(table, rng).bare_infidelity;
    });
    const MeanStderr bm = mean_stderr(bare);
    report.scalars.push_back({"bare", gamma, "final_infidelity", bm.mean, bm.stderr_, spec.n_traj});
    report.outcomes.push_back({"bare", gamma, "final_infidelity", bare});

    SweepDecoders decs = prepare(spec, g, report);
    std::vector<std::string> names = decoder_names(spec);
    std::vector<const Decoder*> protos;
    for (const auto& p : decs.protos) protos.push_back(p.get());
    if (!has_kind(spec, "none")) {
      names.push_back("uncorrected");
      protos.push_back(nullptr);
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::vector<double> infid(spec.n_traj), dev(spec.n_traj);
      parallel_for(spec.n_traj, spec.workers, [&](std::size_t k) {
        RngStream rng(spec.seed, trajectory_stream(g, k, 0));
        auto dec = protos[i] ? protos[i]->clone() : nullptr;
        const AnnealTrajectory t =
            evolve_trajectory(table, cfg, transients, dec.get(), target, k, rng);
        infid[k] = 1.0 - t.fidelity;
        dev[k] = t.max_stabilizer_deviation;
      });
      const MeanStderr m = mean_stderr(infid);
      const MeanStderr d = mean_stderr(dev);
      report.scalars.push_back({names[i], gamma, "final_infidelity", m.mean, m.stderr_, spec.n_traj});
      report.scalars.push_back(
          {names[i], gamma, "max_stabilizer_deviation", d.mean, d.stderr_, spec.n_traj});
      const ReductionFactor rf = reduction_factor(bm.mean, m.mean, bm.stderr_, m.stderr_);
      if (rf.defined) {
        report.scalars.push_back({names[i], gamma, "reduction_factor", rf.value, rf.stderr_, spec.n_traj});
      }
      report.outcomes.push_back({names[i], gamma, "final_infidelity", std::move(infid)});
    }
  }
  return report;
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  switch (spec.task) {
    case Task::Tracking: return run_tracking(spec);
    case Task::T1Extension: return run_t1(spec);
    case Task::BitFlipProtection: return run_bitflip(spec);
    case Task::DetectionStats: return run_detection_stats(spec);
    case Task::Annealing: return run_annealing(spec);
  }
  throw std::invalid_argument("unknown task");
}

}  // namespace cqec

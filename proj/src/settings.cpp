// SPDX-License-Identifier: Apache-2.0

#include "cqec/settings.hpp"

#include <stdexcept>

namespace cqec {

namespace {
constexpr double kMicro = 1e-6;
}

SchemeConfig scheme_from_config(const Config& cfg) {
  SchemeConfig s = SchemeConfig::defaults(scheme_from_string(cfg.get("scheme", "A")));
  s.tau_m = cfg.get_double("scheme.tau_m_us", s.tau_m / kMicro) * kMicro;
  s.dt = cfg.get_double("scheme.dt_us", s.dt / kMicro) * kMicro;
  if (cfg.has("scheme.cov_lags")) {
    const auto lags = cfg.get_doubles("scheme.cov_lags", {});
    if (lags.size() != 4) throw std::invalid_argument("scheme.cov_lags needs four values");
    for (int i = 0; i < 4; ++i) s.cov_lags[i] = lags[i];
  }
  s.drift_total = cfg.get_double("scheme.drift_total", s.drift_total);
  s.transient_file = cfg.get("scheme.transient_file", s.transient_file);
  return s;
}

std::vector<ErrorState> initial_states_from(const Config& cfg, const std::string& key,
                                            const std::vector<ErrorState>& fallback) {
  if (!cfg.has(key)) return fallback;
  const auto items = cfg.get_strings(key, {});
  if (items.size() == 1 && items[0] == "all") {
    const auto all = all_basis_states();
    return {all.begin(), all.end()};
  }
  std::vector<ErrorState> out;
  for (const auto& it : items) {
    int v = -1;
    try {
      v = std::stoi(it);
    } catch (const std::logic_error&) {
    }
    if (v < 0 || v > 7) throw std::invalid_argument(key + ": state index must be 0..7");
    out.emplace_back(v);
  }
  if (out.empty()) throw std::invalid_argument(key + ": no states");
  return out;
}

ExperimentSpec spec_from_config(const Config& cfg) {
  ExperimentSpec spec;
  spec.task = task_from_string(cfg.get("task", "tracking"));
  spec.scheme = scheme_from_config(cfg);
  for (double g : cfg.get_doubles("gamma", {0.04})) spec.gammas.push_back(g / kMicro);
  spec.t_total = cfg.get_double("t_total_us", spec.t_total / kMicro) * kMicro;
  spec.n_traj = cfg.get_u64("trajectories", spec.n_traj);
  spec.seed = cfg.get_u64("seed", spec.seed);
  spec.workers = cfg.get_int("workers", spec.workers);
  spec.tau_ignore = cfg.get_int("gate.tau_ignore", spec.tau_ignore);
  spec.tau_streak = cfg.get_int("gate.tau_streak", spec.tau_streak);

  std::optional<ThresholdConfig> fixed;
  if (cfg.has("dt.tau_us") || cfg.has("dt.theta1") || cfg.has("dt.theta2")) {
    ThresholdConfig t;
    t.tau = cfg.get_double("dt.tau_us", t.tau / kMicro) * kMicro;
    t.theta1 = cfg.get_double("dt.theta1", t.theta1);
    t.theta2 = cfg.get_double("dt.theta2", t.theta2);
    t.dt = spec.scheme.dt;
    fixed = t;
  }
  spec.dt_train_traj = cfg.get_u64("dt.train_trajectories", spec.dt_train_traj);
  spec.dt_train_t_total =
      cfg.get_double("dt.train_t_total_us", spec.dt_train_t_total / kMicro) * kMicro;
  if (cfg.has("dt.grid_taus_us")) {
    spec.grid.taus.clear();
    for (double t : cfg.get_doubles("dt.grid_taus_us", {})) spec.grid.taus.push_back(t * kMicro);
  }
  spec.grid.theta2 = cfg.get_doubles("dt.grid_thresholds", spec.grid.theta2);

  spec.rate_time = cfg.get_double("bitflip.rate_time_us", spec.rate_time / kMicro) * kMicro;
  spec.rate_window = cfg.get_double("bitflip.rate_window_us", spec.rate_window / kMicro) * kMicro;
  spec.inject = cfg.get_bool("detection.inject", spec.inject);
  spec.inject_time = cfg.get_double("detection.inject_time_us", spec.inject_time / kMicro) * kMicro;
  spec.omega0 = cfg.get_double("anneal.omega0_per_us", spec.omega0 * kMicro) / kMicro;
  spec.series_stride = cfg.get_int("series.stride", spec.series_stride);

  std::shared_ptr<const NetworkParams> net;
  for (const auto& kind : cfg.get_strings("decoder", {"bayes"})) {
    DecoderSetup d;
    d.kind = kind;
    if (kind == "dt") d.threshold = fixed;
    if (kind == "rnn") {
      if (!net) {
        const std::string path = cfg.get("rnn.checkpoint", "");
        if (path.empty()) throw std::invalid_argument("decoder rnn needs rnn.checkpoint");
        net = std::make_shared<const NetworkParams>(load_checkpoint(path));
      }
      d.network = net;
    }
    spec.decoders.push_back(d);
  }
  spec.validate();
  return spec;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig t;
  t.hidden = cfg.get_int("train.hidden", t.hidden);
  t.layers = cfg.get_int("train.layers", t.layers);
  t.cell = cell_kind_from_string(cfg.get("train.cell", to_string(t.cell)));
  t.encoding = initial_encoding_from_string(cfg.get("train.encoding", to_string(t.encoding)));
  t.epochs = cfg.get_int("train.epochs", t.epochs);
  t.batch_size = cfg.get_u64("train.batch_size", t.batch_size);
  t.adam.learning_rate = cfg.get_double("train.learning_rate", t.adam.learning_rate);
  t.clip_norm = cfg.get_double("train.clip_norm", t.clip_norm);
  t.final_lr_fraction = cfg.get_double("train.final_lr_fraction", t.final_lr_fraction);
  t.keep_best = cfg.get_bool("train.keep_best", t.keep_best);
  t.single_precision = !cfg.get_bool("train.double_precision", !t.single_precision);
  t.seed = cfg.get_u64("seed", t.seed);
  t.validate();
  return t;
}

}  // namespace cqec

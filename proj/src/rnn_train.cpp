// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "cqec/rnn.hpp"
#include "rnn_batch.hpp"

namespace cqec {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (hidden < 1 || layers < 1) throw std::invalid_argument("hidden size and layers must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (clip_norm < 0.0) throw std::invalid_argument("clip_norm must be >= 0");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("final_lr_fraction must be in (0, 1]");
  }
}

namespace {

int common_length(std::span<const Trajectory> data) {
  if (data.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t n = data.front().steps.size();
  if (n == 0) throw std::invalid_argument("trajectories have no steps");
  for (const auto& t : data) {
    if (t.steps.size() != n) throw std::invalid_argument("trajectories must share one length");
  }
  return static_cast<int>(n);
}

template <typename T>
void pack(std::span<const Trajectory> data, std::span<const std::size_t> idx,
          const NetworkParams& params, int steps, detail::Mat<T>& x, std::vector<int>& labels) {
  const int b = static_cast<int>(idx.size());
  const int in = params.input_size();
  x.resize(in, static_cast<Eigen::Index>(steps) * b);
  labels.resize(static_cast<std::size_t>(steps) * b);
  double buf[10];
  for (int n = 0; n < b; ++n) {
    const Trajectory& tr = data[idx[n]];
    for (int t = 0; t < steps; ++t) {
      const StepRecord& r = tr.steps[t];
      encode_input(r.i1, r.i2, tr.initial_state(), params, buf);
      const Eigen::Index col = static_cast<Eigen::Index>(t) * b + n;
      for (int k = 0; k < in; ++k) x(k, col) = static_cast<T>(buf[k]);
      labels[static_cast<std::size_t>(col)] = r.true_state;
    }
  }
}

template <typename T>
double train_batch(NetworkParams& params, std::span<const Trajectory> data,
                   std::span<const std::size_t> idx, int steps, AdamState& adam,
                   const TrainConfig& cfg, const AdamConfig& lr, NetworkParams& grads) {
  detail::Mat<T> x;
  std::vector<int> labels;
  pack<T>(data, idx, params, steps, x, labels);
  const auto net = detail::Net<T>::from(params);
  auto g = detail::Net<T>::zeros_like(net);
  const detail::PassStats st =
      detail::run_batch(net, x, labels, steps, static_cast<int>(idx.size()), &g);
  g.store_into(grads);
  if (cfg.clip_norm > 0.0) {
    Eigen::VectorXd flat = grads.flatten();
    const double norm = flat.norm();
    if (norm > cfg.clip_norm) {
      flat *= cfg.clip_norm / norm;
      grads.unflatten(flat);
    }
  }
  adam_step(params, grads, adam, lr);
  return st.loss_sum;
}

}  // namespace

EvalResult evaluate_network(const NetworkParams& params, std::span<const Trajectory> data,
                            std::size_t batch_size) {
  const int steps = common_length(data);
  const auto net = detail::Net<double>::from(params);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double loss_sum = 0.0;
  std::size_t correct = 0, count = 0;
  detail::Mat<double> x;
  std::vector<int> labels;
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, idx.size() - start);
    const std::span<const std::size_t> part(idx.data() + start, n);
    pack<double>(data, part, params, steps, x, labels);
    const detail::PassStats st =
        detail::run_batch<double>(net, x, labels, steps, static_cast<int>(n), nullptr);
    loss_sum += st.loss_sum;
    correct += st.correct;
    count += st.count;
  }
  return {loss_sum / static_cast<double>(count),
          static_cast<double>(correct) / static_cast<double>(count)};
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const std::span<const Trajectory> data(train_set.trajectories);
  const int steps = common_length(data);
  const bool have_val = !val_set.trajectories.empty();
  if (have_val) common_length(val_set.trajectories);

  RngStream init_rng(cfg.seed, 0);
  TrainResult result;
  result.params = NetworkParams::random(cfg.cell, cfg.hidden, cfg.layers, cfg.encoding,
                                        std::sqrt(train_set.cfg.noise_variance()), init_rng);
  NetworkParams grads = result.params;
  AdamState adam;

  NetworkParams best = result.params;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    AdamConfig lr = cfg.adam;
    if (cfg.epochs > 1) {
      const double u = static_cast<double>(epoch - 1) / (cfg.epochs - 1);
      const double f = cfg.final_lr_fraction;
      lr.learning_rate *= f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
    }
    RngStream shuffle_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> part(order.data() + start, n);
      loss_sum += cfg.single_precision
                      ? train_batch<float>(result.params, data, part, steps, adam, cfg, lr, grads)
                      : train_batch<double>(result.params, data, part, steps, adam, cfg, lr, grads);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / (static_cast<double>(order.size()) * steps);
    if (have_val) {
      const EvalResult ev = evaluate_network(result.params, val_set.trajectories);
      rec.val_loss = ev.loss;
      rec.val_accuracy = ev.accuracy;
      if (cfg.keep_best && ev.loss < best_loss) {
        best_loss = ev.loss;
        best = result.params;
      }
    }
    result.params.validate();
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (cfg.keep_best && have_val && cfg.epochs > 0) result.params = best;
  return result;
}

void write_learning_curve_csv(std::span<const EpochRecord> curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write learning curve '" + path + "'");
  out.precision(10);
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& r : curve) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_accuracy << '\n';
  }
  if (!out) throw std::runtime_error("write failed for learning curve '" + path + "'");
}

}  // namespace cqec

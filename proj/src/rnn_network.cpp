// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "cqec/rnn.hpp"
#include "rnn_batch.hpp"

namespace cqec {

const char* to_string(CellKind cell) { return cell == CellKind::LSTM ? "lstm" : "gru"; }

CellKind cell_kind_from_string(const std::string& name) {
  if (name == "lstm" || name == "LSTM") return CellKind::LSTM;
  if (name == "gru" || name == "GRU") return CellKind::GRU;
  throw std::invalid_argument("unknown cell kind '" + name + "'");
}

const char* to_string(InitialEncoding enc) {
  return enc == InitialEncoding::Scalar ? "scalar" : "onehot";
}

InitialEncoding initial_encoding_from_string(const std::string& name) {
  if (name == "scalar") return InitialEncoding::Scalar;
  if (name == "onehot" || name == "one-hot") return InitialEncoding::OneHot;
  throw std::invalid_argument("unknown initial-state encoding '" + name + "'");
}

int input_width(InitialEncoding enc) { return enc == InitialEncoding::Scalar ? 3 : 10; }

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(wy.size() + by.size());
  for (int l = 0; l < layers; ++l) n += static_cast<std::size_t>(wx[l].size() + wh[l].size() + b[l].size());
  return n;
}

NetworkParams NetworkParams::zeros(CellKind cell, int hidden, int layers, InitialEncoding enc,
                                   double signal_scale) {
  if (hidden < 1 || layers < 1) throw std::invalid_argument("hidden size and layer count must be >= 1");
  if (!(signal_scale > 0.0)) throw std::invalid_argument("signal_scale must be positive");
  NetworkParams p;
  p.cell = cell;
  p.encoding = enc;
  p.hidden = hidden;
  p.layers = layers;
  p.signal_scale = signal_scale;
  const int g = p.gates() * hidden;
  for (int l = 0; l < layers; ++l) {
    p.wx.push_back(Eigen::MatrixXd::Zero(g, l == 0 ? p.input_size() : hidden));
    p.wh.push_back(Eigen::MatrixXd::Zero(g, hidden));
    p.b.push_back(Eigen::VectorXd::Zero(g));
  }
  p.wy = Eigen::MatrixXd::Zero(8, hidden);
  p.by = Eigen::VectorXd::Zero(8);
  return p;
}

NetworkParams NetworkParams::random(CellKind cell, int hidden, int layers, InitialEncoding enc,
                                    double signal_scale, RngStream& rng) {
  NetworkParams p = zeros(cell, hidden, layers, enc, signal_scale);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  const auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = k * (2.0 * rng.uniform() - 1.0);
    }
  };
  for (int l = 0; l < layers; ++l) {
    fill(p.wx[l]);
    fill(p.wh[l]);
    if (cell == CellKind::LSTM) p.b[l].segment(hidden, hidden).setOnes();
  }
  fill(p.wy);
  return p;
}

Eigen::VectorXd NetworkParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  const auto put = [&](const auto& m) {
    flat.segment(pos, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    pos += m.size();
  };
  for (int l = 0; l < layers; ++l) {
    put(wx[l]);
    put(wh[l]);
    put(b[l]);
  }
  put(wy);
  put(by);
  return flat;
}

void NetworkParams::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw std::invalid_argument("unflatten: size mismatch");
  }
  Eigen::Index pos = 0;
  const auto get = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(pos, m.size());
    pos += m.size();
  };
  for (int l = 0; l < layers; ++l) {
    get(wx[l]);
    get(wh[l]);
    get(b[l]);
  }
  get(wy);
  get(by);
}

void NetworkParams::validate() const {
  const int g = gates() * hidden;
  if (static_cast<int>(wx.size()) != layers || static_cast<int>(wh.size()) != layers ||
      static_cast<int>(b.size()) != layers) {
    throw std::invalid_argument("network: layer count mismatch");
  }
  for (int l = 0; l < layers; ++l) {
    const int in = l == 0 ? input_size() : hidden;
    if (wx[l].rows() != g || wx[l].cols() != in || wh[l].rows() != g || wh[l].cols() != hidden ||
        b[l].size() != g) {
      throw std::invalid_argument("network: bad shape in layer " + std::to_string(l));
    }
    if (!wx[l].allFinite() || !wh[l].allFinite() || !b[l].allFinite()) {
      throw std::invalid_argument("network: non-finite parameter in layer " + std::to_string(l));
    }
  }
  if (wy.rows() != 8 || wy.cols() != hidden || by.size() != 8) {
    throw std::invalid_argument("network: bad output layer shape");
  }
  if (!wy.allFinite() || !by.allFinite()) throw std::invalid_argument("network: non-finite output layer");
}

void encode_input(double i1, double i2, ErrorState initial, const NetworkParams& params,
                  double* out) {
  out[0] = i1 / params.signal_scale;
  out[1] = i2 / params.signal_scale;
  if (params.encoding == InitialEncoding::Scalar) {
    out[2] = initial.index() / 7.0;
  } else {
    for (int k = 0; k < 8; ++k) out[2 + k] = k == initial.index() ? 1.0 : 0.0;
  }
}

Eigen::VectorXd encode_input(double i1, double i2, ErrorState initial,
                             const NetworkParams& params) {
  Eigen::VectorXd x(params.input_size());
  encode_input(i1, i2, initial, params, x.data());
  return x;
}

HiddenState HiddenState::zeros(const NetworkParams& params) {
  HiddenState s;
  for (int l = 0; l < params.layers; ++l) {
    s.h.push_back(Eigen::VectorXd::Zero(params.hidden));
    if (params.cell == CellKind::LSTM) s.c.push_back(Eigen::VectorXd::Zero(params.hidden));
  }
  return s;
}

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Vector8 forward_step(const NetworkParams& p, const Eigen::VectorXd& x, HiddenState& s) {
  const int H = p.hidden;
  if (x.size() != p.input_size()) throw std::invalid_argument("forward_step: input width mismatch");
  Eigen::VectorXd in = x;
  Eigen::VectorXd z;
  for (int l = 0; l < p.layers; ++l) {
    if (p.cell == CellKind::LSTM) {
      z.noalias() = p.wx[l] * in;
      z.noalias() += p.wh[l] * s.h[l];
      z += p.b[l];
      for (int k = 0; k < 3 * H; ++k) z(k) = sig(z(k));
      for (int k = 3 * H; k < 4 * H; ++k) z(k) = std::tanh(z(k));
      s.c[l] = z.segment(H, H).cwiseProduct(s.c[l]) + z.head(H).cwiseProduct(z.tail(H));
      s.h[l] = z.segment(2 * H, H).cwiseProduct(s.c[l].array().tanh().matrix());
    } else {
      z.noalias() = p.wx[l] * in;
      z += p.b[l];
      z.head(2 * H).noalias() += p.wh[l].topRows(2 * H) * s.h[l];
      for (int k = 0; k < 2 * H; ++k) z(k) = sig(z(k));
      const Eigen::VectorXd rh = z.head(H).cwiseProduct(s.h[l]);
      z.tail(H).noalias() += p.wh[l].bottomRows(H) * rh;
      for (int k = 2 * H; k < 3 * H; ++k) z(k) = std::tanh(z(k));
      const auto u = z.segment(H, H).array();
      s.h[l] = ((1.0 - u) * z.tail(H).array() + u * s.h[l].array()).matrix();
    }
    in = s.h[l];
  }
  Vector8 logits = p.wy * in + p.by;
  logits = (logits.array() - logits.maxCoeff()).exp();
  return logits / logits.sum();
}

SequenceOutput forward(const NetworkParams& params, std::span<const Eigen::VectorXd> inputs,
                       HiddenState initial) {
  SequenceOutput out;
  out.final_state = std::move(initial);
  out.probs.reserve(inputs.size());
  for (const auto& x : inputs) out.probs.push_back(forward_step(params, x, out.final_state));
  return out;
}

double loss(std::span<const std::vector<Vector8>> probs, std::span<const std::vector<int>> labels,
            std::size_t* clamped) {
  if (probs.size() != labels.size()) throw std::invalid_argument("loss: batch size mismatch");
  double sum = 0.0;
  std::size_t count = 0, low = 0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (probs[n].size() != labels[n].size()) throw std::invalid_argument("loss: length mismatch");
    for (std::size_t t = 0; t < probs[n].size(); ++t) {
      double p = probs[n][t](labels[n][t]);
      if (p < 1e-12) {
        p = 1e-12;
        ++low;
      }
      sum -= std::log(p);
      ++count;
    }
  }
  if (clamped != nullptr) *clamped = low;
  if (count == 0) throw std::invalid_argument("loss: empty batch");
  return sum / static_cast<double>(count);
}

Sequence make_sequence(const Trajectory& traj, const NetworkParams& params) {
  Sequence s;
  s.inputs.reserve(traj.steps.size());
  s.labels.reserve(traj.steps.size());
  for (const StepRecord& r : traj.steps) {
    s.inputs.push_back(encode_input(r.i1, r.i2, traj.initial_state(), params));
    s.labels.push_back(r.true_state);
  }
  return s;
}

double loss_and_gradients(const NetworkParams& params, std::span<const Sequence> batch,
                          NetworkParams& grads) {
  params.validate();
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  const int steps = static_cast<int>(batch[0].inputs.size());
  const int bsz = static_cast<int>(batch.size());
  if (steps == 0) throw std::invalid_argument("loss_and_gradients: empty sequence");
  detail::Mat<double> x(params.input_size(), static_cast<Eigen::Index>(steps) * bsz);
  std::vector<int> labels(static_cast<std::size_t>(steps) * bsz);
  for (int n = 0; n < bsz; ++n) {
    if (static_cast<int>(batch[n].inputs.size()) != steps ||
        static_cast<int>(batch[n].labels.size()) != steps) {
      throw std::invalid_argument("loss_and_gradients: sequences must share one length");
    }
    for (int t = 0; t < steps; ++t) {
      x.col(static_cast<Eigen::Index>(t) * bsz + n) = batch[n].inputs[t];
      labels[static_cast<std::size_t>(t) * bsz + n] = batch[n].labels[t];
    }
  }
  const auto net = detail::Net<double>::from(params);
  auto g = detail::Net<double>::zeros_like(net);
  const detail::PassStats st = detail::run_batch(net, x, labels, steps, bsz, &g);
  grads = NetworkParams::zeros(params.cell, params.hidden, params.layers, params.encoding,
                               params.signal_scale);
  g.store_into(grads);
  return st.loss_sum / static_cast<double>(st.count);
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  Eigen::VectorXd w = params.flatten();
  const Eigen::VectorXd g = grads.flatten();
  if (g.size() != w.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
  if (state.m.size() != w.size()) {
    state.m = Eigen::VectorXd::Zero(w.size());
    state.v = Eigen::VectorXd::Zero(w.size());
    state.step = 0;
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  w.array() -= cfg.learning_rate * (state.m.array() / c1) /
               ((state.v.array() / c2).sqrt() + cfg.epsilon);
  params.unflatten(w);
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(const NetworkParams& p, std::ostream& out) {
  out << "cqec-rnn v1\n";
  out << "cell " << to_string(p.cell) << '\n';
  out << "encoding " << to_string(p.encoding) << '\n';
  out << "hidden " << p.hidden << '\n';
  out << "layers " << p.layers << '\n';
  out << std::setprecision(17) << "signal_scale " << p.signal_scale << '\n';
  const auto tensor = [&](const std::string& name, const Eigen::MatrixXd& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
      out << '\n';
    }
  };
  for (int l = 0; l < p.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    tensor(pre + "wx", p.wx[l]);
    tensor(pre + "wh", p.wh[l]);
    tensor(pre + "b", p.b[l]);
  }
  tensor("out.w", p.wy);
  tensor("out.b", p.by);
}

NetworkParams read_checkpoint(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || line != "cqec-rnn v1") {
    throw std::runtime_error(origin + ": not a cqec-rnn v1 checkpoint");
  }
  std::string key, value;
  CellKind cell = CellKind::LSTM;
  InitialEncoding enc = InitialEncoding::Scalar;
  int hidden = 0, layers = 0;
  double scale = 1.0;
  for (int i = 0; i < 5; ++i) {
    if (!(in >> key >> value)) throw std::runtime_error(origin + ": truncated header");
    if (key == "cell") cell = cell_kind_from_string(value);
    else if (key == "encoding") enc = initial_encoding_from_string(value);
    else if (key == "hidden") hidden = std::stoi(value);
    else if (key == "layers") layers = std::stoi(value);
    else if (key == "signal_scale") scale = std::stod(value);
    else throw std::runtime_error(origin + ": unknown header key '" + key + "'");
  }
  NetworkParams p = NetworkParams::zeros(cell, hidden, layers, enc, scale);
  const auto tensor = [&](const std::string& name, auto& m) {
    std::string tag, got;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> got >> rows >> cols) || tag != "tensor" || got != name) {
      throw std::runtime_error(origin + ": expected tensor '" + name + "'");
    }
    if (rows != m.rows() || cols != m.cols()) {
      throw std::runtime_error(origin + ": tensor '" + name + "' has the wrong shape");
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!(in >> m(i, j))) throw std::runtime_error(origin + ": truncated tensor '" + name + "'");
      }
    }
  };
  for (int l = 0; l < layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    tensor(pre + "wx", p.wx[l]);
    tensor(pre + "wh", p.wh[l]);
    tensor(pre + "b", p.b[l]);
  }
  tensor("out.w", p.wy);
  tensor("out.b", p.by);
  p.validate();
  return p;
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  write_checkpoint(params, out);
  if (!out) throw std::runtime_error("write failed for checkpoint '" + path + "'");
}

NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in, path);
}

}  // namespace cqec

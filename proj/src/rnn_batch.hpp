// SPDX-License-Identifier: Apache-2.0
//
// Batched forward/backward passes shared by the gradient API and the
// trainer. Inputs of a batch of B sequences of length T are packed as an
// (in x T*B) matrix whose column t*B + n holds step t of sequence n, so the
// columns of one step are contiguous.

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cqec/rnn.hpp"

namespace cqec::detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct Net {
  CellKind cell = CellKind::LSTM;
  int hidden = 0;
  std::vector<Mat<T>> wx, wh;
  std::vector<Vec<T>> b;
  Mat<T> wy;
  Vec<T> by;

  static Net from(const NetworkParams& p) {
    Net n;
    n.cell = p.cell;
    n.hidden = p.hidden;
    for (int l = 0; l < p.layers; ++l) {
      n.wx.push_back(p.wx[l].cast<T>());
      n.wh.push_back(p.wh[l].cast<T>());
      n.b.push_back(p.b[l].cast<T>());
    }
    n.wy = p.wy.cast<T>();
    n.by = p.by.cast<T>();
    return n;
  }

  static Net zeros_like(const Net& o) {
    Net n;
    n.cell = o.cell;
    n.hidden = o.hidden;
    for (std::size_t l = 0; l < o.wx.size(); ++l) {
      n.wx.push_back(Mat<T>::Zero(o.wx[l].rows(), o.wx[l].cols()));
      n.wh.push_back(Mat<T>::Zero(o.wh[l].rows(), o.wh[l].cols()));
      n.b.push_back(Vec<T>::Zero(o.b[l].size()));
    }
    n.wy = Mat<T>::Zero(o.wy.rows(), o.wy.cols());
    n.by = Vec<T>::Zero(o.by.size());
    return n;
  }

  void store_into(NetworkParams& p) const {
    for (std::size_t l = 0; l < wx.size(); ++l) {
      p.wx[l] = wx[l].template cast<double>();
      p.wh[l] = wh[l].template cast<double>();
      p.b[l] = b[l].template cast<double>();
    }
    p.wy = wy.template cast<double>();
    p.by = by.template cast<double>();
  }
};

template <typename T>
struct LayerTape {
  Mat<T> act;  // activated gates, G*H x TB
  Mat<T> c;    // LSTM cell, H x TB
  Mat<T> tc;   // tanh(c)
  Mat<T> rh;   // GRU r * h_prev
  Mat<T> h;    // outputs, H x TB
};

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void forward_layer(const Net<T>& net, int l, const Mat<T>& in, int steps, int batch,
                   LayerTape<T>& tape) {
  const int H = net.hidden;
  const int G = net.cell == CellKind::LSTM ? 4 : 3;
  const Eigen::Index tb = static_cast<Eigen::Index>(steps) * batch;
  tape.act.resize(G * H, tb);
  tape.act.noalias() = net.wx[l] * in;
  tape.act.colwise() += net.b[l];
  tape.h.resize(H, tb);
  Mat<T> hprev = Mat<T>::Zero(H, batch);
  if (net.cell == CellKind::LSTM) {
    tape.c.resize(H, tb);
    tape.tc.resize(H, tb);
    Mat<T> cprev = Mat<T>::Zero(H, batch);
    Mat<T> z(G * H, batch);
    for (int t = 0; t < steps; ++t) {
      auto a = tape.act.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      z.noalias() = net.wh[l] * hprev;
      a += z;
      a.topRows(3 * H) = a.topRows(3 * H).unaryExpr([](T v) { return sigmoid(v); });
      a.bottomRows(H) = a.bottomRows(H).array().tanh();
      auto c = tape.c.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      auto tc = tape.tc.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      auto h = tape.h.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      c = a.middleRows(H, H).cwiseProduct(cprev) + a.topRows(H).cwiseProduct(a.bottomRows(H));
      tc = c.array().tanh();
      h = a.middleRows(2 * H, H).cwiseProduct(tc);
      cprev = c;
      hprev = h;
    }
  } else {
    tape.rh.resize(H, tb);
    Mat<T> zru(2 * H, batch);
    Mat<T> zn(H, batch);
    for (int t = 0; t < steps; ++t) {
      auto a = tape.act.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      zru.noalias() = net.wh[l].topRows(2 * H) * hprev;
      a.topRows(2 * H) += zru;
      a.topRows(2 * H) = a.topRows(2 * H).unaryExpr([](T v) { return sigmoid(v); });
      auto rh = tape.rh.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      rh = a.topRows(H).cwiseProduct(hprev);
      zn.noalias() = net.wh[l].bottomRows(H) * rh;
      a.bottomRows(H) += zn;
      a.bottomRows(H) = a.bottomRows(H).array().tanh();
      auto h = tape.h.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
      const auto u = a.middleRows(H, H);
      const auto n = a.bottomRows(H);
      h = (Mat<T>::Ones(H, batch) - u).cwiseProduct(n) + u.cwiseProduct(hprev);
      hprev = h;
    }
  }
}

/// Accumulates parameter gradients of layer l into `g` and returns the
/// gradient with respect to the layer input when `need_input` is set.
template <typename T>
void backward_layer(const Net<T>& net, int l, const Mat<T>& in, const LayerTape<T>& tape,
                    const Mat<T>& dh_out, int steps, int batch, Net<T>& g, Mat<T>* d_in) {
  const int H = net.hidden;
  const int G = net.cell == CellKind::LSTM ? 4 : 3;
  const Eigen::Index tb = static_cast<Eigen::Index>(steps) * batch;
  // Reused across calls: batch buffers are large and reallocating them on
  // every pass costs more in page faults than the arithmetic.
  static thread_local Mat<T> dz;
  dz.resize(G * H, tb);
  Mat<T> dh_next = Mat<T>::Zero(H, batch);
  Mat<T> zeros = Mat<T>::Zero(H, batch);
  if (net.cell == CellKind::LSTM) {
    Mat<T> dc_next = Mat<T>::Zero(H, batch);
    Mat<T> dh(H, batch), dc(H, batch);
    for (int t = steps - 1; t >= 0; --t) {
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      const auto a = tape.act.middleCols(col, batch);
      const auto i = a.topRows(H);
      const auto f = a.middleRows(H, H);
      const auto o = a.middleRows(2 * H, H);
      const auto gg = a.bottomRows(H);
      const auto tc = tape.tc.middleCols(col, batch);
      dh = dh_out.middleCols(col, batch) + dh_next;
      dc = dh.cwiseProduct(o).cwiseProduct((Mat<T>::Ones(H, batch) - tc.cwiseProduct(tc))) + dc_next;
      auto d = dz.middleCols(col, batch);
      const Mat<T> cprev = t > 0 ? Mat<T>(tape.c.middleCols(col - batch, batch)) : zeros;
      d.topRows(H) = dc.cwiseProduct(gg).cwiseProduct(i.cwiseProduct(Mat<T>::Ones(H, batch) - i));
      d.middleRows(H, H) =
          dc.cwiseProduct(cprev).cwiseProduct(f.cwiseProduct(Mat<T>::Ones(H, batch) - f));
      d.middleRows(2 * H, H) =
          dh.cwiseProduct(tc).cwiseProduct(o.cwiseProduct(Mat<T>::Ones(H, batch) - o));
      d.bottomRows(H) =
          dc.cwiseProduct(i).cwiseProduct(Mat<T>::Ones(H, batch) - gg.cwiseProduct(gg));
      dh_next.noalias() = net.wh[l].transpose() * d;
      dc_next = dc.cwiseProduct(f);
    }
    if (steps > 1) {
      g.wh[l].noalias() +=
          dz.rightCols(tb - batch) * tape.h.leftCols(tb - batch).transpose();
    }
  } else {
    Mat<T> dh(H, batch), dhp(H, batch), drh(H, batch);
    for (int t = steps - 1; t >= 0; --t) {
      const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
      const auto a = tape.act.middleCols(col, batch);
      const auto r = a.topRows(H);
      const auto u = a.middleRows(H, H);
      const auto n = a.bottomRows(H);
      const Mat<T> hprev = t > 0 ? Mat<T>(tape.h.middleCols(col - batch, batch)) : zeros;
      dh = dh_out.middleCols(col, batch) + dh_next;
      auto d = dz.middleCols(col, batch);
      // n block
      d.bottomRows(H) = dh.cwiseProduct(Mat<T>::Ones(H, batch) - u)
                            .cwiseProduct(Mat<T>::Ones(H, batch) - n.cwiseProduct(n));
      // u block
      d.middleRows(H, H) = dh.cwiseProduct(hprev - n)
                               .cwiseProduct(u.cwiseProduct(Mat<T>::Ones(H, batch) - u));
      dhp = dh.cwiseProduct(u);
      drh.noalias() = net.wh[l].bottomRows(H).transpose() * d.bottomRows(H);
      dhp += drh.cwiseProduct(r);
      d.topRows(H) = drh.cwiseProduct(hprev).cwiseProduct(r.cwiseProduct(Mat<T>::Ones(H, batch) - r));
      dhp.noalias() += net.wh[l].topRows(2 * H).transpose() * d.topRows(2 * H);
      dh_next = dhp;
    }
    if (steps > 1) {
      g.wh[l].topRows(2 * H).noalias() +=
          dz.topRows(2 * H).rightCols(tb - batch) * tape.h.leftCols(tb - batch).transpose();
    }
    g.wh[l].bottomRows(H).noalias() += dz.bottomRows(H) * tape.rh.transpose();
  }
  g.wx[l].noalias() += dz * in.transpose();
  g.b[l] += dz.rowwise().sum();
  if (d_in != nullptr) {
    d_in->resize(in.rows(), tb);
    d_in->noalias() = net.wx[l].transpose() * dz;
  }
}

struct PassStats {
  double loss_sum = 0.0;  // sum over steps of -log p
  std::size_t correct = 0;
  std::size_t count = 0;
  std::size_t clamped = 0;
};

/// Forward pass over a packed batch; with `grads` set, also backpropagates
/// the mean loss over all T*B steps and adds the result into `grads`.
template <typename T>
PassStats run_batch(const Net<T>& net, const Mat<T>& x, const std::vector<int>& labels, int steps,
                    int batch, Net<T>* grads) {
  const int L = static_cast<int>(net.wx.size());
  static thread_local std::vector<LayerTape<T>> tapes;
  static thread_local Mat<T> logits, dh, d_in;
  tapes.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    forward_layer(net, l, l == 0 ? x : tapes[l - 1].h, steps, batch, tapes[l]);
  }
  const Eigen::Index tb = static_cast<Eigen::Index>(steps) * batch;
  logits.resize(net.wy.rows(), tb);
  logits.noalias() = net.wy * tapes[L - 1].h;
  logits.colwise() += net.by;
  PassStats stats;
  stats.count = static_cast<std::size_t>(tb);
  // Softmax in place, column by column.
  for (Eigen::Index j = 0; j < tb; ++j) {
    auto col = logits.col(j);
    Eigen::Index arg = 0;
    const T top = col.maxCoeff(&arg);
    col = (col.array() - top).exp();
    col /= col.sum();
    const int y = labels[static_cast<std::size_t>(j)];
    if (arg == y) ++stats.correct;
    double p = static_cast<double>(col(y));
    if (p < 1e-12) {
      p = 1e-12;
      ++stats.clamped;
    }
    stats.loss_sum -= std::log(p);
  }
  if (grads == nullptr) return stats;

  // d loss / d logits = (p - onehot) / (T*B)
  const T scale = T(1) / static_cast<T>(tb);
  for (Eigen::Index j = 0; j < tb; ++j) logits(labels[static_cast<std::size_t>(j)], j) -= T(1);
  logits *= scale;
  grads->wy.noalias() += logits * tapes[L - 1].h.transpose();
  grads->by += logits.rowwise().sum();
  dh.resize(net.wy.cols(), tb);
  dh.noalias() = net.wy.transpose() * logits;
  for (int l = L - 1; l >= 0; --l) {
    backward_layer(net, l, l == 0 ? x : tapes[l - 1].h, tapes[l], dh, steps, batch, *grads,
                   l > 0 ? &d_in : nullptr);
    if (l > 0) dh.swap(d_in);
  }
  return stats;
}

}  // namespace cqec::detail

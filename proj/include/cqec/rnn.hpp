// SPDX-License-Identifier: Apache-2.0
//
// Stacked LSTM/GRU decoder: parameters, forward pass, cross-entropy loss,
// backpropagation through time, ADAM, mini-batch training, checkpoints and
// the active-correction wrapper with signal re-calibration.
//
// Gate layout. Every layer stores Wx (G*H x in), Wh (G*H x H) and b (G*H),
// with row blocks ordered i, f, o, g for LSTM (G = 4) and r, u, n for GRU
// (G = 3). The GRU candidate reads the hidden state through the reset gate:
// n = tanh(Wx_n x + Wh_n (r * h) + b_n), h' = (1 - u) * n + u * h.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqec/decoder.hpp"
#include "cqec/signal.hpp"

namespace cqec {

enum class CellKind { LSTM, GRU };
enum class InitialEncoding { Scalar, OneHot };

const char* to_string(CellKind cell);
CellKind cell_kind_from_string(const std::string& name);
const char* to_string(InitialEncoding enc);
InitialEncoding initial_encoding_from_string(const std::string& name);

/// Width of the input vector: two signals plus the initial-state slot(s).
int input_width(InitialEncoding enc);

struct NetworkParams {
  CellKind cell = CellKind::LSTM;
  InitialEncoding encoding = InitialEncoding::Scalar;
  int hidden = 32;
  int layers = 2;
  /// Raw signals are divided by this before entering the network.
  double signal_scale = 1.0;

  std::vector<Eigen::MatrixXd> wx;
  std::vector<Eigen::MatrixXd> wh;
  std::vector<Eigen::VectorXd> b;
  Eigen::MatrixXd wy;  // 8 x H
  Eigen::VectorXd by;  // 8

  int gates() const { return cell == CellKind::LSTM ? 4 : 3; }
  int input_size() const { return input_width(encoding); }
  std::size_t parameter_count() const;

  /// All-zero parameters of the given shape.
  static NetworkParams zeros(CellKind cell, int hidden, int layers, InitialEncoding enc,
                             double signal_scale);
  /// Weights uniform in +-1/sqrt(H), zero biases, forget-gate bias +1.
  static NetworkParams random(CellKind cell, int hidden, int layers, InitialEncoding enc,
                              double signal_scale, RngStream& rng);

  /// Every parameter in a fixed order: per layer wx, wh, b, then wy, by
  /// (matrices column-major).
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  /// Throws std::invalid_argument on inconsistent shapes or non-finite values.
  void validate() const;
};

/// Fills `out` (input_width entries) for one step.
void encode_input(double i1, double i2, ErrorState initial, const NetworkParams& params,
                  double* out);
Eigen::VectorXd encode_input(double i1, double i2, ErrorState initial,
                             const NetworkParams& params);

struct HiddenState {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;  // LSTM only

  static HiddenState zeros(const NetworkParams& params);
};

/// One step of the stacked cell plus the dense softmax output. Advances
/// `state` and returns the eight state probabilities.
Vector8 forward_step(const NetworkParams& params, const Eigen::VectorXd& x, HiddenState& state);

struct SequenceOutput {
  std::vector<Vector8> probs;
  HiddenState final_state;
};

SequenceOutput forward(const NetworkParams& params, std::span<const Eigen::VectorXd> inputs,
                       HiddenState initial);

/// -(1/NT) sum log p_n(s_t); probabilities below 1e-12 are clamped and
/// counted in `clamped`.
double loss(std::span<const std::vector<Vector8>> probs, std::span<const std::vector<int>> labels,
            std::size_t* clamped = nullptr);

/// Encoded inputs and labels of one training sequence.
struct Sequence {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> labels;
};

Sequence make_sequence(const Trajectory& traj, const NetworkParams& params);

/// Loss of a batch of equal-length sequences and its exact gradient by
/// backpropagation through the full sequence length, in double precision.
/// `grads` receives the gradient with the same shapes as `params`.
double loss_and_gradients(const NetworkParams& params, std::span<const Sequence> batch,
                          NetworkParams& grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

/// One bias-corrected ADAM update of `params`.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               const AdamConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 32;
  int epochs = 16;
  AdamConfig adam{.learning_rate = 3e-3};
  std::uint64_t seed = 1;
  int hidden = 32;
  int layers = 2;
  CellKind cell = CellKind::LSTM;
  InitialEncoding encoding = InitialEncoding::OneHot;
  /// Single-precision arithmetic for the training passes (parameters and
  /// optimizer state stay in double).
  bool single_precision = true;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  /// Cosine decay of the learning rate over the epochs down to this fraction;
  /// 1 keeps it constant.
  double final_lr_fraction = 0.05;
  /// Return the parameters with the lowest validation loss instead of the
  /// last ones (needs a validation set).
  bool keep_best = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochRecord> curve;
};

struct EvalResult {
  double loss = 0.0;
  /// Fraction of steps whose argmax equals the true state.
  double accuracy = 0.0;
};

EvalResult evaluate_network(const NetworkParams& params, std::span<const Trajectory> data,
                            std::size_t batch_size = 256);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch ADAM over shuffled trajectories. Trajectories in one dataset
/// must have equal length. Deterministic given cfg.seed.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void write_learning_curve_csv(std::span<const EpochRecord> curve, const std::string& path);

/// Text checkpoint: a header of key/value lines, then one `tensor name rows
/// cols` line per tensor followed by its values row by row.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);
void write_checkpoint(const NetworkParams& params, std::ostream& out);
NetworkParams read_checkpoint(std::istream& in, const std::string& origin = "<stream>");

// ---------------------------------------------------------------------------
// Active correction

/// I1' = (-1)^(N1+N2) I1, I2' = (-1)^(N2+N3) I2.
std::array<double, 2> recalibrate(double i1, double i2, const std::array<int, 3>& counts);

struct ActiveWrapperState {
  std::array<int, 3> counts{0, 0, 0};
  ErrorState initial;
  ErrorState last_prediction;
  CorrectionGate gate;

  ActiveWrapperState() = default;
  ActiveWrapperState(ErrorState initial, int tau_ignore, int tau_streak);
};

struct ActiveStepResult {
  ErrorState prediction;
  /// XOR mask of the single-qubit corrections issued on this step.
  int correction = 0;
  bool ignored = false;
};

/// Feeds one measurement pair through the re-calibration, the network and
/// the ignore/streak gate. A confirmed prediction change is corrected
/// relative to the previous prediction; multi-bit changes decompose into
/// several single-qubit corrections issued together.
ActiveStepResult active_step(ActiveWrapperState& wrapper, const NetworkParams& params,
                             HiddenState& hidden, double i1, double i2);

class RnnDecoder final : public Decoder {
 public:
  RnnDecoder(std::shared_ptr<const NetworkParams> params, int tau_ignore = 0, int tau_streak = 1);

  void reset(ErrorState initial, DecoderMode mode) override;
  StepResult step(double i1, double i2) override;
  ErrorState estimate() const override;
  std::string name() const override { return "rnn"; }
  std::unique_ptr<Decoder> clone() const override;

  const ActiveWrapperState& wrapper() const { return wrapper_; }
  const HiddenState& hidden() const { return hidden_; }

 private:
  std::shared_ptr<const NetworkParams> params_;
  int tau_ignore_;
  int tau_streak_;
  DecoderMode mode_ = DecoderMode::Tracking;
  ActiveWrapperState wrapper_;
  HiddenState hidden_;
  Eigen::VectorXd x_;
};

}  // namespace cqec

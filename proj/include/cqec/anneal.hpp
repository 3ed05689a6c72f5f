// SPDX-License-Identifier: Apache-2.0
//
// Coherent three-qubit annealing under bit-flip jumps, first-order Magnus
// stepping and closed-loop decoding, plus the analytic population curves of
// the uncorrected Markov chains.
//
// Basis ordering follows ErrorState: index bit b_q (qubit 1 most significant)
// is the Z eigenbit of qubit q, with Z_q = (-1)^(b_q).

#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cqec/decoder.hpp"
#include "cqec/signal.hpp"

namespace cqec {

using Complex = std::complex<double>;
using PureState = Eigen::Matrix<Complex, 8, 1>;
using Matrix8c = Eigen::Matrix<Complex, 8, 8>;
using Qubit = Eigen::Matrix<Complex, 2, 1>;
using Matrix2c = Eigen::Matrix<Complex, 2, 2>;

struct AnnealConfig {
  double omega0 = 0.04 * 4.7e6;  // rad/s
  double t_total = 120e-6;       // s
  double dt = 3.2e-8;            // s
  double gamma = 0.0;            // 1/s per qubit

  int steps() const;
  void validate() const;
};

/// H(t) = -omega0 [a(t) X1X2X3 + b(t) (Z1+Z2+Z3)/3], a = 1 - t/T, b = t/T.
Eigen::Matrix<double, 8, 8> hamiltonian(double t, const AnnealConfig& cfg);

/// Code-subspace restriction h(t) = -omega0 [a(t) sx + b(t) sz].
Eigen::Matrix2d logical_hamiltonian(double t, const AnnealConfig& cfg);

/// exp(-i H dt) of a real symmetric H via its eigendecomposition.
Matrix8c unitary_of(const Eigen::Matrix<double, 8, 8>& h, double dt);
Matrix2c unitary_of(const Eigen::Matrix2d& h, double dt);

/// psi <- exp(-i H(t + dt/2) dt) psi.
PureState magnus_step(const PureState& psi, double t, double dt, const AnnealConfig& cfg);

/// Applies the X flips in `mask` (bit convention of ErrorState).
PureState apply_flips(const PureState& psi, int mask);

/// <psi| Z_a Z_b |psi> for the stabilizer k = 1 (Z1Z2) or 2 (Z2Z3).
double stabilizer_expectation(const PureState& psi, int k);

/// Norm of [H, Z1Z2] + [H, Z2Z3] (Frobenius).
double stabilizer_commutator_norm(const Eigen::Matrix<double, 8, 8>& h);

/// (|000> + |111>)/sqrt(2).
PureState logical_plus();

/// Embeds a logical qubit a|0_L> + b|1_L>.
PureState embed_logical(const Qubit& q);

/// Per-step midpoint propagators of the full and the logical Hamiltonian,
/// shared by every trajectory of one configuration.
class PropagatorTable {
 public:
  explicit PropagatorTable(const AnnealConfig& cfg);

  const AnnealConfig& config() const { return cfg_; }
  int steps() const { return static_cast<int>(full_.size()); }
  const Matrix8c& full(int k) const { return full_[k]; }
  const Matrix2c& logical(int k) const { return logical_[k]; }

 private:
  AnnealConfig cfg_;
  std::vector<Matrix8c> full_;
  std::vector<Matrix2c> logical_;
};

struct CorrectionEvent {
  int step = 0;
  int mask = 0;
};

struct AnnealTrajectory {
  PureState final_state;
  /// Fidelity with the noiseless target after the final recovery.
  double fidelity = 0.0;
  int flips = 0;
  std::vector<CorrectionEvent> corrections;
  /// Largest deviation of |<S_k>| from 1 over the run.
  double max_stabilizer_deviation = 0.0;
};

/// Noiseless code-subspace evolution of `initial` over the whole schedule.
Qubit evolve_logical(const PropagatorTable& table, const Qubit& initial);

/// One closed-loop run starting from (|0_L> + |1_L>)/sqrt(2). Per step:
/// sample flips (probability gamma*dt per qubit), Magnus step, measure the
/// syndromes of the current error subspace, feed the decoder (if any) and
/// apply its corrections at once. At the end the syndrome-indicated single
/// flip is undone before comparing with `target`.
AnnealTrajectory evolve_trajectory(const PropagatorTable& table, const SchemeConfig& signal,
                                   const TransientLibrary& transients, Decoder* decoder,
                                   const PureState& target, std::size_t sequence_index,
                                   RngStream& rng,
                                   std::optional<InjectedFlip> injected = std::nullopt);

struct TargetAndBare {
  Qubit target;          // noiseless logical evolution of |+>
  Qubit bare_target;     // noiseless evolution of |0>
  double bare_infidelity = 0.0;
};

/// Noiseless targets and one unencoded-qubit sample with bit-flip jumps at
/// rate gamma starting from |0>.
TargetAndBare target_and_bare(const PropagatorTable& table, RngStream& rng);

struct ReductionFactor {
  double value = 0.0;
  double stderr_ = 0.0;
  bool defined = false;
};

/// (1 - F_unencoded) / (1 - F); undefined when the encoded infidelity is not
/// positive. Standard error by first-order error propagation of independent
/// means.
ReductionFactor reduction_factor(double infid_unencoded, double infid_encoded,
                                 double stderr_unencoded = 0.0, double stderr_encoded = 0.0);

/// Uncorrected P_exc(T) from |111>: damping (3e^{gT} - 2) e^{-3gT}, bit-flip
/// e^{-3gT} cosh^2(gT) [3 sinh(gT) + cosh(gT)].
double analytic_pexc(ErrorKind kind, double gamma, double t);

}  // namespace cqec

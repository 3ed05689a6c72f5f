// SPDX-License-Identifier: Apache-2.0

#include "cqec/anneal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace cqec {

int AnnealConfig::steps() const { return static_cast<int>(std::llround(t_total / dt)); }

void AnnealConfig::validate() const {
  if (!(omega0 > 0.0) || !(t_total > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("omega0, t_total and dt must be positive");
  }
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be non-negative");
  if (steps() < 1) throw std::invalid_argument("t_total shorter than one step");
}

Eigen::Matrix<double, 8, 8> hamiltonian(double t, const AnnealConfig& cfg) {
  const double a = 1.0 - t / cfg.t_total;
  const double b = t / cfg.t_total;
  Eigen::Matrix<double, 8, 8> h = Eigen::Matrix<double, 8, 8>::Zero();
  for (int s = 0; s < 8; ++s) {
    h(s ^ 7, s) = -cfg.omega0 * a;
    const int ones = std::popcount(static_cast<unsigned>(s));
    h(s, s) = -cfg.omega0 * b * (3 - 2 * ones) / 3.0;
  }
  return h;
}

Eigen::Matrix2d logical_hamiltonian(double t, const AnnealConfig& cfg) {
  const double a = 1.0 - t / cfg.t_total;
  const double b = t / cfg.t_total;
  Eigen::Matrix2d h;
  h << -cfg.omega0 * b, -cfg.omega0 * a, -cfg.omega0 * a, cfg.omega0 * b;
  return h;
}

namespace {

template <int N>
Eigen::Matrix<Complex, N, N> unitary_impl(const Eigen::Matrix<double, N, N>& h, double dt) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  Eigen::Matrix<Complex, N, 1> phases;
  for (int k = 0; k < N; ++k) phases(k) = std::polar(1.0, -es.eigenvalues()(k) * dt);
  const Eigen::Matrix<Complex, N, N> v = es.eigenvectors().template cast<Complex>();
  return v * phases.asDiagonal() * v.transpose();
}

}  // namespace

Matrix8c unitary_of(const Eigen::Matrix<double, 8, 8>& h, double dt) { return unitary_impl<8>(h, dt); }
Matrix2c unitary_of(const Eigen::Matrix2d& h, double dt) { return unitary_impl<2>(h, dt); }

PureState magnus_step(const PureState& psi, double t, double dt, const AnnealConfig& cfg) {
  return unitary_of(hamiltonian(t + dt / 2.0, cfg), dt) * psi;
}

PureState apply_flips(const PureState& psi, int mask) {
  PureState out;
  for (int s = 0; s < 8; ++s) out(s) = psi(s ^ (mask & 7));
  return out;
}

double stabilizer_expectation(const PureState& psi, int k) {
  if (k != 1 && k != 2) throw std::invalid_argument("stabilizer index must be 1 or 2");
  double e = 0.0;
  for (int s = 0; s < 8; ++s) {
    const Syndromes syn = syndromes_of(ErrorState(s));
    e += std::norm(psi(s)) * (k == 1 ? syn.s1 : syn.s2);
  }
  return e;
}

double stabilizer_commutator_norm(const Eigen::Matrix<double, 8, 8>& h) {
  Eigen::Matrix<double, 8, 8> z12 = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 8> z23 = Eigen::Matrix<double, 8, 8>::Zero();
  for (int s = 0; s < 8; ++s) {
    const Syndromes syn = syndromes_of(ErrorState(s));
    z12(s, s) = syn.s1;
    z23(s, s) = syn.s2;
  }
  return (h * z12 - z12 * h).norm() + (h * z23 - z23 * h).norm();
}

PureState embed_logical(const Qubit& q) {
  PureState psi = PureState::Zero();
  psi(0) = q(0);
  psi(7) = q(1);
  return psi;
}

PureState logical_plus() {
  const double r = 1.0 / std::sqrt(2.0);
  return embed_logical(Qubit(r, r));
}

PropagatorTable::PropagatorTable(const AnnealConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int n = cfg_.steps();
  full_.reserve(n);
  logical_.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double mid = (k + 0.5) * cfg_.dt;
    full_.push_back(unitary_of(hamiltonian(mid, cfg_), cfg_.dt));
    logical_.push_back(unitary_of(logical_hamiltonian(mid, cfg_), cfg_.dt));
  }
}

Qubit evolve_logical(const PropagatorTable& table, const Qubit& initial) {
  Qubit q = initial;
  for (int k = 0; k < table.steps(); ++k) q = table.logical(k) * q;
  return q;
}

AnnealTrajectory evolve_trajectory(const PropagatorTable& table, const SchemeConfig& signal,
                                   const TransientLibrary& transients, Decoder* decoder,
                                   const PureState& target, std::size_t sequence_index,
                                   RngStream& rng, std::optional<InjectedFlip> injected) {
  const AnnealConfig& cfg = table.config();
  const double p_flip = cfg.gamma * cfg.dt;
  AnnealTrajectory out;
  PureState psi = logical_plus();
  int err = 0;  // net flip pattern relative to the code subspace
  SignalSource source(signal, &transients, sequence_index, ErrorState(0));
  if (decoder != nullptr) decoder->reset(ErrorState(0), DecoderMode::Active);

  for (int k = 0; k < table.steps(); ++k) {
    int mask = 0;
    for (int q = 1; q <= 3; ++q) {
      if (rng.bernoulli(p_flip)) mask |= flip_mask(q);
    }
    if (injected && injected->step == k) mask ^= flip_mask(injected->qubit);
    if (mask != 0) {
      psi = apply_flips(psi, mask);
      err ^= mask;
      out.flips += std::popcount(static_cast<unsigned>(mask));
    }
    psi = table.full(k) * psi;
    psi.normalize();

    const Syndromes expected = syndromes_of(ErrorState(err));
    out.max_stabilizer_deviation =
        std::max({out.max_stabilizer_deviation,
                  std::abs(stabilizer_expectation(psi, 1) - expected.s1),
                  std::abs(stabilizer_expectation(psi, 2) - expected.s2)});

    const Measurement m = source.measure(ErrorState(err), rng);
    if (decoder != nullptr) {
      const StepResult r = decoder->step(m.i1, m.i2);
      if (r.correction != 0) {
        psi = apply_flips(psi, r.correction);
        err ^= r.correction;
        out.corrections.push_back({k, r.correction});
      }
    }
  }
  // Final recovery: undo the single flip indicated by the syndromes.
  psi = apply_flips(psi, correcting_mask(syndromes_of(ErrorState(err))));
  out.final_state = psi;
  out.fidelity = std::norm(target.dot(psi));
  return out;
}

TargetAndBare target_and_bare(const PropagatorTable& table, RngStream& rng) {
  const AnnealConfig& cfg = table.config();
  TargetAndBare out;
  const double r = 1.0 / std::sqrt(2.0);
  out.target = evolve_logical(table, Qubit(r, r));
  out.bare_target = evolve_logical(table, Qubit(1.0, 0.0));
  const double p_flip = cfg.gamma * cfg.dt;
  Qubit q(1.0, 0.0);
  for (int k = 0; k < table.steps(); ++k) {
    if (rng.bernoulli(p_flip)) std::swap(q(0), q(1));
    q = table.logical(k) * q;
  }
  q.normalize();
  out.bare_infidelity = 1.0 - std::norm(out.bare_target.dot(q));
  return out;
}

ReductionFactor reduction_factor(double infid_unencoded, double infid_encoded,
                                 double stderr_unencoded, double stderr_encoded) {
  ReductionFactor rf;
  if (!(infid_encoded > 0.0)) return rf;
  rf.defined = true;
  rf.value = infid_unencoded / infid_encoded;
  double rel = std::pow(stderr_encoded / infid_encoded, 2);
  if (infid_unencoded > 0.0) rel += std::pow(stderr_unencoded / infid_unencoded, 2);
  rf.stderr_ = std::abs(rf.value) * std::sqrt(rel);
  return rf;
}

double analytic_pexc(ErrorKind kind, double gamma, double t) {
  if (!(gamma * t >= 0.0)) throw std::invalid_argument("analytic_pexc: gamma*T must be >= 0");
  const double x = gamma * t;
  if (kind == ErrorKind::Damping) return (3.0 * std::exp(x) - 2.0) * std::exp(-3.0 * x);
  const double c = std::cosh(x), s = std::sinh(x);
  return std::exp(-3.0 * x) * c * c * (3.0 * s + c);
}

}  // namespace cqec

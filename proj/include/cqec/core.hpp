// SPDX-License-Identifier: Apache-2.0
//
// State and syndrome algebra of the three-qubit bit-flip code, the Markov
// error models acting on it, and the per-trajectory random streams shared by
// every simulation in the library.

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cqec {

/// Basis state reached from |000> by the net bit-flip pattern. Bit b_q of the
/// index (q = 1, 2, 3, most-significant first) marks a net flip on qubit q.
class ErrorState {
 public:
  constexpr ErrorState() = default;
  constexpr explicit ErrorState(int index) : index_(static_cast<std::uint8_t>(index)) {
    if (index < 0 || index > 7) throw std::invalid_argument("error state index outside [0,7]");
  }

  static constexpr int kCount = 8;

  constexpr int index() const { return index_; }
  /// Net-flip indicator of qubit q (1..3).
  constexpr int bit(int qubit) const { return (index_ >> (3 - qubit)) & 1; }

  friend constexpr bool operator==(ErrorState a, ErrorState b) = default;

 private:
  std::uint8_t index_ = 0;
};

/// Eigenvalue pair of S1 = Z1Z2 and S2 = Z2Z3.
struct Syndromes {
  int s1 = 1;
  int s2 = 1;
  friend constexpr bool operator==(Syndromes, Syndromes) = default;
};

constexpr Syndromes syndromes_of(ErrorState state) {
  const int b1 = state.bit(1), b2 = state.bit(2), b3 = state.bit(3);
  return {(b1 ^ b2) ? -1 : 1, (b2 ^ b3) ? -1 : 1};
}

/// Toggles the bit of `qubit` (1..3). Throws std::invalid_argument otherwise.
ErrorState apply_flip(ErrorState state, int qubit);

/// XOR mask of a single-qubit flip, e.g. qubit 1 -> 0b100.
int flip_mask(int qubit);

/// Applies every flip in `mask` (bitwise XOR).
inline ErrorState apply_mask(ErrorState state, int mask) {
  return ErrorState(state.index() ^ (mask & 7));
}

/// Single-qubit flip that moves a state with syndromes `s` back into the code
/// subspace: 0 for (+,+), else the mask of X1, X2 or X3.
int correcting_mask(Syndromes s);

using Matrix8 = Eigen::Matrix<double, 8, 8, Eigen::RowMajor>;
using Vector8 = Eigen::Matrix<double, 8, 1>;
using RowVector8 = Eigen::Matrix<double, 1, 8>;

enum class ErrorKind { BitFlip, Damping };

const char* to_string(ErrorKind kind);
ErrorKind error_kind_from_string(const std::string& name);

/// Continuous-time generator with the source state on rows: entry (i, j) is
/// the rate from i to j and every row sums to zero.
struct RateMatrix {
  Matrix8 entries = Matrix8::Zero();
  ErrorKind kind = ErrorKind::BitFlip;
  double gamma = 0.0;
};

/// Row-stochastic one-step transition probabilities, J = exp(Q dt).
struct TransitionMatrix {
  Matrix8 entries = Matrix8::Identity();
  double dt = 0.0;
};

RateMatrix rate_matrix(ErrorKind kind, double gamma);
TransitionMatrix transition_matrix(const RateMatrix& q, double dt);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Matrix8 expm(const Matrix8& a);

/// Per-trajectory random stream. The engine is seeded from a SplitMix64 hash
/// of (seed, stream_id), so trajectory k draws the same numbers no matter
/// which worker generates it or in which order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Uniform in [0, 1).
  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Poisson variate by sequential inversion; exact, intended for small means.
  int poisson(double mean);
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// Samples independent bit-flips on each qubit: n_q ~ Poisson(gamma dt) and
/// the qubit is toggled n_q times.
ErrorState sample_step_errors(ErrorState state, double gamma, double dt, RngStream& rng);

/// Amplitude damping at zero temperature: each excited bit decays to 0 with
/// probability 1 - exp(-gamma dt).
ErrorState sample_step_damping(ErrorState state, double gamma, double dt, RngStream& rng);

/// Dispatches on the error kind.
ErrorState sample_step(ErrorKind kind, ErrorState state, double gamma, double dt, RngStream& rng);

/// Majority-vote recoverable set of |111>: {7, 6, 5, 3}.
inline bool is_excited(ErrorState s) { return __builtin_popcount(s.index()) >= 2; }

}  // namespace cqec

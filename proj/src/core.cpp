// SPDX-License-Identifier: Apache-2.0

#include "cqec/core.hpp"

#include <cmath>
#include <stdexcept>

namespace cqec {

ErrorState apply_flip(ErrorState state, int qubit) {
  return ErrorState(state.index() ^ flip_mask(qubit));
}

int flip_mask(int qubit) {
  if (qubit < 1 || qubit > 3) throw std::invalid_argument("qubit must be 1, 2 or 3");
  return 1 << (3 - qubit);
}

int correcting_mask(Syndromes s) {
  if (s.s1 > 0 && s.s2 > 0) return 0;
  if (s.s1 < 0 && s.s2 > 0) return flip_mask(1);
  if (s.s1 < 0 && s.s2 < 0) return flip_mask(2);
  return flip_mask(3);
}

const char* to_string(ErrorKind kind) {
  return kind == ErrorKind::BitFlip ? "bit-flip" : "damping";
}

ErrorKind error_kind_from_string(const std::string& name) {
  if (name == "bit-flip" || name == "bitflip") return ErrorKind::BitFlip;
  if (name == "damping") return ErrorKind::Damping;
  throw std::invalid_argument("unknown error kind '" + name + "'");
}

RateMatrix rate_matrix(ErrorKind kind, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("rate_matrix: gamma must be non-negative");
  RateMatrix q;
  q.kind = kind;
  q.gamma = gamma;
  for (int i = 0; i < 8; ++i) {
    for (int bit = 0; bit < 3; ++bit) {
      const int j = i ^ (1 << bit);
      // Damping only lowers an excited bit: |1> -> |0>.
      if (kind == ErrorKind::Damping && (i & (1 << bit)) == 0) continue;
      q.entries(i, j) = gamma;
      q.entries(i, i) -= gamma;
    }
  }
  return q;
}

Matrix8 expm(const Matrix8& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix8 scaled = a / std::ldexp(1.0, squarings);

  // Taylor terms of a matrix with norm <= 1/2 fall below 1e-17 by k = 20.
  Matrix8 result = Matrix8::Identity();
  Matrix8 term = Matrix8::Identity();
  for (int k = 1; k <= 30; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

TransitionMatrix transition_matrix(const RateMatrix& q, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("transition_matrix: dt must be non-negative");
  TransitionMatrix j;
  j.dt = dt;
  j.entries = expm(q.entries * dt);
  return j;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(stream_id + 1)),
                    splitmix64(stream_id)};
  engine_.seed(seq);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

namespace {

int poisson_from_uniform(double u, double p0, double mean) {
  double p = p0;
  double cdf = p;
  int k = 0;
  while (u >= cdf && k < 1000) {
    ++k;
    p *= mean / k;
    cdf += p;
    if (p == 0.0) break;
  }
  return k;
}

}  // namespace

int RngStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  return poisson_from_uniform(uniform(), std::exp(-mean), mean);
}

ErrorState sample_step_errors(ErrorState state, double gamma, double dt, RngStream& rng) {
  const double mean = gamma * dt;
  if (mean <= 0.0) return state;
  const double p0 = std::exp(-mean);
  int index = state.index();
  for (int qubit = 1; qubit <= 3; ++qubit) {
    const int n = poisson_from_uniform(rng.uniform(), p0, mean);
    if (n & 1) index ^= 1 << (3 - qubit);
  }
  return ErrorState(index);
}

ErrorState sample_step_damping(ErrorState state, double gamma, double dt, RngStream& rng) {
  const double p_decay = -std::expm1(-gamma * dt);
  int index = state.index();
  for (int qubit = 1; qubit <= 3; ++qubit) {
    const int bit = 1 << (3 - qubit);
    // One uniform per qubit regardless of its state keeps streams aligned.
    const double u = rng.uniform();
    if ((index & bit) && u < p_decay) index ^= bit;
  }
  return ErrorState(index);
}

ErrorState sample_step(ErrorKind kind, ErrorState state, double gamma, double dt, RngStream& rng) {
  return kind == ErrorKind::BitFlip ? sample_step_errors(state, gamma, dt, rng)
                                    : sample_step_damping(state, gamma, dt, rng);
}

}  // namespace cqec

// SPDX-License-Identifier: Apache-2.0

#include "cqec/threshold.hpp"

#include <cmath>
#include <stdexcept>

namespace cqec {

const char* to_string(DecoderMode mode) {
  return mode == DecoderMode::Tracking ? "tracking" : "active";
}

CorrectionGate::CorrectionGate(int tau_ignore, int tau_streak)
    : tau_ignore_(tau_ignore), tau_streak_(tau_streak) {
  if (tau_ignore < 0) throw std::invalid_argument("tau_ignore must be >= 0");
  if (tau_streak < 1) throw std::invalid_argument("tau_streak must be >= 1");
}

void CorrectionGate::reset() {
  ignore_left_ = 0;
  candidate_ = -1;
  run_ = 0;
}

bool CorrectionGate::consume_ignored() {
  if (ignore_left_ <= 0) return false;
  --ignore_left_;
  return true;
}

bool CorrectionGate::propose(ErrorState proposal, ErrorState belief) {
  if (proposal == belief) {
    candidate_ = -1;
    run_ = 0;
    return false;
  }
  if (proposal.index() == candidate_) {
    ++run_;
  } else {
    candidate_ = proposal.index();
    run_ = 1;
  }
  return run_ >= tau_streak_;
}

void CorrectionGate::accepted() {
  ignore_left_ = tau_ignore_;
  candidate_ = -1;
  run_ = 0;
}

// ---------------------------------------------------------------------------

void ThresholdConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("threshold tau must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("threshold dt must be positive");
  if (!(theta1 < theta2)) throw std::invalid_argument("theta1 must be below theta2");
}

FilterState filter_step(FilterState state, double i1, double i2, double tau, double dt) {
  if (!(tau > 0.0)) throw std::invalid_argument("filter_step: tau must be positive");
  const double a = std::exp(-dt / tau);
  return {a * state.filt1 + (1.0 - a) * i1, a * state.filt2 + (1.0 - a) * i2};
}

std::optional<Syndromes> classify(FilterState f, const ThresholdConfig& cfg) {
  const auto side = [&](double x) -> int {
    if (x > cfg.theta2) return 1;
    if (x < cfg.theta1) return -1;
    return 0;
  };
  const int s1 = side(f.filt1);
  const int s2 = side(f.filt2);
  if (s1 == 0 || s2 == 0) return std::nullopt;
  return Syndromes{s1, s2};
}

FilterState correct_and_reset(Syndromes reference) {
  return {static_cast<double>(reference.s1), static_cast<double>(reference.s2)};
}

ThresholdDecoder::ThresholdDecoder(ThresholdConfig cfg)
    : cfg_(cfg), gate_(cfg.tau_ignore, cfg.tau_streak) {
  cfg_.validate();
}

void ThresholdDecoder::reset(ErrorState initial, DecoderMode mode) {
  mode_ = mode;
  belief_ = initial;
  filter_ = correct_and_reset(syndromes_of(initial));
  gate_.reset();
}

StepResult ThresholdDecoder::step(double i1, double i2) {
  if (gate_.consume_ignored()) return {belief_, 0, true};
  filter_ = filter_step(filter_, i1, i2, cfg_.tau, cfg_.dt);
  const std::optional<Syndromes> diag = classify(filter_, cfg_);
  ErrorState proposal = belief_;
  if (diag) {
    // Single flip that takes the belief's syndromes to the diagnosed ones.
    const Syndromes own = syndromes_of(belief_);
    const int flip = correcting_mask({diag->s1 * own.s1, diag->s2 * own.s2});
    proposal = apply_mask(belief_, flip);
  }
  if (!gate_.propose(proposal, belief_)) return {belief_, 0, false};

  const int mask = proposal.index() ^ belief_.index();
  if (mode_ == DecoderMode::Tracking) {
    belief_ = proposal;
    filter_ = correct_and_reset(syndromes_of(belief_));
    gate_.propose(belief_, belief_);
    return {belief_, 0, false};
  }
  filter_ = correct_and_reset(syndromes_of(belief_));
  gate_.accepted();
  return {belief_, mask, false};
}

std::unique_ptr<Decoder> ThresholdDecoder::clone() const {
  return std::make_unique<ThresholdDecoder>(cfg_);
}

// ---------------------------------------------------------------------------

ThresholdGrid ThresholdGrid::defaults() {
  ThresholdGrid g;
  for (int i = 1; i <= 20; ++i) g.taus.push_back(0.1e-6 * i);
  for (int i = 1; i <= 9; ++i) g.theta2.push_back(0.1 * i);
  return g;
}

ThresholdSearchResult optimize_params(const ThresholdGrid& grid, const ThresholdConfig& base,
                                      const ThresholdObjective& objective) {
  const std::vector<double>& lows = grid.asymmetric ? grid.theta1 : grid.theta2;
  if (grid.taus.empty() || grid.theta2.empty() || lows.empty()) {
    throw std::invalid_argument("optimize_params: empty grid");
  }
  ThresholdSearchResult result;
  bool have = false;
  double best_asym = 0.0;
  for (double tau : grid.taus) {
    for (double t2 : grid.theta2) {
      for (double low : lows) {
        ThresholdConfig c = base;
        c.tau = tau;
        c.theta2 = t2;
        c.theta1 = grid.asymmetric ? low : -t2;
        if (!(c.theta1 < c.theta2)) continue;
        const double score = objective(c);
        ++result.evaluated;
        const double asym = std::abs(c.theta1 + c.theta2);
        bool better = !have || score > result.best_score;
        if (have && score == result.best_score) {
          better = tau > result.best.tau || (tau == result.best.tau && asym < best_asym);
        }
        if (better) {
          result.best = c;
          result.best_score = score;
          best_asym = asym;
          have = true;
        }
        if (!grid.asymmetric) break;
      }
    }
  }
  if (!have) throw std::invalid_argument("optimize_params: no valid grid point");
  return result;
}

double tracking_fidelity(const ThresholdConfig& cfg, std::span<const Trajectory> data) {
  if (data.empty()) throw std::invalid_argument("tracking_fidelity: empty dataset");
  ThresholdDecoder dec(cfg);
  std::size_t hits = 0;
  for (const Trajectory& t : data) {
    dec.reset(t.initial_state(), DecoderMode::Tracking);
    for (const StepRecord& r : t.steps) dec.step(r.i1, r.i2);
    const int final_state = t.steps.empty() ? t.initial_state().index() : t.steps.back().true_state;
    if (dec.estimate().index() == final_state) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace cqec

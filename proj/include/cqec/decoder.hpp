// SPDX-License-Identifier: Apache-2.0
//
// Common interface of the per-trajectory decoders. A decoder consumes one
// measurement pair per step. In tracking mode it only follows the state; in
// active mode it also returns the bit-flip mask to apply to the register.

#pragma once

#include <memory>
#include <string>

#include "cqec/core.hpp"

namespace cqec {

enum class DecoderMode { Tracking, Active };

const char* to_string(DecoderMode mode);

struct StepResult {
  /// Current estimate of the physical state, after any correction issued on
  /// this step has been applied.
  ErrorState estimate;
  /// XOR mask of the corrections to apply now (active mode only).
  int correction = 0;
  /// True if the step fell in an ignore window and the input was discarded.
  bool ignored = false;
};

class Decoder {
 public:
  virtual ~Decoder() = default;

  virtual void reset(ErrorState initial, DecoderMode mode) = 0;
  virtual StepResult step(double i1, double i2) = 0;
  virtual ErrorState estimate() const = 0;
  virtual std::string name() const = 0;
  /// Fresh instance with the same configuration; used to give every worker
  /// its own state machine.
  virtual std::unique_ptr<Decoder> clone() const = 0;
};

/// Ignore window and streak confirmation shared by the decoders.
///
/// After a correction the gate stays closed for tau_ignore steps. A proposed
/// state different from the current belief has to be repeated on tau_streak
/// consecutive steps before it is accepted.
class CorrectionGate {
 public:
  CorrectionGate() = default;
  CorrectionGate(int tau_ignore, int tau_streak);

  int tau_ignore() const { return tau_ignore_; }
  int tau_streak() const { return tau_streak_; }

  void reset();
  /// Consumes one step of an ignore window. Returns false when the gate is
  /// open (nothing consumed).
  bool consume_ignored();
  bool ignoring() const { return ignore_left_ > 0; }
  /// Feeds the decoder's raw proposal. Returns true once it is confirmed.
  bool propose(ErrorState proposal, ErrorState belief);
  /// Starts the ignore window after an accepted change.
  void accepted();

 private:
  int tau_ignore_ = 0;
  int tau_streak_ = 1;
  int ignore_left_ = 0;
  int candidate_ = -1;
  int run_ = 0;
};

}  // namespace cqec

// SPDX-License-Identifier: Apache-2.0
//
// Dataset persistence. Two equivalent containers:
//
// CSV text:
//   # cqec-dataset v1 scheme=A error_kind=bit-flip gamma=... dt=... tau_m=...
//     cov_lags=c1;c2;c3;c4 drift_total=... N=... seed=...
//   @trajectory index=k initial=s sequence=i stream=id injected=q:step|none steps=T
//   step,true_state,mean1,mean2,I1,I2
//   0,0,1,1,0.53,-2.1
//   ...
// Reals are printed with 17 significant digits so values round-trip exactly.
//
// Binary (all little-endian, fixed width):
//   char[8] "CQECDS01"
//   u8 scheme (0..3), u8 error_kind (0 bit-flip, 1 damping)
//   f64 gamma, dt, tau_m, cov_lags[4], drift_total
//   u64 N, seed, n_trajectories
//   per trajectory: u64 stream_id, u64 sequence_index, u8 initial,
//     i32 injected_qubit (0 = none), i32 injected_step, u32 n_steps,
//     then n_steps records of { u8 true_state, f64 mean1, mean2, I1, I2 }

#pragma once

#include <string>

#include "cqec/signal.hpp"

namespace cqec {

void write_dataset_csv(const Dataset& ds, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

void write_dataset_binary(const Dataset& ds, const std::string& path);
Dataset read_dataset_binary(const std::string& path);

/// Picks the container from the extension: ".csv" for text, anything else binary.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace cqec

// SPDX-License-Identifier: Apache-2.0
//
// Mapping from configuration keys to run settings. Times are given in
// microseconds and rates per microsecond.
//
//   task                 tracking | t1-extension | bit-flip-protection |
//                        annealing | detection-stats
//   scheme               A | B | C | D
//   decoder              list of dt, bayes, rnn, none
//   gamma                list of rates (1/us)
//   t_total_us, trajectories, seed, workers, out, format (csv | json)
//   [scheme]   tau_m_us, dt_us, cov_lags (4 values), drift_total, transient_file
//   [gate]     tau_ignore, tau_streak
//   [dt]       tau_us, theta1, theta2 (fixes the parameters), train_trajectories,
//              train_t_total_us, grid_taus_us, grid_thresholds
//   [rnn]      checkpoint
//   [bitflip]  rate_time_us, rate_window_us
//   [detection] inject, inject_time_us
//   [anneal]   omega0_per_us
//   [series]   stride
//   [train]    hidden, layers, cell, encoding, epochs, batch_size,
//              learning_rate, clip_norm, trajectories, val_trajectories,
//              t_total_us, gamma, initial (all | list of state indices),
//              double_precision
//   [generate] initial, inject_qubit, inject_time_us

#pragma once

#include <vector>

#include "cqec/config.hpp"
#include "cqec/experiments.hpp"
#include "cqec/rnn.hpp"

namespace cqec {

SchemeConfig scheme_from_config(const Config& cfg);

/// Loads the RNN checkpoint named by rnn.checkpoint when an rnn decoder is
/// requested.
ExperimentSpec spec_from_config(const Config& cfg);

TrainConfig train_config_from(const Config& cfg);

/// "all" or a list of state indices 0..7.
std::vector<ErrorState> initial_states_from(const Config& cfg, const std::string& key,
                                            const std::vector<ErrorState>& fallback);

}  // namespace cqec

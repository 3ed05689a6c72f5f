// SPDX-License-Identifier: Apache-2.0
//
// Report persistence. CSV output is one file per table:
//   <stem>_scalars.csv     decoder,gamma_per_us,metric,value,stderr,n
//   <stem>_series.csv      decoder,gamma_per_us,metric,t_us,mean,stderr
//   <stem>_histograms.csv  decoder,gamma_per_us,metric,bin_start_us,bin_width_us,count
//   <stem>_fits.csv        decoder,name,value,stderr,points,ok
//   <stem>_thresholds.csv  gamma_per_us,tau_us,theta1,theta2
// JSON output is a single <stem>.json holding the same tables.

#pragma once

#include <string>
#include <vector>

#include "cqec/config.hpp"
#include "cqec/experiments.hpp"

namespace cqec {

enum class ReportFormat { Csv, Json };

ReportFormat report_format_from_string(const std::string& name);

/// Writes the report under `dir` (created if missing) and returns the paths
/// written. I/O failures throw std::runtime_error naming the path.
std::vector<std::string> emit_report(const MetricsReport& report, const std::string& dir,
                                     ReportFormat format, const std::string& stem = "");

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

/// Rows of a scalars CSV written by emit_report.
std::vector<ScalarMetric> read_scalars_csv(const std::string& path);

/// manifest.json: the resolved configuration plus free-form run details.
std::string write_manifest(const std::string& dir, const Config& resolved,
                           const std::vector<std::pair<std::string, std::string>>& details);

}  // namespace cqec

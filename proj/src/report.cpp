// SPDX-License-Identifier: Apache-2.0

#include "cqec/report.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cqec {

namespace {

using json = nlohmann::ordered_json;
constexpr double kMicro = 1e-6;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string default_stem(const MetricsReport& r) {
  return std::string(to_string(r.task)) + "_" + to_string(r.scheme);
}

}  // namespace

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw std::invalid_argument("unknown report format '" + name + "'");
}

std::string report_to_json(const MetricsReport& r) {
  json j;
  j["task"] = to_string(r.task);
  j["scheme"] = to_string(r.scheme);
  j["scalars"] = json::array();
  for (const auto& s : r.scalars) {
    j["scalars"].push_back({{"decoder", s.decoder},
                            {"gamma_per_us", s.gamma * kMicro},
                            {"metric", s.metric},
                            {"value", s.value},
                            {"stderr", s.stderr_},
                            {"n", s.n}});
  }
  j["series"] = json::array();
  for (const auto& s : r.series) {
    j["series"].push_back({{"decoder", s.decoder},
                           {"gamma_per_us", s.gamma * kMicro},
                           {"metric", s.metric},
                           {"t_us", s.t_us},
                           {"mean", s.mean},
                           {"stderr", s.stderr_}});
  }
  j["histograms"] = json::array();
  for (const auto& h : r.histograms) {
    j["histograms"].push_back({{"decoder", h.decoder},
                               {"gamma_per_us", h.gamma * kMicro},
                               {"metric", h.metric},
                               {"bin_width_us", h.bin_width_us},
                               {"counts", h.counts}});
  }
  j["fits"] = json::array();
  for (const auto& f : r.fits) {
    j["fits"].push_back({{"decoder", f.decoder},
                         {"name", f.name},
                         {"value", f.value},
                         {"stderr", f.stderr_},
                         {"points", f.points},
                         {"ok", f.ok}});
  }
  j["thresholds"] = json::array();
  for (const auto& [gamma, c] : r.threshold_params) {
    j["thresholds"].push_back({{"gamma_per_us", gamma * kMicro},
                               {"tau_us", c.tau / kMicro},
                               {"theta1", c.theta1},
                               {"theta2", c.theta2}});
  }
  return j.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.task = task_from_string(j.at("task").get<std::string>());
  r.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  for (const auto& s : j.at("scalars")) {
    r.scalars.push_back({s.at("decoder").get<std::string>(),
                         s.at("gamma_per_us").get<double>() / kMicro,
                         s.at("metric").get<std::string>(), s.at("value").get<double>(),
                         s.at("stderr").get<double>(), s.at("n").get<std::size_t>()});
  }
  for (const auto& s : j.at("series")) {
    r.series.push_back({s.at("decoder").get<std::string>(),
                        s.at("gamma_per_us").get<double>() / kMicro,
                        s.at("metric").get<std::string>(), s.at("t_us").get<std::vector<double>>(),
                        s.at("mean").get<std::vector<double>>(),
                        s.at("stderr").get<std::vector<double>>()});
  }
  for (const auto& h : j.at("histograms")) {
    r.histograms.push_back({h.at("decoder").get<std::string>(),
                            h.at("gamma_per_us").get<double>() / kMicro,
                            h.at("metric").get<std::string>(), h.at("bin_width_us").get<double>(),
                            h.at("counts").get<std::vector<std::size_t>>()});
  }
  for (const auto& f : j.at("fits")) {
    r.fits.push_back({f.at("decoder").get<std::string>(), f.at("name").get<std::string>(),
                      f.at("value").get<double>(), f.at("stderr").get<double>(),
                      f.at("points").get<std::size_t>(), f.at("ok").get<bool>()});
  }
  for (const auto& t : j.at("thresholds")) {
    ThresholdConfig c;
    c.tau = t.at("tau_us").get<double>() * kMicro;
    c.theta1 = t.at("theta1").get<double>();
    c.theta2 = t.at("theta2").get<double>();
    r.threshold_params.emplace_back(t.at("gamma_per_us").get<double>() / kMicro, c);
  }
  return r;
}

std::vector<std::string> emit_report(const MetricsReport& r, const std::string& dir,
                                     ReportFormat format, const std::string& stem_in) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir + "': " + ec.message());
  const std::string stem = stem_in.empty() ? default_stem(r) : stem_in;
  std::vector<std::string> written;

  if (format == ReportFormat::Json) {
    const fs::path p = fs::path(dir) / (stem + ".json");
    auto out = open_out(p);
    out << report_to_json(r) << '\n';
    finish(out, p);
    written.push_back(p.string());
    return written;
  }

  {
    const fs::path p = fs::path(dir) / (stem + "_scalars.csv");
    auto out = open_out(p);
    out << "decoder,gamma_per_us,metric,value,stderr,n\n";
    for (const auto& s : r.scalars) {
      out << csv_field(s.decoder) << ',' << s.gamma * kMicro << ',' << csv_field(s.metric) << ','
          << s.value << ',' << s.stderr_ << ',' << s.n << '\n';
    }
    finish(out, p);
    written.push_back(p.string());
  }
  if (!r.series.empty()) {
    const fs::path p = fs::path(dir) / (stem + "_series.csv");
    auto out = open_out(p);
    out << "decoder,gamma_per_us,metric,t_us,mean,stderr\n";
    for (const auto& s : r.series) {
      for (std::size_t i = 0; i < s.t_us.size(); ++i) {
        out << csv_field(s.decoder) << ',' << s.gamma * kMicro << ',' << csv_field(s.metric) << ','
            << s.t_us[i] << ',' << s.mean[i] << ',' << s.stderr_[i] << '\n';
      }
    }
    finish(out, p);
    written.push_back(p.string());
  }
  if (!r.histograms.empty()) {
    const fs::path p = fs::path(dir) / (stem + "_histograms.csv");
    auto out = open_out(p);
    out << "decoder,gamma_per_us,metric,bin_start_us,bin_width_us,count\n";
    for (const auto& h : r.histograms) {
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out << csv_field(h.decoder) << ',' << h.gamma * kMicro << ',' << csv_field(h.metric) << ','
            << static_cast<double>(i) * h.bin_width_us << ',' << h.bin_width_us << ','
            << h.counts[i] << '\n';
      }
    }
    finish(out, p);
    written.push_back(p.string());
  }
  if (!r.fits.empty()) {
    const fs::path p = fs::path(dir) / (stem + "_fits.csv");
    auto out = open_out(p);
    out << "decoder,name,value,stderr,points,ok\n";
    for (const auto& f : r.fits) {
      out << csv_field(f.decoder) << ',' << csv_field(f.name) << ',' << f.value << ','
          << f.stderr_ << ',' << f.points << ',' << (f.ok ? 1 : 0) << '\n';
    }
    finish(out, p);
    written.push_back(p.string());
  }
  if (!r.threshold_params.empty()) {
    const fs::path p = fs::path(dir) / (stem + "_thresholds.csv");
    auto out = open_out(p);
    out << "gamma_per_us,tau_us,theta1,theta2\n";
    for (const auto& [gamma, c] : r.threshold_params) {
      out << gamma * kMicro << ',' << c.tau / kMicro << ',' << c.theta1 << ',' << c.theta2 << '\n';
    }
    finish(out, p);
    written.push_back(p.string());
  }
  return written;
}

std::vector<ScalarMetric> read_scalars_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "decoder,gamma_per_us,metric,value,stderr,n") {
    throw std::runtime_error("'" + path + "': not a scalars table");
  }
  std::vector<ScalarMetric> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 6) {
      throw std::runtime_error("'" + path + "':" + std::to_string(line_no) + ": expected 6 fields");
    }
    try {
      out.push_back({f[0], std::stod(f[1]) / kMicro, f[2], std::stod(f[3]), std::stod(f[4]),
                     static_cast<std::size_t>(std::stoull(f[5]))});
    } catch (const std::logic_error&) {
      throw std::runtime_error("'" + path + "':" + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

std::string write_manifest(const std::string& dir, const Config& resolved,
                           const std::vector<std::pair<std::string, std::string>>& details) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir + "': " + ec.message());
  json j;
  j["config"] = json::object();
  for (const auto& [k, v] : resolved.values()) j["config"][k] = v;
  j["run"] = json::object();
  for (const auto& [k, v] : details) j["run"][k] = v;
  const fs::path p = fs::path(dir) / "manifest.json";
  auto out = open_out(p);
  out << j.dump(2) << '\n';
  finish(out, p);
  return p.string();
}

}  // namespace cqec

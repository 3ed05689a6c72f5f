// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqec/config.hpp"
#include "cqec/dataset_io.hpp"
#include "cqec/experiments.hpp"
#include "cqec/report.hpp"
#include "cqec/settings.hpp"
#include "doctest.h"

using namespace cqec;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("cqec_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

ThresholdConfig fixed_dt() {
  ThresholdConfig c;
  c.tau = 0.4e-6;
  c.theta1 = -0.7;
  c.theta2 = 0.7;
  return c;
}

DecoderSetup setup(const std::string& kind, std::optional<ThresholdConfig> dt = std::nullopt) {
  DecoderSetup d;
  d.kind = kind;
  d.threshold = dt;
  return d;
}

ExperimentSpec small_spec(Task task) {
  ExperimentSpec s;
  s.task = task;
  s.gammas = {0.04e6};
  s.n_traj = 160;
  s.t_total = 6e-6;
  s.decoders = {setup("dt", fixed_dt()), setup("bayes")};
  return s;
}

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  if (a.scalars.size() != b.scalars.size() || a.series.size() != b.series.size()) return false;
  for (std::size_t i = 0; i < a.scalars.size(); ++i) {
    if (a.scalars[i].value != b.scalars[i].value || a.scalars[i].stderr_ != b.scalars[i].stderr_ ||
        a.scalars[i].metric != b.scalars[i].metric)
      return false;
  }
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    if (a.series[i].mean != b.series[i].mean) return false;
  }
  return report_to_json(a) == report_to_json(b);
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(
      "task = tracking  # trailing comment\n"
      "gamma = 0.02, 0.04\n"
      "[dt]\n"
      "tau_us = 0.4\n"
      "flag = yes\n");
  const Config c = Config::parse(in);
  CHECK(c.get("task", "") == "tracking");
  CHECK(c.get_doubles("gamma", {}) == std::vector<double>{0.02, 0.04});
  CHECK(c.get_double("dt.tau_us", 0) == doctest::Approx(0.4));
  CHECK(c.get_bool("dt.flag", false));
  CHECK(c.get_int("missing", 7) == 7);

  std::istringstream back(c.dump());
  CHECK(Config::parse(back).values() == c.values());

  std::istringstream bad("no equals sign\n");
  CHECK_THROWS_WITH(Config::parse(bad, "x.ini"), doctest::Contains("x.ini:1"));
  Config n;
  n.set("k", "abc");
  CHECK_THROWS(n.get_double("k", 0));
  CHECK(split_list(" a, b ,c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("settings from config") {
  Config c;
  c.set("task", "bitflip");
  c.set("scheme", "B");
  c.set("gamma", "0.02,0.08");
  c.set("trajectories", "500");
  c.set("decoder", "dt,bayes");
  c.set("dt.tau_us", "0.5");
  c.set("dt.theta2", "0.6");
  const ExperimentSpec s = spec_from_config(c);
  CHECK(s.task == Task::BitFlipProtection);
  CHECK(s.scheme.scheme == Scheme::B);
  CHECK(s.gammas[1] == doctest::Approx(0.08e6));
  CHECK(s.n_traj == 500);
  REQUIRE(s.decoders.size() == 2);
  REQUIRE(s.decoders[0].threshold.has_value());
  CHECK(s.decoders[0].threshold->tau == doctest::Approx(0.5e-6));

  c.set("decoder", "rnn");
  CHECK_THROWS(spec_from_config(c));
  c.set("trajectories", "10");
  c.set("decoder", "bayes");
  CHECK_THROWS(spec_from_config(c));
}

TEST_CASE("spec validation and task names") {
  ExperimentSpec s = small_spec(Task::Tracking);
  CHECK_NOTHROW(s.validate());
  s.gammas.clear();
  CHECK_THROWS(s.validate());
  s = small_spec(Task::Tracking);
  s.n_traj = 99;
  CHECK_THROWS(s.validate());
  for (Task t : {Task::Tracking, Task::T1Extension, Task::BitFlipProtection, Task::Annealing,
                 Task::DetectionStats}) {
    CHECK(task_from_string(to_string(t)) == t);
  }
  CHECK(small_spec(Task::T1Extension).error_kind() == ErrorKind::Damping);
  CHECK(!is_active(Task::Tracking));
}

TEST_CASE("gate defaults") {
  ExperimentSpec s = small_spec(Task::T1Extension);
  s.scheme = SchemeConfig::defaults(Scheme::C);
  CHECK(gate_settings(s) == std::pair{94, 3});
  s.task = Task::Tracking;
  CHECK(gate_settings(s) == std::pair{0, 1});
  s.scheme = SchemeConfig::defaults(Scheme::A);
  s.task = Task::BitFlipProtection;
  CHECK(gate_settings(s) == std::pair{0, 1});
  s.tau_ignore = 10;
  s.tau_streak = 2;
  CHECK(gate_settings(s) == std::pair{10, 2});
}

TEST_CASE("mean and stderr") {
  const MeanStderr m = mean_stderr({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("slope weights recover a linear slope") {
  const double dt = 3.2e-8;
  const auto [first, w] = slope_weights(3e-6, 1e-6, dt, 1000);
  double slope = 0.0, flat = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double t = (first + static_cast<double>(j)) * dt;
    slope += w[j] * (0.7 - 2.5e3 * t);
    flat += w[j];
  }
  CHECK(slope == doctest::Approx(-2.5e3));
  CHECK(std::abs(flat) < 1e-6);
  CHECK(first * dt >= 2e-6 - dt);
}

TEST_CASE("log-log fit") {
  const std::vector<double> x{0.02, 0.04, 0.08, 0.16};
  std::vector<double> y, e;
  for (double v : x) {
    y.push_back(3.0 * v * v);
    e.push_back(0.01 * 3.0 * v * v);
  }
  const FitDiagnostic f = loglog_fit(x, y, e);
  CHECK(f.ok);
  CHECK(f.value == doctest::Approx(2.0));
  CHECK(f.points == 4);
  y[0] = -1.0;
  CHECK(loglog_fit(x, y, e).points == 3);
  CHECK(!loglog_fit({0.1}, {1.0}, {0.1}).ok);
}

TEST_CASE("tracking without errors is perfect") {
  ExperimentSpec s = small_spec(Task::Tracking);
  s.gammas = {0.0};
  const MetricsReport r = run_tracking(s);
  for (const char* d : {"dt", "bayes"}) {
    const ScalarMetric* m = r.find(d, 0.0, "final_fidelity");
    REQUIRE(m != nullptr);
    CHECK(1.0 - m->value <= 2 * m->stderr_ + 1e-12);
  }
}

TEST_CASE("tracking shares the true trajectories across decoders") {
  ExperimentSpec s = small_spec(Task::Tracking);
  s.gammas = {0.04e6, 0.16e6};
  const MetricsReport r = run_tracking(s);
  const ScalarMetric* errors = r.find("truth", 0.04e6, "error_count");
  REQUIRE(errors != nullptr);
  CHECK(errors->value > 0.0);
  // The same error count regardless of which decoders ran.
  ExperimentSpec only = s;
  only.decoders = {setup("bayes")};
  const MetricsReport r2 = run_tracking(only);
  CHECK(r2.find("truth", 0.04e6, "error_count")->value == errors->value);
  CHECK(r2.find("bayes", 0.04e6, "final_fidelity")->value ==
        r.find("bayes", 0.04e6, "final_fidelity")->value);
  // Fidelity decreases with gamma.
  const double lo = r.find("bayes", 0.04e6, "final_fidelity")->value;
  const double hi = r.find("bayes", 0.16e6, "final_fidelity")->value;
  CHECK(hi < lo);
}

TEST_CASE("reruns are identical for any worker count") {
  for (Task task : {Task::Tracking, Task::BitFlipProtection, Task::DetectionStats}) {
    ExperimentSpec s = small_spec(task);
    s.n_traj = 120;
    const MetricsReport one = run_experiment(s);
    s.workers = 3;
    const MetricsReport three = run_experiment(s);
    CHECK(same_report(one, three));
  }
}

TEST_CASE("stderr shrinks with more trajectories") {
  ExperimentSpec s = small_spec(Task::Tracking);
  s.gammas = {0.3e6};
  s.decoders = {setup("bayes")};
  s.n_traj = 400;
  const double e1 = run_tracking(s).find("bayes", 0.3e6, "final_fidelity")->stderr_;
  s.n_traj = 1600;
  const double e4 = run_tracking(s).find("bayes", 0.3e6, "final_fidelity")->stderr_;
  CHECK(e1 / e4 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("T1 extension") {
  ExperimentSpec s = small_spec(Task::T1Extension);
  s.n_traj = 400;
  s.t_total = 10e-6;
  s.series_stride = 10;
  const MetricsReport r = run_t1(s);
  const TimeSeries* unc = r.find_series("uncorrected", 0.04e6, "p_exc");
  const TimeSeries* bare = r.find_series("bare", 0.04e6, "p_exc");
  REQUIRE(unc != nullptr);
  REQUIRE(bare != nullptr);
  for (std::size_t i = 0; i < unc->t_us.size(); ++i) {
    const double t = unc->t_us[i] * 1e-6;
    const double p = analytic_pexc(ErrorKind::Damping, 0.04e6, t);
    CHECK(std::abs(unc->mean[i] - p) <= 3 * std::sqrt(p * (1 - p) / s.n_traj) + 1e-9);
    const double pb = std::exp(-0.04e6 * t);
    CHECK(std::abs(bare->mean[i] - pb) <= 3 * std::sqrt(pb * (1 - pb) / s.n_traj) + 1e-9);
  }
  for (const char* d : {"dt", "bayes"}) {
    REQUIRE(r.find(d, 0.04e6, "final_p_exc") != nullptr);
  }
}

TEST_CASE("bit-flip protection reports a logical rate") {
  ExperimentSpec s = small_spec(Task::BitFlipProtection);
  s.gammas = {0.04e6, 0.16e6};
  s.n_traj = 300;
  const MetricsReport r = run_bitflip(s);
  for (double g : s.gammas) {
    const ScalarMetric* u = r.find("uncorrected", g, "logical_rate");
    const ScalarMetric* b = r.find("bayes", g, "logical_rate");
    REQUIRE(u != nullptr);
    REQUIRE(b != nullptr);
    CHECK(b->value < u->value);
  }
  CHECK(r.find_fit("bayes", "loglog_slope") != nullptr);
}

TEST_CASE("detection statistics in the noiseless limit") {
  ExperimentSpec s = small_spec(Task::DetectionStats);
  s.scheme.tau_m = 1e-15;
  s.decoders = {setup("bayes")};
  s.n_traj = 120;
  const MetricsReport r = run_detection_stats(s);
  const ScalarMetric* t = r.find("bayes", 0.04e6, "mean_detection_time_us");
  REQUIRE(t != nullptr);
  CHECK(t->value == doctest::Approx(s.scheme.dt * 1e6));
  CHECK(r.find("bayes", 0.04e6, "false_alarm_rate_per_us")->value == 0.0);
  CHECK(r.find("bayes", 0.04e6, "missed")->value == 0.0);
}

TEST_CASE("annealing report") {
  ExperimentSpec s = small_spec(Task::Annealing);
  s.t_total = 10e-6;
  s.n_traj = 100;
  s.gammas = {0.0};
  s.decoders = {setup("bayes")};
  const MetricsReport r = run_annealing(s);
  const ScalarMetric* inf = r.find("bayes", 0.0, "final_infidelity");
  REQUIRE(inf != nullptr);
  CHECK(inf->value < 1e-6);
  REQUIRE(r.find("uncorrected", 0.0, "final_infidelity") != nullptr);
}

TEST_CASE("report round trip") {
  ExperimentSpec s = small_spec(Task::BitFlipProtection);
  s.n_traj = 120;
  const MetricsReport r = run_bitflip(s);
  const MetricsReport back = report_from_json(report_to_json(r));
  CHECK(report_to_json(back) == report_to_json(r));

  const auto dir = scratch_dir("report");
  const auto files = emit_report(r, dir.string(), ReportFormat::Csv);
  CHECK(!files.empty());
  const auto scalars = read_scalars_csv((dir / "bit-flip-protection_A_scalars.csv").string());
  REQUIRE(scalars.size() == r.scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    CHECK(scalars[i].decoder == r.scalars[i].decoder);
    CHECK(scalars[i].value == r.scalars[i].value);
    CHECK(scalars[i].stderr_ == r.scalars[i].stderr_);
    CHECK(scalars[i].gamma == doctest::Approx(r.scalars[i].gamma));
  }
  // Stable across reruns.
  const auto again = emit_report(run_bitflip(s), (dir / "b").string(), ReportFormat::Csv);
  std::ifstream f1(files[0]), f2(again[0]);
  std::stringstream a, b;
  a << f1.rdbuf();
  b << f2.rdbuf();
  CHECK(a.str() == b.str());

  CHECK_THROWS(emit_report(r, "/proc/definitely/not/writable", ReportFormat::Json));
  CHECK_THROWS(read_scalars_csv((dir / "missing.csv").string()));
}

TEST_CASE("dataset persistence round trip") {
  SchemeConfig d = SchemeConfig::defaults(Scheme::D);
  d.gamma = 0.3e6;
  d.n_sequences = 3;
  const Dataset ds = generate_dataset(d, all_basis_states(), 4, 150, 9);
  const auto dir = scratch_dir("dataset");
  for (const char* name : {"ds.csv", "ds.bin"}) {
    const std::string path = (dir / name).string();
    write_dataset(ds, path);
    const Dataset back = read_dataset(path);
    CHECK(back.seed == ds.seed);
    CHECK(back.cfg.scheme == Scheme::D);
    REQUIRE(back.trajectories.size() == ds.trajectories.size());
    for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
      const auto& a = ds.trajectories[k];
      const auto& b = back.trajectories[k];
      CHECK(a.meta.stream_id == b.meta.stream_id);
      CHECK(a.initial_state() == b.initial_state());
      REQUIRE(a.steps.size() == b.steps.size());
      for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].i1 == b.steps[i].i1);
        CHECK(a.steps[i].mean2 == b.steps[i].mean2);
        CHECK(a.steps[i].true_state == b.steps[i].true_state);
      }
    }
  }
  std::ofstream((dir / "bad.bin").string()) << "garbage";
  CHECK_THROWS(read_dataset((dir / "bad.bin").string()));
}

TEST_CASE("per-trajectory outcomes match the scalar metrics") {
  for (Task task : {Task::Tracking, Task::T1Extension, Task::Annealing}) {
    ExperimentSpec s = small_spec(task);
    const MetricsReport r = run_experiment(s);
    const std::string metric = task == Task::Tracking     ? "final_fidelity"
                               : task == Task::Annealing ? "final_infidelity"
                                                          : "final_p_exc";
    for (const std::string d : {"dt", "bayes"}) {
      const Outcomes* o = r.find_outcomes(d, s.gammas[0], metric);
      const ScalarMetric* m = r.find(d, s.gammas[0], metric);
      REQUIRE(o != nullptr);
      REQUIRE(m != nullptr);
      REQUIRE(o->values.size() == s.n_traj);
      CHECK(mean_stderr(o->values).mean == doctest::Approx(m->value).epsilon(1e-12));
    }
  }
}

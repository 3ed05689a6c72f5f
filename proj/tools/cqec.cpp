// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: generate, train, evaluate, anneal, report.
// Flags override keys of the --config file; --set key=value overrides any key.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cqec/config.hpp"
#include "cqec/dataset_io.hpp"
#include "cqec/experiments.hpp"
#include "cqec/report.hpp"
#include "cqec/rnn.hpp"
#include "cqec/settings.hpp"

namespace {

using namespace cqec;
constexpr double kMicro = 1e-6;

struct CommonFlags {
  std::string config;
  std::string scheme;
  std::vector<std::string> decoders;
  std::vector<double> gammas;
  std::size_t trajectories = 0;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_decoder) {
  app->add_option("--config", f.config, "Configuration file")->check(CLI::ExistingFile);
  app->add_option("--scheme", f.scheme, "Simulation scheme")
      ->check(CLI::IsMember({"A", "B", "C", "D"}));
  if (with_decoder) {
    app->add_option("--decoder", f.decoders, "Decoders: dt, bayes, rnn, none")->delimiter(',');
  }
  app->add_option("--gamma", f.gammas, "Error rate(s) per microsecond")->delimiter(',');
  app->add_option("--trajectories", f.trajectories, "Number of trajectories");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--workers", f.workers, "Worker threads");
  app->add_option("--out", f.out, "Output path");
  app->add_option("--set", f.sets, "Override a configuration key (key=value)");
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::string join(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

Config resolve(const CommonFlags& f, CLI::App* app) {
  Config cfg = f.config.empty() ? Config{} : Config::load(f.config);
  if (!f.scheme.empty()) cfg.set("scheme", f.scheme);
  if (!f.decoders.empty()) cfg.set("decoder", join(f.decoders));
  if (!f.gammas.empty()) cfg.set("gamma", join(f.gammas));
  if (app->count("--trajectories")) cfg.set("trajectories", std::to_string(f.trajectories));
  if (app->count("--seed")) cfg.set("seed", std::to_string(f.seed));
  if (app->count("--workers")) cfg.set("workers", std::to_string(f.workers));
  if (!f.out.empty()) cfg.set("out", f.out);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void print_report(const MetricsReport& r) {
  std::cout << "task " << to_string(r.task) << ", scheme " << to_string(r.scheme) << '\n';
  std::cout << std::left << std::setw(14) << "decoder" << std::setw(12) << "gamma/us"
            << std::setw(26) << "metric" << std::setw(14) << "value" << "stderr\n";
  for (const auto& s : r.scalars) {
    std::cout << std::left << std::setw(14) << s.decoder << std::setw(12) << s.gamma * kMicro
              << std::setw(26) << s.metric << std::setw(14) << s.value << s.stderr_ << '\n';
  }
  for (const auto& f : r.fits) {
    std::cout << "fit " << f.decoder << ' ' << f.name << " = " << f.value << " +- " << f.stderr_
              << (f.ok ? "" : " (failed)") << '\n';
  }
  for (const auto& [g, c] : r.threshold_params) {
    std::cout << "dt params at gamma " << g * kMicro << "/us: tau " << c.tau / kMicro
              << " us, theta1 " << c.theta1 << ", theta2 " << c.theta2 << '\n';
  }
}

int run_evaluate(const Config& cfg, const std::string& forced_task) {
  Config c = cfg;
  if (!forced_task.empty()) c.set("task", forced_task);
  const ExperimentSpec spec = spec_from_config(c);
  const MetricsReport report = run_experiment(spec);
  print_report(report);
  const std::string out = c.get("out", "");
  if (!out.empty()) {
    for (const auto& p : emit_report(report, out, report_format_from_string(c.get("format", "csv")))) {
      std::cout << "wrote " << p << '\n';
    }
    std::cout << "wrote " << write_manifest(out, c, {{"command", "evaluate"}}) << '\n';
  }
  return 0;
}

int run_generate(const Config& cfg) {
  SchemeConfig s = scheme_from_config(cfg);
  s.gamma = cfg.get_doubles("gamma", {0.04}).at(0) / kMicro;
  const auto n = cfg.get_u64("trajectories", 1000);
  const int steps = static_cast<int>(std::llround(cfg.get_double("t_total_us", 20.0) * kMicro / s.dt));
  const auto seed = cfg.get_u64("seed", 1);
  const int workers = cfg.get_int("workers", 1);
  const std::string out = cfg.get("out", "");
  if (out.empty()) throw std::invalid_argument("generate needs --out <file.csv|file.bin>");
  const auto all = all_basis_states();
  const auto states = initial_states_from(cfg, "generate.initial", {all.begin(), all.end()});

  Dataset ds;
  if (cfg.has("generate.inject_qubit")) {
    InjectedFlip flip;
    flip.qubit = cfg.get_int("generate.inject_qubit", 1);
    flip.step = static_cast<int>(
        std::llround(cfg.get_double("generate.inject_time_us", 3.0) * kMicro / s.dt));
    ds = generate_injected_dataset(s, states.at(0), flip, n, steps, seed, workers);
  } else {
    ds = generate_dataset(s, states, n, steps, seed, workers);
  }
  write_dataset(ds, out);
  std::cout << "wrote " << ds.trajectories.size() << " trajectories of " << steps << " steps to "
            << out << '\n';
  return 0;
}

int run_train(const Config& cfg) {
  const TrainConfig tc = train_config_from(cfg);
  const std::string out = cfg.get("out", "");
  if (out.empty()) throw std::invalid_argument("train needs --out <dir>");
  const int workers = cfg.get_int("workers", 1);
  Dataset train_set, val_set;
  if (cfg.has("train.data")) {
    train_set = read_dataset(cfg.get("train.data", ""));
    if (!cfg.has("train.val_data")) throw std::invalid_argument("train.data needs train.val_data");
    val_set = read_dataset(cfg.get("train.val_data", ""));
  } else {
    SchemeConfig s = scheme_from_config(cfg);
    s.gamma = cfg.get_double("train.gamma", cfg.get_doubles("gamma", {0.04}).at(0)) / kMicro;
    const int steps = static_cast<int>(
        std::llround(cfg.get_double("train.t_total_us", cfg.get_double("t_total_us", 20.0)) *
                     kMicro / s.dt));
    const auto all = all_basis_states();
    const auto states = initial_states_from(cfg, "train.initial", {all.begin(), all.end()});
    const auto seed = cfg.get_u64("seed", 1);
    train_set = generate_dataset(s, states, cfg.get_u64("trajectories", 20000), steps,
                                 splitmix64(seed ^ 0x7261696eULL), workers);
    val_set = generate_dataset(s, states, cfg.get_u64("train.val_trajectories", 2000), steps,
                               splitmix64(seed ^ 0x76616cULL), workers);
  }
  std::filesystem::create_directories(out);
  const TrainResult r = train(train_set, val_set, tc, [](const EpochRecord& e) {
    std::cout << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss "
              << e.val_loss << " val_accuracy " << e.val_accuracy << std::endl;
  });
  const std::string ckpt = (std::filesystem::path(out) / "network.txt").string();
  save_checkpoint(r.params, ckpt);
  write_learning_curve_csv(r.curve, (std::filesystem::path(out) / "learning_curve.csv").string());
  write_manifest(out, cfg, {{"command", "train"},
                            {"parameter_count", std::to_string(r.params.parameter_count())}});
  std::cout << "wrote " << ckpt << " (" << r.params.parameter_count() << " parameters)\n";
  return 0;
}

int run_report(const std::string& in, const std::string& out, const std::string& format) {
  std::ifstream f(in);
  if (!f) throw std::runtime_error("cannot open '" + in + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const MetricsReport r = report_from_json(ss.str());
  print_report(r);
  if (!out.empty()) {
    for (const auto& p : emit_report(r, out, report_format_from_string(format))) {
      std::cout << "wrote " << p << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous syndrome decoding simulator"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, eval_f, anneal_f;
  double gen_t = 0.0;
  auto* gen = app.add_subcommand("generate", "Write a trajectory dataset (.csv or .bin)");
  add_common(gen, gen_f, false);
  gen->add_option("--t-total", gen_t, "Trajectory length in microseconds");

  auto* tr = app.add_subcommand("train", "Train an RNN decoder");
  add_common(tr, train_f, false);
  int epochs = 0, hidden = 0;
  std::string cell;
  tr->add_option("--epochs", epochs, "Training epochs");
  tr->add_option("--hidden", hidden, "Hidden size");
  tr->add_option("--cell", cell, "lstm or gru")->check(CLI::IsMember({"lstm", "gru"}));

  auto* ev = app.add_subcommand("evaluate", "Run tracking, t1, bitflip or detection experiments");
  add_common(ev, eval_f, true);
  std::string task, checkpoint, format;
  ev->add_option("--task", task, "tracking | t1-extension | bit-flip-protection | detection-stats");
  ev->add_option("--checkpoint", checkpoint, "RNN checkpoint");
  ev->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* an = app.add_subcommand("anneal", "Run the annealing experiment");
  add_common(an, anneal_f, true);
  std::string an_checkpoint, an_format;
  an->add_option("--checkpoint", an_checkpoint, "RNN checkpoint");
  an->add_option("--format", an_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* rep = app.add_subcommand("report", "Print or convert a JSON report");
  std::string rep_in, rep_out, rep_format = "csv";
  rep->add_option("--in", rep_in, "Report JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "Directory for converted tables");
  rep->add_option("--format", rep_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Config c = resolve(gen_f, gen);
      if (gen->count("--t-total")) c.set("t_total_us", std::to_string(gen_t));
      return run_generate(c);
    }
    if (tr->parsed()) {
      Config c = resolve(train_f, tr);
      if (tr->count("--epochs")) c.set("train.epochs", std::to_string(epochs));
      if (tr->count("--hidden")) c.set("train.hidden", std::to_string(hidden));
      if (!cell.empty()) c.set("train.cell", cell);
      return run_train(c);
    }
    if (ev->parsed()) {
      Config c = resolve(eval_f, ev);
      if (!task.empty()) c.set("task", task);
      if (!checkpoint.empty()) c.set("rnn.checkpoint", checkpoint);
      if (!format.empty()) c.set("format", format);
      if (c.get("task", "tracking") == "annealing") {
        throw std::invalid_argument("use the anneal subcommand for annealing");
      }
      return run_evaluate(c, "");
    }
    if (an->parsed()) {
      Config c = resolve(anneal_f, an);
      if (!an_checkpoint.empty()) c.set("rnn.checkpoint", an_checkpoint);
      if (!an_format.empty()) c.set("format", an_format);
      if (!c.has("t_total_us")) c.set("t_total_us", "120");
      return run_evaluate(c, "annealing");
    }
    if (rep->parsed()) return run_report(rep_in, rep_out, rep_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

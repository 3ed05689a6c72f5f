// SPDX-License-Identifier: Apache-2.0

#include "cqec/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cqec {

static_assert(std::endian::native == std::endian::little,
              "binary dataset I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'Q', 'E', 'C', 'D', 'S', '0', '1'};

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

std::map<std::string, std::string> parse_fields(const std::string& line, const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  if (out.empty()) throw std::runtime_error(path + ": expected key=value fields");
  return out;
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& key,
                         const std::string& path) {
  auto it = f.find(key);
  if (it == f.end()) throw std::runtime_error(path + ": missing field '" + key + "'");
  return it->second;
}

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error(path + ": truncated binary dataset");
  }
  return value;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  const SchemeConfig& c = ds.cfg;
  out << "# cqec-dataset v1 scheme=" << to_string(c.scheme) << " error_kind=" << to_string(c.error_kind)
      << " gamma=" << fmt(c.gamma) << " dt=" << fmt(c.dt) << " tau_m=" << fmt(c.tau_m)
      << " cov_lags=" << fmt(c.cov_lags[0]) << ';' << fmt(c.cov_lags[1]) << ';'
      << fmt(c.cov_lags[2]) << ';' << fmt(c.cov_lags[3]) << " drift_total=" << fmt(c.drift_total)
      << " N=" << c.n_sequences << " seed=" << ds.seed << '\n';
  for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
    const Trajectory& t = ds.trajectories[k];
    out << "@trajectory index=" << k << " initial=" << t.meta.initial.index()
        << " sequence=" << t.meta.sequence_index << " stream=" << t.meta.stream_id << " injected=";
    if (t.meta.injected) {
      out << t.meta.injected->qubit << ':' << t.meta.injected->step;
    } else {
      out << "none";
    }
    out << " steps=" << t.steps.size() << '\n';
    out << "step,true_state,mean1,mean2,I1,I2\n";
    for (std::size_t s = 0; s < t.steps.size(); ++s) {
      const StepRecord& r = t.steps[s];
      out << s << ',' << int(r.true_state) << ',' << fmt(r.mean1) << ',' << fmt(r.mean2) << ','
          << fmt(r.i1) << ',' << fmt(r.i2) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for dataset '" + path + "'");
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("# cqec-dataset v1", 0) != 0) {
    throw std::runtime_error(path + ": not a cqec CSV dataset");
  }
  Dataset ds;
  {
    const auto f = parse_fields(line, path);
    SchemeConfig& c = ds.cfg;
    c = SchemeConfig::defaults(scheme_from_string(field(f, "scheme", path)));
    c.error_kind = error_kind_from_string(field(f, "error_kind", path));
    c.gamma = std::stod(field(f, "gamma", path));
    c.dt = std::stod(field(f, "dt", path));
    c.tau_m = std::stod(field(f, "tau_m", path));
    std::string lags = field(f, "cov_lags", path);
    std::replace(lags.begin(), lags.end(), ';', ' ');
    std::istringstream ls(lags);
    for (double& v : c.cov_lags) {
      if (!(ls >> v)) throw std::runtime_error(path + ": malformed cov_lags");
    }
    c.drift_total = std::stod(field(f, "drift_total", path));
    c.n_sequences = std::stoull(field(f, "N", path));
    ds.seed = std::stoull(field(f, "seed", path));
  }
  Trajectory* current = nullptr;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("step,", 0) == 0) continue;
    if (line.rfind("@trajectory", 0) == 0) {
      const auto f = parse_fields(line, path);
      Trajectory t;
      t.meta.scheme = ds.cfg.scheme;
      t.meta.seed = ds.seed;
      t.meta.initial = ErrorState(std::stoi(field(f, "initial", path)));
      t.meta.sequence_index = std::stoull(field(f, "sequence", path));
      t.meta.stream_id = std::stoull(field(f, "stream", path));
      const std::string inj = field(f, "injected", path);
      if (inj != "none") {
        const auto colon = inj.find(':');
        if (colon == std::string::npos) throw std::runtime_error(path + ": malformed injected field");
        t.meta.injected = InjectedFlip{std::stoi(inj.substr(0, colon)), std::stoi(inj.substr(colon + 1))};
      }
      t.steps.reserve(std::stoull(field(f, "steps", path)));
      ds.trajectories.push_back(std::move(t));
      current = &ds.trajectories.back();
      continue;
    }
    if (current == nullptr) throw std::runtime_error(path + ": data row before @trajectory");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::size_t step;
    int state;
    StepRecord r;
    if (!(row >> step >> state >> r.mean1 >> r.mean2 >> r.i1 >> r.i2)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed data row");
    }
    r.true_state = static_cast<std::uint8_t>(ErrorState(state).index());
    current->steps.push_back(r);
  }
  return ds;
}

void write_dataset_binary(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset '" + path + "'");
  const SchemeConfig& c = ds.cfg;
  out.write(kMagic, sizeof(kMagic));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(c.scheme));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(c.error_kind));
  put(out, c.gamma);
  put(out, c.dt);
  put(out, c.tau_m);
  for (double v : c.cov_lags) put(out, v);
  put(out, c.drift_total);
  put<std::uint64_t>(out, c.n_sequences);
  put<std::uint64_t>(out, ds.seed);
  put<std::uint64_t>(out, ds.trajectories.size());
  for (const Trajectory& t : ds.trajectories) {
    put<std::uint64_t>(out, t.meta.stream_id);
    put<std::uint64_t>(out, t.meta.sequence_index);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.meta.initial.index()));
    put<std::int32_t>(out, t.meta.injected ? t.meta.injected->qubit : 0);
    put<std::int32_t>(out, t.meta.injected ? t.meta.injected->step : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.steps.size()));
    for (const StepRecord& r : t.steps) {
      put(out, r.true_state);
      put(out, r.mean1);
      put(out, r.mean2);
      put(out, r.i1);
      put(out, r.i2);
    }
  }
  if (!out) throw std::runtime_error("write failed for dataset '" + path + "'");
}

Dataset read_dataset_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a cqec binary dataset");
  }
  Dataset ds;
  const auto scheme = get<std::uint8_t>(in, path);
  const auto kind = get<std::uint8_t>(in, path);
  if (scheme > 3 || kind > 1) throw std::runtime_error(path + ": corrupt header");
  SchemeConfig& c = ds.cfg;
  c = SchemeConfig::defaults(static_cast<Scheme>(scheme));
  c.error_kind = static_cast<ErrorKind>(kind);
  c.gamma = get<double>(in, path);
  c.dt = get<double>(in, path);
  c.tau_m = get<double>(in, path);
  for (double& v : c.cov_lags) v = get<double>(in, path);
  c.drift_total = get<double>(in, path);
  c.n_sequences = get<std::uint64_t>(in, path);
  ds.seed = get<std::uint64_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  ds.trajectories.resize(n);
  for (Trajectory& t : ds.trajectories) {
    t.meta.scheme = c.scheme;
    t.meta.seed = ds.seed;
    t.meta.stream_id = get<std::uint64_t>(in, path);
    t.meta.sequence_index = get<std::uint64_t>(in, path);
    t.meta.initial = ErrorState(get<std::uint8_t>(in, path));
    const auto q = get<std::int32_t>(in, path);
    const auto step = get<std::int32_t>(in, path);
    if (q != 0) t.meta.injected = InjectedFlip{q, step};
    t.steps.resize(get<std::uint32_t>(in, path));
    for (StepRecord& r : t.steps) {
      r.true_state = get<std::uint8_t>(in, path);
      if (r.true_state > 7) throw std::runtime_error(path + ": corrupt state label");
      r.mean1 = get<double>(in, path);
      r.mean2 = get<double>(in, path);
      r.i1 = get<double>(in, path);
      r.i2 = get<double>(in, path);
    }
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  if (ends_with(path, ".csv")) {
    write_dataset_csv(ds, path);
  } else {
    write_dataset_binary(ds, path);
  }
}

Dataset read_dataset(const std::string& path) {
  return ends_with(path, ".csv") ? read_dataset_csv(path) : read_dataset_binary(path);
}

}  // namespace cqec

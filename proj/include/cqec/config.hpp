// SPDX-License-Identifier: Apache-2.0
//
// Flat hierarchical key/value configuration:
//
//   # comment
//   scheme = B
//   [bayes]
//   history_depth = 4        -> key "bayes.history_depth"
//
// Values are strings; typed getters parse on access. Lists are comma
// separated.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cqec {

class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted `key = value` lines; parses back to the same configuration.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& text);

}  // namespace cqec

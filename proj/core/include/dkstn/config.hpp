#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dkstn/metrics.hpp"
#include "dkstn/model.hpp"
#include "dkstn/synth.hpp"
#include "dkstn/training.hpp"

namespace dkstn {

enum class ValueType { integer, integer_list, number, boolean, text };

struct ConfigKey {
  std::string section;
  std::string key;
  std::string default_value;
  ValueType type;
  std::string doc;
};

/// Every accepted key with its default.
const std::vector<ConfigKey>& config_schema();

/// `[section]` headers, `key = value` lines, `#` comments. Unknown sections
/// or keys are rejected; missing keys take schema defaults.
class RunConfig {
 public:
  RunConfig();  // all defaults
  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  const std::string& get(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key) const;
  std::size_t get_size(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
  /// Comma-separated non-negative integers.
  std::vector<std::size_t> get_size_list(const std::string& section, const std::string& key) const;

  /// Canonical `section.key=value` lines in schema order; stable input for
  /// hashing.
  std::string canonical() const;
  std::uint64_t hash() const;

  GridSpec grid() const;
  SynthParams synth_params() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace dkstn

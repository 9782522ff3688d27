#include "dkstn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dkstn/error.hpp"

namespace dkstn {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"run", "seed", "7", ValueType::integer, "master seed for data, initialization and shuffling"},
      {"run", "output_dir", "dkstn-run", ValueType::text, "artifact directory for `dkstn all`"},

      {"grid", "lat", "13", ValueType::integer, "latitude rows, 15N..15S"},
      {"grid", "lon", "144", ValueType::integer, "longitude columns over 0..360"},

      {"synth", "days", "1200", ValueType::integer, "days per synthetic series"},
      {"synth", "start", "1990-01-01", ValueType::text, "first day of the synthetic series"},
      {"synth", "model_sources", "1", ValueType::integer, "number of pseudo-model series"},
      {"synth", "model_bias", "0.3", ValueType::number, "pseudo-model offset, in noise standard deviations"},
      {"synth", "annual_scale", "1", ValueType::number, "annual cycle multiplier"},
      {"synth", "drift_scale", "1", ValueType::number, "linear drift multiplier"},
      {"synth", "wave_scale", "1", ValueType::number, "eastward wave multiplier"},
      {"synth", "noise_scale", "1", ValueType::number, "white noise multiplier"},
      {"synth", "wave_period", "45", ValueType::number, "wave period in days"},
      {"synth", "phase_diffusion", "0", ValueType::number, "random-walk step of the wave phase, rad/sqrt(day)"},
      {"synth", "amplitude_variability", "0", ValueType::number, "std of the wave log-amplitude"},

      {"data", "reanalysis", "", ValueType::text, "raw reanalysis grid file; empty means synthesize"},
      {"data", "model", "", ValueType::text, "comma-separated raw model grid files"},
      {"data", "merge", "true", ValueType::boolean, "balance reanalysis and model samples 1:1"},
      {"data", "reanalysis_stride", "1", ValueType::integer, "window stride over reanalysis days"},
      {"data", "model_stride", "1", ValueType::integer_list, "window stride over model days (one value or one per source)"},
      {"data", "valid_days", "150", ValueType::integer, "trailing days before the test period used for validation"},
      {"data", "test_days", "200", ValueType::integer, "trailing days held out for prediction and evaluation"},

      {"dkpm", "max_wave", "3", ValueType::integer, "harmonics removed from the annual cycle"},
      {"dkpm", "running_mean_days", "120", ValueType::integer, "length of the preceding-mean window"},
      {"dkpm", "mask_sst", "true", ValueType::boolean, "set land-masked SST to 0"},
      {"dkpm", "fit_mode", "climatological", ValueType::text, "harmonic fit over the whole training period"},

      {"srcm", "layers", "7", ValueType::integer, "convolution layers (first plain, rest residual)"},
      {"srcm", "channels", "16", ValueType::integer, "feature maps per layer"},
      {"srcm", "first_kernel", "7", ValueType::integer, "first-layer kernel size"},
      {"srcm", "residual_kernel", "3", ValueType::integer, "residual-layer kernel size"},
      {"srcm", "first_stride", "2", ValueType::integer, "first-layer stride"},
      {"srcm", "projection_dim", "256", ValueType::integer, "per-day feature length; 0 keeps the raw flatten"},

      {"taam", "k", "7", ValueType::integer, "input days"},
      {"taam", "n", "35", ValueType::integer, "forecast days"},
      {"taam", "hidden", "256", ValueType::integer, "LSTM hidden size and attention width"},
      {"taam", "tied_decoder", "false", ValueType::boolean, "share one LSTM across decoder steps"},

      {"training", "epochs", "25", ValueType::integer, "passes over the training split"},
      {"training", "learning_rate", "1e-4", ValueType::number, "Adam step size"},
      {"training", "weight_decay", "1e-3", ValueType::number, "coupled L2 weight decay"},
      {"training", "batch_size", "16", ValueType::integer, "samples per update"},
      {"training", "beta", "0.5", ValueType::number, "loss weight of RMM1"},
      {"training", "gamma", "0.5", ValueType::number, "loss weight of RMM2"},
      {"training", "check_finite", "false", ValueType::boolean, "validate every intermediate value"},

      {"eval", "cor_threshold", "0.5", ValueType::number, "skill threshold on COR"},
      {"eval", "rmse_threshold", "1.4", ValueType::number, "skill threshold on RMSE"},
      {"eval", "phase_mode", "literal", ValueType::text, "literal or wrapped phase error"},
      {"eval", "seasonal", "true", ValueType::boolean, "write per-season reports"},
  };
  return schema;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool known_section(const std::string& section) {
  return std::any_of(config_schema().begin(), config_schema().end(),
                     [&](const ConfigKey& k) { return k.section == section; });
}

bool known_key(const std::string& section, const std::string& key) {
  return std::any_of(config_schema().begin(), config_schema().end(),
                     [&](const ConfigKey& k) { return k.section == section && k.key == key; });
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_schema()) values_[k.section][k.key] = k.default_value;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') fail(ErrorKind::parse, where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) fail(ErrorKind::parse, where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::parse, where + "expected 'key = value'");
    if (section.empty()) fail(ErrorKind::parse, where + "key outside of a [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_key(section, key))
      fail(ErrorKind::parse, where + "unknown key '" + key + "' in [" + section + "]");
    cfg.values_[section][key] = value;
  }
  // Type-check everything up front so errors surface at load time.
  for (const auto& k : config_schema()) {
    switch (k.type) {
      case ValueType::integer: (void)cfg.get_int(k.section, k.key); break;
      case ValueType::integer_list: (void)cfg.get_size_list(k.section, k.key); break;
      case ValueType::number: (void)cfg.get_double(k.section, k.key); break;
      case ValueType::boolean: (void)cfg.get_bool(k.section, k.key); break;
      case ValueType::text: break;
    }
  }
  (void)Date::parse(cfg.get("synth", "start"));
  (void)parse_phase_mode(cfg.get("eval", "phase_mode"));
  if (cfg.get("dkpm", "fit_mode") != "climatological")
    fail(ErrorKind::configuration, "[dkpm] fit_mode: only 'climatological' is supported");
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  if (!known_key(section, key))
    fail(ErrorKind::parse, "unknown key '" + key + "' in [" + section + "]");
  values_[section][key] = value;
}

const std::string& RunConfig::get(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  if (s == values_.end() || !s->second.count(key))
    fail(ErrorKind::parse, "unknown key '" + key + "' in [" + section + "]");
  return s->second.at(key);
}

long long RunConfig::get_int(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    fail(ErrorKind::parse, "[" + section + "] " + key + ": expected an integer, got '" + v + "'");
  return out;
}

std::size_t RunConfig::get_size(const std::string& section, const std::string& key) const {
  const long long v = get_int(section, key);
  if (v < 0)
    fail(ErrorKind::parse, "[" + section + "] " + key + ": must be non-negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::logic_error&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    fail(ErrorKind::parse, "[" + section + "] " + key + ": expected a number, got '" + v + "'");
  return out;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::parse, "[" + section + "] " + key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& section,
                                             const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(section, key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& k : config_schema())
    out += k.section + "." + k.key + "=" + get(k.section, k.key) + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

GridSpec RunConfig::grid() const {
  return GridSpec::tropical_band(get_size("grid", "lat"), get_size("grid", "lon"));
}

SynthParams RunConfig::synth_params() const {
  SynthParams p;
  p.start = Date::parse(get("synth", "start"));
  p.annual_scale = get_double("synth", "annual_scale");
  p.drift_scale = get_double("synth", "drift_scale");
  p.wave_scale = get_double("synth", "wave_scale");
  p.noise_scale = get_double("synth", "noise_scale");
  p.wave_period = get_double("synth", "wave_period");
  p.phase_diffusion = get_double("synth", "phase_diffusion");
  p.amplitude_variability = get_double("synth", "amplitude_variability");
  return p;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.lat = get_size("grid", "lat");
  m.lon = get_size("grid", "lon");
  m.channels = 4;
  m.srcm.input_channels = 4;
  m.srcm.layers = get_size("srcm", "layers");
  m.srcm.channels = get_size("srcm", "channels");
  m.srcm.first_kernel = get_size("srcm", "first_kernel");
  m.srcm.residual_kernel = get_size("srcm", "residual_kernel");
  m.srcm.first_stride = get_size("srcm", "first_stride");
  m.srcm.projection_dim = get_size("srcm", "projection_dim");
  m.taam.k = get_size("taam", "k");
  m.taam.n = get_size("taam", "n");
  m.taam.hidden = get_size("taam", "hidden");
  m.taam.tied_decoder = get_bool("taam", "tied_decoder");
  m.validate();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = get_size("training", "epochs");
  t.learning_rate = get_double("training", "learning_rate");
  t.weight_decay = get_double("training", "weight_decay");
  t.batch_size = get_size("training", "batch_size");
  t.beta = get_double("training", "beta");
  t.gamma = get_double("training", "gamma");
  t.check_finite = get_bool("training", "check_finite");
  t.seed = static_cast<std::uint64_t>(get_int("run", "seed"));
  t.validate();
  return t;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dkstn

namespace dkstn {

std::vector<std::size_t> RunConfig::get_size_list(const std::string& section,
                                                  const std::string& key) const {
  std::vector<std::size_t> out;
  for (const std::string& item : get_list(section, key)) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::logic_error&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size() || v < 0)
      fail(ErrorKind::parse, "[" + section + "] " + key +
                                 ": expected comma-separated non-negative integers, got '" +
                                 get(section, key) + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty())
    fail(ErrorKind::parse, "[" + section + "] " + key + ": expected at least one integer");
  return out;
}

}  // namespace dkstn

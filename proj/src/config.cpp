/* Copyright 2026 The BCDE Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
        limitations under the License.
==============================================================================*/

#include "bcde/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace bcde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "': " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, "expected a number");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& value, std::size_t min = 0) {
  const auto v = parse_number<std::size_t>(key, value);
  if (v < min) bad_value(key, value, "must be at least " + std::to_string(min));
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "expected a real number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "expected a real number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "expected true or false");
}

std::optional<std::size_t> parse_optional_count(const std::string& key, const std::string& value) {
  if (value == "all") return std::nullopt;
  return parse_count(key, value, 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value, std::size_t min_item) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto v = parse_number<T>(key, item);
    if (v < static_cast<T>(min_item)) bad_value(key, value, "list items must be at least " + std::to_string(min_item));
    out.push_back(v);
  }
  return out;
}

std::string real_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
std::string list_text(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string optional_text(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "all"; }

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"task", [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           resolve_task(v);
         } catch (const std::invalid_argument&) {
           bad_value(k, v, "expected quadrant1, quadrant2, quadrant3, topdown, shift-sensitive or shift-invariant");
         }
         c.task = v;
       }},
      {"n_l", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_l = parse_count(k, v, 1); }},
      {"n_u", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_u = parse_optional_count(k, v); }},
      {"val_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.val_size = parse_count(k, v, 1); }},
      {"test_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.test_size = parse_optional_count(k, v); }},
      {"downsample", [](RunConfig& c, const std::string& k, const std::string& v) { c.downsample = parse_count(k, v, 1); }},
      {"max_shift", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.max_shift = parse_number<int>(k, v);
         if (c.max_shift < 0) bad_value(k, v, "must be nonnegative");
       }},
      {"data_seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.data_seed = parse_number<std::uint64_t>(k, v); }},
      {"latent_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.latent_dim = parse_count(k, v, 1); }},
      {"hidden", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hidden = v == "none" ? std::vector<std::size_t>{} : parse_list<std::size_t>(k, v, 1);
       }},
      {"activation", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "relu") c.activation = Activation::relu;
         else if (v == "tanh") c.activation = Activation::tanh;
         else bad_value(k, v, "expected relu or tanh");
       }},
      {"decoder", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "bernoulli") c.decoder = DecoderKind::bernoulli;
         else if (v == "gaussian") c.decoder = DecoderKind::gaussian;
         else bad_value(k, v, "expected bernoulli or gaussian");
       }},
      {"decoder_var", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.decoder_var = parse_real(k, v);
         if (!(c.decoder_var > 0.0)) bad_value(k, v, "must be positive");
       }},
      {"tie_init", [](RunConfig& c, const std::string& k, const std::string& v) { c.tie_init = parse_bool(k, v); }},
      {"mode", [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.mode = parse_train_mode(v);
         } catch (const std::invalid_argument&) {
           bad_value(k, v, "expected conditional, pretrain, hybrid or hybrid-factored");
         }
       }},
      {"alpha", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.alpha = parse_real(k, v);
         if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) bad_value(k, v, "must lie in [0, 1]");
       }},
      {"lambda", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.lambda = parse_real(k, v);
         if (!(c.lambda >= 0.0)) bad_value(k, v, "must be nonnegative");
       }},
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = parse_real(k, v); }},
      {"beta1", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta1 = parse_real(k, v); }},
      {"beta2", [](RunConfig& c, const std::string& k, const std::string& v) { c.beta2 = parse_real(k, v); }},
      {"epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.epsilon = parse_real(k, v); }},
      {"batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch = parse_count(k, v, 1); }},
      {"patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.patience = parse_count(k, v, 1); }},
      {"max_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_epochs = parse_count(k, v, 1); }},
      {"pretrain_max_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.pretrain_max_epochs = parse_count(k, v, 1); }},
      {"iw_eval", [](RunConfig& c, const std::string& k, const std::string& v) { c.iw_eval = parse_count(k, v, 1); }},
      {"seeds", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seeds = parse_list<std::uint64_t>(k, v, 0);
         if (c.seeds.empty()) bad_value(k, v, "at least one seed is required");
       }},
      {"export_count", [](RunConfig& c, const std::string& k, const std::string& v) { c.export_count = parse_count(k, v, 1); }},
      {"data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"cache", [](RunConfig& c, const std::string&, const std::string& v) { c.cache = v; }},
  };
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::optional<std::string>& env_data_dir) {
  RunConfig c;
  c.data_dir = env_data_dir.value_or("data/mnist");
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    if (value.empty()) throw ConfigError("empty value for key '" + key + "'");
    it->second(c, key, value);
  }
  if (!seen.contains("lambda") && resolve_task(c.task).second) c.lambda = 0.1;
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::optional<std::string> env;
  if (const char* d = std::getenv("BCDE_DATA_DIR"); d && *d) env = d;
  return parse_config(ss.str(), env);
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  os << "task = " << c.task << "\n"
     << "n_l = " << c.n_l << "\n"
     << "n_u = " << optional_text(c.n_u) << "\n"
     << "val_size = " << c.val_size << "\n"
     << "test_size = " << optional_text(c.test_size) << "\n"
     << "downsample = " << c.downsample << "\n"
     << "max_shift = " << c.max_shift << "\n"
     << "data_seed = " << c.data_seed << "\n"
     << "latent_dim = " << c.latent_dim << "\n"
     << "hidden = " << (c.hidden.empty() ? "none" : list_text(c.hidden)) << "\n"
     << "activation = " << to_string(c.activation) << "\n"
     << "decoder = " << to_string(c.decoder) << "\n"
     << "decoder_var = " << real_text(c.decoder_var) << "\n"
     << "tie_init = " << (c.tie_init ? "true" : "false") << "\n"
     << "mode = " << to_string(c.mode) << "\n"
     << "alpha = " << real_text(c.alpha) << "\n"
     << "lambda = " << real_text(c.lambda) << "\n"
     << "lr = " << real_text(c.lr) << "\n"
     << "beta1 = " << real_text(c.beta1) << "\n"
     << "beta2 = " << real_text(c.beta2) << "\n"
     << "epsilon = " << real_text(c.epsilon) << "\n"
     << "batch = " << c.batch << "\n"
     << "patience = " << c.patience << "\n"
     << "max_epochs = " << c.max_epochs << "\n"
     << "pretrain_max_epochs = " << c.pretrain_max_epochs << "\n"
     << "iw_eval = " << c.iw_eval << "\n"
     << "seeds = " << list_text(c.seeds) << "\n"
     << "export_count = " << c.export_count << "\n"
     << "data_dir = " << c.data_dir << "\n"
     << "out_dir = " << c.out_dir << "\n";
  if (!c.cache.empty()) os << "cache = " << c.cache << "\n";
  return os.str();
}

std::string RunConfig::cache_path() const {
  return cache.empty() ? (std::filesystem::path(out_dir) / "split.bin").string() : cache;
}

std::string RunConfig::seed_dir(std::uint64_t seed) const {
  return (std::filesystem::path(out_dir) / ("seed" + std::to_string(seed))).string();
}

std::string RunConfig::checkpoint_path(std::uint64_t seed) const {
  return (std::filesystem::path(seed_dir(seed)) / "checkpoint.bin").string();
}

std::string RunConfig::log_path(std::uint64_t seed) const {
  return (std::filesystem::path(seed_dir(seed)) / "log.csv").string();
}

PrepareOptions RunConfig::prepare_options() const {
  PrepareOptions p;
  p.data_dir = data_dir;
  p.task = task;
  p.downsample = downsample;
  p.n_l = n_l;
  p.n_u = n_u;
  p.val_size = val_size;
  p.test_size = test_size;
  p.max_shift = max_shift;
  p.seed = data_seed;
  return p;
}

ModelConfig RunConfig::model_config(std::size_t x_dim, std::size_t y_dim, std::uint64_t seed) const {
  ModelConfig m;
  m.x_dim = x_dim;
  m.y_dim = y_dim;
  m.latent_dim = latent_dim;
  m.hidden = hidden;
  m.activation = activation;
  m.inference = mode == TrainMode::hybrid_factored ? InferenceMode::factored : InferenceMode::standard;
  m.decoder = decoder;
  m.decoder_var = decoder_var;
  m.tie_init = tie_init;
  m.seed = seed;
  return m;
}

TrainConfig RunConfig::train_config(std::uint64_t seed) const {
  TrainConfig t;
  t.mode = mode;
  t.hybrid = {alpha, lambda};
  t.adam = {lr, beta1, beta2, epsilon};
  t.batch = batch;
  t.patience = patience;
  t.max_epochs = max_epochs;
  t.pretrain_max_epochs = pretrain_max_epochs;
  t.seed = seed;
  t.checkpoint_path = checkpoint_path(seed);
  t.log_path = log_path(seed);
  return t;
}

}  // namespace bcde

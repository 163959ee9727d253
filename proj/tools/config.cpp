// Copyright 2026 The ssmd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssmd::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_long(const std::string& s, long& out) {
  try {
    std::size_t used = 0;
    out = std::stol(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

void check_value(const std::string& key, const KeyInfo& info, const std::string& value) {
  long l = 0;
  double d = 0.0;
  bool b = false;
  bool ok = true;
  switch (info.type) {
    case ValueType::kInt:
      ok = parse_long(value, l);
      break;
    case ValueType::kReal:
      ok = parse_double(value, d);
      break;
    case ValueType::kBool:
      ok = parse_bool(value, b);
      break;
    case ValueType::kIntList:
      for (const auto& item : split_list(value)) ok = ok && parse_long(item, l);
      break;
    case ValueType::kRealList:
      for (const auto& item : split_list(value)) ok = ok && parse_double(item, d);
      break;
    case ValueType::kString:
    case ValueType::kPath:
      break;
  }
  if (!ok) throw ConfigError("invalid value '" + value + "' for key " + key);
}

}  // namespace

const std::map<std::string, KeyInfo>& Config::schema() {
  using V = ValueType;
  static const std::map<std::string, KeyInfo> keys = {
      {"seed", {V::kInt, "0", "root seed for every random stream"}},
      {"spec.S", {V::kInt, "16", "alphabet size of new corpora and models"}},
      {"spec.D", {V::kInt, "32", "sequence length of new corpora and models"}},
      {"schedule.kind", {V::kString, "cosine", "noise schedule: cosine | linear"}},
      {"window.kind", {V::kString, "cosine", "window: cosine | linear | constant"}},
      {"window.dtau", {V::kReal, "0.083", "cosine window step"}},
      {"window.cap", {V::kInt, "0", "constant window cap; 0 means D"}},
      {"sampler.family", {V::kString, "spec", "mdm | spec | spec-basic"}},
      {"sampler.inner_loops", {V::kInt, "1", "draft-verify loops per non-causal pass"}},
      {"sampler.grid_steps", {V::kInt, "32", "MDM time-grid steps"}},
      {"sampler.n", {V::kInt, "100", "sequences drawn by the sample command"}},
      {"model.hidden", {V::kInt, "64", "hybrid width"}},
      {"model.heads", {V::kInt, "4", "attention heads"}},
      {"model.nc_blocks", {V::kInt, "2", "non-causal blocks"}},
      {"model.c_blocks", {V::kInt, "1", "causal blocks"}},
      {"model.mlp_mult", {V::kInt, "4", "MLP expansion factor"}},
      {"model.init_std", {V::kReal, "0.02", "initial weight standard deviation"}},
      {"train.steps", {V::kInt, "20000", "optimizer steps"}},
      {"train.batch_size", {V::kInt, "64", "sequences per step"}},
      {"train.warmup", {V::kInt, "200", "linear warmup steps"}},
      {"train.peak_lr", {V::kReal, "3e-4", "peak learning rate"}},
      {"train.final_lr_ratio", {V::kReal, "0", "final rate as a fraction of the peak"}},
      {"train.weight_decay", {V::kReal, "0.01", "decoupled weight decay"}},
      {"train.grad_clip", {V::kReal, "1", "global gradient-norm clip; 0 disables"}},
      {"train.eval_every", {V::kInt, "500", "steps between loss reports"}},
      {"train.eval_sequences", {V::kInt, "256", "held-out examples per report"}},
      {"train.held_out", {V::kInt, "256", "corpus lines held out for reports"}},
      {"train.checkpoint_every", {V::kInt, "0", "save model.step<N>.ssmd at reports that are multiples of N; 0 disables"}},
      {"train.freeze_noncausal", {V::kBool, "false", "train only the causal path"}},
      {"train.char_mode", {V::kBool, "false", "corpus lines are a-z and space text"}},
      {"corpus.num_words", {V::kInt, "200", "lexicon size"}},
      {"corpus.min_word", {V::kInt, "2", "shortest word"}},
      {"corpus.max_word", {V::kInt, "5", "longest word"}},
      {"corpus.sequences", {V::kInt, "20000", "windows written by make-corpus"}},
      {"tabular.concentration", {V::kReal, "1", "Dirichlet concentration of the joint"}},
      {"tabular.draft_epsilon", {V::kReal, "0.1", "uniform mixing of draft rows"}},
      {"tabular.target_shift", {V::kReal, "0", "mixing of target rows toward draft rows"}},
      {"tabular.first_slot_fallback", {V::kBool, "false", "first target row equals the draft row"}},
      {"tabular.nc_blocks", {V::kInt, "11", "NFE weight of a non-causal pass"}},
      {"tabular.c_blocks", {V::kInt, "1", "NFE weight of a causal pass"}},
      {"likelihood.orderings", {V::kInt, "16", "sampled orderings per ELBO estimate"}},
      {"likelihood.exact_orderings", {V::kBool, "false", "enumerate all orderings (D <= 8)"}},
      {"sweep.families", {V::kString, "spec,mdm", "families in the sweep"}},
      {"sweep.dtau", {V::kRealList, "0.02,0.05,0.083,0.15,0.3,0.6", "cosine window steps"}},
      {"sweep.inner_loops", {V::kIntList, "1,2", "inner loop counts"}},
      {"sweep.linear_window", {V::kBool, "true", "add linear-window points"}},
      {"sweep.grid_steps", {V::kIntList, "2,3,4,6,8,12,16,32", "MDM grid sizes"}},
      {"sweep.n_samples", {V::kInt, "200", "samples per sweep point"}},
      {"paths.corpus", {V::kPath, "", "training corpus"}},
      {"paths.lexicon", {V::kPath, "", "lexicon file"}},
      {"paths.checkpoint", {V::kPath, "", "model checkpoint"}},
      {"paths.resume", {V::kPath, "", "training checkpoint to resume"}},
      {"paths.out_dir", {V::kPath, "out", "output directory"}},
  };
  return keys;
}

Config::Config() {
  for (const auto& [key, info] : schema()) values_[key] = info.default_value;
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  parse(ss.str(), path.string());
}

void Config::parse(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = schema().find(key);
  if (it == schema().end()) throw ConfigError("unknown config key " + key);
  check_value(key, it->second, value);
  values_[key] = value;
}

bool Config::is_set(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key " + key);
  return !it->second.empty();
}

std::string Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key " + key);
  return it->second;
}

long Config::integer(const std::string& key) const {
  long v = 0;
  if (!parse_long(str(key), v)) throw ConfigError("key " + key + " is not an integer");
  return v;
}

double Config::real(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(str(key), v)) throw ConfigError("key " + key + " is not a number");
  return v;
}

bool Config::boolean(const std::string& key) const {
  bool v = false;
  if (!parse_bool(str(key), v)) throw ConfigError("key " + key + " is not a boolean");
  return v;
}

std::vector<long> Config::int_list(const std::string& key) const {
  std::vector<long> out;
  for (const auto& item : split_list(str(key))) {
    long v = 0;
    if (!parse_long(item, v)) throw ConfigError("key " + key + " has a non-integer item " + item);
    out.push_back(v);
  }
  return out;
}

std::vector<double> Config::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) {
    double v = 0.0;
    if (!parse_double(item, v)) throw ConfigError("key " + key + " has a non-numeric item " + item);
    out.push_back(v);
  }
  return out;
}

std::filesystem::path Config::path(const std::string& key) const { return str(key); }

std::filesystem::path Config::require(const std::string& key) const {
  if (!is_set(key)) throw ConfigError("missing required key " + key);
  return path(key);
}

std::filesystem::path Config::require_existing(const std::string& key) const {
  const auto p = require(key);
  if (!std::filesystem::exists(p)) {
    throw ConfigError("key " + key + " points to a missing file: " + p.string());
  }
  return p;
}

std::string Config::resolved() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Config::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(resolved())));
  return buf;
}

}  // namespace ssmd::cli

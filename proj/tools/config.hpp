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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmd::cli {

/// Bad configuration: unknown key, malformed value, missing required path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueType { kInt, kReal, kBool, kString, kPath, kIntList, kRealList };

struct KeyInfo {
  ValueType type;
  std::string default_value;
  std::string help;
};

/// Flat `section.key = value` document over a fixed key schema.
///
/// Files may group keys under `[section]` headers or spell them out in full;
/// `#` and `;` start comments. Every key has a default, so a resolved config
/// is always complete.
class Config {
 public:
  Config();

  static const std::map<std::string, KeyInfo>& schema();

  void load_file(const std::filesystem::path& path);
  void parse(const std::string& text, const std::string& origin = "<string>");
  /// `key=value`, as given to --set.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool is_set(const std::string& key) const;
  std::string str(const std::string& key) const;
  long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<long> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;
  /// Empty when the key is unset.
  std::filesystem::path path(const std::string& key) const;

  /// Throws ConfigError naming the key unless it is set and exists on disk.
  std::filesystem::path require_existing(const std::string& key) const;
  /// Throws ConfigError naming the key unless it is set.
  std::filesystem::path require(const std::string& key) const;

  /// Canonical text: one `key = value` line per key, sorted.
  std::string resolved() const;
  /// FNV-1a 64 of resolved(), as 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& bytes) noexcept;

}  // namespace ssmd::cli

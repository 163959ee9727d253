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
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmd/autodiff.hpp"
#include "ssmd/hybrid_model.hpp"
#include "ssmd/tabular_model.hpp"

namespace ssmd {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind : std::uint8_t { kHybrid = 0, kTabular = 1 };

struct NamedMatrix {
  std::string name;
  ad::Matrix value;
};

/// Binary container: magic "SSMD1", u8 kind, seven u32 dims (S, D, hidden,
/// heads, nc_blocks, c_blocks, mlp_mult), u32 block count, then per block
/// u32 name length, name bytes, u32 rows, u32 cols and rows*cols
/// little-endian f64 values in row-major order.
struct Checkpoint {
  ModelKind kind = ModelKind::kHybrid;
  HybridConfig dims;
  std::vector<NamedMatrix> blocks;

  const ad::Matrix* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Hybrid parameters plus optional extra blocks (e.g. optimizer state).
/// `sidecar_json` is written verbatim to `<path>.json` when non-empty.
void save_hybrid(const std::filesystem::path& path, const HybridModel& model,
                 const std::vector<NamedMatrix>& extra = {}, const std::string& sidecar_json = {});
HybridModel load_hybrid(const Checkpoint& ckpt);
HybridModel load_hybrid(const std::filesystem::path& path);

void save_tabular(const std::filesystem::path& path, const TabularModel& model,
                  const std::string& sidecar_json = {});
TabularModel load_tabular(const Checkpoint& ckpt);

/// Loads either kind.
std::unique_ptr<SpeculativeModel> load_model(const std::filesystem::path& path);

/// Hyperparameter sidecar describing a model (kind, dims, options) as JSON.
std::string describe_model_json(const HybridConfig& cfg);
std::string describe_model_json(const TabularModel& model);

}  // namespace ssmd

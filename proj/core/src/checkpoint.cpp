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

#include "ssmd/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ssmd {
namespace {

constexpr std::array<char, 5> kMagic = {'S', 'S', 'M', 'D', '1'};
constexpr std::uint32_t kMaxNameLength = 4096;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return to_little(v);
}

void write_sidecar(const std::filesystem::path& path, const std::string& json) {
  if (json.empty()) return;
  std::filesystem::path side = path;
  side += ".json";
  std::ofstream os(side);
  if (!os) throw CheckpointError("cannot write " + side.string());
  os << json << '\n';
}

ad::Matrix row_of(std::initializer_list<double> v) {
  ad::Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) m(0, k++) = x;
  return m;
}

}  // namespace

const ad::Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b.value;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  os.put(static_cast<char>(ckpt.kind));
  const HybridConfig& c = ckpt.dims;
  for (int v : {c.alphabet_size, c.length, c.hidden, c.heads, c.nc_blocks, c.c_blocks, c.mlp_mult}) {
    put_u32(os, static_cast<std::uint32_t>(v));
  }
  put_u32(os, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& b : ckpt.blocks) {
    put_u32(os, static_cast<std::uint32_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(os, static_cast<std::uint32_t>(b.value.rows()));
    put_u32(os, static_cast<std::uint32_t>(b.value.cols()));
    for (Eigen::Index k = 0; k < b.value.size(); ++k) {
      const double v = to_little(b.value.data()[k]);
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!os) throw CheckpointError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError(path.string() + " is not an SSMD1 checkpoint");
  }
  Checkpoint ckpt;
  const int kind = is.get();
  if (kind != 0 && kind != 1) throw CheckpointError("unknown model kind in checkpoint");
  ckpt.kind = static_cast<ModelKind>(kind);
  HybridConfig& c = ckpt.dims;
  for (int* f : {&c.alphabet_size, &c.length, &c.hidden, &c.heads, &c.nc_blocks, &c.c_blocks, &c.mlp_mult}) {
    *f = static_cast<int>(get_u32(is));
  }
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t n = 0; n < count; ++n) {
    const std::uint32_t len = get_u32(is);
    if (len > kMaxNameLength) throw CheckpointError("corrupt block name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CheckpointError("checkpoint truncated");
    const std::uint32_t rows = get_u32(is);
    const std::uint32_t cols = get_u32(is);
    ad::Matrix m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      double v = 0.0;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
      m.data()[k] = to_little(v);
    }
    ckpt.blocks.push_back({std::move(name), std::move(m)});
  }
  return ckpt;
}

void save_hybrid(const std::filesystem::path& path, const HybridModel& model,
                 const std::vector<NamedMatrix>& extra, const std::string& sidecar_json) {
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kHybrid;
  ckpt.dims = model.config();
  for (const auto& b : model.params().blocks()) ckpt.blocks.push_back({b.name, b.value});
  for (const auto& b : extra) ckpt.blocks.push_back(b);
  write_checkpoint(path, ckpt);
  write_sidecar(path, sidecar_json.empty() ? describe_model_json(model.config()) : sidecar_json);
}

HybridModel load_hybrid(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kHybrid) throw CheckpointError("checkpoint does not hold a hybrid model");
  // Reference layout gives the block order and the non-causal flags.
  RandomStream rng(0);
  const HybridParams ref = HybridParams::init(ckpt.dims, rng);
  HybridParams params;
  for (const auto& b : ref.blocks()) {
    const ad::Matrix* m = ckpt.find(b.name);
    if (m == nullptr) throw CheckpointError("checkpoint is missing parameter block " + b.name);
    params.add(b.name, *m, b.noncausal);
  }
  return HybridModel(ckpt.dims, std::move(params));
}

HybridModel load_hybrid(const std::filesystem::path& path) { return load_hybrid(read_checkpoint(path)); }

void save_tabular(const std::filesystem::path& path, const TabularModel& model,
                  const std::string& sidecar_json) {
  Checkpoint ckpt;
  ckpt.kind = ModelKind::kTabular;
  ckpt.dims = HybridConfig{model.spec().alphabet_size(), model.spec().length(), 0, 0, 0, 0, 0};
  const auto joint = model.joint();
  ad::Matrix j(1, static_cast<Eigen::Index>(joint.size()));
  std::memcpy(j.data(), joint.data(), joint.size() * sizeof(double));
  ckpt.blocks.push_back({"joint", std::move(j)});
  const TabularOptions& o = model.options();
  ckpt.blocks.push_back({"options", row_of({o.draft_epsilon, o.target_shift,
                                            o.first_slot_fallback ? 1.0 : 0.0, o.factorized ? 1.0 : 0.0})});
  ckpt.blocks.push_back({"block_counts", row_of({static_cast<double>(o.blocks.noncausal),
                                                 static_cast<double>(o.blocks.causal)})});
  write_checkpoint(path, ckpt);
  write_sidecar(path, sidecar_json.empty() ? describe_model_json(model) : sidecar_json);
}

TabularModel load_tabular(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kTabular) throw CheckpointError("checkpoint does not hold a tabular model");
  const ad::Matrix* j = ckpt.find("joint");
  const ad::Matrix* o = ckpt.find("options");
  const ad::Matrix* b = ckpt.find("block_counts");
  if (j == nullptr || o == nullptr || b == nullptr || o->size() != 4 || b->size() != 2) {
    throw CheckpointError("tabular checkpoint is missing joint/options/block_counts");
  }
  TabularOptions opts;
  opts.draft_epsilon = (*o)(0, 0);
  opts.target_shift = (*o)(0, 1);
  opts.first_slot_fallback = (*o)(0, 2) != 0.0;
  opts.factorized = (*o)(0, 3) != 0.0;
  opts.blocks = {static_cast<int>((*b)(0, 0)), static_cast<int>((*b)(0, 1))};
  const SequenceSpec spec(ckpt.dims.alphabet_size, ckpt.dims.length);
  return TabularModel(spec, std::vector<double>(j->data(), j->data() + j->size()), opts);
}

std::unique_ptr<SpeculativeModel> load_model(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.kind == ModelKind::kHybrid) return std::make_unique<HybridModel>(load_hybrid(ckpt));
  return std::make_unique<TabularModel>(load_tabular(ckpt));
}

std::string describe_model_json(const HybridConfig& cfg) {
  nlohmann::ordered_json j;
  j["kind"] = "hybrid";
  j["S"] = cfg.alphabet_size;
  j["D"] = cfg.length;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["nc_blocks"] = cfg.nc_blocks;
  j["c_blocks"] = cfg.c_blocks;
  j["mlp_mult"] = cfg.mlp_mult;
  return j.dump(2);
}

std::string describe_model_json(const TabularModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = "tabular";
  j["S"] = model.spec().alphabet_size();
  j["D"] = model.spec().length();
  j["draft_epsilon"] = model.options().draft_epsilon;
  j["target_shift"] = model.options().target_shift;
  j["first_slot_fallback"] = model.options().first_slot_fallback;
  j["factorized"] = model.options().factorized;
  j["block_counts"] = {model.options().blocks.noncausal, model.options().blocks.causal};
  return j.dump(2);
}

}  // namespace ssmd

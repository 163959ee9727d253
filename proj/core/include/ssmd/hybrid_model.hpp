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

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssmd/autodiff.hpp"
#include "ssmd/model.hpp"
#include "ssmd/random.hpp"

namespace ssmd {

struct HybridConfig {
  int alphabet_size = 16;
  int length = 32;
  int hidden = 64;
  int heads = 4;
  int nc_blocks = 2;
  int c_blocks = 1;
  int mlp_mult = 4;

  void validate() const;
  SequenceSpec spec() const { return SequenceSpec(alphabet_size, length); }
  friend bool operator==(const HybridConfig&, const HybridConfig&) = default;
};

/// Raised when a forward or backward pass produces NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamBlock {
  std::string name;
  ad::Matrix value;
  /// True for the non-causal stack (draft path), false for the causal stack.
  bool noncausal = true;
};

/// Named parameter blocks of the hybrid network.
///
/// Non-causal: tok_emb, pos_emb, nc<b>.*, ln_f.*, out.w, out.b.
/// Causal: ctok_emb, cpos_cur, cpos_next, inj.w, inj.b, c<b>.*, cln_f.*,
/// cout.w, cout.b. Each block <p> has p.ln1.g/b, p.qkv.w/b, p.proj.w/b,
/// p.ln2.g/b, p.fc1.w/b, p.fc2.w/b.
class HybridParams {
 public:
  struct InitOptions {
    double stddev = 0.02;
    /// Zero cout.w and cout.b so every target row starts equal to its draft row.
    bool zero_causal_output = true;
  };

  HybridParams() = default;
  static HybridParams init(const HybridConfig& cfg, RandomStream& rng, InitOptions opts);
  static HybridParams init(const HybridConfig& cfg, RandomStream& rng) {
    return init(cfg, rng, InitOptions{});
  }

  std::vector<ParamBlock>& blocks() noexcept { return blocks_; }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  const ad::Matrix& at(const std::string& name) const;
  ad::Matrix& at(const std::string& name);
  int index_of(const std::string& name) const;
  std::size_t parameter_count() const noexcept;
  bool all_finite() const;

  /// Appends a block; used by checkpoint loading.
  void add(std::string name, ad::Matrix value, bool noncausal);

 private:
  std::vector<ParamBlock> blocks_;
  std::map<std::string, int> index_;
};

/// Attention masks over positions. noncausal is all-true; causal[q][k] is
/// true iff rank(k) <= rank(q) in the ordering.
struct AttentionMasks {
  std::vector<std::vector<bool>> noncausal;
  std::vector<std::vector<bool>> causal;
};
AttentionMasks build_attention_masks(const Ordering& ordering, int revealed);

/// One training sequence with its generation order and revealed count.
struct TrainExample {
  std::vector<Token> tokens;
  Ordering ordering;
  int revealed = 0;
  /// Multiplies this example's loss terms.
  double weight = 1.0;
};

/// Weighted objective split into its draft and target parts. Each is the
/// batch mean of D/(D-i) times the summed NLL over masked ranks.
struct HybridLoss {
  double noncausal = 0.0;
  double causal = 0.0;
  double total() const noexcept { return noncausal + causal; }
};

struct HybridGradient {
  HybridLoss loss;
  /// Aligned with HybridParams::blocks().
  std::vector<ad::Matrix> grads;
};

/// Trainable micro hybrid transformer: non-causal pre-norm blocks produce the
/// draft; causal blocks over drafted tokens add logits for the target.
class HybridModel final : public SpeculativeModel {
 public:
  HybridModel(const HybridConfig& cfg, HybridParams params);

  const SequenceSpec& spec() const override { return spec_; }
  BlockCounts block_counts() const override { return {cfg_.nc_blocks, cfg_.c_blocks}; }
  DraftPass draft(const RevealState& state, int horizon) const override;
  std::vector<ProbRow> target_rows(const DraftPass& pass, std::span<const Token> drafted,
                                   int from, int to) const override;

  const HybridConfig& config() const noexcept { return cfg_; }
  const HybridParams& params() const noexcept { return params_; }
  HybridParams& mutable_params() noexcept { return params_; }

  /// Loss only (no gradient).
  HybridLoss loss(std::span<const TrainExample> batch) const;
  /// Loss and exact reverse-mode gradient. With freeze_noncausal the
  /// non-causal blocks receive zero gradient.
  HybridGradient loss_and_gradient(std::span<const TrainExample> batch,
                                   bool freeze_noncausal = false) const;

 private:
  HybridConfig cfg_;
  SequenceSpec spec_;
  HybridParams params_;
};

struct GradientCheckResult {
  /// Worst relative error per parameter block, aligned with blocks().
  std::vector<double> max_rel_error;
  double worst = 0.0;
  std::string worst_block;
  int coordinates_checked = 0;
};

/// Compares the analytic gradient with central finite differences on
/// `coords_per_block` random coordinates of every block. Relative error is
/// |a - n| / max(|a|, |n|, floor).
GradientCheckResult check_gradients(const HybridModel& model, std::span<const TrainExample> batch,
                                    int coords_per_block, double step, double floor,
                                    RandomStream& rng);

}  // namespace ssmd

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

#include <span>
#include <stdexcept>
#include <vector>

#include "ssmd/model.hpp"
#include "ssmd/random.hpp"

namespace ssmd {

/// Raised when conditioning on tokens that have zero mass under the joint.
class ImpossibleContext : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct TabularOptions {
  /// Draft rows are (1 - eps) * exact conditional + eps / S.
  double draft_epsilon = 0.0;
  /// Target rows are (1 - shift) * exact chain-rule conditional
  ///   + shift * draft row at the same rank.
  /// A non-zero shift makes the target depend on the revealed count, like
  /// the hybrid network's target does.
  double target_shift = 0.0;
  /// When set, the target row at the first masked rank equals the draft row.
  bool first_slot_fallback = false;
  /// The joint factorizes over positions, so every conditional is the
  /// marginal. With draft_epsilon = 0 the target row is then returned as the
  /// draft row itself instead of being recomputed through joint sums.
  bool factorized = false;
  BlockCounts blocks{};
};

/// Exact model backed by an explicit joint table over S^D sequences.
/// Index layout is row-major: position 0 is the most significant digit.
class TabularModel final : public SpeculativeModel {
 public:
  static constexpr double kMaxTableSize = 1e7;

  TabularModel(const SequenceSpec& spec, std::vector<double> joint, TabularOptions options = {});

  /// Joint drawn from a symmetric Dirichlet(concentration) over all S^D cells.
  static TabularModel random(const SequenceSpec& spec, RandomStream& rng,
                             TabularOptions options = {}, double concentration = 1.0);
  /// Product of independent per-position marginals.
  static TabularModel product(const SequenceSpec& spec, const std::vector<ProbRow>& marginals,
                              TabularOptions options = {});

  const SequenceSpec& spec() const override { return spec_; }
  BlockCounts block_counts() const override { return options_.blocks; }
  DraftPass draft(const RevealState& state, int horizon) const override;
  std::vector<ProbRow> target_rows(const DraftPass& pass, std::span<const Token> drafted,
                                   int from, int to) const override;

  /// p_data(x^{sigma(r)} | revealed), mixed with eps-uniform in perturbed mode.
  ProbRow draft_row(const RevealState& state, int rank) const;
  /// Chain-rule conditional given revealed tokens plus drafted[k] at rank i+k
  /// for k < rank - i, with the configured shift/fallback applied.
  ProbRow target_row(const RevealState& state, std::span<const Token> drafted, int rank) const;

  /// p_data(x^{pos} | constrained positions); `context` uses the mask id for
  /// unconstrained positions.
  ProbRow exact_conditional(std::span<const Token> context, int position) const;

  double probability(std::span<const Token> x) const;
  /// Shannon entropy of the joint in nats.
  double entropy() const;
  std::span<const double> joint() const noexcept { return joint_; }
  const TabularOptions& options() const noexcept { return options_; }
  std::vector<Token> decode(std::size_t index) const;

 private:
  std::size_t index_of(std::span<const Token> x) const;

  SequenceSpec spec_;
  std::vector<double> joint_;
  TabularOptions options_;
  std::vector<std::size_t> stride_;
};

}  // namespace ssmd

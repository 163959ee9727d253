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

#include <memory>
#include <span>
#include <vector>

#include "ssmd/types.hpp"

namespace ssmd {

/// Number of non-causal and causal transformer blocks a model would spend on
/// one pass; used only for NFE accounting.
struct BlockCounts {
  int noncausal = 11;
  int causal = 1;
};

/// Backend-specific state produced by a draft pass and reused by every
/// verification pass of the same outer iteration.
class HiddenCache {
 public:
  virtual ~HiddenCache() = default;
};

/// Output of one non-causal pass: draft rows for ranks
/// [revealed, revealed + horizon) of state.ordering().
struct DraftPass {
  RevealState state;
  int horizon = 0;
  std::vector<ProbRow> rows;
  std::shared_ptr<const HiddenCache> cache;

  int first_rank() const noexcept { return state.revealed_count(); }
  int end_rank() const noexcept { return state.revealed_count() + horizon; }
  const ProbRow& row_at_rank(int rank) const {
    return rows[static_cast<std::size_t>(rank - first_rank())];
  }
};

/// Draft/target capability shared by the tabular oracle and the hybrid
/// transformer.
///
/// Contract:
///  * draft rows depend only on the revealed tokens of the state;
///  * the target row for rank r depends on the revealed tokens and on the
///    drafted tokens at ranks [i, r), never on rank r or later;
///  * models are immutable, so concurrent calls on distinct states are safe.
class SpeculativeModel {
 public:
  virtual ~SpeculativeModel() = default;

  virtual const SequenceSpec& spec() const = 0;
  virtual BlockCounts block_counts() const = 0;

  /// One non-causal pass. horizon must lie in [1, D - i] (or 0 when i = D).
  virtual DraftPass draft(const RevealState& state, int horizon) const = 0;

  /// One causal pass: target rows for ranks [from, to). drafted[k] holds the
  /// token at rank i + k and must cover ranks [i, to - 1).
  virtual std::vector<ProbRow> target_rows(const DraftPass& pass,
                                           std::span<const Token> drafted, int from,
                                           int to) const = 0;
};

/// Validates the arguments of target_rows against a pass; shared by backends.
void check_target_request(const DraftPass& pass, std::span<const Token> drafted, int from, int to);

/// Forwards to another model while counting passes.
class CountingModel final : public SpeculativeModel {
 public:
  explicit CountingModel(const SpeculativeModel& inner) : inner_(inner) {}

  const SequenceSpec& spec() const override { return inner_.spec(); }
  BlockCounts block_counts() const override { return inner_.block_counts(); }
  DraftPass draft(const RevealState& state, int horizon) const override;
  std::vector<ProbRow> target_rows(const DraftPass& pass, std::span<const Token> drafted,
                                   int from, int to) const override;

  long draft_calls() const noexcept { return draft_calls_; }
  long target_calls() const noexcept { return target_calls_; }

 private:
  const SpeculativeModel& inner_;
  mutable long draft_calls_ = 0;
  mutable long target_calls_ = 0;
};

}  // namespace ssmd

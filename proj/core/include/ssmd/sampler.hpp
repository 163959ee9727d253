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
#include <optional>
#include <string>
#include <vector>

#include "ssmd/model.hpp"
#include "ssmd/random.hpp"
#include "ssmd/schedule.hpp"

namespace ssmd {

struct SamplerConfig {
  WindowSpec window = WindowSpec::cosine(0.083);
  int inner_loops = 1;
  /// Baseline MDM only.
  TimeGrid grid{};
  NoiseSchedule schedule{};

  void validate() const;
};

/// Block-weighted pass counter. One pass through every block costs 1 NFE.
class NfeMeter {
 public:
  explicit NfeMeter(BlockCounts blocks = {});

  void add_noncausal(long passes = 1) { noncausal_ += passes; }
  void add_causal(long passes = 1) { causal_ += passes; }

  long noncausal_passes() const noexcept { return noncausal_; }
  long causal_passes() const noexcept { return causal_; }
  const BlockCounts& blocks() const noexcept { return blocks_; }

  /// (noncausal * L_nc + causal * L_c) / (L_nc + L_c)
  double nfe() const noexcept;

  NfeMeter& operator+=(const NfeMeter& other);

 private:
  BlockCounts blocks_;
  long noncausal_ = 0;
  long causal_ = 0;
};

struct SampleResult {
  TokenSequence sequence;
  Ordering ordering;
  EventTrace trace;
  NfeMeter meter;
  std::uint64_t stream_id = 0;
  int outer_iterations = 0;
  /// Tokens revealed by each outer iteration (each MDM step that changed a token).
  std::vector<int> revealed_per_outer;

  double nfe() const noexcept { return meter.nfe(); }
  int rejections() const noexcept { return trace.rejections(); }
};

struct AcceptResult {
  Outcome outcome;
  Token token;
};

/// One speculative verification step: keep `drafted` with probability
/// min(1, target/draft), otherwise resample from max(0, target - draft).
/// Consumes one uniform, plus one categorical draw on rejection.
AcceptResult accept_step(const ProbRow& draft, const ProbRow& target, Token drafted,
                         RandomStream& rng);

/// Masked-diffusion baseline on a uniform tau grid. Each step draws reveal
/// decisions from the schedule independently of token values, then samples
/// the revealed positions from the factorized draft rows. Steps that reveal
/// nothing are not charged.
SampleResult mdm_sample(const SpeculativeModel& model, const NoiseSchedule& sched,
                        const TimeGrid& grid, RandomStream& rng);

/// Full-window, single-inner-loop speculative sampler. The ordering is
/// drawn from `rng` unless one is supplied.
SampleResult spec_sample_basic(const SpeculativeModel& model, RandomStream& rng,
                               const std::optional<Ordering>& ordering = std::nullopt);

/// Windowed sampler with `cfg.inner_loops` draft-verify loops per non-causal
/// pass. With inner_loops = 1 and a constant window of D it consumes random
/// draws exactly like spec_sample_basic.
SampleResult spec_sample_full(const SpeculativeModel& model, const SamplerConfig& cfg,
                              RandomStream& rng,
                              const std::optional<Ordering>& ordering = std::nullopt);

enum class SamplerFamily { kMdm, kSpec, kSpecBasic };

SamplerFamily parse_sampler_family(const std::string& s);
std::string to_string(SamplerFamily f);

/// Dispatches on family.
SampleResult sample_one(const SpeculativeModel& model, SamplerFamily family,
                        const SamplerConfig& cfg, RandomStream& rng);

/// n independent sequences; sequence k uses RandomStream(seed).split(k), so
/// results do not depend on `threads`.
std::vector<SampleResult> sample_many(const SpeculativeModel& model, SamplerFamily family,
                                      const SamplerConfig& cfg, std::uint64_t seed, int n,
                                      int threads = 1);

}  // namespace ssmd

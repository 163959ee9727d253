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
#include <cstdint>
#include <limits>
#include <span>

#include "ssmd/types.hpp"

namespace ssmd {

/// Philox4x32-10 block function (Salmon et al., SC'11). Pure; exposed for
/// known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based random stream. A stream is identified by (seed, stream id);
/// split(k) derives an independent child stream, so results never depend on
/// how work is scheduled across threads. Streams are cheap values; do not
/// share one across threads.
class RandomStream {
 public:
  using result_type = std::uint32_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
      : seed_(seed), stream_(stream_id) {}

  RandomStream split(std::uint64_t index) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, n), unbiased. n must be positive.
  std::uint32_t uniform_index(std::uint32_t n) noexcept;
  /// Inverse-CDF draw from non-negative weights (need not be normalized).
  int categorical(std::span<const double> weights) noexcept;
  /// Standard exponential variate.
  double exponential() noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
};

/// Uniformly random permutation of [0, length) via Fisher-Yates.
Ordering sample_ordering(RandomStream& rng, int length);

}  // namespace ssmd

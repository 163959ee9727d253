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

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"
#include "ssmd/random.hpp"
#include "ssmd/schedule.hpp"
#include "ssmd/types.hpp"

using namespace ssmd;

namespace {
const NoiseSchedule kCos{ScheduleKind::kCosine};
const NoiseSchedule kLin{ScheduleKind::kLinear};
}  // namespace

TEST(keep_prob, cosine_boundaries_and_midpoint) {
  EXPECT_EQ(keep_prob(kCos, 0.0), 1.0);
  EXPECT_EQ(keep_prob(kCos, 1.0), 0.0);
  EXPECT_NEAR(keep_prob(kCos, 0.5), 1.0 - std::cos(std::numbers::pi / 4), 1e-15);
  EXPECT_NEAR(keep_prob(kCos, 0.5), 0.29289, 1e-5);
}

TEST(keep_prob, linear_is_one_minus_t) {
  EXPECT_DOUBLE_EQ(keep_prob(kLin, 0.25), 0.75);
  EXPECT_EQ(keep_prob(kLin, 0.0), 1.0);
  EXPECT_EQ(keep_prob(kLin, 1.0), 0.0);
}

TEST(keep_prob, rejects_out_of_range) {
  EXPECT_THROW(keep_prob(kCos, -0.01), InvalidArgument);
  EXPECT_THROW(keep_prob(kCos, 1.01), InvalidArgument);
  EXPECT_THROW(keep_prob(kCos, std::nan("")), InvalidArgument);
}

TEST(keep_prob, non_increasing_on_fine_grid) {
  for (const auto& sched : {kCos, kLin}) {
    double prev = keep_prob(sched, 0.0);
    for (int k = 1; k <= 1000; ++k) {
      const double v = keep_prob(sched, k / 1000.0);
      ASSERT_LE(v, prev);
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(mask_fraction, complements_keep_prob) {
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    EXPECT_NEAR(mask_fraction(kCos, t) + keep_prob(kCos, t), 1.0, 1e-15);
  }
  EXPECT_EQ(mask_fraction(kCos, 0.0), 0.0);
  EXPECT_EQ(mask_fraction(kCos, 1.0), 1.0);
}

TEST(reveal_prob, worked_examples) {
  EXPECT_DOUBLE_EQ(reveal_prob(kLin, 1.0, 0.5), 0.5);
  EXPECT_EQ(reveal_prob(kCos, 1.0, 1.0), 1.0);
  const double expected = (std::cos(std::numbers::pi / 6) - 0.5) / std::cos(std::numbers::pi / 6);
  EXPECT_NEAR(reveal_prob(kCos, 2.0 / 3.0, 1.0 / 3.0), expected, 1e-12);
  EXPECT_NEAR(reveal_prob(kCos, 2.0 / 3.0, 1.0 / 3.0), 0.42265, 1e-5);
}

TEST(reveal_prob, rejects_steps_outside_unit_interval) {
  EXPECT_THROW(reveal_prob(kCos, 0.0, 0.1), InvalidArgument);
  EXPECT_THROW(reveal_prob(kCos, 0.5, 0.0), InvalidArgument);
  EXPECT_THROW(reveal_prob(kCos, 0.5, 0.6), InvalidArgument);
}

TEST(reveal_prob, full_grid_reveals_everything) {
  RandomStream rng(21);
  for (int steps : {1, 2, 5, 17}) {
    const TimeGrid grid{steps};
    for (int trial = 0; trial < 200; ++trial) {
      int masked = 16;
      for (int k = steps; k >= 1; --k) {
        const double p = reveal_prob(kCos, grid.tau(k), grid.dtau());
        int still = 0;
        for (int m = 0; m < masked; ++m) still += rng.uniform() >= p;
        masked = still;
      }
      ASSERT_EQ(masked, 0) << "steps=" << steps;
    }
  }
}

TEST(reveal_prob, survival_telescopes_to_mask_fraction) {
  const TimeGrid grid{7};
  double survive = 1.0;
  for (int k = 7; k >= 3; --k) survive *= 1.0 - reveal_prob(kCos, grid.tau(k), grid.dtau());
  EXPECT_NEAR(survive, mask_fraction(kCos, grid.tau(2)), 1e-12);
}

TEST(window_size, linear_window) {
  const WindowSpec lin = WindowSpec::linear();
  EXPECT_EQ(window_size(lin, 0, 10), 1);
  EXPECT_EQ(window_size(lin, 3, 10), 4);
  EXPECT_EQ(window_size(lin, 7, 10), 3);
}

TEST(window_size, cosine_window_constants) {
  const WindowSpec cos = WindowSpec::cosine(0.083);
  EXPECT_EQ(window_size(cos, 0, 256), 3);
  EXPECT_EQ(window_size(cos, 128, 256), 30);
}

TEST(window_size, constant_window_clamps_to_remaining) {
  EXPECT_EQ(window_size(WindowSpec::constant(5), 0, 10), 5);
  EXPECT_EQ(window_size(WindowSpec::constant(5), 8, 10), 2);
  EXPECT_EQ(window_size(WindowSpec::constant(100), 0, 10), 10);
}

TEST(window_size, rejects_invalid_arguments) {
  EXPECT_THROW(window_size(WindowSpec::linear(), 10, 10), InvalidArgument);
  EXPECT_THROW(window_size(WindowSpec::linear(), -1, 10), InvalidArgument);
  EXPECT_THROW(window_size(WindowSpec::cosine(0.0), 0, 10), InvalidArgument);
  EXPECT_THROW(window_size(WindowSpec::cosine(1.5), 0, 10), InvalidArgument);
  EXPECT_THROW(window_size(WindowSpec::constant(0), 0, 10), InvalidArgument);
}

TEST(window_size, always_in_one_to_remaining) {
  for (const WindowSpec& w : {WindowSpec::linear(), WindowSpec::cosine(0.01), WindowSpec::cosine(0.3),
                              WindowSpec::cosine(1.0), WindowSpec::constant(3)}) {
    for (int d : {1, 2, 7, 32, 257}) {
      for (int i = 0; i < d; ++i) {
        const int v = window_size(w, i, d);
        ASSERT_GE(v, 1);
        ASSERT_LE(v, d - i);
      }
    }
  }
}

TEST(window_size, cosine_steps_scale_as_inverse_dtau) {
  for (double dtau : {0.01, 0.02, 0.05, 0.1}) {
    const int d = 10000;
    int i = 0;
    int steps = 0;
    while (i < d) {
      i += window_size(WindowSpec::cosine(dtau), i, d);
      ++steps;
    }
    EXPECT_EQ(i, d);
    EXPECT_GE(steps, std::floor(1.0 / dtau) - 1);
    EXPECT_LE(steps, std::ceil(1.0 / dtau) + 1);
  }
}

TEST(time_grid, taus_and_validation) {
  const TimeGrid g{4};
  EXPECT_EQ(g.tau(4), 1.0);
  EXPECT_EQ(g.tau(0), 0.0);
  EXPECT_EQ(g.dtau(), 0.25);
  EXPECT_THROW(TimeGrid{0}.validate(), InvalidArgument);
}

TEST(schedule_names, parse_round_trip) {
  EXPECT_EQ(parse_schedule_kind(to_string(ScheduleKind::kLinear)), ScheduleKind::kLinear);
  EXPECT_EQ(parse_window_kind(to_string(WindowKind::kConstant)), WindowKind::kConstant);
  EXPECT_THROW(parse_schedule_kind("sigmoid"), InvalidArgument);
  EXPECT_THROW(parse_window_kind("square"), InvalidArgument);
}

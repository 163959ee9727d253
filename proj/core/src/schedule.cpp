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

#include "ssmd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ssmd/types.hpp"

namespace ssmd {
namespace {

void check_unit(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidArgument(std::string(what) + " must lie in [0, 1], got " + std::to_string(t));
  }
}

}  // namespace

double mask_fraction(const NoiseSchedule& sched, double tau) {
  check_unit(tau, "tau");
  switch (sched.kind) {
    case ScheduleKind::kCosine:
      if (tau == 0.0) return 0.0;  // cos(pi/2) is ~6e-17 in floating point
      return std::cos(0.5 * std::numbers::pi * (1.0 - tau));
    case ScheduleKind::kLinear:
      return tau;
  }
  return tau;
}

double keep_prob(const NoiseSchedule& sched, double t) {
  check_unit(t, "t");
  return 1.0 - mask_fraction(sched, t);
}

double reveal_prob(const NoiseSchedule& sched, double tau, double dtau) {
  const double next = tau - dtau;
  if (!(dtau > 0.0) || !(next >= -1e-12) || !(tau <= 1.0)) {
    throw InvalidArgument("reveal_prob requires 0 <= tau - dtau < tau <= 1");
  }
  const double now_masked = mask_fraction(sched, tau);
  if (now_masked <= 0.0) return 0.0;
  const double later_masked = mask_fraction(sched, std::max(0.0, next));
  return std::clamp((now_masked - later_masked) / now_masked, 0.0, 1.0);
}

void WindowSpec::validate() const {
  if (kind == WindowKind::kCosine && !(dtau > 0.0 && dtau <= 1.0)) {
    throw InvalidArgument("cosine window needs dtau in (0, 1], got " + std::to_string(dtau));
  }
  if (kind == WindowKind::kConstant && cap < 1) {
    throw InvalidArgument("constant window needs cap >= 1, got " + std::to_string(cap));
  }
}

int window_size(const WindowSpec& win, int revealed, int length) {
  if (revealed < 0 || revealed >= length) {
    throw InvalidArgument("window_size requires 0 <= i < D (i=" + std::to_string(revealed) +
                          ", D=" + std::to_string(length) + ")");
  }
  win.validate();
  const int remaining = length - revealed;
  switch (win.kind) {
    case WindowKind::kLinear:
      return std::min(revealed + 1, remaining);
    case WindowKind::kConstant:
      return std::clamp(win.cap, 1, remaining);
    case WindowKind::kCosine: {
      constexpr double kPi = std::numbers::pi;
      const double d = length;
      const double masked = (d - revealed) / d;
      const double tau = 1.0 - (2.0 / kPi) * std::acos(masked);
      const double w = d * (std::cos(0.5 * kPi * (1.0 - tau)) -
                            std::cos(0.5 * kPi * (1.0 - tau + win.dtau)));
      const double up = std::ceil(w);
      if (!(up >= 1.0)) return 1;
      if (up >= remaining) return remaining;
      return static_cast<int>(up);
    }
  }
  return 1;
}

void TimeGrid::validate() const {
  if (steps < 1) throw InvalidArgument("time grid needs >= 1 step");
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "cosine") return ScheduleKind::kCosine;
  if (s == "linear") return ScheduleKind::kLinear;
  throw InvalidArgument("unknown schedule kind '" + s + "'");
}

WindowKind parse_window_kind(const std::string& s) {
  if (s == "cosine") return WindowKind::kCosine;
  if (s == "linear") return WindowKind::kLinear;
  if (s == "constant") return WindowKind::kConstant;
  throw InvalidArgument("unknown window kind '" + s + "'");
}

std::string to_string(ScheduleKind k) { return k == ScheduleKind::kCosine ? "cosine" : "linear"; }

std::string to_string(WindowKind k) {
  switch (k) {
    case WindowKind::kLinear: return "linear";
    case WindowKind::kCosine: return "cosine";
    case WindowKind::kConstant: return "constant";
  }
  return "?";
}

}  // namespace ssmd

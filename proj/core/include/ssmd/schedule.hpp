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

#include <string>

namespace ssmd {

// Two time conventions meet here. The noising-process view uses a keep
// probability keep_prob(t): 1 at t=0 (clean) and 0 at t=1 (fully masked).
// The sampling-grid view uses a uniform time tau with mask_fraction(tau):
// 0 at tau=0 and 1 at tau=1. Both run clean -> noise as time increases, so
// keep_prob(t) == 1 - mask_fraction(t).

enum class ScheduleKind { kCosine, kLinear };

struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kCosine;
};

/// Expected fraction of masked positions at uniform time tau in [0, 1].
/// Cosine: cos(pi/2 * (1 - tau)). Linear: tau.
double mask_fraction(const NoiseSchedule& sched, double tau);

/// Probability that a position is kept (unmasked) at time t in [0, 1].
double keep_prob(const NoiseSchedule& sched, double t);

/// Probability that one currently-masked position is revealed when stepping
/// tau -> tau - dtau: (m(tau) - m(tau - dtau)) / m(tau). Zero when nothing is
/// masked at tau.
double reveal_prob(const NoiseSchedule& sched, double tau, double dtau);

enum class WindowKind { kLinear, kCosine, kConstant };

/// Window W(i): the cap on tokens one non-causal pass may reveal when i
/// tokens are already revealed.
struct WindowSpec {
  WindowKind kind = WindowKind::kCosine;
  double dtau = 0.083;  // cosine only
  int cap = 1;          // constant only

  static WindowSpec linear() { return {WindowKind::kLinear, 0.0, 1}; }
  static WindowSpec cosine(double dtau) { return {WindowKind::kCosine, dtau, 1}; }
  static WindowSpec constant(int cap) { return {WindowKind::kConstant, 0.0, cap}; }

  void validate() const;
};

/// Result lies in [1, length - revealed].
///  linear:   min(i + 1, D - i)
///  cosine:   clamp(ceil(D * (a - cos(pi/2 * (1 - tau + dtau)))), 1, D - i)
///            with a = (D - i) / D and tau = 1 - (2/pi) acos(a)
///  constant: clamp(cap, 1, D - i)
int window_size(const WindowSpec& win, int revealed, int length);

/// Uniform grid of `steps` intervals from tau = 1 down to tau = 0.
struct TimeGrid {
  int steps = 1;

  void validate() const;
  double tau(int k) const { return static_cast<double>(k) / steps; }
  double dtau() const { return 1.0 / steps; }
};

ScheduleKind parse_schedule_kind(const std::string& s);
WindowKind parse_window_kind(const std::string& s);
std::string to_string(ScheduleKind k);
std::string to_string(WindowKind k);

}  // namespace ssmd

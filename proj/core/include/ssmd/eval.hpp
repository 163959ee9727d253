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

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ssmd/corpus.hpp"
#include "ssmd/sampler.hpp"
#include "ssmd/tabular_model.hpp"

namespace ssmd {

using Samples = std::vector<std::vector<Token>>;

struct LexiconScore {
  long valid = 0;
  long total = 0;
  double accuracy() const noexcept { return total > 0 ? static_cast<double>(valid) / total : 0.0; }
};

/// Interior words of all samples pooled together. Throws when there are no
/// words at all. An empty lexicon scores 0.
LexiconScore lexicon_score(const Samples& samples, const Lexicon& lexicon, Token separator);
double lexicon_accuracy(const Samples& samples, const Lexicon& lexicon, Token separator);

/// Entropy in nats of one sample's token histogram.
double sample_entropy(std::span<const Token> sample);
/// Mean of per-sample histogram entropies.
double unigram_entropy(const Samples& samples);

struct NllResult {
  /// Mean -log p(sample) / D; +inf when any sample is impossible.
  double mean = 0.0;
  int impossible = 0;
  bool flagged() const noexcept { return impossible > 0; }
};

using LogProbFn = std::function<double(std::span<const Token>)>;

NllResult oracle_nll(const Samples& samples, const LogProbFn& log_prob);
NllResult oracle_nll(const Samples& samples, const TabularModel& oracle);

struct SweepEntry {
  SamplerFamily family = SamplerFamily::kSpec;
  SamplerConfig config;
  std::string label;
};

struct SweepMetrics {
  const Lexicon* lexicon = nullptr;
  Token separator = 0;
  /// Optional exact oracle for the NLL column.
  LogProbFn oracle;
};

struct TradeoffPoint {
  std::string family;
  std::string label;
  std::string window_kind;
  double dtau = 0.0;
  int inner_loops = 1;
  int grid_steps = 0;
  double mean_nfe = 0.0;
  double se_nfe = 0.0;
  double lexicon_acc = 0.0;
  double se_lexicon_acc = 0.0;
  double entropy = 0.0;
  double se_entropy = 0.0;
  double oracle_nll = 0.0;
  double se_oracle_nll = 0.0;
  int n_samples = 0;
};

/// Metrics over already drawn samples of one configuration.
TradeoffPoint summarize(const SweepEntry& entry, const std::vector<SampleResult>& results,
                        const SweepMetrics& metrics);

/// One point per entry; every entry samples with sequence streams derived
/// from the same root seed.
std::vector<TradeoffPoint> tradeoff_sweep(const SpeculativeModel& model,
                                          const std::vector<SweepEntry>& entries, int n_samples,
                                          std::uint64_t seed, const SweepMetrics& metrics,
                                          int threads = 1);

/// Writes the tradeoff table. A non-empty config_hash is emitted as a
/// leading "# config_hash=<hex>" comment line.
void write_tradeoff_csv(std::ostream& os, const std::vector<TradeoffPoint>& points,
                        const std::string& config_hash = {});
/// Long-format curve data: family, metric, x (mean NFE), y, y_se.
void write_plot_data(std::ostream& os, const std::vector<TradeoffPoint>& points,
                     const std::string& config_hash = {});

/// A metric as a function of NFE for one family: the upper envelope of its
/// points (no other point has lower or equal NFE and a higher value),
/// extended flat to the family's largest measured NFE.
struct Curve {
  std::vector<double> nfe;
  std::vector<double> value;
  std::vector<double> se;

  /// Linear interpolation; nullopt outside [nfe.front(), nfe.back()].
  std::optional<std::pair<double, double>> at(double x) const;
};

Curve lexicon_curve(const std::vector<TradeoffPoint>& points, const std::string& family);

struct CurveComparisonRow {
  double nfe = 0.0;
  double spec = 0.0;
  double mdm = 0.0;
  /// Standard error of the difference.
  double se = 0.0;
  bool pass = false;
};

/// Compares two curves at integer NFE values in [lo, hi] covered by both;
/// a row passes when spec >= mdm - se.
std::vector<CurveComparisonRow> compare_curves(const Curve& spec, const Curve& mdm, int lo, int hi);

}  // namespace ssmd

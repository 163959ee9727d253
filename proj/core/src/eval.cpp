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

#include "ssmd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace ssmd {
namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  const auto n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1 && std::isfinite(out.mean)) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

/// Ratio estimator sum(a)/sum(b) with a delta-method standard error.
MeanSe ratio_se(const std::vector<double>& a, const std::vector<double>& b) {
  MeanSe out;
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(sb > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  out.mean = sa / sb;
  const auto n = static_cast<double>(a.size());
  if (a.size() > 1) {
    const double bbar = sb / n;
    double ss = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double r = a[k] - out.mean * b[k];
      ss += r * r;
    }
    out.se = std::sqrt(ss / (n - 1.0) / n) / bbar;
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

LexiconScore lexicon_score(const Samples& samples, const Lexicon& lexicon, Token separator) {
  LexiconScore s;
  for (const auto& seq : samples) {
    for (const Word& w : interior_words(seq, separator)) {
      ++s.total;
      if (lexicon.contains(w)) ++s.valid;
    }
  }
  if (s.total == 0) throw InvalidArgument("samples contain no complete words");
  return s;
}

double lexicon_accuracy(const Samples& samples, const Lexicon& lexicon, Token separator) {
  return lexicon_score(samples, lexicon, separator).accuracy();
}

double sample_entropy(std::span<const Token> sample) {
  if (sample.empty()) return 0.0;
  std::map<Token, int> hist;
  for (Token t : sample) ++hist[t];
  const auto n = static_cast<double>(sample.size());
  double h = 0.0;
  for (const auto& [tok, c] : hist) {
    const double p = c / n;
    h -= p * std::log(p);
  }
  return h;
}

double unigram_entropy(const Samples& samples) {
  if (samples.empty()) throw InvalidArgument("unigram entropy needs at least one sample");
  double sum = 0.0;
  for (const auto& s : samples) sum += sample_entropy(s);
  return sum / static_cast<double>(samples.size());
}

NllResult oracle_nll(const Samples& samples, const LogProbFn& log_prob) {
  if (samples.empty()) throw InvalidArgument("oracle NLL needs at least one sample");
  NllResult r;
  double sum = 0.0;
  for (const auto& s : samples) {
    const double lp = log_prob(s);
    if (!std::isfinite(lp)) {
      ++r.impossible;
      continue;
    }
    sum += -lp / static_cast<double>(s.size());
  }
  r.mean = r.impossible > 0 ? std::numeric_limits<double>::infinity()
                            : sum / static_cast<double>(samples.size());
  return r;
}

NllResult oracle_nll(const Samples& samples, const TabularModel& oracle) {
  return oracle_nll(samples, [&](std::span<const Token> s) {
    const double p = oracle.probability(s);
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  });
}

TradeoffPoint summarize(const SweepEntry& entry, const std::vector<SampleResult>& results,
                        const SweepMetrics& metrics) {
  TradeoffPoint pt;
  pt.family = to_string(entry.family);
  pt.label = entry.label;
  pt.n_samples = static_cast<int>(results.size());
  if (entry.family == SamplerFamily::kMdm) {
    pt.window_kind = "none";
    pt.grid_steps = entry.config.grid.steps;
    pt.inner_loops = 0;
  } else if (entry.family == SamplerFamily::kSpecBasic) {
    pt.window_kind = "full";
    pt.inner_loops = 1;
  } else {
    pt.window_kind = to_string(entry.config.window.kind);
    pt.dtau = entry.config.window.kind == WindowKind::kCosine ? entry.config.window.dtau : 0.0;
    pt.inner_loops = entry.config.inner_loops;
  }

  std::vector<double> nfe;
  std::vector<double> ent;
  std::vector<double> valid;
  std::vector<double> words;
  std::vector<double> nll;
  int impossible = 0;
  for (const auto& r : results) {
    nfe.push_back(r.nfe());
    const auto toks = r.sequence.tokens();
    ent.push_back(sample_entropy(toks));
    if (metrics.lexicon != nullptr) {
      double v = 0.0;
      double w = 0.0;
      for (const Word& word : interior_words(toks, metrics.separator)) {
        w += 1.0;
        if (metrics.lexicon->contains(word)) v += 1.0;
      }
      valid.push_back(v);
      words.push_back(w);
    }
    if (metrics.oracle) {
      const double lp = metrics.oracle(toks);
      if (std::isfinite(lp)) {
        nll.push_back(-lp / static_cast<double>(toks.size()));
      } else {
        ++impossible;
      }
    }
  }
  const MeanSe n = mean_se(nfe);
  pt.mean_nfe = n.mean;
  pt.se_nfe = n.se;
  const MeanSe e = mean_se(ent);
  pt.entropy = e.mean;
  pt.se_entropy = e.se;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (metrics.lexicon != nullptr) {
    const MeanSe a = ratio_se(valid, words);
    pt.lexicon_acc = a.mean;
    pt.se_lexicon_acc = a.se;
  } else {
    pt.lexicon_acc = nan;
    pt.se_lexicon_acc = nan;
  }
  if (!metrics.oracle) {
    pt.oracle_nll = nan;
    pt.se_oracle_nll = nan;
  } else if (impossible > 0) {
    pt.oracle_nll = std::numeric_limits<double>::infinity();
    pt.se_oracle_nll = nan;
  } else {
    const MeanSe o = mean_se(nll);
    pt.oracle_nll = o.mean;
    pt.se_oracle_nll = o.se;
  }
  return pt;
}

std::vector<TradeoffPoint> tradeoff_sweep(const SpeculativeModel& model,
                                          const std::vector<SweepEntry>& entries, int n_samples,
                                          std::uint64_t seed, const SweepMetrics& metrics,
                                          int threads) {
  if (entries.empty()) throw InvalidArgument("sweep needs at least one configuration");
  if (n_samples < 1) throw InvalidArgument("sweep needs at least one sample per configuration");
  std::vector<TradeoffPoint> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(summarize(e, sample_many(model, e.family, e.config, seed, n_samples, threads), metrics));
  }
  return out;
}

void write_tradeoff_csv(std::ostream& os, const std::vector<TradeoffPoint>& points,
                        const std::string& config_hash) {
  if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
  os << "family,config_label,window_kind,dtau,inner_loops,grid_steps,mean_nfe,se_nfe,"
        "lexicon_acc,entropy,oracle_nll,n_samples,se_lexicon_acc,se_entropy,se_oracle_nll\n";
  for (const auto& p : points) {
    os << p.family << ',' << p.label << ',' << p.window_kind << ',' << fmt(p.dtau) << ','
       << p.inner_loops << ',' << p.grid_steps << ',' << fmt(p.mean_nfe) << ',' << fmt(p.se_nfe)
       << ',' << fmt(p.lexicon_acc) << ',' << fmt(p.entropy) << ',' << fmt(p.oracle_nll) << ','
       << p.n_samples << ',' << fmt(p.se_lexicon_acc) << ',' << fmt(p.se_entropy) << ','
       << fmt(p.se_oracle_nll) << '\n';
  }
}

void write_plot_data(std::ostream& os, const std::vector<TradeoffPoint>& points,
                     const std::string& config_hash) {
  if (!config_hash.empty()) os << "# config_hash=" << config_hash << '\n';
  os << "family,metric,x,y,y_se\n";
  for (const auto& p : points) {
    os << p.family << ",lexicon_acc," << fmt(p.mean_nfe) << ',' << fmt(p.lexicon_acc) << ','
       << fmt(p.se_lexicon_acc) << '\n';
    os << p.family << ",entropy," << fmt(p.mean_nfe) << ',' << fmt(p.entropy) << ','
       << fmt(p.se_entropy) << '\n';
    os << p.family << ",oracle_nll," << fmt(p.mean_nfe) << ',' << fmt(p.oracle_nll) << ','
       << fmt(p.se_oracle_nll) << '\n';
  }
}

std::optional<std::pair<double, double>> Curve::at(double x) const {
  if (nfe.empty() || x < nfe.front() || x > nfe.back()) return std::nullopt;
  for (std::size_t k = 0; k + 1 < nfe.size(); ++k) {
    if (x <= nfe[k + 1]) {
      const double span = nfe[k + 1] - nfe[k];
      const double w = span > 0.0 ? (x - nfe[k]) / span : 0.0;
      return std::pair{value[k] + w * (value[k + 1] - value[k]), se[k] + w * (se[k + 1] - se[k])};
    }
  }
  return std::pair{value.back(), se.back()};
}

Curve lexicon_curve(const std::vector<TradeoffPoint>& points, const std::string& family) {
  std::vector<const TradeoffPoint*> pts;
  for (const auto& p : points) {
    if (p.family == family && std::isfinite(p.lexicon_acc)) pts.push_back(&p);
  }
  std::sort(pts.begin(), pts.end(), [](const auto* a, const auto* b) {
    return a->mean_nfe != b->mean_nfe ? a->mean_nfe < b->mean_nfe : a->lexicon_acc > b->lexicon_acc;
  });
  Curve c;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto* p : pts) {
    if (p->lexicon_acc <= best) continue;
    best = p->lexicon_acc;
    c.nfe.push_back(p->mean_nfe);
    c.value.push_back(p->lexicon_acc);
    c.se.push_back(p->se_lexicon_acc);
  }
  // Flat to the largest measured NFE: that budget still reaches `best`.
  if (!pts.empty() && pts.back()->mean_nfe > c.nfe.back()) {
    c.nfe.push_back(pts.back()->mean_nfe);
    c.value.push_back(c.value.back());
    c.se.push_back(c.se.back());
  }
  return c;
}

std::vector<CurveComparisonRow> compare_curves(const Curve& spec, const Curve& mdm, int lo, int hi) {
  std::vector<CurveComparisonRow> rows;
  for (int x = lo; x <= hi; ++x) {
    const auto s = spec.at(x);
    const auto m = mdm.at(x);
    if (!s || !m) continue;
    CurveComparisonRow r;
    r.nfe = x;
    r.spec = s->first;
    r.mdm = m->first;
    r.se = std::sqrt(s->second * s->second + m->second * m->second);
    r.pass = r.spec >= r.mdm - r.se;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace ssmd

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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances, sample
// counts and runtime limits are fixed here; the exit code is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ssmd/corpus.hpp"
#include "ssmd/eval.hpp"
#include "ssmd/hybrid_model.hpp"
#include "ssmd/likelihood.hpp"
#include "ssmd/sampler.hpp"
#include "ssmd/schedule.hpp"
#include "ssmd/tabular_model.hpp"
#include "ssmd/train.hpp"

namespace fs = std::filesystem;
using namespace ssmd;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Collects failure reasons; the first few are kept for the report line.
class Findings {
 public:
  void fail(const std::string& why) {
    if (reasons_.size() < 3) reasons_.push_back(why);
    ++count_;
  }
  void note(const std::string& s) { notes_.push_back(s); }
  Verdict verdict() const {
    Verdict v;
    v.pass = count_ == 0;
    std::ostringstream os;
    for (std::size_t k = 0; k < notes_.size(); ++k) os << (k ? "; " : "") << notes_[k];
    if (count_ > 0) {
      os << (notes_.empty() ? "" : "; ") << count_ << " failure(s): ";
      for (std::size_t k = 0; k < reasons_.size(); ++k) os << (k ? " | " : "") << reasons_[k];
    }
    v.detail = os.str();
    return v;
  }

 private:
  std::vector<std::string> reasons_;
  std::vector<std::string> notes_;
  int count_ = 0;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void check_runtime(Findings& f, const Stopwatch& w, double limit) {
  const double t = w.seconds();
  f.note("runtime " + num(t, 3) + " s (limit " + num(limit, 4) + " s)");
  if (t >= limit) f.fail("runtime " + num(t, 3) + " s over limit");
}

ProbRow random_row(int s, RandomStream& rng) {
  std::vector<double> w(static_cast<std::size_t>(s));
  for (double& v : w) v = rng.exponential();
  return ProbRow::normalized(std::move(w));
}

TabularModel perturbed_tabular(int s, int d, RandomStream& rng) {
  TabularOptions opts;
  opts.draft_epsilon = 0.3;
  opts.target_shift = 0.4;
  return TabularModel::random(SequenceSpec(s, d), rng, opts);
}

std::size_t sequence_index(std::span<const Token> x, int s) {
  std::size_t idx = 0;
  for (Token t : x) idx = idx * static_cast<std::size_t>(s) + static_cast<std::size_t>(t);
  return idx;
}

// ---------------------------------------------------------------- 1

Verdict speculative_step_law() {
  constexpr int kPairs = 100;
  constexpr int kDraws = 1000000;
  constexpr double kTvTol = 0.005;
  constexpr double kIdentityTol = 1e-12;
  Stopwatch w;
  Findings f;
  RandomStream rng(1001);
  double worst_tv = 0.0;
  double worst_identity = 0.0;
  for (int pair = 0; pair < kPairs; ++pair) {
    const int s = 2 + static_cast<int>(rng.uniform_index(7));
    const ProbRow draft = random_row(s, rng);
    const ProbRow target = random_row(s, rng);
    double mass = 0.0;
    for (int t = 0; t < s; ++t) mass += std::min(draft[t], target[t]) + std::max(0.0, target[t] - draft[t]);
    worst_identity = std::max(worst_identity, std::abs(mass - 1.0));

    RandomStream draws = rng.split(static_cast<std::uint64_t>(pair));
    std::vector<double> counts(static_cast<std::size_t>(s), 0.0);
    for (int k = 0; k < kDraws; ++k) {
      const Token drafted = static_cast<Token>(draws.categorical(draft.values()));
      ++counts[static_cast<std::size_t>(accept_step(draft, target, drafted, draws).token)];
    }
    double tv = 0.0;
    for (int t = 0; t < s; ++t) tv += std::abs(counts[static_cast<std::size_t>(t)] / kDraws - target[t]);
    tv /= 2.0;
    worst_tv = std::max(worst_tv, tv);
    if (tv >= kTvTol) f.fail("pair " + std::to_string(pair) + " TV " + num(tv));
  }
  if (worst_identity > kIdentityTol) f.fail("mass identity off by " + num(worst_identity));
  f.note("worst TV " + num(worst_tv) + " over " + std::to_string(kPairs) + " pairs");
  f.note("worst identity error " + num(worst_identity));
  check_runtime(f, w, 60.0);
  return f.verdict();
}

// ---------------------------------------------------------------- 2

Verdict likelihood_exactness() {
  constexpr int kModels = 50;
  constexpr double kTol = 1e-9;
  Stopwatch w;
  Findings f;
  RandomStream rng(1002);
  double worst_norm = 0.0;
  double worst_dp = 0.0;
  auto compare = [&](const TabularModel& m, const Ordering& sigma, const std::vector<Token>& x,
                     const std::string& tag) {
    const TokenSequence seq(m.spec(), x);
    const double dp = std::exp(sequence_likelihood(m, seq, sigma));
    const double bf = std::exp(brute_force_likelihood(m, seq, sigma));
    worst_dp = std::max(worst_dp, std::abs(dp - bf));
    if (std::abs(dp - bf) > kTol) f.fail(tag + " recursion " + num(dp, 12) + " vs paths " + num(bf, 12));
    return dp;
  };
  for (int k = 0; k < kModels; ++k) {
    const int d = 1 + static_cast<int>(rng.uniform_index(4));
    const int s = 2 + static_cast<int>(rng.uniform_index(2));
    const TabularModel m = perturbed_tabular(s, d, rng);
    const Ordering sigma = sample_ordering(rng, d);
    double total = 0.0;
    for (std::size_t idx = 0; idx < m.joint().size(); ++idx) {
      total += compare(m, sigma, m.decode(idx), "model " + std::to_string(k));
    }
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    if (std::abs(total - 1.0) > kTol) f.fail("model " + std::to_string(k) + " sums to " + num(total, 12));
  }
  // Ten positions: exhaustive normalization and brute force on a subset.
  const TabularModel big = perturbed_tabular(2, 10, rng);
  const Ordering sigma = sample_ordering(rng, 10);
  double total = 0.0;
  for (std::size_t idx = 0; idx < big.joint().size(); ++idx) {
    const TokenSequence seq(big.spec(), big.decode(idx));
    total += std::exp(sequence_likelihood(big, seq, sigma));
  }
  worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  if (std::abs(total - 1.0) > kTol) f.fail("D=10 sums to " + num(total, 12));
  for (std::size_t idx = 0; idx < big.joint().size(); idx += 37) compare(big, sigma, big.decode(idx), "D=10");
  f.note("worst normalization error " + num(worst_norm));
  f.note("worst recursion/path gap " + num(worst_dp));
  check_runtime(f, w, 120.0);
  return f.verdict();
}

// ---------------------------------------------------------------- 3

Verdict sampler_matches_likelihood() {
  constexpr int kRuns = 200000;
  constexpr double kSigmas = 3.0;
  Stopwatch w;
  Findings f;
  RandomStream rng(1003);
  const TabularModel m = perturbed_tabular(2, 3, rng);
  const Ordering sigma({2, 0, 1});
  std::vector<double> counts(8, 0.0);
  for (int k = 0; k < kRuns; ++k) {
    RandomStream s(1004, static_cast<std::uint64_t>(k));
    const SampleResult r = spec_sample_basic(m, s, sigma);
    ++counts[sequence_index(r.sequence.tokens(), 2)];
  }
  double worst = 0.0;
  for (std::size_t idx = 0; idx < 8; ++idx) {
    const double p = std::exp(sequence_likelihood(m, TokenSequence(m.spec(), m.decode(idx)), sigma));
    const double se = std::sqrt(p * (1.0 - p) / kRuns);
    const double z = std::abs(counts[idx] / kRuns - p) / se;
    worst = std::max(worst, z);
    if (z > kSigmas) f.fail("sequence " + std::to_string(idx) + " at " + num(z, 3) + " sigma");
  }
  f.note("worst deviation " + num(worst, 3) + " sigma over 8 sequences");
  check_runtime(f, w, 120.0);
  return f.verdict();
}

// ---------------------------------------------------------------- 4

Verdict rejection_posterior_exactness() {
  constexpr int kRuns = 1000000;
  constexpr double kSigmas = 3.0;
  constexpr double kTol = 1e-9;
  Stopwatch w;
  Findings f;
  RandomStream rng(1005);
  const TabularModel m = perturbed_tabular(2, 3, rng);
  const Ordering sigma({1, 2, 0});
  std::vector<double> n(8, 0.0);
  std::vector<double> sum(8, 0.0);
  std::vector<double> sum_sq(8, 0.0);
  for (int k = 0; k < kRuns; ++k) {
    RandomStream s(1006, static_cast<std::uint64_t>(k));
    const SampleResult r = spec_sample_basic(m, s, sigma);
    const std::size_t idx = sequence_index(r.sequence.tokens(), 2);
    const double rej = static_cast<double>(r.rejections());
    n[idx] += 1.0;
    sum[idx] += rej;
    sum_sq[idx] += rej * rej;
  }
  double worst_z = 0.0;
  double worst_norm = 0.0;
  for (std::size_t idx = 0; idx < 8; ++idx) {
    const RejectionPosterior post = rejection_count_posterior(m, TokenSequence(m.spec(), m.decode(idx)), sigma);
    double total = 0.0;
    for (double p : post.probs) total += p;
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
    if (std::abs(total - 1.0) > kTol) f.fail("posterior " + std::to_string(idx) + " sums to " + num(total, 12));
    if (n[idx] < 2) continue;
    const double mean = sum[idx] / n[idx];
    const double var = sum_sq[idx] / n[idx] - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / n[idx]);
    const double gap = std::abs(mean - post.mean());
    if (se == 0.0) {
      if (gap > kTol) f.fail("sequence " + std::to_string(idx) + " has zero MC variance but gap " + num(gap));
      continue;
    }
    worst_z = std::max(worst_z, gap / se);
    if (gap > kSigmas * se) f.fail("sequence " + std::to_string(idx) + " mean at " + num(gap / se, 3) + " sigma");
  }
  // Target identical to draft: no rejections at all.
  std::vector<ProbRow> marg;
  for (int k = 0; k < 3; ++k) marg.push_back(random_row(3, rng));
  const TabularModel product = TabularModel::product(SequenceSpec(3, 3), marg);
  for (std::size_t idx = 0; idx < product.joint().size(); ++idx) {
    const Ordering s = sample_ordering(rng, 3);
    const RejectionPosterior post = rejection_count_posterior(product, TokenSequence(product.spec(), product.decode(idx)), s);
    bool point_mass = post.probs.at(0) == 1.0;
    for (std::size_t r = 1; r < post.probs.size(); ++r) point_mass = point_mass && post.probs[r] == 0.0;
    if (!point_mass) f.fail("product model sequence " + std::to_string(idx) + " P(0 rejections) = " + num(post.probs[0], 17));
  }
  f.note("worst normalization error " + num(worst_norm));
  f.note("worst mean deviation " + num(worst_z, 3) + " sigma");
  check_runtime(f, w, 180.0);
  return f.verdict();
}

// ---------------------------------------------------------------- 5

Verdict elbo_bound() {
  constexpr double kEqualityTol = 1e-9;
  Findings f;
  RandomStream rng(1007);
  double tightest = std::numeric_limits<double>::infinity();
  int checked = 0;
  for (int k = 0; k < 20; ++k) {
    const int d = 2 + static_cast<int>(rng.uniform_index(3));
    const TabularModel m = perturbed_tabular(2 + static_cast<int>(rng.uniform_index(2)), d, rng);
    for (std::size_t idx = 0; idx < m.joint().size(); ++idx) {
      const OrderingEnumeration e = enumerate_orderings(m, TokenSequence(m.spec(), m.decode(idx)));
      tightest = std::min(tightest, e.log_marginal - e.elbo);
      if (e.elbo > e.log_marginal) f.fail("bound violated by " + num(e.elbo - e.log_marginal));
      ++checked;
    }
  }
  double worst_eq = 0.0;
  for (int k = 0; k < 5; ++k) {
    std::vector<ProbRow> marg;
    for (int j = 0; j < 4; ++j) marg.push_back(random_row(3, rng));
    const TabularModel product = TabularModel::product(SequenceSpec(3, 4), marg);
    for (std::size_t idx = 0; idx < product.joint().size(); ++idx) {
      const OrderingEnumeration e = enumerate_orderings(product, TokenSequence(product.spec(), product.decode(idx)));
      worst_eq = std::max(worst_eq, std::abs(e.log_marginal - e.elbo));
    }
  }
  if (worst_eq > kEqualityTol) f.fail("product model gap " + num(worst_eq));
  f.note(std::to_string(checked) + " sequences, smallest slack " + num(tightest));
  f.note("product model gap " + num(worst_eq));
  return f.verdict();
}

// ---------------------------------------------------------------- 6

Verdict nfe_examples() {
  Findings f;
  NfeMeter a({11, 1});
  a.add_noncausal(1);
  a.add_causal(1);
  NfeMeter b({11, 1});
  b.add_noncausal(1);
  b.add_causal(7);
  if (a.nfe() != 1.0) f.fail("1 nc + 1 c gave " + num(a.nfe(), 17));
  if (b.nfe() != 1.5) f.fail("1 nc + 7 c gave " + num(b.nfe(), 17));
  f.note("(1 nc + 1 c) = " + num(a.nfe()) + ", (1 nc + 7 c) = " + num(b.nfe()));
  return f.verdict();
}

// ---------------------------------------------------------------- 7

Verdict window_constants() {
  Findings f;
  const WindowSpec cos = WindowSpec::cosine(0.083);
  const int w0 = window_size(cos, 0, 256);
  const int w128 = window_size(cos, 128, 256);
  const int lin = window_size(WindowSpec::linear(), 0, 256);
  if (w0 != 3) f.fail("W(0) = " + std::to_string(w0));
  if (w128 != 30) f.fail("W(128) = " + std::to_string(w128));
  if (lin != 1) f.fail("linear W(0) = " + std::to_string(lin));
  f.note("cosine W(0)=" + std::to_string(w0) + " W(128)=" + std::to_string(w128) + ", linear W(0)=" +
         std::to_string(lin));
  return f.verdict();
}

// ---------------------------------------------------------------- 8

HybridConfig desk_shape() {
  HybridConfig c;
  c.alphabet_size = 16;
  c.length = 32;
  c.hidden = 32;
  c.heads = 4;
  return c;
}

std::vector<std::vector<Token>> random_corpus(int n, int s, int d, RandomStream& rng) {
  std::vector<std::vector<Token>> out(static_cast<std::size_t>(n), std::vector<Token>(static_cast<std::size_t>(d)));
  for (auto& x : out) {
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(static_cast<std::uint32_t>(s)));
  }
  return out;
}

Verdict architecture_invariants() {
  constexpr int kProbes = 1000;
  Findings f;
  RandomStream rng(1008);
  const HybridConfig cfg = desk_shape();
  const int d = cfg.length;
  const auto s = static_cast<std::uint32_t>(cfg.alphabet_size);

  HybridParams::InitOptions zero;
  zero.zero_causal_output = true;
  const HybridModel zeroed(cfg, HybridParams::init(cfg, rng, zero));
  int row_mismatch = 0;
  for (int p = 0; p < 100; ++p) {
    std::vector<Token> x(static_cast<std::size_t>(d));
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(s));
    const Ordering sigma = sample_ordering(rng, d);
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d)));
    const DraftPass pass = zeroed.draft(make_reveal_state(TokenSequence(zeroed.spec(), x), sigma, i), d - i);
    const std::vector<Token> drafted = [&] {
      std::vector<Token> v(static_cast<std::size_t>(d - i - 1));
      for (Token& t : v) t = static_cast<Token>(rng.uniform_index(s));
      return v;
    }();
    const auto rows = zeroed.target_rows(pass, drafted, i, d);
    for (int r = i; r < d; ++r) {
      if (!(rows[static_cast<std::size_t>(r - i)] == pass.row_at_rank(r))) ++row_mismatch;
    }
  }
  if (row_mismatch > 0) f.fail(std::to_string(row_mismatch) + " causal rows differ from draft rows");

  TrainConfig tc;
  tc.steps = 1;
  tc.batch_size = 4;
  tc.warmup = 1;
  tc.eval_every = 1;
  tc.eval_sequences = 64;
  const Trainer trainer(zeroed, tc, random_corpus(64, cfg.alphabet_size, d, rng),
                        random_corpus(64, cfg.alphabet_size, d, rng));
  const LossReport r0 = trainer.evaluate();
  if (r0.noncausal != r0.causal) f.fail("step-0 losses " + num(r0.noncausal, 17) + " vs " + num(r0.causal, 17));

  // Target rows must not depend on drafted tokens at or after their own slot.
  const HybridModel model(cfg, HybridParams::init(cfg, rng, {}));
  int leaks = 0;
  for (int p = 0; p < kProbes; ++p) {
    std::vector<Token> x(static_cast<std::size_t>(d));
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(s));
    const Ordering sigma = sample_ordering(rng, d);
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d)));
    const DraftPass pass = model.draft(make_reveal_state(TokenSequence(model.spec(), x), sigma, i), d - i);
    std::vector<Token> a(static_cast<std::size_t>(d - i));
    for (Token& t : a) t = static_cast<Token>(rng.uniform_index(s));
    const int cut = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(d - i)));
    std::vector<Token> b = a;
    for (std::size_t k = static_cast<std::size_t>(cut); k < b.size(); ++k) b[k] = static_cast<Token>(rng.uniform_index(s));
    const auto ra = model.target_rows(pass, std::span(a).first(a.size() - 1), i, d);
    const auto rb = model.target_rows(pass, std::span(b).first(b.size() - 1), i, d);
    for (int r = i; r <= i + cut; ++r) {
      if (!(ra[static_cast<std::size_t>(r - i)] == rb[static_cast<std::size_t>(r - i)])) ++leaks;
    }
  }
  if (leaks > 0) f.fail(std::to_string(leaks) + " target rows changed with later drafted tokens");
  f.note("zero-init row mismatches " + std::to_string(row_mismatch));
  f.note("step-0 loss " + num(r0.noncausal, 8) + " (both paths)");
  f.note(std::to_string(kProbes) + " causality probes, " + std::to_string(leaks) + " leaks");
  return f.verdict();
}

// ---------------------------------------------------------------- 9

Verdict gradient_check() {
  constexpr int kCoords = 50;
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-5;
  constexpr double kTol = 1e-4;
  Findings f;
  RandomStream rng(1009);
  HybridConfig cfg;
  cfg.alphabet_size = 6;
  cfg.length = 8;
  cfg.hidden = 16;
  cfg.heads = 4;
  HybridParams::InitOptions init;
  init.stddev = 0.3;
  const HybridModel model(cfg, HybridParams::init(cfg, rng, init));
  std::vector<TrainExample> batch;
  for (int b = 0; b < 4; ++b) {
    std::vector<Token> x(static_cast<std::size_t>(cfg.length));
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(static_cast<std::uint32_t>(cfg.alphabet_size)));
    MaskConfig mc = sample_mask_config(rng, cfg.length, {});
    while (mc.revealed == cfg.length) mc = sample_mask_config(rng, cfg.length, {});
    batch.push_back({x, mc.ordering, mc.revealed, 1.0});
  }
  const GradientCheckResult r = check_gradients(model, batch, kCoords, kStep, kFloor, rng);
  const auto& blocks = model.params().blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (r.max_rel_error[k] >= kTol) f.fail(blocks[k].name + " relative error " + num(r.max_rel_error[k]));
  }
  f.note(std::to_string(blocks.size()) + " blocks, " + std::to_string(r.coordinates_checked) +
         " coordinates, worst " + num(r.worst) + " in " + r.worst_block);
  return f.verdict();
}

// ---------------------------------------------------------------- 10, 11

struct Paths {
  fs::path source;
  fs::path cache;
  fs::path out;
};

constexpr int kSeeds = 3;
constexpr double kSeparation = 0.05;

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != 0) std::cerr << err.str();
  return code;
}

std::vector<std::string> desk_args(const Paths& p, int seed, const fs::path& dir) {
  return {"-c", (p.source / "data/desk.ini").string(), "-o", dir.string(), "-s",
          "seed=" + std::to_string(seed), "paths.corpus=" + (p.source / "data/lexicon_corpus.txt").string(),
          "paths.lexicon=" + (p.source / "data/lexicon.txt").string()};
}

std::vector<std::string> with(std::string cmd, std::vector<std::string> rest) {
  rest.insert(rest.begin(), std::move(cmd));
  return rest;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string field;
  while (std::getline(is, field, ',')) out.push_back(field);
  return out;
}

// First line and last data row of a loss.csv.
std::pair<std::string, std::vector<std::string>> read_loss(const fs::path& p) {
  std::ifstream is(p);
  std::string first;
  std::string line;
  std::string last;
  std::getline(is, first);
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') last = line;
  }
  return {first, csv_fields(last)};
}

Verdict training_separation(const Paths& p) {
  Findings f;
  Stopwatch w;
  bool trained = false;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const fs::path dir = p.cache / ("seed" + std::to_string(seed));
    const auto args = desk_args(p, seed, dir);
    std::string shown;
    if (cli(with("config", args), &shown) != 0) {
      f.fail("config for seed " + std::to_string(seed) + " rejected");
      continue;
    }
    const std::string hash_line = shown.substr(0, shown.find('\n'));
    const bool cached = fs::exists(dir / "model.ssmd") && fs::exists(dir / "loss.csv") &&
                        read_loss(dir / "loss.csv").first == hash_line &&
                        read_loss(dir / "loss.csv").second.at(0) == "20000";
    if (!cached) {
      std::cout << "  training seed " << seed << " (cache " << dir.string() << ")\n" << std::flush;
      if (cli(with("train", args)) != 0) {
        f.fail("training seed " + std::to_string(seed) + " failed");
        continue;
      }
      trained = true;
    }
    const auto row = read_loss(dir / "loss.csv").second;
    const double nc = std::stod(row.at(1));
    const double c = std::stod(row.at(2));
    f.note("seed " + std::to_string(seed) + ": step " + row.at(0) + " nc " + num(nc) + " c " + num(c) + " gap " +
           num(nc - c, 3));
    if (row.at(0) != "20000") f.fail("seed " + std::to_string(seed) + " stopped at step " + row.at(0));
    if (!(c < nc - kSeparation)) f.fail("seed " + std::to_string(seed) + " gap " + num(nc - c, 3));
  }
  if (trained) {
    check_runtime(f, w, 1800.0);
  } else {
    f.note("all seeds reused from cache");
  }
  return f.verdict();
}

std::vector<TradeoffPoint> read_tradeoff(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<TradeoffPoint> points;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = csv_fields(line);
    if (header.empty()) {
      header = fields;
      continue;
    }
    auto col = [&](const std::string& name) -> const std::string& {
      const auto it = std::find(header.begin(), header.end(), name);
      return fields.at(static_cast<std::size_t>(it - header.begin()));
    };
    TradeoffPoint pt;
    pt.family = col("family");
    pt.label = col("config_label");
    pt.mean_nfe = std::stod(col("mean_nfe"));
    pt.lexicon_acc = std::stod(col("lexicon_acc"));
    pt.se_lexicon_acc = std::stod(col("se_lexicon_acc"));
    points.push_back(pt);
  }
  return points;
}

Verdict desk_tradeoff(const Paths& p) {
  constexpr int kLo = 1;
  constexpr int kHi = 8;
  Findings f;
  const fs::path model = p.cache / "seed0" / "model.ssmd";
  if (!fs::exists(model)) {
    f.fail("no trained checkpoint at " + model.string());
    return f.verdict();
  }
  const fs::path dir = p.out / "tradeoff";
  auto args = desk_args(p, 0, dir);
  args.push_back("paths.checkpoint=" + model.string());
  if (cli(with("sweep", args)) != 0) {
    f.fail("sweep failed");
    return f.verdict();
  }
  const auto points = read_tradeoff(dir / "tradeoff.csv");
  const Curve spec = lexicon_curve(points, "spec");
  const Curve mdm = lexicon_curve(points, "mdm");
  const auto rows = compare_curves(spec, mdm, kLo, kHi);
  std::ofstream cmp(dir / "comparison.csv");
  cmp << "nfe,spec_lexicon_acc,mdm_lexicon_acc,se_difference,pass\n";
  int passed = 0;
  for (const auto& r : rows) {
    cmp << r.nfe << ',' << r.spec << ',' << r.mdm << ',' << r.se << ',' << (r.pass ? 1 : 0) << '\n';
    if (r.pass) {
      ++passed;
    } else {
      f.fail("NFE " + num(r.nfe) + ": spec " + num(r.spec, 3) + " < mdm " + num(r.mdm, 3) + " - " + num(r.se, 2));
    }
  }
  if (rows.empty()) f.fail("no NFE grid point in [1, 8] is covered by both curves");
  f.note(std::to_string(passed) + "/" + std::to_string(rows.size()) + " matched NFE points");
  f.note("artifacts in " + dir.string());
  return f.verdict();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Paths paths;
  paths.source = SSMD_SOURCE_DIR;
  std::string cache = "acceptance_cache";
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--cache-dir", cache, "trained checkpoints are kept and reused here");
  app.add_option("--out-dir", out, "artifact directory");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  paths.cache = fs::absolute(cache);
  paths.out = fs::absolute(out);
  fs::create_directories(paths.cache);
  fs::create_directories(paths.out);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"speculative step output law", speculative_step_law},
      {"likelihood recursion exactness", likelihood_exactness},
      {"sampler and likelihood agree", sampler_matches_likelihood},
      {"rejection-count posterior exactness", rejection_posterior_exactness},
      {"ordering ELBO bound", elbo_bound},
      {"NFE accounting", nfe_examples},
      {"window formulas", window_constants},
      {"architecture invariants", architecture_invariants},
      {"gradient check", gradient_check},
      {"training separation", [&] { return training_separation(paths); }},
      {"desk-scale tradeoff", [&] { return desk_tradeoff(paths); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS " : "FAIL ") << std::setw(2) << id << "  " << criteria[k].first << "  ("
              << v.detail << ")\n"
              << std::flush;
  }
  std::cout << (failed == 0 ? "all selected criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed;
}

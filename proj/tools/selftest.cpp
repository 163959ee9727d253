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
#include <functional>
#include <iomanip>
#include <string>
#include <vector>

#include "commands.hpp"
#include "ssmd/hybrid_model.hpp"
#include "ssmd/likelihood.hpp"
#include "ssmd/sampler.hpp"
#include "ssmd/tabular_model.hpp"
#include "ssmd/train.hpp"

namespace ssmd::cli {
namespace {

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string on success, else the reason
};

ProbRow random_row(int s, RandomStream& rng) {
  std::vector<double> w(static_cast<std::size_t>(s));
  for (double& v : w) v = rng.exponential();
  return ProbRow::normalized(std::move(w));
}

std::string accept_step_law() {
  RandomStream rng(11);
  for (int pair = 0; pair < 5; ++pair) {
    const ProbRow draft = random_row(4, rng);
    const ProbRow target = random_row(4, rng);
    std::vector<double> counts(4, 0.0);
    constexpr int kDraws = 100000;
    for (int k = 0; k < kDraws; ++k) {
      const Token drafted = static_cast<Token>(rng.categorical(draft.values()));
      ++counts[static_cast<std::size_t>(accept_step(draft, target, drafted, rng).token)];
    }
    double tv = 0.0;
    for (int t = 0; t < 4; ++t) tv += std::abs(counts[static_cast<std::size_t>(t)] / kDraws - target[t]);
    if (tv / 2.0 > 0.01) return "total variation " + std::to_string(tv / 2.0);
  }
  return {};
}

std::string likelihood_normalizes() {
  RandomStream rng(12);
  const SequenceSpec spec(2, 3);
  const TabularModel model = TabularModel::random(spec, rng, {0.2, 0.3, false, {}});
  const Ordering sigma({2, 0, 1});
  double total = 0.0;
  for (std::size_t idx = 0; idx < 8; ++idx) {
    const TokenSequence x(spec, model.decode(idx));
    const double dp = sequence_likelihood(model, x, sigma);
    const double bf = brute_force_likelihood(model, x, sigma);
    if (std::abs(dp - bf) > 1e-9) return "recursion and path sum differ by " + std::to_string(dp - bf);
    total += std::exp(dp);
  }
  if (std::abs(total - 1.0) > 1e-9) return "likelihoods sum to " + std::to_string(total);
  return {};
}

std::string posterior_normalizes() {
  RandomStream rng(13);
  const SequenceSpec spec(3, 4);
  const TabularModel model = TabularModel::random(spec, rng, {0.3, 0.2, false, {}});
  const TokenSequence x(spec, model.decode(17));
  const RejectionPosterior post = rejection_count_posterior(model, x, Ordering::identity(4));
  double s = 0.0;
  for (double p : post.probs) s += p;
  if (std::abs(s - 1.0) > 1e-9) return "posterior sums to " + std::to_string(s);
  return {};
}

std::string window_constants() {
  const WindowSpec w = WindowSpec::cosine(0.083);
  if (window_size(w, 0, 256) != 3) return "W(0) = " + std::to_string(window_size(w, 0, 256));
  if (window_size(w, 128, 256) != 30) return "W(128) = " + std::to_string(window_size(w, 128, 256));
  if (window_size(WindowSpec::linear(), 0, 256) != 1) return "linear W(0) != 1";
  return {};
}

std::string nfe_examples() {
  NfeMeter a({11, 1});
  a.add_noncausal(1);
  a.add_causal(1);
  NfeMeter b({11, 1});
  b.add_noncausal(1);
  b.add_causal(7);
  if (a.nfe() != 1.0) return "(1 nc + 1 c) gave " + std::to_string(a.nfe());
  if (b.nfe() != 1.5) return "(1 nc + 7 c) gave " + std::to_string(b.nfe());
  return {};
}

HybridModel tiny_hybrid(bool zero_causal_output) {
  HybridConfig cfg;
  cfg.alphabet_size = 5;
  cfg.length = 6;
  cfg.hidden = 8;
  cfg.heads = 2;
  RandomStream rng(14);
  HybridParams::InitOptions init;
  init.stddev = 0.3;
  init.zero_causal_output = zero_causal_output;
  return HybridModel(cfg, HybridParams::init(cfg, rng, init));
}

std::vector<TrainExample> tiny_batch(const HybridModel& model) {
  RandomStream rng(15);
  std::vector<TrainExample> batch;
  const int d = model.spec().length();
  for (int b = 0; b < 3; ++b) {
    std::vector<Token> x(static_cast<std::size_t>(d));
    for (Token& t : x) t = static_cast<Token>(rng.uniform_index(5));
    MaskConfig mc = sample_mask_config(rng, d, {});
    while (mc.revealed == d) mc = sample_mask_config(rng, d, {});
    batch.push_back({x, mc.ordering, mc.revealed, 1.0});
  }
  return batch;
}

std::string zero_init_identity() {
  const HybridModel model = tiny_hybrid(true);
  const HybridLoss l = model.loss(tiny_batch(model));
  if (l.noncausal != l.causal) return "initial losses differ";
  return {};
}

std::string gradient_check() {
  const HybridModel model = tiny_hybrid(false);
  RandomStream rng(16);
  const GradientCheckResult r = check_gradients(model, tiny_batch(model), 5, 1e-5, 1e-5, rng);
  if (r.worst >= 1e-4) return "worst relative error " + std::to_string(r.worst) + " in " + r.worst_block;
  return {};
}

}  // namespace

int run_selftest(std::ostream& out) {
  const std::vector<Check> checks = {
      {"accept-step output law equals target row", accept_step_law},
      {"likelihood recursion matches path sum and normalizes", likelihood_normalizes},
      {"rejection-count posterior normalizes", posterior_normalizes},
      {"cosine and linear window constants", window_constants},
      {"NFE worked examples", nfe_examples},
      {"zero-initialized causal path reproduces draft loss", zero_init_identity},
      {"hybrid gradients match finite differences", gradient_check},
  };
  int failed = 0;
  for (const Check& c : checks) {
    std::string why;
    try {
      why = c.run();
    } catch (const std::exception& e) {
      why = std::string("threw: ") + e.what();
    }
    out << (why.empty() ? "PASS  " : "FAIL  ") << c.name;
    if (!why.empty()) out << " (" << why << ')';
    out << '\n';
    if (!why.empty()) ++failed;
  }
  out << (checks.size() - static_cast<std::size_t>(failed)) << '/' << checks.size() << " checks passed\n";
  return failed;
}

}  // namespace ssmd::cli

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

#include "ssmd/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "ssmd/tabular_model.hpp"

namespace ssmd {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

void require_revealed(const SpeculativeModel& model, const TokenSequence& x, const Ordering& sigma) {
  if (x.spec() != model.spec()) throw InvalidArgument("sequence spec differs from model spec");
  if (!x.fully_revealed()) throw InvalidArgument("likelihood needs a fully revealed sequence");
  if (sigma.size() != x.size()) throw InvalidArgument("ordering length differs from sequence length");
}

std::vector<Token> tokens_in_order(const TokenSequence& x, const Ordering& sigma, int from, int to) {
  std::vector<Token> out;
  out.reserve(static_cast<std::size_t>(std::max(0, to - from)));
  for (int r = from; r < to; ++r) out.push_back(x[sigma.at(r)]);
  return out;
}

}  // namespace

double log_add(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_sum_exp(std::span<const double> v) noexcept {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log_joint_accept(const ProbRow& draft, const ProbRow& target, Token token) {
  return safe_log(std::min(draft[token], target[token]));
}

double log_joint_reject(const ProbRow& draft, const ProbRow& target, Token token) {
  return safe_log(std::max(0.0, target[token] - draft[token]));
}

RunTables::RunTables(const SpeculativeModel& model, const TokenSequence& x, const Ordering& sigma)
    : d_(x.size()) {
  require_revealed(model, x, sigma);
  const auto cells = static_cast<std::size_t>(d_) * static_cast<std::size_t>(d_);
  acc_.assign(cells, kNegInf);
  rej_.assign(cells, kNegInf);
  for (int a = 0; a < d_; ++a) {
    const RevealState state = make_reveal_state(x, sigma, a);
    DraftPass pass = [&] {
      try {
        return model.draft(state, d_ - a);
      } catch (const ImpossibleContext&) {
        // A prefix with zero mass can never be emitted; the anchor contributes nothing.
        return DraftPass{state, 0, {}, nullptr};
      }
    }();
    if (pass.horizon == 0) continue;
    const std::vector<Token> drafted = tokens_in_order(x, sigma, a, d_ - 1);
    const std::vector<ProbRow> targets = model.target_rows(pass, drafted, a, d_);
    for (int r = a; r < d_; ++r) {
      const Token t = x[sigma.at(r)];
      const ProbRow& dr = pass.row_at_rank(r);
      const ProbRow& tr = targets[static_cast<std::size_t>(r - a)];
      acc_[idx(a, r)] = log_joint_accept(dr, tr, t);
      rej_[idx(a, r)] = log_joint_reject(dr, tr, t);
    }
  }
}

double sequence_likelihood(const SpeculativeModel& model, const TokenSequence& x,
                           const Ordering& sigma) {
  return sequence_likelihood(RunTables(model, x, sigma));
}

double sequence_likelihood(const RunTables& tables) {
  // reject[e] = log p(first e ranks emitted, rank e-1 rejected); reject[0] is
  // the empty start with probability one.
  const int d = tables.length();
  std::vector<double> reject(static_cast<std::size_t>(d) + 1, kNegInf);
  reject[0] = 0.0;
  double logp = kNegInf;
  for (int a = 0; a < d; ++a) {
    const double base = reject[static_cast<std::size_t>(a)];
    if (base == kNegInf) continue;
    double run = 0.0;  // log prod of accepts over ranks [a, r)
    for (int r = a; r < d && run != kNegInf; ++r) {
      auto& slot = reject[static_cast<std::size_t>(r) + 1];
      slot = log_add(slot, base + run + tables.log_reject(a, r));
      run += tables.log_accept(a, r);
    }
    logp = log_add(logp, base + run);
  }
  return log_add(logp, reject[static_cast<std::size_t>(d)]);
}

double brute_force_likelihood(const SpeculativeModel& model, const TokenSequence& x,
                              const Ordering& sigma) {
  require_revealed(model, x, sigma);
  const int d = x.size();
  if (d > 12) throw InvalidArgument("brute-force likelihood supports D <= 12");

  // Rows queried directly, one rank per causal call, per anchor.
  std::vector<std::vector<double>> acc(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> rej(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    auto& av = acc[static_cast<std::size_t>(a)];
    auto& rv = rej[static_cast<std::size_t>(a)];
    av.assign(static_cast<std::size_t>(d), 0.0);
    rv.assign(static_cast<std::size_t>(d), 0.0);
    const RevealState state = make_reveal_state(x, sigma, a);
    std::optional<DraftPass> pass;
    try {
      pass = model.draft(state, d - a);
    } catch (const ImpossibleContext&) {
      continue;
    }
    const std::vector<Token> drafted = tokens_in_order(x, sigma, a, d - 1);
    for (int r = a; r < d; ++r) {
      const ProbRow target = model.target_rows(*pass, drafted, r, r + 1).front();
      const ProbRow& draft = pass->row_at_rank(r);
      const Token t = x[sigma.at(r)];
      av[static_cast<std::size_t>(r)] = std::min(draft[t], target[t]);
      rv[static_cast<std::size_t>(r)] = std::max(0.0, target[t] - draft[t]);
    }
  }

  double total = 0.0;
  for (std::uint32_t path = 0; path < (1U << d); ++path) {
    double p = 1.0;
    int anchor = 0;
    for (int r = 0; r < d && p > 0.0; ++r) {
      const bool rejected = ((path >> r) & 1U) != 0;
      const auto a = static_cast<std::size_t>(anchor);
      const auto rr = static_cast<std::size_t>(r);
      p *= rejected ? rej[a][rr] : acc[a][rr];
      if (rejected) anchor = r + 1;
    }
    total += p;
  }
  return safe_log(total);
}

double RejectionPosterior::mean() const noexcept {
  double m = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) m += static_cast<double>(n) * probs[n];
  return m;
}

RejectionPosterior rejection_count_posterior(const SpeculativeModel& model, const TokenSequence& x,
                                             const Ordering& sigma) {
  return rejection_count_posterior(RunTables(model, x, sigma));
}

RejectionPosterior rejection_count_posterior(const RunTables& tables) {
  // reject[e][n] = log p(first e ranks emitted, rank e-1 rejected, n rejections so far).
  const int d = tables.length();
  const auto width = static_cast<std::size_t>(d) + 1;
  std::vector<std::vector<double>> reject(width, std::vector<double>(width, kNegInf));
  std::vector<double> joint(width, kNegInf);
  reject[0][0] = 0.0;
  for (int a = 0; a < d; ++a) {
    const auto& base = reject[static_cast<std::size_t>(a)];
    double run = 0.0;
    for (int r = a; r < d && run != kNegInf; ++r) {
      const double lr = tables.log_reject(a, r);
      auto& next = reject[static_cast<std::size_t>(r) + 1];
      for (int n = 0; n < a + 1; ++n) {
        const double b = base[static_cast<std::size_t>(n)];
        if (b == kNegInf) continue;
        auto& slot = next[static_cast<std::size_t>(n) + 1];
        slot = log_add(slot, b + run + lr);
      }
      run += tables.log_accept(a, r);
    }
    for (int n = 0; n < a + 1; ++n) {
      joint[static_cast<std::size_t>(n)] =
          log_add(joint[static_cast<std::size_t>(n)], base[static_cast<std::size_t>(n)] + run);
    }
  }
  const auto& last = reject[static_cast<std::size_t>(d)];
  for (std::size_t n = 0; n < width; ++n) joint[n] = log_add(joint[n], last[n]);

  RejectionPosterior out;
  out.log_likelihood = log_sum_exp(joint);
  if (out.log_likelihood == kNegInf) {
    throw InvalidArgument("sequence has zero likelihood; rejection posterior undefined");
  }
  out.probs.resize(width);
  for (std::size_t n = 0; n < width; ++n) out.probs[n] = std::exp(joint[n] - out.log_likelihood);
  out.prob_last_rejected = std::exp(log_sum_exp(last) - out.log_likelihood);
  return out;
}

ElboEstimate elbo(const SpeculativeModel& model, const TokenSequence& x, int num_orderings,
                  RandomStream& rng) {
  if (num_orderings < 1) throw InvalidArgument("num_orderings must be >= 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(num_orderings));
  for (int k = 0; k < num_orderings; ++k) {
    values.push_back(sequence_likelihood(model, x, sample_ordering(rng, x.size())));
  }
  ElboEstimate est;
  est.num_orderings = num_orderings;
  est.mean = std::accumulate(values.begin(), values.end(), 0.0) / num_orderings;
  if (num_orderings > 1 && std::isfinite(est.mean)) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(ss / (num_orderings - 1) / num_orderings);
  }
  return est;
}

OrderingEnumeration enumerate_orderings(const SpeculativeModel& model, const TokenSequence& x) {
  const int d = x.size();
  if (d > 8) throw InvalidArgument("ordering enumeration supports D <= 8");
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> logs;
  do {
    logs.push_back(sequence_likelihood(model, x, Ordering(perm)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double n = static_cast<double>(logs.size());
  OrderingEnumeration out;
  out.log_marginal = log_sum_exp(logs) - std::log(n);
  out.elbo = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
  return out;
}

}  // namespace ssmd

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

#include <vector>

#include "ssmd/model.hpp"
#include "ssmd/random.hpp"

namespace ssmd {

/// log(exp(a) + exp(b)) that returns -inf when both are -inf.
double log_add(double a, double b) noexcept;
/// Log-sum-exp over a range; -inf for an empty or all -inf range.
double log_sum_exp(std::span<const double> v) noexcept;

/// log min(draft[token], target[token]): the joint log-probability that the
/// speculative step outputs `token` via acceptance. -inf when zero.
double log_joint_accept(const ProbRow& draft, const ProbRow& target, Token token);
/// log max(0, target[token] - draft[token]): joint log-probability of
/// outputting `token` via rejection and resampling.
double log_joint_reject(const ProbRow& draft, const ProbRow& target, Token token);

/// Per-anchor draft/target values at the true tokens of a fully revealed x.
///
/// Index table: anchor a (0..D-1) is the state with ranks [0, a) revealed,
/// i.e. the context after a rejection at rank a-1 (a = 0 is the empty start).
/// For rank r in [a, D), log_accept(a, r) and log_reject(a, r) are the
/// log joint accept/reject masses of x at rank r when the run started at a
/// and every drafted token before r equals x.
class RunTables {
 public:
  /// Performs exactly D draft passes and D target passes.
  RunTables(const SpeculativeModel& model, const TokenSequence& x, const Ordering& sigma);

  int length() const noexcept { return d_; }
  double log_accept(int anchor, int rank) const { return acc_[idx(anchor, rank)]; }
  double log_reject(int anchor, int rank) const { return rej_[idx(anchor, rank)]; }

 private:
  std::size_t idx(int anchor, int rank) const {
    return static_cast<std::size_t>(anchor) * static_cast<std::size_t>(d_) +
           static_cast<std::size_t>(rank);
  }

  int d_;
  std::vector<double> acc_;
  std::vector<double> rej_;
};

/// Log-probability that the full-window single-loop speculative sampler
/// emits x under ordering sigma, by an O(D^2) log-space recursion over
/// rejection anchors.
double sequence_likelihood(const SpeculativeModel& model, const TokenSequence& x,
                           const Ordering& sigma);
double sequence_likelihood(const RunTables& tables);

/// Same log-likelihood by summing over all 2^D accept/reject paths,
/// querying the model one row at a time. D <= 12.
double brute_force_likelihood(const SpeculativeModel& model, const TokenSequence& x,
                              const Ordering& sigma);

/// Exact law of the total rejection count given (x, sigma).
struct RejectionPosterior {
  /// probs[n] = p(N = n | x, sigma), n = 0..D.
  std::vector<double> probs;
  double log_likelihood = 0.0;
  /// p(last rank rejected | x, sigma); no further outer iteration follows it.
  double prob_last_rejected = 0.0;

  double mean() const noexcept;
  /// Expected number of outer iterations of the single-loop sampler given x:
  /// 1 + E[N] - p(last rank rejected).
  double expected_outer_iterations() const noexcept { return 1.0 + mean() - prob_last_rejected; }
};

RejectionPosterior rejection_count_posterior(const SpeculativeModel& model, const TokenSequence& x,
                                             const Ordering& sigma);
RejectionPosterior rejection_count_posterior(const RunTables& tables);

struct ElboEstimate {
  double mean = 0.0;
  /// Standard error of the mean across sampled orderings (0 for one draw).
  double std_error = 0.0;
  int num_orderings = 0;
};

/// Monte Carlo mean of sequence_likelihood over uniformly drawn orderings.
ElboEstimate elbo(const SpeculativeModel& model, const TokenSequence& x, int num_orderings,
                  RandomStream& rng);

/// Exact ordering-marginal quantities by enumerating all D! orderings (D <= 8).
struct OrderingEnumeration {
  /// log( (1/D!) sum_sigma p(x | sigma) )
  double log_marginal = 0.0;
  /// (1/D!) sum_sigma log p(x | sigma)
  double elbo = 0.0;
};

OrderingEnumeration enumerate_orderings(const SpeculativeModel& model, const TokenSequence& x);

}  // namespace ssmd

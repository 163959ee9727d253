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

#include "ssmd/tabular_model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ssmd {
namespace {

double table_size(const SequenceSpec& spec) {
  return std::pow(static_cast<double>(spec.alphabet_size()), spec.length());
}

ProbRow mix_uniform(const ProbRow& row, double eps) {
  if (eps == 0.0) return row;
  std::vector<double> out(row.values().begin(), row.values().end());
  const double u = eps / static_cast<double>(out.size());
  for (double& v : out) v = (1.0 - eps) * v + u;
  return ProbRow::normalized(std::move(out));
}

ProbRow mix_rows(const ProbRow& a, const ProbRow& b, double weight_b) {
  if (weight_b == 0.0) return a;
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (1.0 - weight_b) * out[k] + weight_b * b.values()[k];
  }
  return ProbRow::normalized(std::move(out));
}

class TabularCache final : public HiddenCache {};

}  // namespace

TabularModel::TabularModel(const SequenceSpec& spec, std::vector<double> joint,
                           TabularOptions options)
    : spec_(spec), joint_(std::move(joint)), options_(options) {
  if (table_size(spec_) > kMaxTableSize) {
    throw InvalidArgument("tabular model needs S^D <= 1e7");
  }
  const auto cells = static_cast<std::size_t>(std::llround(table_size(spec_)));
  if (joint_.size() != cells) {
    throw InvalidArgument("joint has " + std::to_string(joint_.size()) + " cells, expected " +
                          std::to_string(cells));
  }
  double sum = 0.0;
  for (double v : joint_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("joint has a negative or non-finite cell");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument("joint sums to " + std::to_string(sum) + ", expected 1 within 1e-12");
  }
  if (!(options_.draft_epsilon >= 0.0 && options_.draft_epsilon <= 1.0) ||
      !(options_.target_shift >= 0.0 && options_.target_shift <= 1.0)) {
    throw InvalidArgument("tabular epsilon and shift must lie in [0, 1]");
  }
  stride_.assign(static_cast<std::size_t>(spec_.length()), 1);
  for (int p = spec_.length() - 2; p >= 0; --p) {
    stride_[static_cast<std::size_t>(p)] =
        stride_[static_cast<std::size_t>(p + 1)] * static_cast<std::size_t>(spec_.alphabet_size());
  }
}

TabularModel TabularModel::random(const SequenceSpec& spec, RandomStream& rng,
                                  TabularOptions options, double concentration) {
  if (table_size(spec) > kMaxTableSize) throw InvalidArgument("tabular model needs S^D <= 1e7");
  if (!(concentration > 0.0)) throw InvalidArgument("Dirichlet concentration must be positive");
  const auto cells = static_cast<std::size_t>(std::llround(table_size(spec)));
  std::vector<double> joint(cells);
  double sum = 0.0;
  std::gamma_distribution<double> gamma(concentration, 1.0);
  for (double& v : joint) {
    v = (concentration == 1.0 ? rng.exponential() : gamma(rng)) + 1e-12;
    sum += v;
  }
  for (double& v : joint) v /= sum;
  return TabularModel(spec, std::move(joint), options);
}

TabularModel TabularModel::product(const SequenceSpec& spec, const std::vector<ProbRow>& marginals,
                                   TabularOptions options) {
  if (static_cast<int>(marginals.size()) != spec.length()) {
    throw InvalidArgument("product model needs one marginal per position");
  }
  options.factorized = true;
  if (table_size(spec) > kMaxTableSize) throw InvalidArgument("tabular model needs S^D <= 1e7");
  const auto cells = static_cast<std::size_t>(std::llround(table_size(spec)));
  std::vector<double> joint(cells, 1.0);
  const int s = spec.alphabet_size();
  for (std::size_t idx = 0; idx < cells; ++idx) {
    std::size_t rest = idx;
    for (int p = spec.length() - 1; p >= 0; --p) {
      const auto t = static_cast<Token>(rest % static_cast<std::size_t>(s));
      rest /= static_cast<std::size_t>(s);
      joint[idx] *= marginals[static_cast<std::size_t>(p)][t];
    }
  }
  double sum = 0.0;
  for (double v : joint) sum += v;
  for (double& v : joint) v /= sum;
  return TabularModel(spec, std::move(joint), options);
}

std::size_t TabularModel::index_of(std::span<const Token> x) const {
  std::size_t idx = 0;
  for (std::size_t p = 0; p < x.size(); ++p) idx += static_cast<std::size_t>(x[p]) * stride_[p];
  return idx;
}

std::vector<Token> TabularModel::decode(std::size_t index) const {
  std::vector<Token> x(static_cast<std::size_t>(spec_.length()));
  for (std::size_t p = 0; p < x.size(); ++p) {
    x[p] = static_cast<Token>(index / stride_[p]);
    index %= stride_[p];
  }
  return x;
}

double TabularModel::probability(std::span<const Token> x) const {
  if (static_cast<int>(x.size()) != spec_.length()) throw InvalidArgument("sequence length mismatch");
  for (Token t : x) {
    if (!spec_.is_symbol(t)) throw InvalidArgument("probability needs a fully revealed sequence");
  }
  return joint_[index_of(x)];
}

double TabularModel::entropy() const {
  double h = 0.0;
  for (double v : joint_) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

ProbRow TabularModel::exact_conditional(std::span<const Token> context, int position) const {
  const int d = spec_.length();
  const int s = spec_.alphabet_size();
  if (static_cast<int>(context.size()) != d) throw InvalidArgument("context length mismatch");
  if (position < 0 || position >= d) throw InvalidArgument("position out of range");

  std::size_t base = 0;
  std::vector<int> free;
  for (int p = 0; p < d; ++p) {
    const Token t = context[static_cast<std::size_t>(p)];
    if (p == position) continue;
    if (t == spec_.mask_id()) {
      free.push_back(p);
    } else if (spec_.is_symbol(t)) {
      base += static_cast<std::size_t>(t) * stride_[static_cast<std::size_t>(p)];
    } else {
      throw InvalidArgument("context token outside the alphabet");
    }
  }

  // Odometer over the free positions; the queried position is summed per value.
  std::vector<double> mass(static_cast<std::size_t>(s), 0.0);
  std::vector<int> digit(free.size(), 0);
  const std::size_t target_stride = stride_[static_cast<std::size_t>(position)];
  std::size_t offset = 0;
  while (true) {
    for (int v = 0; v < s; ++v) {
      mass[static_cast<std::size_t>(v)] +=
          joint_[base + offset + static_cast<std::size_t>(v) * target_stride];
    }
    std::size_t k = 0;
    for (; k < free.size(); ++k) {
      const std::size_t st = stride_[static_cast<std::size_t>(free[k])];
      if (++digit[k] < s) {
        offset += st;
        break;
      }
      offset -= st * static_cast<std::size_t>(s - 1);
      digit[k] = 0;
    }
    if (k == free.size()) break;
  }

  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total > 0.0)) throw ImpossibleContext("impossible context: conditioning tokens have zero probability");
  return ProbRow::normalized(std::move(mass));
}

ProbRow TabularModel::draft_row(const RevealState& state, int rank) const {
  if (rank < state.revealed_count() || rank >= spec_.length()) {
    throw InvalidArgument("draft rank " + std::to_string(rank) + " is not masked");
  }
  const int pos = state.ordering().at(rank);
  return mix_uniform(exact_conditional(state.sequence().tokens(), pos), options_.draft_epsilon);
}

ProbRow TabularModel::target_row(const RevealState& state, std::span<const Token> drafted,
                                 int rank) const {
  const int i = state.revealed_count();
  if (rank < i || rank >= spec_.length()) {
    throw InvalidArgument("target rank " + std::to_string(rank) + " is not masked");
  }
  if (static_cast<int>(drafted.size()) < rank - i) {
    throw InvalidArgument("drafted prefix too short for rank " + std::to_string(rank));
  }
  ProbRow draft = draft_row(state, rank);
  if (options_.first_slot_fallback && rank == i) return draft;
  if (options_.factorized && options_.draft_epsilon == 0.0) return draft;

  std::vector<Token> context(state.sequence().tokens().begin(), state.sequence().tokens().end());
  for (int r = i; r < rank; ++r) {
    const Token t = drafted[static_cast<std::size_t>(r - i)];
    if (!spec_.is_symbol(t)) throw InvalidArgument("drafted token outside the alphabet");
    context[static_cast<std::size_t>(state.ordering().at(r))] = t;
  }
  ProbRow exact = exact_conditional(context, state.ordering().at(rank));
  return mix_rows(exact, draft, options_.target_shift);
}

DraftPass TabularModel::draft(const RevealState& state, int horizon) const {
  if (state.spec() != spec_) throw InvalidArgument("state spec differs from model spec");
  const int i = state.revealed_count();
  if (horizon < 0 || i + horizon > spec_.length() || (horizon == 0 && i < spec_.length())) {
    throw InvalidArgument("draft horizon " + std::to_string(horizon) + " out of range");
  }
  DraftPass pass{state, horizon, {}, std::make_shared<TabularCache>()};
  pass.rows.reserve(static_cast<std::size_t>(horizon));
  for (int r = i; r < i + horizon; ++r) pass.rows.push_back(draft_row(state, r));
  return pass;
}

std::vector<ProbRow> TabularModel::target_rows(const DraftPass& pass,
                                               std::span<const Token> drafted, int from,
                                               int to) const {
  check_target_request(pass, drafted, from, to);
  std::vector<ProbRow> rows;
  rows.reserve(static_cast<std::size_t>(to - from));
  bool reachable = true;
  for (int r = from; r < to; ++r) {
    if (reachable) {
      try {
        rows.push_back(target_row(pass.state, drafted, r));
        continue;
      } catch (const ImpossibleContext&) {
        // The drafted prefix has zero target mass, so verification rejects at
        // or before rank r-1 and never reads this row or any later one.
        reachable = false;
      }
    }
    rows.push_back(pass.row_at_rank(r));
  }
  return rows;
}

}  // namespace ssmd

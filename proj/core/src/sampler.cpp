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

#include "ssmd/sampler.hpp"

#include <algorithm>
#include <exception>
#include <thread>

namespace ssmd {
namespace {

// Stream indices for the baseline's two independent draw sequences.
constexpr std::uint64_t kRevealStream = 1;
constexpr std::uint64_t kTokenStream = 2;

Ordering reorder_revealed_first(std::span<const int> revealed, const SequenceSpec& spec,
                                const TokenSequence& seq) {
  std::vector<int> perm(revealed.begin(), revealed.end());
  for (int p = 0; p < spec.length(); ++p) {
    if (seq[p] == spec.mask_id()) perm.push_back(p);
  }
  return Ordering(std::move(perm));
}

}  // namespace

void SamplerConfig::validate() const {
  window.validate();
  grid.validate();
  if (inner_loops < 1) throw InvalidArgument("inner_loops must be >= 1");
}

NfeMeter::NfeMeter(BlockCounts blocks) : blocks_(blocks) {
  if (blocks_.noncausal < 0 || blocks_.causal < 0 || blocks_.noncausal + blocks_.causal <= 0) {
    throw InvalidArgument("block counts must be non-negative with a positive total");
  }
}

double NfeMeter::nfe() const noexcept {
  const double total = blocks_.noncausal + blocks_.causal;
  return (static_cast<double>(noncausal_) * blocks_.noncausal +
          static_cast<double>(causal_) * blocks_.causal) /
         total;
}

NfeMeter& NfeMeter::operator+=(const NfeMeter& other) {
  if (other.blocks_.noncausal != blocks_.noncausal || other.blocks_.causal != blocks_.causal) {
    throw InvalidArgument("cannot merge NFE meters with different block counts");
  }
  noncausal_ += other.noncausal_;
  causal_ += other.causal_;
  return *this;
}

AcceptResult accept_step(const ProbRow& draft, const ProbRow& target, Token drafted,
                         RandomStream& rng) {
  if (draft.size() != target.size()) throw InvalidArgument("draft and target rows differ in size");
  if (drafted < 0 || drafted >= draft.size()) throw InvalidArgument("drafted token outside the row");
  const double q = draft[drafted];
  if (!(q > 0.0)) {
    throw InvalidArgument("drafted token has zero draft probability and cannot have been drafted");
  }
  const double p = target[drafted];
  const double u = rng.uniform();
  if (u < std::min(1.0, p / q)) return {Outcome::kAccept, drafted};

  std::vector<double> residual(static_cast<std::size_t>(draft.size()));
  double mass = 0.0;
  for (int k = 0; k < draft.size(); ++k) {
    residual[static_cast<std::size_t>(k)] = std::max(0.0, target[k] - draft[k]);
    mass += residual[static_cast<std::size_t>(k)];
  }
  // Zero residual means target == draft up to rounding; acceptance is certain.
  if (!(mass > 0.0)) return {Outcome::kAccept, drafted};
  return {Outcome::kReject, static_cast<Token>(rng.categorical(residual))};
}

SampleResult mdm_sample(const SpeculativeModel& model, const NoiseSchedule& sched,
                        const TimeGrid& grid, RandomStream& rng) {
  grid.validate();
  const SequenceSpec& spec = model.spec();
  const int d = spec.length();
  RandomStream reveal_rng = rng.split(kRevealStream);
  RandomStream token_rng = rng.split(kTokenStream);

  TokenSequence seq = TokenSequence::all_masked(spec);
  std::vector<int> revealed_order;
  SampleResult out{seq, Ordering::identity(d), {}, NfeMeter(model.block_counts()), rng.stream_id(), 0, {}};

  for (int k = grid.steps; k >= 1 && static_cast<int>(revealed_order.size()) < d; --k) {
    const double p = reveal_prob(sched, grid.tau(k), grid.dtau());
    std::vector<int> chosen;
    for (int pos = 0; pos < d; ++pos) {
      if (seq[pos] != spec.mask_id()) continue;
      if (reveal_rng.uniform() < p) chosen.push_back(pos);
    }
    if (chosen.empty()) continue;

    const int i = static_cast<int>(revealed_order.size());
    RevealState state(seq, reorder_revealed_first(revealed_order, spec, seq), i);
    DraftPass pass = model.draft(state, d - i);
    out.meter.add_noncausal();
    for (int pos : chosen) {
      const ProbRow& row = pass.row_at_rank(state.ordering().rank_of(pos));
      seq.set(pos, static_cast<Token>(token_rng.categorical(row.values())));
      revealed_order.push_back(pos);
    }
    ++out.outer_iterations;
    out.revealed_per_outer.push_back(static_cast<int>(chosen.size()));
  }
  if (static_cast<int>(revealed_order.size()) != d) {
    throw std::logic_error("time grid ended with masked positions remaining");
  }
  out.sequence = seq;
  out.ordering = Ordering(revealed_order);
  return out;
}

SampleResult spec_sample_basic(const SpeculativeModel& model, RandomStream& rng,
                               const std::optional<Ordering>& ordering) {
  const SequenceSpec& spec = model.spec();
  const int d = spec.length();
  Ordering order = ordering ? *ordering : sample_ordering(rng, d);
  if (order.size() != d) throw InvalidArgument("ordering length differs from model length");

  TokenSequence seq = TokenSequence::all_masked(spec);
  SampleResult out{seq, order, {}, NfeMeter(model.block_counts()), rng.stream_id(), 0, {}};

  int i = 0;
  while (i < d) {
    const RevealState state(seq, order, i);
    const DraftPass pass = model.draft(state, d - i);
    out.meter.add_noncausal();

    std::vector<Token> drafted(static_cast<std::size_t>(d - i));
    for (int r = i; r < d; ++r) {
      drafted[static_cast<std::size_t>(r - i)] =
          static_cast<Token>(rng.categorical(pass.row_at_rank(r).values()));
    }
    const std::vector<ProbRow> targets = model.target_rows(pass, drafted, i, d);
    out.meter.add_causal();

    out.trace.begin_segment(i);
    int next = d;
    for (int r = i; r < d; ++r) {
      const auto k = static_cast<std::size_t>(r - i);
      const AcceptResult res = accept_step(pass.rows[k], targets[k], drafted[k], rng);
      out.trace.push(res.outcome);
      seq.set(order.at(r), res.token);
      if (res.outcome == Outcome::kReject) {
        next = r + 1;
        break;
      }
    }
    ++out.outer_iterations;
    out.revealed_per_outer.push_back(next - i);
    i = next;
  }
  out.sequence = seq;
  return out;
}

SampleResult spec_sample_full(const SpeculativeModel& model, const SamplerConfig& cfg,
                              RandomStream& rng, const std::optional<Ordering>& ordering) {
  cfg.validate();
  const SequenceSpec& spec = model.spec();
  const int d = spec.length();
  Ordering order = ordering ? *ordering : sample_ordering(rng, d);
  if (order.size() != d) throw InvalidArgument("ordering length differs from model length");

  TokenSequence seq = TokenSequence::all_masked(spec);
  SampleResult out{seq, order, {}, NfeMeter(model.block_counts()), rng.stream_id(), 0, {}};

  int i = 0;
  while (i < d) {
    const int end = i + window_size(cfg.window, i, d);
    const RevealState state(seq, order, i);
    const DraftPass pass = model.draft(state, end - i);
    out.meter.add_noncausal();

    // Draft rows stay fixed for the whole outer iteration; drafted tokens are
    // overwritten in place when a rejection resamples them.
    std::vector<Token> drafted(static_cast<std::size_t>(end - i));
    for (int r = i; r < end; ++r) {
      drafted[static_cast<std::size_t>(r - i)] =
          static_cast<Token>(rng.categorical(pass.row_at_rank(r).values()));
    }

    int j = i;
    for (int loop = 0; loop < cfg.inner_loops && j < end; ++loop) {
      const std::vector<ProbRow> targets = model.target_rows(pass, drafted, j, end);
      out.meter.add_causal();
      out.trace.begin_segment(j);
      int next = end;
      for (int r = j; r < end; ++r) {
        const auto k = static_cast<std::size_t>(r - i);
        const AcceptResult res =
            accept_step(pass.rows[k], targets[static_cast<std::size_t>(r - j)], drafted[k], rng);
        out.trace.push(res.outcome);
        drafted[k] = res.token;
        seq.set(order.at(r), res.token);
        if (res.outcome == Outcome::kReject) {
          next = r + 1;
          break;
        }
      }
      j = next;
    }
    ++out.outer_iterations;
    out.revealed_per_outer.push_back(j - i);
    i = j;
  }
  out.sequence = seq;
  return out;
}

SamplerFamily parse_sampler_family(const std::string& s) {
  if (s == "mdm") return SamplerFamily::kMdm;
  if (s == "spec") return SamplerFamily::kSpec;
  if (s == "spec-basic" || s == "spec_basic") return SamplerFamily::kSpecBasic;
  throw InvalidArgument("unknown sampler family '" + s + "' (expected mdm, spec, spec-basic)");
}

std::string to_string(SamplerFamily f) {
  switch (f) {
    case SamplerFamily::kMdm: return "mdm";
    case SamplerFamily::kSpec: return "spec";
    case SamplerFamily::kSpecBasic: return "spec-basic";
  }
  return "?";
}

SampleResult sample_one(const SpeculativeModel& model, SamplerFamily family,
                        const SamplerConfig& cfg, RandomStream& rng) {
  switch (family) {
    case SamplerFamily::kMdm: return mdm_sample(model, cfg.schedule, cfg.grid, rng);
    case SamplerFamily::kSpec: return spec_sample_full(model, cfg, rng);
    case SamplerFamily::kSpecBasic: return spec_sample_basic(model, rng);
  }
  throw InvalidArgument("unknown sampler family");
}

std::vector<SampleResult> sample_many(const SpeculativeModel& model, SamplerFamily family,
                                      const SamplerConfig& cfg, std::uint64_t seed, int n,
                                      int threads) {
  if (n < 0) throw InvalidArgument("sample count must be non-negative");
  if (threads < 1) throw InvalidArgument("thread count must be >= 1");
  const RandomStream root(seed);
  std::vector<std::optional<SampleResult>> slots(static_cast<std::size_t>(n));
  auto work = [&](int first, int stride) {
    for (int k = first; k < n; k += stride) {
      RandomStream rng = root.split(static_cast<std::uint64_t>(k));
      slots[static_cast<std::size_t>(k)] = sample_one(model, family, cfg, rng);
    }
  };
  const int workers = std::min(threads, std::max(n, 1));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            work(w, workers);
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<SampleResult> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace ssmd

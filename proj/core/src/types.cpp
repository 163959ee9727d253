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

#include "ssmd/types.hpp"

#include <cmath>
#include <numeric>

namespace ssmd {

SequenceSpec::SequenceSpec(int alphabet_size, int length)
    : alphabet_size_(alphabet_size), length_(length) {
  if (alphabet_size < 2) {
    throw InvalidArgument("alphabet size must be >= 2, got " + std::to_string(alphabet_size));
  }
  if (length < 1) {
    throw InvalidArgument("sequence length must be >= 1, got " + std::to_string(length));
  }
}

TokenSequence::TokenSequence(const SequenceSpec& spec, std::vector<Token> tokens)
    : spec_(spec), tokens_(std::move(tokens)) {
  if (static_cast<int>(tokens_.size()) != spec_.length()) {
    throw InvalidArgument("sequence has " + std::to_string(tokens_.size()) +
                          " tokens, expected " + std::to_string(spec_.length()));
  }
  for (std::size_t k = 0; k < tokens_.size(); ++k) {
    if (!spec_.is_valid(tokens_[k])) {
      throw InvalidArgument("token " + std::to_string(tokens_[k]) + " at position " +
                            std::to_string(k) + " is outside the alphabet");
    }
  }
}

TokenSequence TokenSequence::all_masked(const SequenceSpec& spec) {
  return TokenSequence(spec, std::vector<Token>(static_cast<std::size_t>(spec.length()),
                                                spec.mask_id()));
}

bool TokenSequence::fully_revealed() const noexcept {
  for (Token t : tokens_) {
    if (t == spec_.mask_id()) return false;
  }
  return true;
}

void TokenSequence::set(int pos, Token t) {
  if (pos < 0 || pos >= size()) throw InvalidArgument("position out of range");
  if (!spec_.is_valid(t)) throw InvalidArgument("token outside the alphabet");
  tokens_[static_cast<std::size_t>(pos)] = t;
}

Ordering::Ordering(std::vector<int> perm) : perm_(std::move(perm)), rank_(perm_.size(), -1) {
  const int n = static_cast<int>(perm_.size());
  if (n == 0) throw InvalidArgument("ordering must be non-empty");
  for (int r = 0; r < n; ++r) {
    const int p = perm_[static_cast<std::size_t>(r)];
    if (p < 0 || p >= n || rank_[static_cast<std::size_t>(p)] != -1) {
      throw InvalidArgument("ordering is not a permutation of [0, " + std::to_string(n) + ")");
    }
    rank_[static_cast<std::size_t>(p)] = r;
  }
}

Ordering Ordering::identity(int length) {
  std::vector<int> perm(static_cast<std::size_t>(length));
  std::iota(perm.begin(), perm.end(), 0);
  return Ordering(std::move(perm));
}

std::uint64_t Ordering::hash() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int p : perm_) {
    auto v = static_cast<std::uint32_t>(p);
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

RevealState::RevealState(TokenSequence seq, Ordering ordering, int revealed_count)
    : seq_(std::move(seq)), ordering_(std::move(ordering)), revealed_(revealed_count) {
  const int d = seq_.size();
  if (ordering_.size() != d) throw InvalidArgument("ordering length differs from sequence length");
  if (revealed_ < 0 || revealed_ > d) {
    throw InvalidArgument("revealed count " + std::to_string(revealed_) + " outside [0, " +
                          std::to_string(d) + "]");
  }
  for (int r = 0; r < d; ++r) {
    const bool masked = seq_[ordering_.at(r)] == seq_.spec().mask_id();
    if ((r < revealed_) == masked) {
      throw InvalidArgument("reveal state inconsistent with ordering at rank " + std::to_string(r));
    }
  }
}

RevealState make_reveal_state(const TokenSequence& seq, const Ordering& ordering, int i) {
  const int d = seq.size();
  if (ordering.size() != d) throw InvalidArgument("ordering length differs from sequence length");
  if (i < 0 || i > d) {
    throw InvalidArgument("revealed count " + std::to_string(i) + " outside [0, " +
                          std::to_string(d) + "]");
  }
  TokenSequence out = TokenSequence::all_masked(seq.spec());
  for (int r = 0; r < i; ++r) {
    const int pos = ordering.at(r);
    if (seq[pos] == seq.spec().mask_id()) {
      throw InvalidArgument("cannot reveal a masked source token at position " +
                            std::to_string(pos));
    }
    out.set(pos, seq[pos]);
  }
  return RevealState(std::move(out), ordering, i);
}

ProbRow::ProbRow(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw InvalidArgument("probability row is empty");
  double sum = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("probability row has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw InvalidArgument("probability row sums to " + std::to_string(sum));
  }
}

ProbRow ProbRow::uniform(int size) {
  return ProbRow(std::vector<double>(static_cast<std::size_t>(size), 1.0 / size));
}

ProbRow ProbRow::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidArgument("weights have zero total mass");
  for (double& w : weights) w /= sum;
  return ProbRow(std::move(weights));
}

double total_variation(const ProbRow& a, const ProbRow& b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("total_variation: dimension mismatch " + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (int k = 0; k < a.size(); ++k) acc += std::abs(a[k] - b[k]);
  return 0.5 * acc;
}

void EventTrace::begin_segment(int rank) { segment_starts_.push_back(rank); }

int EventTrace::rejections() const noexcept {
  int n = 0;
  for (Outcome o : events_) n += o == Outcome::kReject ? 1 : 0;
  return n;
}

bool EventTrace::segments_well_formed() const noexcept {
  if (segment_starts_.empty()) return events_.empty();
  const int base = segment_starts_.front();
  for (std::size_t s = 0; s + 1 < segment_starts_.size(); ++s) {
    const int last = segment_starts_[s + 1] - 1 - base;
    if (last < 0 || last >= size()) return false;
    if (events_[static_cast<std::size_t>(last)] != Outcome::kReject) return false;
  }
  return true;
}

}  // namespace ssmd

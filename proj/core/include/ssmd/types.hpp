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

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssmd {

using Token = std::int32_t;

/// Thrown when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Alphabet size and sequence length. The mask sentinel is one past the
/// alphabet, so valid tokens are [0, S) and the mask is S.
class SequenceSpec {
 public:
  SequenceSpec(int alphabet_size, int length);

  int alphabet_size() const noexcept { return alphabet_size_; }
  int length() const noexcept { return length_; }
  Token mask_id() const noexcept { return alphabet_size_; }

  bool is_symbol(Token t) const noexcept { return t >= 0 && t < alphabet_size_; }
  bool is_valid(Token t) const noexcept { return is_symbol(t) || t == mask_id(); }

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;

 private:
  int alphabet_size_;
  int length_;
};

/// Fixed-length sequence of symbols and/or mask sentinels.
class TokenSequence {
 public:
  TokenSequence(const SequenceSpec& spec, std::vector<Token> tokens);
  static TokenSequence all_masked(const SequenceSpec& spec);

  const SequenceSpec& spec() const noexcept { return spec_; }
  std::span<const Token> tokens() const noexcept { return tokens_; }
  Token operator[](int pos) const { return tokens_[static_cast<std::size_t>(pos)]; }
  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  bool fully_revealed() const noexcept;

  void set(int pos, Token t);

  friend bool operator==(const TokenSequence& a, const TokenSequence& b) {
    return a.spec_ == b.spec_ && a.tokens_ == b.tokens_;
  }

 private:
  SequenceSpec spec_;
  std::vector<Token> tokens_;
};

/// Generation order over positions. perm()[r] is the position generated at
/// rank r; rank_of(p) is the inverse. Rank r corresponds to the 1-indexed
/// slot r+1 in the usual sigma(1:D) notation.
class Ordering {
 public:
  explicit Ordering(std::vector<int> perm);
  static Ordering identity(int length);

  std::span<const int> perm() const noexcept { return perm_; }
  int at(int rank) const { return perm_[static_cast<std::size_t>(rank)]; }
  int rank_of(int position) const { return rank_[static_cast<std::size_t>(position)]; }
  int size() const noexcept { return static_cast<int>(perm_.size()); }

  /// FNV-1a over the permutation; stable across platforms.
  std::uint64_t hash() const noexcept;

  friend bool operator==(const Ordering& a, const Ordering& b) { return a.perm_ == b.perm_; }

 private:
  std::vector<int> perm_;
  std::vector<int> rank_;
};

/// A sequence where exactly the first `revealed_count` ranks of `ordering`
/// carry symbols and every other position holds the mask sentinel.
class RevealState {
 public:
  RevealState(TokenSequence seq, Ordering ordering, int revealed_count);

  const TokenSequence& sequence() const noexcept { return seq_; }
  const Ordering& ordering() const noexcept { return ordering_; }
  const SequenceSpec& spec() const noexcept { return seq_.spec(); }
  int revealed_count() const noexcept { return revealed_; }
  int masked_count() const noexcept { return seq_.size() - revealed_; }

 private:
  TokenSequence seq_;
  Ordering ordering_;
  int revealed_;
};

/// Copies seq's values at ranks [0, i) of `ordering` and masks the rest.
RevealState make_reveal_state(const TokenSequence& seq, const Ordering& ordering, int i);

/// Normalized distribution over the alphabet.
class ProbRow {
 public:
  static constexpr double kTolerance = 1e-9;

  ProbRow() = default;
  /// Validates non-negativity and |sum - 1| <= kTolerance.
  explicit ProbRow(std::vector<double> p);
  static ProbRow uniform(int size);
  /// Rescales non-negative weights to sum to one.
  static ProbRow normalized(std::vector<double> weights);

  std::span<const double> values() const noexcept { return p_; }
  double operator[](Token t) const { return p_[static_cast<std::size_t>(t)]; }
  int size() const noexcept { return static_cast<int>(p_.size()); }

  friend bool operator==(const ProbRow&, const ProbRow&) = default;

 private:
  std::vector<double> p_;
};

double total_variation(const ProbRow& a, const ProbRow& b);

enum class Outcome : std::uint8_t { kAccept, kReject };

/// Accept/reject outcomes in ordering-rank order. Each segment is one
/// verification pass; segment_starts() holds the rank at which each begins.
class EventTrace {
 public:
  void begin_segment(int rank);
  void push(Outcome o) { events_.push_back(o); }

  std::span<const Outcome> events() const noexcept { return events_; }
  std::span<const int> segment_starts() const noexcept { return segment_starts_; }
  int rejections() const noexcept;
  int size() const noexcept { return static_cast<int>(events_.size()); }

  /// Every segment but the last ends in a rejection.
  bool segments_well_formed() const noexcept;

 private:
  std::vector<Outcome> events_;
  std::vector<int> segment_starts_;
};

}  // namespace ssmd

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

#include <filesystem>
#include <set>
#include <vector>

#include "ssmd/random.hpp"
#include "ssmd/types.hpp"

namespace ssmd {

using Word = std::vector<Token>;

/// Set of known words over the non-separator symbols.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<Word> words);

  const std::vector<Word>& words() const noexcept { return words_; }
  bool contains(const Word& w) const { return set_.count(w) != 0; }
  int size() const noexcept { return static_cast<int>(words_.size()); }
  bool empty() const noexcept { return words_.empty(); }

 private:
  std::vector<Word> words_;
  std::set<Word> set_;
};

struct LexiconSpec {
  int alphabet_size = 16;  // the last symbol is the separator
  int num_words = 200;
  int min_length = 2;
  int max_length = 5;

  Token separator() const noexcept { return alphabet_size - 1; }
  void validate() const;
};

/// Distinct random words with uniform lengths in [min_length, max_length]
/// over symbols [0, S-1).
Lexicon generate_lexicon(const LexiconSpec& spec, RandomStream& rng);

/// Draws one length-D window from the word stream w1 SEP w2 SEP ... with
/// words iid uniform over the lexicon. The window starts at a uniform offset
/// in [0, len(w1)] of the first word-plus-separator unit.
std::vector<Token> sample_lexicon_window(const Lexicon& lex, Token separator, int length,
                                         RandomStream& rng);

/// n windows; window k uses rng.split(k).
std::vector<std::vector<Token>> generate_lexicon_corpus(const Lexicon& lex, Token separator,
                                                        int length, int n, RandomStream& rng);

/// Exact probability of a window under the sample_lexicon_window process,
/// by a forward pass over (word, offset) states.
class LexiconOracle {
 public:
  LexiconOracle(Lexicon lex, Token separator);
  /// log p(window); -inf when the window cannot be produced.
  double log_prob(std::span<const Token> window) const;

 private:
  Lexicon lex_;
  Token separator_;
};

/// Words strictly between two separators; edge fragments and empty words are
/// dropped.
std::vector<Word> interior_words(std::span<const Token> seq, Token separator);

/// Lexicon of every interior word that occurs in a corpus.
Lexicon lexicon_from_corpus(const std::vector<std::vector<Token>>& corpus, Token separator);

/// Sequence files: one sequence per line, whitespace-separated token ids.
/// Blank lines and lines starting with '#' are skipped. In char mode each
/// line is text over a-z and space, mapped to 0..25 and 26.
struct SequenceFileOptions {
  bool char_mode = false;
};

/// Parses and validates every sequence against spec; errors name the line.
std::vector<std::vector<Token>> read_sequences(const std::filesystem::path& path,
                                               const SequenceSpec& spec,
                                               SequenceFileOptions opts = {});
/// Parses one line of token ids (or text in char mode) without validation.
std::vector<Token> parse_sequence_line(const std::string& line, SequenceFileOptions opts = {});
void write_sequences(const std::filesystem::path& path,
                     const std::vector<std::vector<Token>>& seqs);

void write_lexicon(const std::filesystem::path& path, const Lexicon& lex);
Lexicon read_lexicon(const std::filesystem::path& path);

}  // namespace ssmd

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

#include "ssmd/corpus.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace ssmd {

Lexicon::Lexicon(std::vector<Word> words) : words_(std::move(words)) {
  for (const Word& w : words_) {
    if (w.empty()) throw InvalidArgument("lexicon words must be non-empty");
    if (!set_.insert(w).second) throw InvalidArgument("lexicon contains a duplicate word");
  }
}

void LexiconSpec::validate() const {
  if (alphabet_size < 3) throw InvalidArgument("lexicon alphabet needs at least two letters plus a separator");
  if (num_words < 1) throw InvalidArgument("lexicon needs at least one word");
  if (min_length < 1 || max_length < min_length) throw InvalidArgument("invalid word length range");
  double possible = 0.0;
  for (int len = min_length; len <= max_length; ++len) possible += std::pow(alphabet_size - 1, len);
  if (possible < num_words) throw InvalidArgument("not enough distinct words for the requested lexicon size");
}

Lexicon generate_lexicon(const LexiconSpec& spec, RandomStream& rng) {
  spec.validate();
  std::set<Word> seen;
  std::vector<Word> words;
  const auto span = static_cast<std::uint32_t>(spec.max_length - spec.min_length + 1);
  const auto letters = static_cast<std::uint32_t>(spec.alphabet_size - 1);
  while (static_cast<int>(words.size()) < spec.num_words) {
    const int len = spec.min_length + static_cast<int>(rng.uniform_index(span));
    Word w(static_cast<std::size_t>(len));
    for (Token& t : w) t = static_cast<Token>(rng.uniform_index(letters));
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return Lexicon(std::move(words));
}

std::vector<Token> sample_lexicon_window(const Lexicon& lex, Token separator, int length,
                                         RandomStream& rng) {
  if (lex.empty()) throw InvalidArgument("cannot sample from an empty lexicon");
  if (length < 1) throw InvalidArgument("window length must be positive");
  const auto n = static_cast<std::uint32_t>(lex.size());
  std::vector<Token> out;
  out.reserve(static_cast<std::size_t>(length));
  const Word& first = lex.words()[rng.uniform_index(n)];
  std::size_t offset = rng.uniform_index(static_cast<std::uint32_t>(first.size() + 1));
  const Word* w = &first;
  while (static_cast<int>(out.size()) < length) {
    if (offset < w->size()) {
      out.push_back((*w)[offset]);
      ++offset;
    } else {
      out.push_back(separator);
      w = &lex.words()[rng.uniform_index(n)];
      offset = 0;
    }
  }
  return out;
}

std::vector<std::vector<Token>> generate_lexicon_corpus(const Lexicon& lex, Token separator,
                                                        int length, int n, RandomStream& rng) {
  std::vector<std::vector<Token>> out;
  out.reserve(static_cast<std::size_t>(std::max(0, n)));
  for (int k = 0; k < n; ++k) {
    RandomStream child = rng.split(static_cast<std::uint64_t>(k));
    out.push_back(sample_lexicon_window(lex, separator, length, child));
  }
  return out;
}

LexiconOracle::LexiconOracle(Lexicon lex, Token separator) : lex_(std::move(lex)), separator_(separator) {
  if (lex_.empty()) throw InvalidArgument("oracle needs a non-empty lexicon");
}

double LexiconOracle::log_prob(std::span<const Token> window) const {
  // alpha[w][c]: mass of being at offset c of word w (c == len means the
  // separator) after emitting the prefix. Rescaled each step.
  const auto& words = lex_.words();
  const double inv_n = 1.0 / static_cast<double>(words.size());
  std::vector<std::vector<double>> alpha(words.size());
  for (std::size_t w = 0; w < words.size(); ++w) alpha[w].assign(words[w].size() + 1, 0.0);
  auto emits = [&](std::size_t w, std::size_t c, Token t) {
    return c < words[w].size() ? words[w][c] == t : t == separator_;
  };
  if (window.empty()) return 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const double start = inv_n / static_cast<double>(words[w].size() + 1);
    for (std::size_t c = 0; c <= words[w].size(); ++c) {
      if (emits(w, c, window[0])) alpha[w][c] = start;
    }
  }
  double log_scale = 0.0;
  for (std::size_t t = 1; t <= window.size(); ++t) {
    double total = 0.0;
    for (const auto& a : alpha) {
      for (double v : a) total += v;
    }
    if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
    log_scale += std::log(total);
    if (t == window.size()) break;
    double wrap = 0.0;
    for (std::size_t w = 0; w < words.size(); ++w) {
      auto& a = alpha[w];
      wrap += a.back();
      for (std::size_t c = a.size() - 1; c > 0; --c) {
        a[c] = emits(w, c, window[t]) ? a[c - 1] / total : 0.0;
      }
      a[0] = 0.0;
    }
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (emits(w, 0, window[t])) alpha[w][0] = wrap * inv_n / total;
    }
  }
  return log_scale;
}

std::vector<Word> interior_words(std::span<const Token> seq, Token separator) {
  std::vector<Word> out;
  bool open = false;
  Word cur;
  for (Token t : seq) {
    if (t == separator) {
      if (open && !cur.empty()) out.push_back(cur);
      cur.clear();
      open = true;
    } else if (open) {
      cur.push_back(t);
    }
  }
  return out;
}

Lexicon lexicon_from_corpus(const std::vector<std::vector<Token>>& corpus, Token separator) {
  std::set<Word> seen;
  std::vector<Word> words;
  for (const auto& seq : corpus) {
    for (Word& w : interior_words(seq, separator)) {
      if (seen.insert(w).second) words.push_back(std::move(w));
    }
  }
  return Lexicon(std::move(words));
}

std::vector<Token> parse_sequence_line(const std::string& line, SequenceFileOptions opts) {
  std::vector<Token> out;
  if (opts.char_mode) {
    for (char ch : line) {
      if (ch == '\r') continue;
      if (ch == ' ') {
        out.push_back(26);
      } else if (ch >= 'a' && ch <= 'z') {
        out.push_back(static_cast<Token>(ch - 'a'));
      } else {
        throw InvalidArgument(std::string("character '") + ch + "' is outside a-z and space");
      }
    }
    return out;
  }
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw InvalidArgument("'" + tok + "' is not an integer token id");
    if (v < std::numeric_limits<Token>::min() || v > std::numeric_limits<Token>::max()) {
      throw InvalidArgument("token id " + tok + " out of range");
    }
    out.push_back(static_cast<Token>(v));
  }
  return out;
}

std::vector<std::vector<Token>> read_sequences(const std::filesystem::path& path,
                                               const SequenceSpec& spec, SequenceFileOptions opts) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open sequence file " + path.string());
  std::vector<std::vector<Token>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      std::vector<Token> seq = parse_sequence_line(line, opts);
      if (static_cast<int>(seq.size()) != spec.length()) {
        throw InvalidArgument("has " + std::to_string(seq.size()) + " tokens, expected " +
                              std::to_string(spec.length()));
      }
      for (Token t : seq) {
        if (!spec.is_symbol(t)) {
          throw InvalidArgument("token " + std::to_string(t) + " is outside [0, " +
                                std::to_string(spec.alphabet_size()) + ")");
        }
      }
      out.push_back(std::move(seq));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_sequences(const std::filesystem::path& path, const std::vector<std::vector<Token>>& seqs) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write sequence file " + path.string());
  for (const auto& s : seqs) {
    for (std::size_t k = 0; k < s.size(); ++k) os << (k ? " " : "") << s[k];
    os << '\n';
  }
}

void write_lexicon(const std::filesystem::path& path, const Lexicon& lex) {
  write_sequences(path, lex.words());
}

Lexicon read_lexicon(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open lexicon file " + path.string());
  std::vector<Word> words;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    words.push_back(parse_sequence_line(line));
  }
  return Lexicon(std::move(words));
}

}  // namespace ssmd

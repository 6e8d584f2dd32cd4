// uctc/labelset.h
//
// Copyright 2026 The uctc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uctc/common.h"

namespace uctc {

using LanguageId = std::string;

enum class TokenKind { kBlank, kLower, kCapital, kDouble };

// One output symbol. Besides the blank, every token is derived from a base
// character c: the lowercase form "c", the capitalized word-boundary form
// ("C" for ASCII letters, "^c" otherwise), and the double-letter unit "cc".
struct Token {
  std::string surface;
  TokenKind kind = TokenKind::kBlank;
  std::string base;  // base character; empty for the blank
};

// A transcript as token ids. `language` is the id-set the sequence was
// produced under; empty for raw decoder output of a maskless model.
struct TokenSequence {
  std::vector<int> ids;
  LanguageId language;
};

// Per-language binary mask over the inventory. bits[k] == 1 iff token k
// belongs to the language; the blank bit is always set.
struct LanguageMask {
  std::vector<uint8_t> bits;
};

struct OverlapReport {
  int shared_by_all = 0;  // tokens present in every language (incl. blank)
  std::map<std::pair<LanguageId, LanguageId>, int> pairwise;
};

// The universal token set shared by all languages: the blank at index 0,
// then for each base character of the union alphabet (sorted) its lowercase,
// capitalized, and double-letter tokens. Immutable after construction.
class LabelInventory {
 public:
  // Builds the inventory from one alphabet per language. Each alphabet
  // entry is a single lowercase grapheme (one codepoint). Throws on empty
  // or duplicate entries, on ASCII uppercase/space/'^' entries (reserved by
  // the surface-form scheme), and on empty language codes.
  static LabelInventory build(const std::map<LanguageId, std::vector<std::string>>& alphabets);

  // Convenience: alphabets given as raw UTF-8 strings, one codepoint per entry.
  static LabelInventory build_from_strings(const std::map<LanguageId, std::string>& alphabets);

  int num_tokens() const { return static_cast<int>(tokens_.size()); }  // K
  int blank_index() const { return 0; }
  const Token& token(int id) const;
  int token_id(const std::string& surface) const;  // -1 if absent

  int num_languages() const { return static_cast<int>(languages_.size()); }
  const std::vector<LanguageId>& languages() const { return languages_; }
  bool has_language(const LanguageId& lang) const;
  // Index of a language in registration order; drives the one-hot indicator.
  int language_index(const LanguageId& lang) const;

  // Sorted ascending token ids of the language, blank included.
  const std::vector<int>& membership(const LanguageId& lang) const;

  LanguageMask language_mask(const LanguageId& lang) const;

  // Word-boundary tokenization: the first character of each word emits its
  // Capital token; the rest are scanned left-to-right, emitting a Double
  // token for each adjacent identical pair (greedy longest match). Input is
  // lowercase words separated by single spaces. Never emits the blank.
  TokenSequence tokenize(const std::string& text, const LanguageId& lang) const;

  // Inverse of tokenize: Capital -> space + base, Double -> base twice,
  // Lower -> base; the leading space is trimmed. Throws if the sequence
  // contains the blank.
  std::string detokenize(const std::vector<int>& ids) const;
  std::string detokenize(const TokenSequence& seq) const { return detokenize(seq.ids); }

  // Shared-token statistics: the count common to all languages and every
  // pairwise intersection. Requires at least two languages.
  OverlapReport overlap_report() const;

  // Language-local indexing for per-language output heads: local ids are
  // ranks within the sorted membership, so the blank is local id 0.
  int local_size(const LanguageId& lang) const;
  int to_local(const LanguageId& lang, int global_id) const;
  int to_global(const LanguageId& lang, int local_id) const;

  // The alphabets the inventory was built from, for round-tripping.
  const std::map<LanguageId, std::vector<std::string>>& alphabets() const { return alphabets_; }

 private:
  LabelInventory() = default;

  std::vector<Token> tokens_;
  std::vector<LanguageId> languages_;  // registration order (sorted codes)
  std::map<LanguageId, std::vector<std::string>> alphabets_;
  std::map<LanguageId, std::vector<int>> membership_;
  std::map<LanguageId, std::vector<int>> global_to_local_;  // -1 where absent
  std::map<std::string, int> surface_to_id_;
  // base char -> (lower id, capital id, double id)
  std::map<std::string, std::array<int, 3>> base_to_ids_;
};

// Alphabet declaration file: UTF-8 lines of "<language-code>\t<base chars>",
// '#' comments and blank lines ignored.
std::map<LanguageId, std::string> read_alphabet_file(const std::string& path);
void write_alphabet_file(const std::map<LanguageId, std::string>& alphabets, const std::string& path);

}  // namespace uctc

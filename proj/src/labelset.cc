// uctc/labelset.cc
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

#include "uctc/labelset.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "uctc/utf8.h"

namespace uctc {

namespace {

const char* const kBlankSurface = "<blank>";

bool is_ascii_lower(const std::string& c) {
  return c.size() == 1 && c[0] >= 'a' && c[0] <= 'z';
}

std::string capital_surface(const std::string& base) {
  if (is_ascii_lower(base)) {
    std::string s = base;
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
  }
  return "^" + base;
}

}  // namespace

LabelInventory LabelInventory::build(
    const std::map<LanguageId, std::vector<std::string>>& alphabets) {
  require(!alphabets.empty(), "build_inventory: no languages given");

  LabelInventory inv;
  std::set<std::string> union_chars;
  for (const auto& [lang, chars] : alphabets) {
    require(!lang.empty(), "build_inventory: empty language code");
    require(!chars.empty(), "invalid alphabet: language '" + lang + "' has an empty alphabet");
    std::set<std::string> seen;
    for (const auto& c : chars) {
      require(!c.empty(), "invalid alphabet: empty character in language '" + lang + "'");
      require(utf8_codepoints(c).size() == 1,
              "invalid alphabet: '" + c + "' in language '" + lang + "' is not a single codepoint");
      require(c != " " && c != "^",
              "invalid alphabet: character '" + c + "' in language '" + lang + "' is reserved");
      require(!(c.size() == 1 && c[0] >= 'A' && c[0] <= 'Z'),
              "invalid alphabet: uppercase character '" + c + "' in language '" + lang +
                  "'; declare the lowercase form");
      require(seen.insert(c).second,
              "invalid alphabet: duplicate character '" + c + "' in language '" + lang + "'");
      union_chars.insert(c);
    }
    inv.languages_.push_back(lang);
    inv.alphabets_[lang] = chars;
  }

  inv.tokens_.push_back(Token{kBlankSurface, TokenKind::kBlank, ""});
  for (const auto& c : union_chars) {
    const int lower_id = static_cast<int>(inv.tokens_.size());
    inv.tokens_.push_back(Token{c, TokenKind::kLower, c});
    inv.tokens_.push_back(Token{capital_surface(c), TokenKind::kCapital, c});
    inv.tokens_.push_back(Token{c + c, TokenKind::kDouble, c});
    inv.base_to_ids_[c] = {lower_id, lower_id + 1, lower_id + 2};
  }
  for (int i = 0; i < static_cast<int>(inv.tokens_.size()); ++i) {
    const auto [it, fresh] = inv.surface_to_id_.emplace(inv.tokens_[i].surface, i);
    require(fresh, "invalid alphabet: token surface collision on '" + inv.tokens_[i].surface + "'");
  }

  for (const auto& [lang, chars] : inv.alphabets_) {
    std::vector<int> members = {0};
    for (const auto& c : chars) {
      const auto& ids = inv.base_to_ids_.at(c);
      members.insert(members.end(), ids.begin(), ids.end());
    }
    std::sort(members.begin(), members.end());
    std::vector<int> to_local(inv.tokens_.size(), -1);
    for (int rank = 0; rank < static_cast<int>(members.size()); ++rank) {
      to_local[members[rank]] = rank;
    }
    inv.membership_[lang] = std::move(members);
    inv.global_to_local_[lang] = std::move(to_local);
  }
  return inv;
}

LabelInventory LabelInventory::build_from_strings(
    const std::map<LanguageId, std::string>& alphabets) {
  std::map<LanguageId, std::vector<std::string>> split;
  for (const auto& [lang, chars] : alphabets) {
    split[lang] = utf8_codepoints(chars);
  }
  return build(split);
}

const Token& LabelInventory::token(int id) const {
  require(id >= 0 && id < num_tokens(), "token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

int LabelInventory::token_id(const std::string& surface) const {
  const auto it = surface_to_id_.find(surface);
  return it == surface_to_id_.end() ? -1 : it->second;
}

bool LabelInventory::has_language(const LanguageId& lang) const {
  return membership_.count(lang) != 0;
}

int LabelInventory::language_index(const LanguageId& lang) const {
  for (int i = 0; i < num_languages(); ++i) {
    if (languages_[i] == lang) return i;
  }
  fail("unknown language '" + lang + "'");
}

const std::vector<int>& LabelInventory::membership(const LanguageId& lang) const {
  const auto it = membership_.find(lang);
  require(it != membership_.end(), "unknown language '" + lang + "'");
  return it->second;
}

LanguageMask LabelInventory::language_mask(const LanguageId& lang) const {
  const auto& members = membership(lang);
  LanguageMask mask;
  mask.bits.assign(tokens_.size(), 0);
  for (int id : members) mask.bits[id] = 1;
  return mask;
}

TokenSequence LabelInventory::tokenize(const std::string& text, const LanguageId& lang) const {
  const auto mem_it = global_to_local_.find(lang);
  require(mem_it != global_to_local_.end(), "unknown language '" + lang + "'");
  const std::vector<int>& to_local = mem_it->second;

  TokenSequence seq;
  seq.language = lang;
  if (text.empty()) return seq;

  const std::vector<std::string> cps = utf8_codepoints(text);
  // Words are maximal runs between single spaces; empty runs mean the
  // spacing precondition is violated.
  size_t i = 0;
  while (i < cps.size()) {
    require(cps[i] != " ", "invalid spacing in \"" + text + "\" at codepoint " + std::to_string(i) +
                               " (words must be separated by single spaces)");
    size_t j = i;
    while (j < cps.size() && cps[j] != " ") ++j;
    // Word spans [i, j).
    for (size_t p = i; p < j;) {
      const std::string& c = cps[p];
      const auto ids_it = base_to_ids_.find(c);
      const bool in_lang = ids_it != base_to_ids_.end() && to_local[ids_it->second[0]] >= 0;
      require(in_lang, "unknown character '" + c + "' at codepoint " + std::to_string(p) +
                           " for language '" + lang + "'");
      const auto& ids = ids_it->second;
      if (p == i) {
        seq.ids.push_back(ids[1]);  // Capital
        ++p;
      } else if (p + 1 < j && cps[p + 1] == c) {
        seq.ids.push_back(ids[2]);  // Double
        p += 2;
      } else {
        seq.ids.push_back(ids[0]);  // Lower
        ++p;
      }
    }
    i = (j < cps.size()) ? j + 1 : j;
    require(i < cps.size() || j == cps.size(),
            "invalid spacing in \"" + text + "\" (trailing space)");
  }
  return seq;
}

std::string LabelInventory::detokenize(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    const Token& tok = token(ids[i]);
    switch (tok.kind) {
      case TokenKind::kBlank:
        fail("invalid sequence: blank token at position " + std::to_string(i));
      case TokenKind::kCapital:
        out += ' ';
        out += tok.base;
        break;
      case TokenKind::kLower:
        out += tok.base;
        break;
      case TokenKind::kDouble:
        out += tok.base;
        out += tok.base;
        break;
    }
  }
  if (!out.empty() && out[0] == ' ') out.erase(0, 1);
  return out;
}

OverlapReport LabelInventory::overlap_report() const {
  require(num_languages() >= 2, "overlap_report needs at least two languages");
  OverlapReport report;
  std::vector<int> counts(tokens_.size(), 0);
  for (const auto& [lang, members] : membership_) {
    for (int id : members) ++counts[id];
  }
  for (int c : counts) {
    if (c == num_languages()) ++report.shared_by_all;
  }
  for (size_t a = 0; a < languages_.size(); ++a) {
    for (size_t b = a + 1; b < languages_.size(); ++b) {
      const auto& ma = membership_.at(languages_[a]);
      const auto& mb = membership_.at(languages_[b]);
      std::vector<int> shared;
      std::set_intersection(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(shared));
      report.pairwise[{languages_[a], languages_[b]}] = static_cast<int>(shared.size());
    }
  }
  return report;
}

int LabelInventory::local_size(const LanguageId& lang) const {
  return static_cast<int>(membership(lang).size());
}

int LabelInventory::to_local(const LanguageId& lang, int global_id) const {
  const auto it = global_to_local_.find(lang);
  require(it != global_to_local_.end(), "unknown language '" + lang + "'");
  require(global_id >= 0 && global_id < num_tokens(), "token id out of range");
  const int local = it->second[global_id];
  require(local >= 0, "token '" + tokens_[global_id].surface + "' is not in language '" + lang + "'");
  return local;
}

int LabelInventory::to_global(const LanguageId& lang, int local_id) const {
  const auto& members = membership(lang);
  require(local_id >= 0 && local_id < static_cast<int>(members.size()),
          "local token id out of range for language '" + lang + "'");
  return members[local_id];
}

std::map<LanguageId, std::string> read_alphabet_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open alphabet file: " + path);
  std::map<LanguageId, std::string> alphabets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    require(tab != std::string::npos,
            path + ":" + std::to_string(line_no) + ": expected '<code>\\t<characters>'");
    const std::string code = line.substr(0, tab);
    const std::string chars = line.substr(tab + 1);
    require(!code.empty(), path + ":" + std::to_string(line_no) + ": empty language code");
    require(alphabets.emplace(code, chars).second,
            path + ":" + std::to_string(line_no) + ": duplicate language '" + code + "'");
  }
  require(!alphabets.empty(), "alphabet file is empty: " + path);
  return alphabets;
}

void write_alphabet_file(const std::map<LanguageId, std::string>& alphabets,
                         const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write alphabet file: " + path);
  for (const auto& [code, chars] : alphabets) {
    out << code << '\t' << chars << '\n';
  }
  require(out.good(), "write failed: " + path);
}

}  // namespace uctc

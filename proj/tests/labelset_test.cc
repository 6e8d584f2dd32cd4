// tests/labelset_test.cc
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "uctc/common.h"
#include "uctc/labelset.h"
#include "uctc/utf8.h"

using namespace uctc;

namespace {

// Independent re-derivation of the tokenization rule, character by character
// on surface strings, used as the oracle for the id-based implementation.
std::vector<std::string> oracle_tokenize_surfaces(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush_word = [&]() {
    if (word.empty()) return;
    const std::vector<std::string> cps = utf8_codepoints(word);
    std::string cap = cps[0];
    if (cap.size() == 1 && cap[0] >= 'a' && cap[0] <= 'z') {
      cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
    } else {
      cap = "^" + cap;
    }
    out.push_back(cap);
    size_t i = 1;
    while (i < cps.size()) {
      if (i + 1 < cps.size() && cps[i] == cps[i + 1]) {
        out.push_back(cps[i] + cps[i]);
        i += 2;
      } else {
        out.push_back(cps[i]);
        i += 1;
      }
    }
    word.clear();
  };
  for (char c : text) {
    if (c == ' ') {
      flush_word();
    } else {
      word += c;
    }
  }
  flush_word();
  return out;
}

std::vector<std::string> surfaces(const LabelInventory& inv, const TokenSequence& seq) {
  std::vector<std::string> out;
  for (int id : seq.ids) out.push_back(inv.token(id).surface);
  return out;
}

}  // namespace

TEST_CASE("inventory construction: sizes forced by the building rule") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  CHECK(inv.num_tokens() == 10);  // blank + 3 tokens x 3 base chars
  CHECK(inv.blank_index() == 0);
  CHECK(inv.token(0).kind == TokenKind::kBlank);

  const auto single = LabelInventory::build_from_strings({{"L1", "a"}});
  CHECK(single.num_tokens() == 4);
  CHECK(single.token(0).surface == "<blank>");
  CHECK(single.token(1).surface == "a");
  CHECK(single.token(2).surface == "A");
  CHECK(single.token(3).surface == "aa");
}

TEST_CASE("inventory construction: 4/5/5 alphabets with 3 shared characters") {
  // Union {a..h} of size 8 -> K = 1 + 24 = 25; memberships 13/16/16.
  const auto inv = LabelInventory::build_from_strings(
      {{"L1", "abcd"}, {"L2", "abcef"}, {"L3", "abcgh"}});
  CHECK(inv.num_tokens() == 25);
  CHECK(inv.membership("L1").size() == 13);
  CHECK(inv.membership("L2").size() == 16);
  CHECK(inv.membership("L3").size() == 16);
}

TEST_CASE("inventory is deterministic in its input") {
  const auto a = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  const auto b = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  REQUIRE(a.num_tokens() == b.num_tokens());
  for (int i = 0; i < a.num_tokens(); ++i) {
    CHECK(a.token(i).surface == b.token(i).surface);
    CHECK(a.token(i).kind == b.token(i).kind);
  }
}

TEST_CASE("duplicate characters within one alphabet are rejected") {
  CHECK_THROWS_WITH_AS(LabelInventory::build_from_strings({{"L1", "aba"}}),
                       doctest::Contains("duplicate character"), Error);
}

TEST_CASE("reserved and uppercase characters are rejected") {
  CHECK_THROWS_AS(LabelInventory::build_from_strings({{"L1", "a^"}}), Error);
  CHECK_THROWS_AS(LabelInventory::build_from_strings({{"L1", "aB"}}), Error);
  CHECK_THROWS_AS(LabelInventory::build_from_strings({{"L1", "a b"}}), Error);
}

TEST_CASE("tokenize: word boundaries become capitals, doubles are greedy") {
  const auto inv = LabelInventory::build_from_strings(
      {{"EN", "abdeghlmo"}});
  CHECK(surfaces(inv, inv.tokenize("hello", "EN")) ==
        std::vector<std::string>{"H", "e", "ll", "o"});
  CHECK(surfaces(inv, inv.tokenize("ball game", "EN")) ==
        std::vector<std::string>{"B", "a", "ll", "G", "a", "m", "e"});
  CHECK(surfaces(inv, inv.tokenize("aaaa", "EN")) == std::vector<std::string>{"A", "aa", "a"});
  CHECK(inv.tokenize("", "EN").ids.empty());
}

TEST_CASE("tokenize: word-initial doubled letters emit Capital + Lower") {
  const auto inv = LabelInventory::build_from_strings({{"EN", "alm"}});
  CHECK(surfaces(inv, inv.tokenize("llama", "EN")) ==
        std::vector<std::string>{"L", "l", "a", "m", "a"});
}

TEST_CASE("tokenize matches the independent surface oracle exhaustively") {
  const auto inv = LabelInventory::build_from_strings({{"L", "ab"}});
  // All words over {a, b} of lengths 1..6.
  std::vector<std::string> words;
  for (int len = 1; len <= 6; ++len) {
    for (int code = 0; code < (1 << len); ++code) {
      std::string w;
      for (int i = 0; i < len; ++i) w += (code >> i) & 1 ? 'b' : 'a';
      words.push_back(w);
    }
  }
  for (const std::string& w : words) {
    CHECK(surfaces(inv, inv.tokenize(w, "L")) == oracle_tokenize_surfaces(w));
    CHECK(inv.detokenize(inv.tokenize(w, "L")) == w);
  }
  // Two-word combinations over a sample.
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string text = words[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(words.size()) - 1))] +
                             " " +
                             words[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(words.size()) - 1))];
    CHECK(surfaces(inv, inv.tokenize(text, "L")) == oracle_tokenize_surfaces(text));
    CHECK(inv.detokenize(inv.tokenize(text, "L")) == text);
  }
}

TEST_CASE("tokenize never emits the blank and stays inside the language set") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "abc"}, {"L2", "cde"}});
  const auto mask = inv.language_mask("L1");
  const TokenSequence seq = inv.tokenize("abc cab", "L1");
  for (int id : seq.ids) {
    CHECK(id != inv.blank_index());
    CHECK(mask.bits[static_cast<size_t>(id)] == 1);
  }
}

TEST_CASE("tokenize errors name the character and position") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "abz"}});
  CHECK_THROWS_WITH_AS(inv.tokenize("az", "L1"), doctest::Contains("'z'"), Error);
  CHECK_THROWS_WITH_AS(inv.tokenize("az", "L1"), doctest::Contains("codepoint 1"), Error);
  CHECK_THROWS_AS(inv.tokenize("ab", "XX"), Error);
  CHECK_THROWS_AS(inv.tokenize("a  b", "L1"), Error);
  CHECK_THROWS_AS(inv.tokenize(" ab", "L1"), Error);
  CHECK_THROWS_AS(inv.tokenize("ab ", "L1"), Error);
}

TEST_CASE("detokenize inverts tokenize and rejects blanks") {
  const auto inv = LabelInventory::build_from_strings({{"EN", "abeghlm"}});
  CHECK(inv.detokenize(inv.tokenize("ball game", "EN")) == "ball game");
  CHECK(inv.detokenize(std::vector<int>{}) == "");
  CHECK_THROWS_WITH_AS(inv.detokenize(std::vector<int>{inv.blank_index()}),
                       doctest::Contains("blank"), Error);
}

TEST_CASE("round trip holds on randomized multi-word strings") {
  const auto inv = LabelInventory::build_from_strings({{"L", "abcde"}});
  Rng rng(2026);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text;
    const int words = rng.uniform_int(1, 4);
    for (int w = 0; w < words; ++w) {
      if (w > 0) text += ' ';
      const int len = rng.uniform_int(1, 7);
      for (int i = 0; i < len; ++i) {
        // Bias toward repeats so doubles are exercised.
        if (!text.empty() && text.back() != ' ' && rng.uniform() < 0.4) {
          text += text.back();
        } else {
          text += static_cast<char>('a' + rng.uniform_int(0, 4));
        }
      }
    }
    REQUIRE(inv.detokenize(inv.tokenize(text, "L")) == text);
  }
}

TEST_CASE("language masks match Eq-style membership") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  const LanguageMask m1 = inv.language_mask("L1");
  int ones = 0;
  for (uint8_t b : m1.bits) ones += b;
  CHECK(ones == 7);  // blank, a, A, aa, b, B, bb
  CHECK(m1.bits[static_cast<size_t>(inv.blank_index())] == 1);
  CHECK(m1.bits[static_cast<size_t>(inv.token_id("c"))] == 0);
  CHECK(m1.bits[static_cast<size_t>(inv.token_id("C"))] == 0);
  CHECK(m1.bits[static_cast<size_t>(inv.token_id("cc"))] == 0);

  const LanguageMask m2 = inv.language_mask("L2");
  CHECK(m2.bits[static_cast<size_t>(inv.token_id("a"))] == 0);
  CHECK(m2.bits[static_cast<size_t>(inv.token_id("A"))] == 0);
  CHECK(m2.bits[static_cast<size_t>(inv.token_id("aa"))] == 0);
  CHECK(m2.bits[static_cast<size_t>(inv.token_id("b"))] == 1);

  const auto solo = LabelInventory::build_from_strings({{"L", "xy"}});
  const LanguageMask all = solo.language_mask("L");
  for (uint8_t b : all.bits) CHECK(b == 1);

  CHECK_THROWS_AS(inv.language_mask("nope"), Error);
}

TEST_CASE("mask bits agree with membership for every language and token") {
  const auto inv = LabelInventory::build_from_strings(
      {{"L1", "abcd"}, {"L2", "abcef"}, {"L3", "abcgh"}});
  for (const auto& lang : inv.languages()) {
    const LanguageMask mask = inv.language_mask(lang);
    const auto& members = inv.membership(lang);
    for (int k = 0; k < inv.num_tokens(); ++k) {
      const bool in_set = std::find(members.begin(), members.end(), k) != members.end();
      CHECK(static_cast<bool>(mask.bits[static_cast<size_t>(k)]) == in_set);
    }
  }
}

TEST_CASE("overlap report counts shared tokens") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  const OverlapReport rep = inv.overlap_report();
  CHECK(rep.shared_by_all == 4);  // blank, b, B, bb
  CHECK(rep.pairwise.at({"L1", "L2"}) == 4);

  const auto disjoint = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "cd"}});
  CHECK(disjoint.overlap_report().shared_by_all == 1);  // blank only

  const auto identical = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "ab"}});
  CHECK(identical.overlap_report().shared_by_all == identical.num_tokens());

  const auto solo = LabelInventory::build_from_strings({{"L", "a"}});
  CHECK_THROWS_AS(solo.overlap_report(), Error);
}

TEST_CASE("local indexing maps global token ids to head positions and back") {
  const auto inv = LabelInventory::build_from_strings({{"L1", "ab"}, {"L2", "bc"}});
  CHECK(inv.to_local("L1", inv.blank_index()) == 0);
  CHECK(inv.local_size("L1") == 7);
  for (int local = 0; local < inv.local_size("L2"); ++local) {
    CHECK(inv.to_local("L2", inv.to_global("L2", local)) == local);
  }
  CHECK_THROWS_AS(inv.to_local("L1", inv.token_id("c")), Error);
}

TEST_CASE("non-ASCII base characters get caret capitals and double units") {
  const auto inv = LabelInventory::build_from_strings({{"DE", "alö"}});
  const int cap = inv.token_id("^ö");
  REQUIRE(cap >= 0);
  CHECK(inv.token(cap).kind == TokenKind::kCapital);
  CHECK(inv.detokenize(inv.tokenize("öl aa", "DE")) == "öl aa");
}

TEST_CASE("alphabet files round trip and reject malformed input") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "uctc_labelset_test";
  fs::create_directories(dir);
  const std::string path = (dir / "alphabets.tsv").string();

  const std::map<LanguageId, std::string> alphabets = {{"DE", "abcß"}, {"EN", "abc"}};
  write_alphabet_file(alphabets, path);
  CHECK(read_alphabet_file(path) == alphabets);

  const std::string bad = (dir / "bad.tsv").string();
  std::ofstream(bad) << "EN no-tab-here\n";
  CHECK_THROWS_AS(read_alphabet_file(bad), Error);
  std::ofstream(bad) << "EN\tabc\nEN\tdef\n";
  CHECK_THROWS_WITH_AS(read_alphabet_file(bad), doctest::Contains("duplicate"), Error);
  CHECK_THROWS_AS(read_alphabet_file((dir / "missing.tsv").string()), Error);
}

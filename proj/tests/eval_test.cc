// tests/eval_test.cc
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

#include <filesystem>
#include <functional>
#include <map>

#include "uctc/common.h"
#include "uctc/eval.h"

using namespace uctc;

namespace {

std::vector<std::string> chars(const std::string& s) {
  std::vector<std::string> out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

// Memoized top-down search over edit scripts, independent of the tabular
// implementation under test.
int oracle_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<size_t, size_t>, int> memo;
  std::function<int(size_t, size_t)> rec = [&](size_t i, size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    const auto key = std::make_pair(i, j);
    const auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int best = rec(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, rec(i + 1, j) + 1);
    best = std::min(best, rec(i, j + 1) + 1);
    memo[key] = best;
    return best;
  };
  return rec(0, 0);
}

// Plain enumeration of every edit script, no memoization; only for tiny inputs.
int enumerate_distance(const std::vector<std::string>& a, const std::vector<std::string>& b,
                       size_t i = 0, size_t j = 0) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  int best = enumerate_distance(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
  best = std::min(best, enumerate_distance(a, b, i + 1, j) + 1);
  best = std::min(best, enumerate_distance(a, b, i, j + 1) + 1);
  return best;
}

std::vector<std::vector<std::string>> all_sequences(int max_len, int symbols) {
  std::vector<std::vector<std::string>> out = {{}};
  std::vector<std::vector<std::string>> frontier = {{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& seq : frontier) {
      for (int s = 0; s < symbols; ++s) {
        auto extended = seq;
        extended.emplace_back(1, static_cast<char>('a' + s));
        next.push_back(extended);
        out.push_back(extended);
      }
    }
    frontier = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("edit distance on the classic cases") {
  CHECK(edit_distance(chars("abc"), chars("abc")).distance == 0);
  const EditCounts sub = edit_distance(chars("abc"), chars("axc"));
  CHECK(sub.distance == 1);
  CHECK(sub.substitutions == 1);
  CHECK(sub.deletions == 0);
  CHECK(sub.insertions == 0);
  const EditCounts kitten = edit_distance(chars("kitten"), chars("sitting"));
  CHECK(kitten.distance == 3);
  CHECK(oracle_distance(chars("kitten"), chars("sitting")) == 3);
  CHECK(edit_distance({}, {}).distance == 0);
  CHECK(edit_distance(chars("abc"), {}).deletions == 3);
  CHECK(edit_distance({}, chars("ab")).insertions == 2);
}

TEST_CASE("edit distance matches the oracle exhaustively for short sequences") {
  const auto seqs = all_sequences(4, 3);
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      const EditCounts c = edit_distance(a, b);
      CHECK(c.distance == oracle_distance(a, b));
      CHECK(c.substitutions + c.deletions + c.insertions == c.distance);
    }
  }
}

TEST_CASE("edit distance matches plain enumeration on tiny sequences") {
  const auto seqs = all_sequences(3, 3);
  for (const auto& a : seqs) {
    for (const auto& b : seqs) {
      CHECK(edit_distance(a, b).distance == enumerate_distance(a, b));
    }
  }
}

TEST_CASE("edit distance is a metric on random sequences") {
  Rng rng(606);
  auto random_seq = [&](int max_len) {
    std::vector<std::string> s;
    const int len = rng.uniform_int(0, max_len);
    for (int i = 0; i < len; ++i) s.emplace_back(1, static_cast<char>('a' + rng.uniform_int(0, 3)));
    return s;
  };
  for (int trial = 0; trial < 400; ++trial) {
    const auto a = random_seq(8);
    const auto b = random_seq(8);
    const auto c = random_seq(8);
    const int ab = edit_distance(a, b).distance;
    const int ba = edit_distance(b, a).distance;
    const int ac = edit_distance(a, c).distance;
    const int bc = edit_distance(b, c).distance;
    CHECK(ab == ba);                       // symmetry
    CHECK(edit_distance(a, a).distance == 0);  // identity
    CHECK((ab == 0) == (a == b));
    CHECK(ac <= ab + bc);                  // triangle inequality
  }
}

TEST_CASE("split_units: characters include spaces; words split on spaces") {
  CHECK(split_units("ab cd", ScoreUnit::kChar) ==
        std::vector<std::string>{"a", "b", " ", "c", "d"});
  CHECK(split_units("ab cd", ScoreUnit::kWord) == std::vector<std::string>{"ab", "cd"});
  CHECK(split_units("", ScoreUnit::kChar).empty());
  CHECK(split_units("", ScoreUnit::kWord).empty());
}

TEST_CASE("score: perfect, empty, and the hand-counted mixed case") {
  const std::map<std::string, LanguageId> langs = {{"u1", "L1"}};

  CHECK(score({{"u1", "ab cd"}}, {{"u1", "ab cd"}}, langs, ScoreUnit::kChar).rate == 0.0);
  CHECK(score({{"u1", "ab cd"}}, {{"u1", "ab cd"}}, langs, ScoreUnit::kWord).rate == 0.0);

  // Empty hypothesis against a length-5 reference: 100% CER, all deletions.
  const ScoreResult empty = score({{"u1", ""}}, {{"u1", "ab cd"}}, langs, ScoreUnit::kChar);
  CHECK(empty.rate == doctest::Approx(100.0));
  CHECK(empty.counts.deletions == 5);

  // "ab cd" vs "ab ce": 1 word of 2 wrong, 1 char of 5 wrong.
  CHECK(score({{"u1", "ab ce"}}, {{"u1", "ab cd"}}, langs, ScoreUnit::kWord).rate ==
        doctest::Approx(50.0));
  CHECK(score({{"u1", "ab ce"}}, {{"u1", "ab cd"}}, langs, ScoreUnit::kChar).rate ==
        doctest::Approx(20.0));
}

TEST_CASE("score aggregates per language and over utterance sets") {
  std::map<std::string, std::string> refs = {{"a", "ab"}, {"b", "cd"}, {"c", "ef"}};
  std::map<std::string, std::string> hyps = {{"a", "ab"}, {"b", "cx"}, {"c", "xx"}};
  std::map<std::string, LanguageId> langs = {{"a", "L1"}, {"b", "L1"}, {"c", "L2"}};
  const ScoreResult r = score(hyps, refs, langs, ScoreUnit::kChar);
  CHECK(r.rate == doctest::Approx(100.0 * 3 / 6));
  CHECK(r.rate_by_language.at("L1") == doctest::Approx(100.0 * 1 / 4));
  CHECK(r.rate_by_language.at("L2") == doctest::Approx(100.0));
  CHECK(r.utterances_by_language.at("L1") == 2);
}

TEST_CASE("score is invariant to utterance enumeration order") {
  std::map<std::string, std::string> refs = {{"x", "abc"}, {"y", "de"}, {"z", "f"}};
  std::map<std::string, std::string> hyps = {{"x", "axc"}, {"y", "de"}, {"z", ""}};
  std::map<std::string, LanguageId> langs = {{"x", "L"}, {"y", "L"}, {"z", "L"}};
  const ScoreResult direct = score(hyps, refs, langs, ScoreUnit::kChar);

  // Same pairs under permuted ids.
  std::map<std::string, std::string> refs2 = {{"z", "abc"}, {"x", "de"}, {"y", "f"}};
  std::map<std::string, std::string> hyps2 = {{"z", "axc"}, {"x", "de"}, {"y", ""}};
  const ScoreResult renamed = score(hyps2, refs2, langs, ScoreUnit::kChar);
  CHECK(direct.rate == renamed.rate);
  CHECK(direct.counts.distance == renamed.counts.distance);
}

TEST_CASE("score rejects mismatched utterance id sets, naming them") {
  std::map<std::string, std::string> refs = {{"a", "x"}, {"b", "y"}};
  std::map<std::string, std::string> hyps = {{"a", "x"}, {"c", "z"}};
  CHECK_THROWS_WITH_AS(score(hyps, refs, {}, ScoreUnit::kChar), doctest::Contains("hyp:b"),
                       Error);
  CHECK_THROWS_WITH_AS(score(hyps, refs, {}, ScoreUnit::kChar), doctest::Contains("ref:c"),
                       Error);
}

TEST_CASE("evaluate produces both CER and WER plus table output") {
  std::map<std::string, std::string> refs = {{"a", "ab cd"}};
  std::map<std::string, std::string> hyps = {{"a", "ab ce"}};
  std::map<std::string, LanguageId> langs = {{"a", "L1"}};
  const EvalReport report = evaluate(hyps, refs, langs);
  CHECK(report.cer.rate == doctest::Approx(20.0));
  CHECK(report.wer.rate == doctest::Approx(50.0));
  CHECK(report.utterances == 1);
  CHECK(report.to_table().find("L1") != std::string::npos);
  CHECK(report.to_json().find("\"wer\"") != std::string::npos);
}

TEST_CASE("checkpoint metadata json round trips") {
  CheckpointMeta meta;
  meta.alphabets = {{"L1", "abc"}, {"L2", "xyz"}};
  meta.use_mask = false;
  meta.stack = 2;
  meta.skip = 2;
  const CheckpointMeta back = checkpoint_meta_from_json(checkpoint_meta_to_json(meta));
  CHECK(back.alphabets == meta.alphabets);
  CHECK(back.use_mask == meta.use_mask);
  CHECK(back.stack == meta.stack);
  CHECK(back.skip == meta.skip);
}

TEST_CASE("experiment configs parse with defaults and validate runs") {
  const std::string text = R"({
    "corpus_dir": "/tmp/corpus",
    "model": {"num_layers": 2, "hidden_per_direction": 16, "projection_dim": 16},
    "training": {"learning_rate": 0.05, "max_epochs": 7, "seed": 3},
    "runs": [
      {"name": "mono-L1", "variant": "mono", "train_languages": ["L1"]},
      {"name": "gated", "variant": "gated", "train_languages": ["L1", "L2"],
       "training": {"max_epochs": 9}},
      {"name": "bilingual", "variant": "univ", "mask": false,
       "train_languages": ["L1", "L2"]}
    ]
  })";
  const ExperimentConfig cfg = parse_experiment_config(text);
  CHECK(cfg.num_layers == 2);
  CHECK(cfg.hidden_per_direction == 16);
  CHECK(cfg.stack == 3);  // default
  CHECK(cfg.training.learning_rate == doctest::Approx(0.05));
  CHECK(cfg.training.clip_per_sample == doctest::Approx(0.0003));  // default kept
  REQUIRE(cfg.runs.size() == 3);
  CHECK(cfg.runs[0].eval_languages == std::vector<LanguageId>{"L1"});
  CHECK(cfg.runs[0].training.max_epochs == 7);
  CHECK(cfg.runs[1].training.max_epochs == 9);
  CHECK(cfg.runs[1].use_mask == true);
  CHECK(cfg.runs[2].use_mask == false);

  CHECK_THROWS_AS(parse_experiment_config("{\"corpus_dir\": \"x\", \"runs\": []}"), std::exception);
  const std::string dup = R"({"corpus_dir": "x", "runs": [
    {"name": "r", "variant": "mono", "train_languages": ["L1"]},
    {"name": "r", "variant": "univ", "train_languages": ["L1"]}]})";
  CHECK_THROWS_WITH_AS(parse_experiment_config(dup), doctest::Contains("duplicate"), Error);
}

TEST_CASE("a tiny grid runs end to end and computes relative improvement") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "uctc_eval_grid";
  fs::remove_all(dir);

  CorpusConfig corpus;
  corpus.alphabets = {{"L1", "abx"}, {"L2", "aby"}};
  corpus.utterances_per_language = 50;
  corpus.feature_dim = 4;
  corpus.divergence = 0.0;
  corpus.emission_std = 0.0;
  corpus.frames_min = 2;
  corpus.frames_max = 2;
  corpus.words_min = 1;
  corpus.words_max = 2;
  corpus.lexicon_words = 6;
  corpus.word_length_min = 2;
  corpus.word_length_max = 3;
  corpus.seed = 21;
  generate_corpus(corpus, dir.string());

  ExperimentConfig cfg;
  cfg.corpus_dir = dir.string();
  cfg.num_layers = 1;
  cfg.hidden_per_direction = 8;
  cfg.projection_dim = 8;
  cfg.stack = 1;
  cfg.skip = 1;
  cfg.training.learning_rate = 0.12;
  cfg.training.clip_per_sample = 0.5;
  cfg.training.batch_size = 4;
  cfg.training.max_epochs = 12;
  cfg.training.patience = 12;
  cfg.training.seed = 5;

  RunSpec mono;
  mono.name = "mono-L1";
  mono.variant = Variant::kMonolingual;
  mono.train_languages = {"L1"};
  mono.training = cfg.training;
  RunSpec gated;
  gated.name = "gated";
  gated.variant = Variant::kUniversalGated;
  gated.train_languages = {"L1", "L2"};
  gated.training = cfg.training;
  RunSpec mtl;
  mtl.name = "mtl";
  mtl.variant = Variant::kMultiTaskHeads;
  mtl.train_languages = {"L1", "L2"};
  mtl.training = cfg.training;
  cfg.runs = {mono, gated, mtl};

  const GridResult grid = run_experiment_grid(cfg);
  REQUIRE(grid.runs.size() == 3);
  CHECK(grid.runs[2].cer_by_language.count("L2") == 1);
  CHECK(grid.runs[0].cer_by_language.count("L1") == 1);
  CHECK(grid.runs[1].cer_by_language.count("L1") == 1);
  CHECK(grid.runs[1].cer_by_language.count("L2") == 1);

  // Zero-noise data: both models should be essentially perfect, and the
  // relative-improvement bookkeeping only exists when the baseline errs.
  const double mono_cer = grid.runs[0].cer_by_language.at("L1");
  if (mono_cer > 0.0) {
    const double gated_cer = grid.runs[1].cer_by_language.at("L1");
    const double rel = grid.relative_cer_improvement.at("gated").at("L1");
    CHECK(rel == doctest::Approx((mono_cer - gated_cer) / mono_cer * 100.0));
  }
  const std::string table = grid.to_table();
  CHECK(table.find("mono-L1") != std::string::npos);
  CHECK(table.find("gated") != std::string::npos);
  CHECK(grid.to_json().find("cer_by_language") != std::string::npos);
}

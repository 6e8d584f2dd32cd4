// uctc/eval.h
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

#include <map>
#include <string>
#include <vector>

#include "uctc/labelset.h"
#include "uctc/model.h"
#include "uctc/trainer.h"

namespace uctc {

struct EditCounts {
  int distance = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
};

// Levenshtein distance with unit costs plus a substitution/deletion/insertion
// breakdown from a deterministic backtrace (diagonal preferred, then
// deletion, then insertion). S + D + I == distance always holds.
EditCounts edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

enum class ScoreUnit { kChar, kWord };

// kChar: UTF-8 codepoints of the text, spaces included. kWord: split on
// single spaces.
std::vector<std::string> split_units(const std::string& text, ScoreUnit unit);

struct ScoreResult {
  double rate = 0.0;  // percent: total distance / total reference length * 100
  EditCounts counts;
  long ref_length = 0;
  std::map<LanguageId, double> rate_by_language;
  std::map<LanguageId, EditCounts> counts_by_language;
  std::map<LanguageId, long> ref_length_by_language;
  std::map<LanguageId, int> utterances_by_language;
};

// Scores hypotheses against references in the chosen unit. `languages` maps
// utterance id to language for the per-language breakdown; ids missing from
// either side are an error listing them.
ScoreResult score(const std::map<std::string, std::string>& hyps,
                  const std::map<std::string, std::string>& refs,
                  const std::map<std::string, LanguageId>& languages, ScoreUnit unit);

struct EvalReport {
  ScoreResult cer;
  ScoreResult wer;
  int utterances = 0;

  std::string to_json() const;
  std::string to_table() const;
};

EvalReport evaluate(const std::map<std::string, std::string>& hyps,
                    const std::map<std::string, std::string>& refs,
                    const std::map<std::string, LanguageId>& languages);

// One training run of the experiment grid.
struct RunSpec {
  std::string name;
  Variant variant = Variant::kMonolingual;
  std::vector<LanguageId> train_languages;
  std::vector<LanguageId> eval_languages;  // defaults to train_languages
  bool use_mask = true;                    // false for bilingual runs
  TrainingConfig training;
};

struct ExperimentConfig {
  std::string corpus_dir;
  int num_layers = 4;
  int hidden_per_direction = 320;
  int projection_dim = 320;
  int stack = 3;
  int skip = 3;
  std::vector<int> gate_layers;
  int mtl_branch_depth = 1;
  TrainingConfig training;  // run defaults
  std::vector<RunSpec> runs;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunResult {
  RunSpec spec;
  ModelParams params;  // best checkpoint of the run
  TrainReport train_report;
  EvalReport eval_report;
  std::map<LanguageId, double> cer_by_language;
  std::map<LanguageId, double> wer_by_language;
};

struct GridResult {
  std::vector<RunResult> runs;
  std::vector<LanguageId> languages;  // column order

  // Per (run, language): relative CER improvement in percent over the
  // monolingual run of that language, (base - new) / base * 100.
  std::map<std::string, std::map<LanguageId, double>> relative_cer_improvement;

  std::string to_table() const;
  std::string to_json() const;
};

// Trains one run against an already generated corpus and scores its test set.
RunResult run_single(const ExperimentConfig& config, const RunSpec& run);

// Trains every run and assembles the comparison table with relative
// improvement columns against the monolingual baseline rows.
GridResult run_experiment_grid(const ExperimentConfig& config);

// Metadata embedded in checkpoints so decode/eval can rebuild the inventory
// and masking behavior without the experiment config.
struct CheckpointMeta {
  std::map<LanguageId, std::string> alphabets;
  bool use_mask = true;
  int stack = 3;
  int skip = 3;
};

std::string checkpoint_meta_to_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const std::string& json_text);

}  // namespace uctc

// tools/main.cc
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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "uctc/eval.h"
#include "uctc/features.h"
#include "uctc/labelset.h"
#include "uctc/model.h"
#include "uctc/trainer.h"

namespace fs = std::filesystem;
using namespace uctc;

namespace {

CorpusConfig parse_corpus_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open corpus config: " + path);
  nlohmann::json j;
  in >> j;

  CorpusConfig cfg;
  cfg.alphabets = j.at("languages").get<std::map<LanguageId, std::string>>();
  if (j.contains("lexicon")) {
    cfg.lexicon = j.at("lexicon").get<std::map<LanguageId, std::vector<std::string>>>();
  }
  cfg.lexicon_words = j.value("lexicon_words", cfg.lexicon_words);
  cfg.repeat_bias = j.value("repeat_bias", cfg.repeat_bias);
  if (j.contains("word_length")) {
    cfg.word_length_min = j.at("word_length").at(0).get<int>();
    cfg.word_length_max = j.at("word_length").at(1).get<int>();
  }
  cfg.utterances_per_language = j.value("utterances_per_language", cfg.utterances_per_language);
  if (j.contains("words_per_utterance")) {
    cfg.words_min = j.at("words_per_utterance").at(0).get<int>();
    cfg.words_max = j.at("words_per_utterance").at(1).get<int>();
  }
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.divergence = j.value("divergence", cfg.divergence);
  cfg.emission_std = j.value("emission_std", cfg.emission_std);
  if (j.contains("frames_per_token")) {
    cfg.frames_min = j.at("frames_per_token").at(0).get<int>();
    cfg.frames_max = j.at("frames_per_token").at(1).get<int>();
  }
  cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
  cfg.valid_fraction = j.value("valid_fraction", cfg.valid_fraction);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  require(out.good(), "cannot write: " + path);
  out << content;
  require(out.good(), "write failed: " + path);
}

CheckpointMeta meta_for_run(const ExperimentConfig& config, const RunSpec& run) {
  CheckpointMeta meta;
  meta.alphabets = read_alphabet_file((fs::path(config.corpus_dir) / "alphabets.tsv").string());
  meta.use_mask = run.use_mask;
  meta.stack = config.stack;
  meta.skip = config.skip;
  return meta;
}

void write_run_outputs(const ExperimentConfig& config, const RunResult& run,
                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string base = (fs::path(out_dir) / run.spec.name).string();
  save_checkpoint(run.params, checkpoint_meta_to_json(meta_for_run(config, run.spec)),
                  base + ".pcm");
  write_text(base + ".train.json", run.train_report.to_json());
  write_text(base + ".train.txt", run.train_report.to_table());
  write_text(base + ".eval.json", run.eval_report.to_json());
  write_text(base + ".eval.txt", run.eval_report.to_table());
}

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointMeta meta;
  LabelInventory inventory;
  TrainTask task;
};

LoadedCheckpoint load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  const CheckpointMeta meta = checkpoint_meta_from_json(ck.meta_json);
  LoadedCheckpoint out{std::move(ck.params), meta,
                       LabelInventory::build_from_strings(meta.alphabets), TrainTask{}};
  out.task = make_train_task(out.inventory, out.meta.use_mask);
  return out;
}

int cmd_synth_data(const std::string& config_path, const std::string& out_dir,
                   std::optional<uint64_t> seed) {
  CorpusConfig cfg = parse_corpus_config(config_path);
  if (seed) cfg.seed = *seed;
  const GeneratedCorpus corpus = generate_corpus(cfg, out_dir);
  std::cout << "wrote " << corpus.all.size() << " utterances (" << corpus.train.size()
            << " train / " << corpus.valid.size() << " valid / " << corpus.test.size()
            << " test) to " << out_dir << "\n";
  return 0;
}

int cmd_inventory(const std::string& alphabets_path, const std::string& out_path) {
  const auto alphabets = read_alphabet_file(alphabets_path);
  const LabelInventory inv = LabelInventory::build_from_strings(alphabets);
  std::ostringstream out;
  out << "tokens: " << inv.num_tokens() << " (blank at index " << inv.blank_index() << ")\n";
  for (const auto& lang : inv.languages()) {
    out << "  " << lang << ": " << inv.membership(lang).size() << " tokens\n";
  }
  if (inv.num_languages() >= 2) {
    const OverlapReport rep = inv.overlap_report();
    out << "shared by all languages: " << rep.shared_by_all << "\n";
    for (const auto& [pair, count] : rep.pairwise) {
      out << "  " << pair.first << " & " << pair.second << ": " << count << "\n";
    }
  }
  out << "surfaces:";
  for (int i = 0; i < inv.num_tokens(); ++i) out << " " << inv.token(i).surface;
  out << "\n";
  std::cout << out.str();
  if (!out_path.empty()) write_text(out_path, out.str());
  return 0;
}

int cmd_tokenize(const std::string& alphabets_path, const std::string& lang,
                 const std::string& text) {
  const LabelInventory inv =
      LabelInventory::build_from_strings(read_alphabet_file(alphabets_path));
  const TokenSequence seq = inv.tokenize(text, lang);
  std::string line;
  for (int id : seq.ids) {
    if (!line.empty()) line += ' ';
    line += inv.token(id).surface;
  }
  std::cout << line << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& run_name,
              const std::string& out_dir, std::optional<uint64_t> seed, std::optional<int> jobs,
              const std::string& variant_override) {
  ExperimentConfig config = load_experiment_config(config_path);
  const RunSpec* found = nullptr;
  for (const RunSpec& run : config.runs) {
    if (run.name == run_name) found = &run;
  }
  require(found != nullptr, "no run named '" + run_name + "' in " + config_path);
  RunSpec run = *found;
  if (seed) run.training.seed = *seed;
  if (jobs) run.training.jobs = *jobs;
  if (!variant_override.empty()) run.variant = variant_from_name(variant_override);
  const RunResult result = run_single(config, run);
  write_run_outputs(config, result, out_dir);
  std::cout << result.eval_report.to_table();
  return 0;
}

int cmd_grid(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed, std::optional<int> jobs) {
  ExperimentConfig config = load_experiment_config(config_path);
  for (RunSpec& run : config.runs) {
    if (seed) run.training.seed = *seed;
    if (jobs) run.training.jobs = *jobs;
  }
  const GridResult grid = run_experiment_grid(config);
  fs::create_directories(out_dir);
  for (const RunResult& run : grid.runs) write_run_outputs(config, run, out_dir);
  write_text((fs::path(out_dir) / "report.txt").string(), grid.to_table());
  write_text((fs::path(out_dir) / "report.json").string(), grid.to_json());
  std::cout << grid.to_table();
  return 0;
}

int cmd_fine_tune(const std::string& checkpoint_path, const std::string& config_path,
                  const std::string& lang, const std::string& out_dir, bool reinit_head,
                  std::optional<uint64_t> seed, std::optional<int> jobs) {
  const ExperimentConfig config = load_experiment_config(config_path);
  LoadedCheckpoint ck = load_model(checkpoint_path);
  require(ck.inventory.has_language(lang), "checkpoint does not cover language '" + lang + "'");

  TrainingConfig training = config.training;
  if (seed) training.seed = *seed;
  if (jobs) training.jobs = *jobs;

  const Manifest train_manifest =
      read_manifest((fs::path(config.corpus_dir) / "train.tsv").string());
  const Manifest valid_manifest =
      read_manifest((fs::path(config.corpus_dir) / "valid.tsv").string());
  auto filter = [&](const Manifest& m) {
    Manifest out;
    for (const auto& e : m) {
      if (e.language == lang) out.push_back(e);
    }
    return out;
  };
  const Dataset train_set = load_dataset(filter(train_manifest), config.corpus_dir, ck.inventory,
                                         ck.meta.stack, ck.meta.skip);
  const Dataset valid_set = load_dataset(filter(valid_manifest), config.corpus_dir, ck.inventory,
                                         ck.meta.stack, ck.meta.skip);

  const TrainOutcome outcome =
      fine_tune(ck.params, train_set, valid_set, ck.task, training, reinit_head);

  fs::create_directories(out_dir);
  const std::string base = (fs::path(out_dir) / ("finetune-" + lang)).string();
  save_checkpoint(outcome.best_params, checkpoint_meta_to_json(ck.meta), base + ".pcm");
  write_text(base + ".train.json", outcome.report.to_json());
  write_text(base + ".train.txt", outcome.report.to_table());
  std::cout << outcome.report.to_table();
  return 0;
}

int cmd_decode(const std::string& checkpoint_path, const std::string& features_path,
               const std::string& lang) {
  LoadedCheckpoint ck = load_model(checkpoint_path);
  const bool needs_lang = ck.params.config.needs_language() || ck.meta.use_mask;
  if (needs_lang) {
    require(!lang.empty(),
            "this checkpoint decodes with a language mask or indicator; pass --lang");
    require(ck.inventory.has_language(lang), "unknown language '" + lang + "'");
  } else {
    require(lang.empty(),
            "this checkpoint is maskless and language-independent; --lang is not allowed");
  }
  const FeatureMatrix raw = load_features(features_path);
  const FeatureMatrix stacked = stack_and_skip(raw, ck.meta.stack, ck.meta.skip);
  const int lang_index = needs_lang ? ck.inventory.language_index(lang) : -1;
  std::cout << decode_utterance(ck.params, ck.task, stacked, lang_index) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& out_prefix) {
  LoadedCheckpoint ck = load_model(checkpoint_path);
  const Manifest manifest = read_manifest(manifest_path);
  require(!manifest.empty(), "manifest is empty: " + manifest_path);
  const std::string root = fs::path(manifest_path).parent_path().string();
  const Dataset data = load_dataset(manifest, root, ck.inventory, ck.meta.stack, ck.meta.skip);

  std::map<std::string, std::string> hyps;
  std::map<std::string, std::string> refs;
  std::map<std::string, LanguageId> langs;
  for (const Utterance& utt : data) {
    hyps[utt.utterance_id] =
        decode_utterance(ck.params, ck.task, utt.features, utt.language_index);
    refs[utt.utterance_id] = utt.transcript;
    langs[utt.utterance_id] = utt.language;
  }
  const EvalReport report = evaluate(hyps, refs, langs);
  std::cout << report.to_table();
  if (!out_prefix.empty()) {
    write_text(out_prefix + ".json", report.to_json());
    write_text(out_prefix + ".txt", report.to_table());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-universal CTC speech recognition toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_path, lang, text, checkpoint_path, features_path, manifest_path,
      run_name, variant_override;
  bool reinit_head = false;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;

  CLI::App* synth = app.add_subcommand("synth-data", "generate a synthetic multilingual corpus");
  synth->add_option("--config", config_path, "corpus config (json)")->required();
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--seed", seed, "override the corpus seed");

  CLI::App* inventory = app.add_subcommand("inventory", "inspect a grapheme inventory");
  inventory->add_option("--config", config_path, "alphabet declaration file")->required();
  inventory->add_option("--out", out_path, "also write the summary here");

  CLI::App* tokenize = app.add_subcommand("tokenize", "tokenize text for a language");
  tokenize->add_option("--config", config_path, "alphabet declaration file")->required();
  tokenize->add_option("--lang", lang, "language code")->required();
  tokenize->add_option("--text", text, "lowercase words separated by single spaces")->required();

  CLI::App* train = app.add_subcommand("train", "train one named run of an experiment config");
  train->add_option("--config", config_path, "experiment config (json)")->required();
  train->add_option("--run", run_name, "run name from the config")->required();
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--seed", seed, "override the training seed");
  train->add_option("--jobs", jobs, "parallel workers within a batch");
  train->add_option("--variant", variant_override,
                    "override the run's variant (mono|mtl|univ|gated|aux|gate-h|gate-d)");

  CLI::App* fine_tune_cmd =
      app.add_subcommand("fine-tune", "continue training a checkpoint on one language");
  fine_tune_cmd->add_option("--checkpoint", checkpoint_path, "initial checkpoint")->required();
  fine_tune_cmd->add_option("--config", config_path, "experiment config (json)")->required();
  fine_tune_cmd->add_option("--lang", lang, "target language")->required();
  fine_tune_cmd->add_option("--out", out_path, "output directory")->required();
  fine_tune_cmd->add_flag("--reinit-head", reinit_head, "reinitialize the output head");
  fine_tune_cmd->add_option("--seed", seed, "override the training seed");
  fine_tune_cmd->add_option("--jobs", jobs, "parallel workers within a batch");

  CLI::App* decode = app.add_subcommand("decode", "greedy-decode one feature file");
  decode->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  decode->add_option("--features", features_path, "feature file (pcf)")->required();
  decode->add_option("--lang", lang, "language (required for masked/gated checkpoints)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "decode and score a manifest");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  eval_cmd->add_option("--manifest", manifest_path, "manifest to score")->required();
  eval_cmd->add_option("--out", out_path, "report path prefix");

  CLI::App* grid =
      app.add_subcommand("grid", "train and score every run of an experiment config");
  grid->add_option("--config", config_path, "experiment config (json)")->required();
  grid->add_option("--out", out_path, "output directory")->required();
  grid->add_option("--seed", seed, "override every run's training seed");
  grid->add_option("--jobs", jobs, "parallel workers within a batch");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth_data(config_path, out_path, seed);
    if (inventory->parsed()) return cmd_inventory(config_path, out_path);
    if (tokenize->parsed()) return cmd_tokenize(config_path, lang, text);
    if (train->parsed()) {
      return cmd_train(config_path, run_name, out_path, seed, jobs, variant_override);
    }
    if (fine_tune_cmd->parsed()) {
      return cmd_fine_tune(checkpoint_path, config_path, lang, out_path, reinit_head, seed, jobs);
    }
    if (decode->parsed()) return cmd_decode(checkpoint_path, features_path, lang);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, manifest_path, out_path);
    if (grid->parsed()) return cmd_grid(config_path, out_path, seed, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "no subcommand given\n" << app.help();
  return 2;
}

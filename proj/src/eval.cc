// uctc/eval.cc
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

#include "uctc/eval.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "uctc/utf8.h"

namespace uctc {

EditCounts edit_distance(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  const size_t n = ref.size();
  const size_t m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int del = d[i - 1][j] + 1;
      const int ins = d[i][j - 1] + 1;
      d[i][j] = std::min({sub, del, ins});
    }
  }

  EditCounts counts;
  counts.distance = d[n][m];
  // Backtrace, preferring diagonal, then deletion, then insertion.
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const int sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (d[i][j] == d[i - 1][j - 1] + sub_cost) {
        counts.substitutions += sub_cost;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++counts.deletions;
      --i;
      continue;
    }
    ++counts.insertions;
    --j;
  }
  return counts;
}

std::vector<std::string> split_units(const std::string& text, ScoreUnit unit) {
  if (unit == ScoreUnit::kChar) {
    return utf8_codepoints(text);
  }
  std::vector<std::string> words;
  std::string word;
  for (char c : text) {
    if (c == ' ') {
      if (!word.empty()) words.push_back(word);
      word.clear();
    } else {
      word += c;
    }
  }
  if (!word.empty()) words.push_back(word);
  return words;
}

ScoreResult score(const std::map<std::string, std::string>& hyps,
                  const std::map<std::string, std::string>& refs,
                  const std::map<std::string, LanguageId>& languages, ScoreUnit unit) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : refs) {
    if (hyps.find(id) == hyps.end()) missing.push_back("hyp:" + id);
  }
  for (const auto& [id, _] : hyps) {
    if (refs.find(id) == refs.end()) missing.push_back("ref:" + id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail("score: mismatched utterance ids: " + list);
  }

  ScoreResult result;
  for (const auto& [id, ref_text] : refs) {
    const std::vector<std::string> ref_units = split_units(ref_text, unit);
    const std::vector<std::string> hyp_units = split_units(hyps.at(id), unit);
    const EditCounts c = edit_distance(ref_units, hyp_units);

    result.counts.distance += c.distance;
    result.counts.substitutions += c.substitutions;
    result.counts.deletions += c.deletions;
    result.counts.insertions += c.insertions;
    result.ref_length += static_cast<long>(ref_units.size());

    const auto lang_it = languages.find(id);
    const LanguageId lang = lang_it == languages.end() ? "all" : lang_it->second;
    EditCounts& lc = result.counts_by_language[lang];
    lc.distance += c.distance;
    lc.substitutions += c.substitutions;
    lc.deletions += c.deletions;
    lc.insertions += c.insertions;
    result.ref_length_by_language[lang] += static_cast<long>(ref_units.size());
    result.utterances_by_language[lang] += 1;
  }

  auto rate = [](int distance, long ref_len) -> double {
    if (distance == 0) return 0.0;
    require(ref_len > 0, "score: nonzero edit distance against empty references");
    return 100.0 * distance / static_cast<double>(ref_len);
  };
  result.rate = rate(result.counts.distance, result.ref_length);
  for (const auto& [lang, counts] : result.counts_by_language) {
    result.rate_by_language[lang] = rate(counts.distance, result.ref_length_by_language.at(lang));
  }
  return result;
}

EvalReport evaluate(const std::map<std::string, std::string>& hyps,
                    const std::map<std::string, std::string>& refs,
                    const std::map<std::string, LanguageId>& languages) {
  EvalReport report;
  report.cer = score(hyps, refs, languages, ScoreUnit::kChar);
  report.wer = score(hyps, refs, languages, ScoreUnit::kWord);
  report.utterances = static_cast<int>(refs.size());
  return report;
}

namespace {

nlohmann::json score_to_json(const ScoreResult& s) {
  nlohmann::json j;
  j["rate"] = s.rate;
  j["distance"] = s.counts.distance;
  j["substitutions"] = s.counts.substitutions;
  j["deletions"] = s.counts.deletions;
  j["insertions"] = s.counts.insertions;
  j["ref_length"] = s.ref_length;
  nlohmann::json by_lang = nlohmann::json::object();
  for (const auto& [lang, rate] : s.rate_by_language) {
    const EditCounts& c = s.counts_by_language.at(lang);
    by_lang[lang] = {{"rate", rate},
                     {"distance", c.distance},
                     {"substitutions", c.substitutions},
                     {"deletions", c.deletions},
                     {"insertions", c.insertions},
                     {"ref_length", s.ref_length_by_language.at(lang)},
                     {"utterances", s.utterances_by_language.at(lang)}};
  }
  j["by_language"] = by_lang;
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["utterances"] = utterances;
  j["cer"] = score_to_json(cer);
  j["wer"] = score_to_json(wer);
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::setw(8) << "lang" << std::setw(8) << "utts" << std::setw(10) << "%CER"
      << std::setw(10) << "%WER" << std::setw(8) << "S" << std::setw(8) << "D" << std::setw(8)
      << "I" << '\n';
  for (const auto& [lang, rate] : cer.rate_by_language) {
    const EditCounts& c = cer.counts_by_language.at(lang);
    const auto wer_it = wer.rate_by_language.find(lang);
    out << std::setw(8) << lang << std::setw(8) << cer.utterances_by_language.at(lang)
        << std::setw(10) << rate << std::setw(10)
        << (wer_it == wer.rate_by_language.end() ? 0.0 : wer_it->second) << std::setw(8)
        << c.substitutions << std::setw(8) << c.deletions << std::setw(8) << c.insertions << '\n';
  }
  out << std::setw(8) << "all" << std::setw(8) << utterances << std::setw(10) << cer.rate
      << std::setw(10) << wer.rate << std::setw(8) << cer.counts.substitutions << std::setw(8)
      << cer.counts.deletions << std::setw(8) << cer.counts.insertions << '\n';
  return out.str();
}

namespace {

TrainingConfig training_from_json(const nlohmann::json& j, const TrainingConfig& defaults) {
  TrainingConfig cfg = defaults;
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("clip_per_sample")) cfg.clip_per_sample = j.at("clip_per_sample").get<double>();
  if (j.contains("momentum")) cfg.momentum = j.at("momentum").get<double>();
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("max_epochs")) cfg.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("patience")) cfg.patience = j.at("patience").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  ExperimentConfig cfg;
  cfg.corpus_dir = j.at("corpus_dir").get<std::string>();
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("num_layers")) cfg.num_layers = m.at("num_layers").get<int>();
    if (m.contains("hidden_per_direction")) {
      cfg.hidden_per_direction = m.at("hidden_per_direction").get<int>();
    }
    if (m.contains("projection_dim")) cfg.projection_dim = m.at("projection_dim").get<int>();
    if (m.contains("stack")) cfg.stack = m.at("stack").get<int>();
    if (m.contains("skip")) cfg.skip = m.at("skip").get<int>();
    if (m.contains("gate_layers")) cfg.gate_layers = m.at("gate_layers").get<std::vector<int>>();
    if (m.contains("mtl_branch_depth")) {
      cfg.mtl_branch_depth = m.at("mtl_branch_depth").get<int>();
    }
  }
  if (j.contains("training")) cfg.training = training_from_json(j.at("training"), cfg.training);
  require(j.contains("runs") && j.at("runs").is_array() && !j.at("runs").empty(),
          "experiment config: 'runs' must be a non-empty array");
  for (const auto& jr : j.at("runs")) {
    RunSpec run;
    run.name = jr.at("name").get<std::string>();
    run.variant = variant_from_name(jr.at("variant").get<std::string>());
    run.train_languages = jr.at("train_languages").get<std::vector<std::string>>();
    require(!run.train_languages.empty(),
            "experiment config: run '" + run.name + "' has no training languages");
    if (jr.contains("eval_languages")) {
      run.eval_languages = jr.at("eval_languages").get<std::vector<std::string>>();
    } else {
      run.eval_languages = run.train_languages;
    }
    run.use_mask = jr.value("mask", run.variant != Variant::kMultiTaskHeads);
    run.training = training_from_json(jr.contains("training") ? jr.at("training")
                                                              : nlohmann::json::object(),
                                      cfg.training);
    cfg.runs.push_back(run);
  }
  std::set<std::string> names;
  for (const RunSpec& run : cfg.runs) {
    require(names.insert(run.name).second,
            "experiment config: duplicate run name '" + run.name + "'");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open experiment config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

namespace {

Dataset filter_languages(const Dataset& data, const std::vector<LanguageId>& langs) {
  Dataset out;
  for (const Utterance& utt : data) {
    if (std::find(langs.begin(), langs.end(), utt.language) != langs.end()) {
      out.push_back(utt);
    }
  }
  return out;
}

}  // namespace

RunResult run_single(const ExperimentConfig& config, const RunSpec& run_in) {
  namespace fs = std::filesystem;
  RunSpec run = run_in;
  if (run.eval_languages.empty()) run.eval_languages = run.train_languages;
  const auto alphabets = read_alphabet_file((fs::path(config.corpus_dir) / "alphabets.tsv").string());
  const LabelInventory inventory = LabelInventory::build_from_strings(alphabets);
  for (const LanguageId& lang : run.train_languages) {
    require(inventory.has_language(lang),
            "run '" + run.name + "': language '" + lang + "' not in the corpus");
  }

  const Manifest train_manifest = read_manifest((fs::path(config.corpus_dir) / "train.tsv").string());
  const Manifest valid_manifest = read_manifest((fs::path(config.corpus_dir) / "valid.tsv").string());
  const Manifest test_manifest = read_manifest((fs::path(config.corpus_dir) / "test.tsv").string());

  const Dataset train_all =
      load_dataset(train_manifest, config.corpus_dir, inventory, config.stack, config.skip);
  const Dataset valid_all =
      load_dataset(valid_manifest, config.corpus_dir, inventory, config.stack, config.skip);
  const Dataset test_all =
      load_dataset(test_manifest, config.corpus_dir, inventory, config.stack, config.skip);

  const Dataset train_set = filter_languages(train_all, run.train_languages);
  const Dataset valid_set = filter_languages(valid_all, run.train_languages);
  const Dataset test_set = filter_languages(test_all, run.eval_languages);
  require(!train_set.empty(), "run '" + run.name + "': empty training set");
  require(!test_set.empty(), "run '" + run.name + "': empty test set");

  ModelConfig model_config;
  model_config.num_layers = config.num_layers;
  model_config.hidden_per_direction = config.hidden_per_direction;
  model_config.projection_dim = config.projection_dim;
  model_config.input_dim = train_set.front().features.dim;
  model_config.variant = run.variant;
  model_config.gate_layers = config.gate_layers;
  model_config.mtl_branch_depth = config.mtl_branch_depth;
  model_config.num_languages = inventory.num_languages();
  model_config.num_outputs = inventory.num_tokens();
  if (run.variant == Variant::kMultiTaskHeads) {
    for (const LanguageId& lang : inventory.languages()) {
      model_config.mtl_head_sizes.push_back(inventory.local_size(lang));
    }
  }

  const TrainTask task = make_train_task(inventory, run.use_mask);
  const ModelParams init = init_params(model_config, run.training.seed);
  TrainOutcome outcome = train(init, train_set, valid_set, task, run.training);

  std::map<std::string, std::string> hyps;
  std::map<std::string, std::string> refs;
  std::map<std::string, LanguageId> langs;
  for (const Utterance& utt : test_set) {
    hyps[utt.utterance_id] =
        decode_utterance(outcome.best_params, task, utt.features, utt.language_index);
    refs[utt.utterance_id] = utt.transcript;
    langs[utt.utterance_id] = utt.language;
  }

  RunResult result;
  result.spec = run;
  result.params = std::move(outcome.best_params);
  result.train_report = std::move(outcome.report);
  result.eval_report = evaluate(hyps, refs, langs);
  result.cer_by_language = result.eval_report.cer.rate_by_language;
  result.wer_by_language = result.eval_report.wer.rate_by_language;
  return result;
}

GridResult run_experiment_grid(const ExperimentConfig& config) {
  GridResult grid;
  std::set<LanguageId> langs;
  for (const RunSpec& run : config.runs) {
    grid.runs.push_back(run_single(config, run));
    for (const LanguageId& lang : run.eval_languages) langs.insert(lang);
  }
  grid.languages.assign(langs.begin(), langs.end());

  // Monolingual baselines per language: the mono run trained on exactly it.
  std::map<LanguageId, double> baseline_cer;
  for (const RunResult& run : grid.runs) {
    if (run.spec.variant == Variant::kMonolingual && run.spec.train_languages.size() == 1) {
      const LanguageId& lang = run.spec.train_languages.front();
      const auto it = run.cer_by_language.find(lang);
      if (it != run.cer_by_language.end()) baseline_cer[lang] = it->second;
    }
  }
  for (const RunResult& run : grid.runs) {
    for (const auto& [lang, cer] : run.cer_by_language) {
      const auto base = baseline_cer.find(lang);
      if (base != baseline_cer.end() && base->second > 0.0) {
        grid.relative_cer_improvement[run.spec.name][lang] =
            (base->second - cer) / base->second * 100.0;
      }
    }
  }
  return grid;
}

std::string GridResult::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::setw(16) << "run" << std::setw(20) << "training data" << std::setw(6) << "gate";
  for (const auto& lang : languages) out << std::setw(10) << ("%CER " + lang);
  for (const auto& lang : languages) out << std::setw(10) << ("%WER " + lang);
  for (const auto& lang : languages) out << std::setw(12) << ("%impr " + lang);
  out << '\n';
  for (const RunResult& run : runs) {
    std::string data;
    for (const auto& lang : run.spec.train_languages) {
      data += (data.empty() ? "" : "+") + lang;
    }
    const bool gated = run.spec.variant == Variant::kUniversalGated ||
                       run.spec.variant == Variant::kGateHOnly ||
                       run.spec.variant == Variant::kGateDOnly;
    out << std::setw(16) << run.spec.name << std::setw(20) << data << std::setw(6)
        << (gated ? "yes" : "--");
    for (const auto& lang : languages) {
      const auto it = run.cer_by_language.find(lang);
      if (it == run.cer_by_language.end()) {
        out << std::setw(10) << "--";
      } else {
        out << std::setw(10) << it->second;
      }
    }
    for (const auto& lang : languages) {
      const auto it = run.wer_by_language.find(lang);
      if (it == run.wer_by_language.end()) {
        out << std::setw(10) << "--";
      } else {
        out << std::setw(10) << it->second;
      }
    }
    const auto rel_it = relative_cer_improvement.find(run.spec.name);
    for (const auto& lang : languages) {
      if (rel_it == relative_cer_improvement.end() ||
          rel_it->second.find(lang) == rel_it->second.end()) {
        out << std::setw(12) << "--";
      } else {
        out << std::setw(12) << rel_it->second.at(lang);
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string GridResult::to_json() const {
  nlohmann::json j;
  j["languages"] = languages;
  j["runs"] = nlohmann::json::array();
  for (const RunResult& run : runs) {
    nlohmann::json jr;
    jr["name"] = run.spec.name;
    jr["variant"] = variant_name(run.spec.variant);
    jr["train_languages"] = run.spec.train_languages;
    jr["eval_languages"] = run.spec.eval_languages;
    jr["mask"] = run.spec.use_mask;
    jr["cer_by_language"] = run.cer_by_language;
    jr["wer_by_language"] = run.wer_by_language;
    jr["best_epoch"] = run.train_report.best_epoch;
    jr["stop_reason"] = run.train_report.stop_reason;
    const auto rel_it = relative_cer_improvement.find(run.spec.name);
    if (rel_it != relative_cer_improvement.end()) {
      jr["relative_cer_improvement"] = rel_it->second;
    }
    j["runs"].push_back(jr);
  }
  return j.dump(2);
}

std::string checkpoint_meta_to_json(const CheckpointMeta& meta) {
  nlohmann::json j;
  j["alphabets"] = meta.alphabets;
  j["use_mask"] = meta.use_mask;
  j["stack"] = meta.stack;
  j["skip"] = meta.skip;
  return j.dump();
}

CheckpointMeta checkpoint_meta_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  CheckpointMeta meta;
  meta.alphabets = j.at("alphabets").get<std::map<LanguageId, std::string>>();
  meta.use_mask = j.at("use_mask").get<bool>();
  meta.stack = j.at("stack").get<int>();
  meta.skip = j.at("skip").get<int>();
  return meta;
}

}  // namespace uctc

// uctc/trainer.cc
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

#include "uctc/trainer.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace uctc {

void TrainingConfig::validate() const {
  require(learning_rate >= 0.0, "training config: learning_rate must be >= 0");
  require(clip_per_sample > 0.0, "training config: clip_per_sample must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "training config: momentum must be in [0, 1)");
  require(batch_size >= 1, "training config: batch_size must be >= 1");
  require(max_epochs >= 0, "training config: max_epochs must be >= 0");
  require(patience >= 1, "training config: patience must be >= 1");
  require(jobs >= 1, "training config: jobs must be >= 1");
}

TrainTask make_train_task(const LabelInventory& inventory, bool use_mask) {
  TrainTask task;
  task.inventory = &inventory;
  task.use_mask = use_mask;
  if (use_mask) {
    for (const LanguageId& lang : inventory.languages()) {
      task.masks.push_back(inventory.language_mask(lang));
    }
  }
  return task;
}

namespace {

struct TensorRef {
  double* data;
  size_t size;
};

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  std::vector<TensorRef> refs;
  for_each_tensor(params, [&](const std::string&, Eigen::Index rows, Eigen::Index cols,
                              double* data) {
    refs.push_back({data, static_cast<size_t>(rows) * static_cast<size_t>(cols)});
  });
  return refs;
}

void clip_elementwise(ModelParams& grads, double clip) {
  for (TensorRef ref : tensor_refs(grads)) {
    for (size_t i = 0; i < ref.size; ++i) {
      ref.data[i] = std::clamp(ref.data[i], -clip, clip);
    }
  }
}

void accumulate(ModelParams& into, const ModelParams& from) {
  auto dst = tensor_refs(into);
  auto src = tensor_refs(const_cast<ModelParams&>(from));
  require(dst.size() == src.size(), "gradient accumulation: tensor layout mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    require(dst[i].size == src[i].size, "gradient accumulation: tensor size mismatch");
    for (size_t k = 0; k < dst[i].size; ++k) dst[i].data[k] += src[i].data[k];
  }
}

struct SampleResult {
  bool infeasible = false;
  double loss = 0.0;
  std::optional<ModelParams> grads;
};

// Forward + CTC loss (+ backward when wanted) for a single utterance.
SampleResult evaluate_sample(const Utterance& utt, const ModelParams& params,
                             const TrainTask& task, bool want_grads) {
  const ModelConfig& config = params.config;
  const LabelInventory& inventory = *task.inventory;
  SampleResult result;

  std::vector<int> target;
  int blank = inventory.blank_index();
  if (config.is_mtl()) {
    target.reserve(utt.target.size());
    for (int id : utt.target) target.push_back(inventory.to_local(utt.language, id));
    blank = inventory.to_local(utt.language, inventory.blank_index());
  } else {
    target = utt.target;
    if (task.use_mask) {
      const LanguageMask& mask = task.masks.at(static_cast<size_t>(utt.language_index));
      for (int id : target) {
        require(mask.bits[static_cast<size_t>(id)] != 0,
                "utterance " + utt.utterance_id + ": target token '" +
                    inventory.token(id).surface + "' is masked out for language '" +
                    utt.language + "'");
      }
    }
  }

  const int repeats = count_adjacent_repeats(target);
  if (!target_feasible(static_cast<int>(target.size()), repeats, utt.features.num_frames)) {
    result.infeasible = true;
    return result;
  }

  const int lang = config.needs_language() ? utt.language_index : -1;
  ForwardResult forward = model_forward(params, utt.features, lang);
  LogProbLattice lattice;
  if (!config.is_mtl() && task.use_mask) {
    lattice = apply_mask(forward.logits, task.masks.at(static_cast<size_t>(utt.language_index)));
  } else {
    lattice = log_softmax(forward.logits);
  }
  CtcResult ctc = ctc_loss(lattice, target, blank);
  result.loss = ctc.loss;
  if (want_grads) {
    result.grads = model_backward(params, forward.trace, ctc.grad_logits);
  }
  return result;
}

}  // namespace

ObjectiveResult objective(const std::vector<const Utterance*>& batch, const ModelParams& params,
                          const TrainTask& task, const TrainingConfig& config,
                          ModelParams* grads) {
  ObjectiveResult result;
  std::vector<SampleResult> samples(batch.size());

  const int jobs = std::min<int>(config.jobs, static_cast<int>(batch.size()));
  if (jobs <= 1) {
    for (size_t i = 0; i < batch.size(); ++i) {
      samples[i] = evaluate_sample(*batch[i], params, task, grads != nullptr);
    }
  } else {
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    std::vector<std::string> errors(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w]() {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= batch.size()) break;
          try {
            samples[i] = evaluate_sample(*batch[i], params, task, grads != nullptr);
          } catch (const std::exception& e) {
            errors[static_cast<size_t>(w)] = e.what();
            break;
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    for (const std::string& e : errors) {
      require(e.empty(), e);
    }
  }

  // Reduce in utterance order so results do not depend on the worker count.
  for (size_t i = 0; i < batch.size(); ++i) {
    const Utterance& utt = *batch[i];
    SampleResult& sample = samples[i];
    if (sample.infeasible) {
      ++result.skipped_infeasible;
      continue;
    }
    result.loss += sample.loss;
    ++result.evaluated;
    result.loss_by_language[utt.language_index] += sample.loss;
    result.count_by_language[utt.language_index] += 1;
    if (grads != nullptr) {
      clip_elementwise(*sample.grads, config.clip_per_sample);
      accumulate(*grads, *sample.grads);
    }
  }
  return result;
}

namespace {

struct SgdState {
  std::vector<std::vector<double>> momentum;
};

SgdState make_sgd_state(ModelParams& params) {
  SgdState state;
  for (TensorRef ref : tensor_refs(params)) {
    state.momentum.emplace_back(ref.size, 0.0);
  }
  return state;
}

void sgd_step(ModelParams& params, const ModelParams& grads, SgdState& state,
              const TrainingConfig& config) {
  auto p = tensor_refs(params);
  auto g = tensor_refs(const_cast<ModelParams&>(grads));
  for (size_t i = 0; i < p.size(); ++i) {
    std::vector<double>& m = state.momentum[i];
    for (size_t k = 0; k < p[i].size; ++k) {
      m[k] = config.momentum * m[k] + g[i].data[k];
      p[i].data[k] -= config.learning_rate * m[k];
    }
  }
}

// Mean loss per evaluated utterance, per language and overall.
struct EvalPass {
  std::map<LanguageId, double> mean_by_language;
  double mean_total = 0.0;
  int skipped = 0;
};

EvalPass evaluate_dataset(const Dataset& data, const ModelParams& params, const TrainTask& task,
                          const TrainingConfig& config) {
  EvalPass pass;
  std::vector<const Utterance*> batch;
  ObjectiveResult totals;
  for (size_t i = 0; i < data.size(); i += static_cast<size_t>(config.batch_size)) {
    batch.clear();
    for (size_t k = i; k < std::min(data.size(), i + static_cast<size_t>(config.batch_size)); ++k) {
      batch.push_back(&data[k]);
    }
    const ObjectiveResult r = objective(batch, params, task, config, nullptr);
    totals.loss += r.loss;
    totals.evaluated += r.evaluated;
    totals.skipped_infeasible += r.skipped_infeasible;
    for (const auto& [lang, loss] : r.loss_by_language) totals.loss_by_language[lang] += loss;
    for (const auto& [lang, n] : r.count_by_language) totals.count_by_language[lang] += n;
  }
  require(totals.evaluated > 0, "validation set has no feasible utterances");
  pass.mean_total = totals.loss / totals.evaluated;
  for (const auto& [lang, loss] : totals.loss_by_language) {
    pass.mean_by_language[task.inventory->languages().at(static_cast<size_t>(lang))] =
        loss / totals.count_by_language.at(lang);
  }
  pass.skipped = totals.skipped_infeasible;
  return pass;
}

}  // namespace

TrainOutcome train(const ModelParams& init, const Dataset& train_set, const Dataset& valid_set,
                   const TrainTask& task, const TrainingConfig& config) {
  config.validate();
  require(task.inventory != nullptr, "train: task has no inventory");
  TrainOutcome outcome;
  outcome.best_params = init;
  if (config.max_epochs == 0) {
    outcome.report.stop_reason = "no_training";
    return outcome;
  }
  require(!train_set.empty(), "train: empty training set");
  require(!valid_set.empty(), "train: empty validation set");

  ModelParams params = init;
  SgdState sgd = make_sgd_state(params);
  Rng shuffle_rng(hash_combine(config.seed, fnv1a64("epoch-shuffle")));

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_valid = std::numeric_limits<double>::infinity();
  int epochs_without_improvement = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    EpochRecord record;
    record.epoch = epoch;
    ObjectiveResult train_totals;
    std::vector<const Utterance*> batch;
    for (size_t i = 0; i < order.size(); i += static_cast<size_t>(config.batch_size)) {
      batch.clear();
      for (size_t k = i; k < std::min(order.size(), i + static_cast<size_t>(config.batch_size));
           ++k) {
        batch.push_back(&train_set[order[k]]);
      }
      ModelParams grads = zeros_like(params);
      const ObjectiveResult r = objective(batch, params, task, config, &grads);
      require(std::isfinite(r.loss),
              "training diverged: non-finite loss at epoch " + std::to_string(epoch));
      if (r.evaluated > 0) sgd_step(params, grads, sgd, config);
      train_totals.loss += r.loss;
      train_totals.evaluated += r.evaluated;
      train_totals.skipped_infeasible += r.skipped_infeasible;
      for (const auto& [lang, loss] : r.loss_by_language) {
        train_totals.loss_by_language[lang] += loss;
      }
      for (const auto& [lang, n] : r.count_by_language) train_totals.count_by_language[lang] += n;
    }
    for (const auto& [lang, loss] : train_totals.loss_by_language) {
      record.train_loss[task.inventory->languages().at(static_cast<size_t>(lang))] =
          loss / train_totals.count_by_language.at(lang);
    }
    record.skipped_infeasible = train_totals.skipped_infeasible;
    outcome.report.skipped_infeasible_total += train_totals.skipped_infeasible;

    const EvalPass valid = evaluate_dataset(valid_set, params, task, config);
    record.valid_loss = valid.mean_by_language;
    record.valid_total = valid.mean_total;
    require(std::isfinite(valid.mean_total),
            "training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    outcome.report.epochs.push_back(record);

    if (valid.mean_total < best_valid) {
      best_valid = valid.mean_total;
      outcome.best_params = params;
      outcome.report.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement >= config.patience) {
        outcome.report.stop_reason = "early_stop";
        return outcome;
      }
    }
  }
  outcome.report.stop_reason = "max_epochs";
  return outcome;
}

TrainOutcome fine_tune(const ModelParams& checkpoint, const Dataset& train_set,
                       const Dataset& valid_set, const TrainTask& task,
                       const TrainingConfig& config, bool reinit_head) {
  require(task.inventory != nullptr, "fine_tune: task has no inventory");
  int lang = -1;
  for (const Utterance& utt : train_set) {
    require(lang == -1 || lang == utt.language_index,
            "fine_tune: training set mixes languages");
    lang = utt.language_index;
  }
  ModelParams params = checkpoint;
  if (reinit_head) {
    Rng rng(hash_combine(config.seed, fnv1a64("head-reinit")));
    HeadParams* head = &params.head;
    if (params.config.is_mtl()) {
      require(lang >= 0, "fine_tune: cannot reinit MTL head without data");
      head = &params.branch_heads[static_cast<size_t>(lang)];
    }
    for (Eigen::Index i = 0; i < head->w.size(); ++i) {
      head->w.data()[i] = rng.uniform(-0.05, 0.05);
    }
    for (Eigen::Index i = 0; i < head->b.size(); ++i) {
      head->b.data()[i] = rng.uniform(-0.05, 0.05);
    }
  }
  return train(params, train_set, valid_set, task, config);
}

TrainOutcome train_bilingual(const ModelParams& init, const Dataset& train_set,
                             const Dataset& valid_set, const TrainTask& task,
                             const TrainingConfig& config) {
  require(init.config.variant == Variant::kUniversal,
          "train_bilingual: model must be the plain universal variant");
  require(!task.use_mask, "train_bilingual: masking must be disabled");
  std::set<int> langs;
  for (const Utterance& utt : train_set) langs.insert(utt.language_index);
  require(langs.size() == 2, "train_bilingual: expected exactly two languages in training data");
  return train(init, train_set, valid_set, task, config);
}

Dataset load_dataset(const Manifest& manifest, const std::string& root_dir,
                     const LabelInventory& inventory, int stack, int skip) {
  namespace fs = std::filesystem;
  Dataset data;
  data.reserve(manifest.size());
  for (const ManifestEntry& entry : manifest) {
    require(inventory.has_language(entry.language),
            "manifest utterance " + entry.utterance_id + ": language '" + entry.language +
                "' is not registered in the inventory");
    const fs::path p = fs::path(entry.path).is_absolute() ? fs::path(entry.path)
                                                          : fs::path(root_dir) / entry.path;
    FeatureMatrix raw = load_features(p.string());
    raw.language = entry.language;
    raw.transcript = entry.transcript;
    raw.utterance_id = entry.utterance_id;

    Utterance utt;
    utt.features = stack_and_skip(raw, stack, skip);
    utt.target = inventory.tokenize(entry.transcript, entry.language).ids;
    utt.language = entry.language;
    utt.language_index = inventory.language_index(entry.language);
    utt.utterance_id = entry.utterance_id;
    utt.transcript = entry.transcript;
    data.push_back(std::move(utt));
  }
  return data;
}

std::string decode_utterance(const ModelParams& params, const TrainTask& task,
                             const FeatureMatrix& stacked_features, int language_index) {
  const ModelConfig& config = params.config;
  const LabelInventory& inventory = *task.inventory;
  const int lang = config.needs_language() ? language_index : -1;
  if (config.needs_language() || (task.use_mask && !config.is_mtl())) {
    require(language_index >= 0 && language_index < inventory.num_languages(),
            "decode: this model requires a language");
  }
  const ForwardResult forward = model_forward(params, stacked_features, lang);

  LogProbLattice lattice;
  int blank = inventory.blank_index();
  if (config.is_mtl()) {
    lattice = log_softmax(forward.logits);
    blank = inventory.to_local(inventory.languages().at(static_cast<size_t>(language_index)),
                               inventory.blank_index());
  } else if (task.use_mask) {
    lattice = apply_mask(forward.logits, task.masks.at(static_cast<size_t>(language_index)));
  } else {
    lattice = log_softmax(forward.logits);
  }
  std::vector<int> ids = greedy_decode(lattice, blank);
  if (config.is_mtl()) {
    const LanguageId& code = inventory.languages().at(static_cast<size_t>(language_index));
    for (int& id : ids) id = inventory.to_global(code, id);
  }
  return inventory.detokenize(ids);
}

std::string TrainReport::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["stop_reason"] = stop_reason;
  j["skipped_infeasible_total"] = skipped_infeasible_total;
  j["epochs"] = nlohmann::json::array();
  for (const EpochRecord& e : epochs) {
    nlohmann::json je;
    je["epoch"] = e.epoch;
    je["train_loss"] = e.train_loss;
    je["valid_loss"] = e.valid_loss;
    je["valid_total"] = e.valid_total;
    je["skipped_infeasible"] = e.skipped_infeasible;
    j["epochs"].push_back(je);
  }
  return j.dump(2);
}

std::string TrainReport::to_table() const {
  std::ostringstream out;
  out << std::setw(6) << "epoch";
  std::vector<LanguageId> langs;
  if (!epochs.empty()) {
    for (const auto& [lang, _] : epochs.front().valid_loss) langs.push_back(lang);
  }
  for (const auto& lang : langs) out << std::setw(12) << ("train:" + lang);
  for (const auto& lang : langs) out << std::setw(12) << ("valid:" + lang);
  out << std::setw(12) << "valid:all" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const EpochRecord& e : epochs) {
    out << std::setw(6) << e.epoch;
    for (const auto& lang : langs) {
      const auto it = e.train_loss.find(lang);
      if (it == e.train_loss.end()) {
        out << std::setw(12) << "--";
      } else {
        out << std::setw(12) << it->second;
      }
    }
    for (const auto& lang : langs) {
      const auto it = e.valid_loss.find(lang);
      if (it == e.valid_loss.end()) {
        out << std::setw(12) << "--";
      } else {
        out << std::setw(12) << it->second;
      }
    }
    out << std::setw(12) << e.valid_total << '\n';
  }
  out << "best epoch: " << best_epoch << "  stop: " << stop_reason
      << "  skipped infeasible: " << skipped_infeasible_total << '\n';
  return out.str();
}

}  // namespace uctc

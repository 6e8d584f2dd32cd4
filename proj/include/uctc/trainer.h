// uctc/trainer.h
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
#include <optional>
#include <string>
#include <vector>

#include "uctc/ctc.h"
#include "uctc/features.h"
#include "uctc/labelset.h"
#include "uctc/model.h"

namespace uctc {

struct TrainingConfig {
  double learning_rate = 0.0004;
  double clip_per_sample = 0.0003;  // elementwise, applied per utterance
  double momentum = 0.9;
  int batch_size = 8;
  int max_epochs = 20;
  int patience = 3;  // epochs without validation improvement before stopping
  uint64_t seed = 0;
  int jobs = 1;  // batch-parallel workers; gradients reduce in utterance order

  void validate() const;
};

// A prepared sample: stacked features plus the blank-free target ids.
struct Utterance {
  FeatureMatrix features;
  std::vector<int> target;  // global token ids
  int language_index = -1;
  LanguageId language;
  std::string utterance_id;
  std::string transcript;
};

using Dataset = std::vector<Utterance>;

// How the CTC loss consumes model outputs. Universal variants score the full
// inventory through the utterance language's mask; the bilingual mode turns
// masking off; MTL scores each language's local label space (never masked).
struct TrainTask {
  const LabelInventory* inventory = nullptr;
  bool use_mask = true;
  std::vector<LanguageMask> masks;  // by language index; empty when unused
};

TrainTask make_train_task(const LabelInventory& inventory, bool use_mask);

struct ObjectiveResult {
  double loss = 0.0;  // summed over evaluated utterances
  int evaluated = 0;
  int skipped_infeasible = 0;
  std::map<int, double> loss_by_language;
  std::map<int, int> count_by_language;
};

// Sums per-utterance CTC losses over the batch. When `grads` is non-null,
// accumulates per-sample gradients, each clipped elementwise to
// [-clip_per_sample, clip_per_sample] before accumulation, reduced in
// utterance order regardless of config.jobs. Infeasible targets are skipped
// and counted, never silent failures.
ObjectiveResult objective(const std::vector<const Utterance*>& batch, const ModelParams& params,
                          const TrainTask& task, const TrainingConfig& config, ModelParams* grads);

struct EpochRecord {
  int epoch = 0;  // 1-based
  std::map<LanguageId, double> train_loss;  // mean per evaluated utterance
  std::map<LanguageId, double> valid_loss;
  double valid_total = 0.0;
  int skipped_infeasible = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
  std::string stop_reason;
  int skipped_infeasible_total = 0;

  std::string to_json() const;
  std::string to_table() const;
};

struct TrainOutcome {
  ModelParams best_params;
  TrainReport report;
};

// Epochs of globally shuffled mixed-language batches, SGD with momentum,
// validation after each epoch, early stopping on validation loss. The best
// validation checkpoint is returned. Throws on divergence.
TrainOutcome train(const ModelParams& init, const Dataset& train_set, const Dataset& valid_set,
                   const TrainTask& task, const TrainingConfig& config);

// Continues training from a checkpoint on a single language's data,
// optionally reinitializing the output head. max_epochs = 0 degenerates to
// direct evaluation of the checkpoint.
TrainOutcome fine_tune(const ModelParams& checkpoint, const Dataset& train_set,
                       const Dataset& valid_set, const TrainTask& task,
                       const TrainingConfig& config, bool reinit_head);

// Bilingual training over the union label set: universal variant, no gating,
// no masking, no language indicator anywhere.
TrainOutcome train_bilingual(const ModelParams& init, const Dataset& train_set,
                             const Dataset& valid_set, const TrainTask& task,
                             const TrainingConfig& config);

// Loads manifest rows into prepared utterances (features stacked, transcripts
// tokenized with the given inventory).
Dataset load_dataset(const Manifest& manifest, const std::string& root_dir,
                     const LabelInventory& inventory, int stack, int skip);

// Greedy decoding of one utterance to text: forward, mask (when the task
// masks), collapse, map MTL-local ids back to global, detokenize.
std::string decode_utterance(const ModelParams& params, const TrainTask& task,
                             const FeatureMatrix& stacked_features, int language_index);

}  // namespace uctc

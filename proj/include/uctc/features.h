// uctc/features.h
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

#include "uctc/common.h"
#include "uctc/labelset.h"

namespace uctc {

// A T x D sequence of acoustic feature vectors, row-major, float32 to match
// the on-disk format exactly.
struct FeatureMatrix {
  int num_frames = 0;  // T
  int dim = 0;         // D
  std::vector<float> data;
  LanguageId language;
  std::string transcript;
  std::string utterance_id;

  float& at(int t, int d) { return data[static_cast<size_t>(t) * dim + d]; }
  float at(int t, int d) const { return data[static_cast<size_t>(t) * dim + d]; }
};

// Concatenates `stack` consecutive frames and decimates by `skip`: output row
// j covers input rows j*skip .. j*skip+stack-1, replicating the final row
// past the end. Output shape is ceil(T/skip) x D*stack.
FeatureMatrix stack_and_skip(const FeatureMatrix& input, int stack = 3, int skip = 3);

// Emission model for one language: a mean vector per token, shared Gaussian
// noise, and a frame count range per token. Means interpolate between a
// grapheme anchor (shared across languages) and a language-specific offset,
// controlled by divergence in [0, 1].
struct SynthLanguageSpec {
  LanguageId language;
  std::vector<std::vector<float>> token_means;  // indexed by global token id
  double emission_std = 0.0;
  int min_frames_per_token = 1;
  int max_frames_per_token = 1;
  double divergence = 0.0;
};

SynthLanguageSpec make_synth_spec(const LabelInventory& inventory, const LanguageId& lang,
                                  int dim, double divergence, double emission_std,
                                  int min_frames_per_token, int max_frames_per_token,
                                  uint64_t seed);

// Draws a frame count per token uniformly in the spec's range and emits
// token-mean + Gaussian noise frames. Deterministic given seed.
FeatureMatrix synth_utterance(const SynthLanguageSpec& spec, const LabelInventory& inventory,
                              const std::string& text, uint64_t seed);

struct ManifestEntry {
  std::string utterance_id;
  std::string path;
  std::string transcript;
  LanguageId language;
};

using Manifest = std::vector<ManifestEntry>;

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

struct CorpusConfig {
  std::map<LanguageId, std::string> alphabets;            // code -> base chars
  std::map<LanguageId, std::vector<std::string>> lexicon; // empty -> auto-generated
  int lexicon_words = 40;       // auto-lexicon size per language
  int word_length_min = 2;
  int word_length_max = 5;
  double repeat_bias = 0.0;     // P(next char repeats the previous one)
  int utterances_per_language = 200;
  int words_min = 1;
  int words_max = 3;
  int feature_dim = 80;
  double divergence = 0.0;      // rho
  double emission_std = 0.5;
  int frames_min = 2;
  int frames_max = 4;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
  uint64_t seed = 0;
};

struct GeneratedCorpus {
  Manifest all;
  Manifest train;
  Manifest valid;
  Manifest test;
};

// Writes feature files under <out_dir>/feats plus manifest.tsv, train.tsv,
// valid.tsv, test.tsv and alphabets.tsv. Splits are disjoint per language.
// Content is a pure function of the config (including its seed).
GeneratedCorpus generate_corpus(const CorpusConfig& config, const std::string& out_dir);

// Feature file format "PCF1": magic, uint32 T, uint32 D (little endian),
// then T*D float32 row-major.
void save_features(const FeatureMatrix& features, const std::string& path);
FeatureMatrix load_features(const std::string& path);

}  // namespace uctc

// uctc/features.cc
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

#include "uctc/features.h"

#include <cmath>

#include <Eigen/Dense>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "uctc/utf8.h"

namespace uctc {

namespace {

constexpr char kFeatureMagic[4] = {'P', 'C', 'F', '1'};

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  require(in.gcount() == 4, "malformed feature file (truncated header): " + path);
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

}  // namespace

FeatureMatrix stack_and_skip(const FeatureMatrix& input, int stack, int skip) {
  require(input.num_frames >= 1, "stack_and_skip: empty input");
  require(stack >= 1 && skip >= 1, "stack_and_skip: stack and skip must be >= 1");
  const int T = input.num_frames;
  const int D = input.dim;
  const int out_T = (T + skip - 1) / skip;

  FeatureMatrix out;
  out.num_frames = out_T;
  out.dim = D * stack;
  out.data.resize(static_cast<size_t>(out_T) * out.dim);
  out.language = input.language;
  out.transcript = input.transcript;
  out.utterance_id = input.utterance_id;
  for (int j = 0; j < out_T; ++j) {
    for (int s = 0; s < stack; ++s) {
      const int src = std::min(j * skip + s, T - 1);  // replicate past the end
      std::memcpy(&out.data[static_cast<size_t>(j) * out.dim + static_cast<size_t>(s) * D],
                  &input.data[static_cast<size_t>(src) * D], sizeof(float) * D);
    }
  }
  return out;
}

SynthLanguageSpec make_synth_spec(const LabelInventory& inventory, const LanguageId& lang,
                                  int dim, double divergence, double emission_std,
                                  int min_frames_per_token, int max_frames_per_token,
                                  uint64_t seed) {
  require(inventory.has_language(lang), "make_synth_spec: unknown language '" + lang + "'");
  require(dim >= 1, "make_synth_spec: dim must be >= 1");
  require(divergence >= 0.0 && divergence <= 1.0, "make_synth_spec: divergence must be in [0,1]");
  require(emission_std >= 0.0, "make_synth_spec: emission_std must be >= 0");
  require(min_frames_per_token >= 1, "make_synth_spec: min frames per token must be >= 1");
  require(max_frames_per_token >= min_frames_per_token,
          "make_synth_spec: max frames per token must be >= min");

  SynthLanguageSpec spec;
  spec.language = lang;
  spec.emission_std = emission_std;
  spec.min_frames_per_token = min_frames_per_token;
  spec.max_frames_per_token = max_frames_per_token;
  spec.divergence = divergence;
  spec.token_means.resize(inventory.num_tokens());

  // Language-specific realization: the upper half of the feature dimensions
  // is language-colored, the lower half language-universal. Each language
  // flips the sign of a random subset of the colored dimensions; the
  // interpolated mean (1-rho)*a + rho*(s.a) attenuates a flipped dimension
  // by (1-2*rho), so at rho=1/2 a language simply does not realize that
  // dimension. Graphemes thus share anchors everywhere but each language
  // reads/writes its own subset of the colored spectrum - the kind of
  // systematic multiplicative difference a per-language gate can model.
  // Signs depend only on (seed, language); anchors only on (seed, surface).
  const int colored = dim / 2;
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(colored);
  {
    Rng sign_rng(hash_combine(hash_combine(seed, fnv1a64("language-signs")), fnv1a64(lang)));
    for (int d = 0; d < colored; ++d) signs(d) = sign_rng.uniform() < 0.5 ? -1.0 : 1.0;
  }

  // The colored subspace carries most of the per-token contrast (larger
  // anchor scale), so reading it well is what separates the architectures.
  for (int id = 0; id < inventory.num_tokens(); ++id) {
    const std::string& surface = inventory.token(id).surface;
    Rng anchor_rng(hash_combine(seed, fnv1a64(surface)));
    Eigen::VectorXd anchor(dim);
    for (int d = 0; d < dim; ++d) anchor(d) = anchor_rng.gaussian();
    Eigen::VectorXd mean = anchor;
    if (colored > 0) {
      anchor.tail(colored) *= 2.0;
      mean = anchor;
      mean.tail(colored) = (1.0 - divergence) * anchor.tail(colored) +
                           divergence * signs.cwiseProduct(anchor.tail(colored));
    }
    std::vector<float>& out = spec.token_means[id];
    out.resize(dim);
    for (int d = 0; d < dim; ++d) out[d] = static_cast<float>(mean(d));
  }
  return spec;
}

FeatureMatrix synth_utterance(const SynthLanguageSpec& spec, const LabelInventory& inventory,
                              const std::string& text, uint64_t seed) {
  const TokenSequence tokens = inventory.tokenize(text, spec.language);
  require(!tokens.ids.empty(), "synth_utterance: empty transcript");
  const int dim = static_cast<int>(spec.token_means.at(tokens.ids[0]).size());

  Rng rng(seed);
  FeatureMatrix out;
  out.dim = dim;
  out.language = spec.language;
  out.transcript = text;
  for (int id : tokens.ids) {
    const std::vector<float>& mean = spec.token_means.at(id);
    const int frames = rng.uniform_int(spec.min_frames_per_token, spec.max_frames_per_token);
    for (int f = 0; f < frames; ++f) {
      for (int d = 0; d < dim; ++d) {
        const double value = spec.emission_std == 0.0
                                 ? mean[d]
                                 : mean[d] + rng.gaussian(0.0, spec.emission_std);
        out.data.push_back(static_cast<float>(value));
      }
      ++out.num_frames;
    }
  }
  return out;
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open manifest: " + path);
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    require(fields.size() == 4,
            path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    manifest.push_back(ManifestEntry{fields[0], fields[1], fields[2], fields[3]});
  }
  return manifest;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write manifest: " + path);
  for (const auto& e : manifest) {
    out << e.utterance_id << '\t' << e.path << '\t' << e.transcript << '\t' << e.language << '\n';
  }
  require(out.good(), "write failed: " + path);
}

namespace {

std::vector<std::string> auto_lexicon(const std::string& alphabet_chars, const CorpusConfig& cfg,
                                      uint64_t seed) {
  const std::vector<std::string> chars = utf8_codepoints(alphabet_chars);
  Rng rng(seed);
  std::vector<std::string> words;
  std::set<std::string> seen;
  int attempts = 0;
  while (static_cast<int>(words.size()) < cfg.lexicon_words && attempts < cfg.lexicon_words * 50) {
    ++attempts;
    const int len = rng.uniform_int(cfg.word_length_min, cfg.word_length_max);
    std::string w;
    std::string prev;
    for (int i = 0; i < len; ++i) {
      if (i > 0 && cfg.repeat_bias > 0.0 && rng.uniform() < cfg.repeat_bias) {
        w += prev;  // doubled letters are a real feature of the label set
        continue;
      }
      prev = chars[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(chars.size()) - 1))];
      w += prev;
    }
    if (seen.insert(w).second) words.push_back(w);
  }
  require(!words.empty(), "auto_lexicon: could not generate any words");
  return words;
}

}  // namespace

GeneratedCorpus generate_corpus(const CorpusConfig& config, const std::string& out_dir) {
  require(!config.alphabets.empty(), "generate_corpus: no languages");
  require(config.utterances_per_language > 0, "generate_corpus: utterance count must be positive");
  require(config.words_min >= 1 && config.words_max >= config.words_min,
          "generate_corpus: bad words-per-utterance range");
  require(config.train_fraction > 0.0 && config.valid_fraction >= 0.0 &&
              config.train_fraction + config.valid_fraction < 1.0 + 1e-12,
          "generate_corpus: bad split fractions");

  const LabelInventory inventory = LabelInventory::build_from_strings(config.alphabets);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "feats", ec);
  require(!ec, "cannot create output directory: " + out_dir + " (" + ec.message() + ")");

  GeneratedCorpus corpus;
  for (const auto& [lang, chars] : config.alphabets) {
    std::vector<std::string> lexicon;
    if (auto it = config.lexicon.find(lang); it != config.lexicon.end() && !it->second.empty()) {
      lexicon = it->second;
    } else {
      lexicon = auto_lexicon(chars, config, hash_combine(config.seed, fnv1a64(lang + "/lexicon")));
    }
    const SynthLanguageSpec spec =
        make_synth_spec(inventory, lang, config.feature_dim, config.divergence,
                        config.emission_std, config.frames_min, config.frames_max, config.seed);

    Rng text_rng(hash_combine(config.seed, fnv1a64(lang + "/text")));
    const int n = config.utterances_per_language;
    const int n_train = static_cast<int>(std::floor(config.train_fraction * n));
    const int n_valid = static_cast<int>(std::floor(config.valid_fraction * n));
    for (int i = 0; i < n; ++i) {
      std::string text;
      const int words = text_rng.uniform_int(config.words_min, config.words_max);
      for (int w = 0; w < words; ++w) {
        if (w > 0) text += ' ';
        text += lexicon[static_cast<size_t>(
            text_rng.uniform_int(0, static_cast<int>(lexicon.size()) - 1))];
      }
      std::ostringstream id;
      id << lang << "-";
      id.width(6);
      id.fill('0');
      id << i;
      FeatureMatrix features = synth_utterance(
          spec, inventory, text, hash_combine(config.seed, fnv1a64(id.str())));
      features.utterance_id = id.str();
      const std::string rel_path = "feats/" + id.str() + ".pcf";
      save_features(features, (fs::path(out_dir) / rel_path).string());

      const ManifestEntry entry{id.str(), rel_path, text, lang};
      corpus.all.push_back(entry);
      if (i < n_train) {
        corpus.train.push_back(entry);
      } else if (i < n_train + n_valid) {
        corpus.valid.push_back(entry);
      } else {
        corpus.test.push_back(entry);
      }
    }
  }

  write_manifest(corpus.all, (fs::path(out_dir) / "manifest.tsv").string());
  write_manifest(corpus.train, (fs::path(out_dir) / "train.tsv").string());
  write_manifest(corpus.valid, (fs::path(out_dir) / "valid.tsv").string());
  write_manifest(corpus.test, (fs::path(out_dir) / "test.tsv").string());
  write_alphabet_file(config.alphabets, (fs::path(out_dir) / "alphabets.tsv").string());
  return corpus;
}

void save_features(const FeatureMatrix& features, const std::string& path) {
  require(features.num_frames >= 1, "save_features: empty feature matrix");
  require(static_cast<size_t>(features.num_frames) * features.dim == features.data.size(),
          "save_features: data size does not match T*D");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write feature file: " + path);
  out.write(kFeatureMagic, 4);
  write_u32(out, static_cast<uint32_t>(features.num_frames));
  write_u32(out, static_cast<uint32_t>(features.dim));
  // float32 little-endian payload; assumes a little-endian host.
  out.write(reinterpret_cast<const char*>(features.data.data()),
            static_cast<std::streamsize>(features.data.size() * sizeof(float)));
  require(out.good(), "write failed: " + path);
}

FeatureMatrix load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, kFeatureMagic, 4) == 0,
          "malformed feature file (bad magic): " + path);
  const uint32_t T = read_u32(in, path);
  const uint32_t D = read_u32(in, path);
  require(T >= 1 && D >= 1, "malformed feature file (zero dimension): " + path);

  FeatureMatrix out;
  out.num_frames = static_cast<int>(T);
  out.dim = static_cast<int>(D);
  out.data.resize(static_cast<size_t>(T) * D);
  in.read(reinterpret_cast<char*>(out.data.data()),
          static_cast<std::streamsize>(out.data.size() * sizeof(float)));
  require(static_cast<size_t>(in.gcount()) == out.data.size() * sizeof(float),
          "malformed feature file (payload shorter than header T*D): " + path);
  char extra;
  in.read(&extra, 1);
  require(in.eof(), "malformed feature file (payload longer than header T*D): " + path);
  for (float v : out.data) {
    require(std::isfinite(v), "malformed feature file (non-finite value): " + path);
  }
  return out;
}

}  // namespace uctc

// uctc/model.h
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

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uctc/common.h"
#include "uctc/features.h"

namespace uctc {

// Architecture variants. All encoders are stacked BLSTM layers with a linear
// projection after each layer; they differ in how language identity enters:
//   kMonolingual / kUniversal  - no language input; one shared output head.
//   kMultiTaskHeads            - shared lower layers, per-language top layers
//                                and per-language heads over local label sets.
//   kUniversalGated            - per-layer gate sigma(U h + V d + b) applied
//                                multiplicatively, output [g.h : d].
//   kAuxInputOnly              - per-layer concatenation [h : d], no gate.
//   kGateHOnly                 - gate sigma(U h + b), no concatenation.
//   kGateDOnly                 - gate sigma(V d + b), no concatenation.
enum class Variant {
  kMonolingual,
  kMultiTaskHeads,
  kUniversal,
  kUniversalGated,
  kAuxInputOnly,
  kGateHOnly,
  kGateDOnly,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  int num_layers = 4;
  int hidden_per_direction = 320;
  int projection_dim = 320;
  int input_dim = 0;
  Variant variant = Variant::kUniversal;
  // 1-based indices of the language-conditioned layers (gate or concat),
  // for the variants that condition on language. Empty means every layer.
  std::vector<int> gate_layers;
  // Number of language-specific top BLSTM layers for kMultiTaskHeads.
  int mtl_branch_depth = 1;
  int num_languages = 0;
  int num_outputs = 0;              // K; unused for kMultiTaskHeads
  std::vector<int> mtl_head_sizes;  // per-language |Y_l|, kMultiTaskHeads only

  void validate() const;
  bool is_mtl() const { return variant == Variant::kMultiTaskHeads; }
  bool has_gates() const {
    return variant == Variant::kUniversalGated || variant == Variant::kGateHOnly ||
           variant == Variant::kGateDOnly;
  }
  bool concats_indicator() const {
    return variant == Variant::kUniversalGated || variant == Variant::kAuxInputOnly;
  }
  bool needs_language() const {
    return is_mtl() || variant == Variant::kUniversalGated ||
           variant == Variant::kAuxInputOnly || variant == Variant::kGateDOnly;
  }
  // Whether 0-based layer `i` applies the variant's language conditioning.
  bool layer_conditioned(int i) const;
  int num_shared_layers() const { return is_mtl() ? num_layers - mtl_branch_depth : num_layers; }
  // Input width of 0-based layer `i` of the full (shared+branch) stack.
  int layer_input_dim(int i) const;
  int head_input_dim() const;
};

// One LSTM direction. Gate order in the stacked tensors is i, f, g, o.
struct LstmDirParams {
  Eigen::MatrixXd w_x;  // 4H x in
  Eigen::MatrixXd w_h;  // 4H x H
  Eigen::VectorXd b;    // 4H
};

struct LayerParams {
  LstmDirParams fwd;
  LstmDirParams bwd;
  Eigen::MatrixXd proj;  // P x 2H
};

// Language gate parameters; u or v is empty when the variant omits that term.
struct GateParams {
  Eigen::MatrixXd u;  // P x P
  Eigen::MatrixXd v;  // P x L
  Eigen::VectorXd b;  // P
};

struct HeadParams {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

struct ModelParams {
  ModelConfig config;
  std::vector<LayerParams> layers;  // shared stack
  std::vector<GateParams> gates;    // parallel to layers; empty where unused
  HeadParams head;                  // all variants except kMultiTaskHeads
  std::vector<std::vector<LayerParams>> branch_layers;  // MTL, per language
  std::vector<HeadParams> branch_heads;                 // MTL, per language
};

// Allocates zero-valued parameters with shapes implied by the config.
ModelParams allocate_params(const ModelConfig& config);

ModelParams zeros_like(const ModelParams& params);

// All weights and biases i.i.d. uniform on [-0.05, 0.05], deterministic in
// the seed. Tensors are filled in visitation order of for_each_tensor.
ModelParams init_params(const ModelConfig& config, uint64_t seed);

// Visits every parameter tensor as (name, rows, cols, data) in a fixed
// order. Drives the optimizer, serialization, and gradient checks.
using TensorVisitor = std::function<void(const std::string&, Eigen::Index, Eigen::Index, double*)>;
using ConstTensorVisitor =
    std::function<void(const std::string&, Eigen::Index, Eigen::Index, const double*)>;
void for_each_tensor(ModelParams& params, const TensorVisitor& visit);
void for_each_tensor(const ModelParams& params, const ConstTensorVisitor& visit);
size_t num_parameters(const ModelParams& params);

// Standalone gate: g = sigma(u h + v d + b), output [g.h : d].
Eigen::VectorXd gate_forward(const Eigen::VectorXd& h, int language_index,
                             const GateParams& gate, int num_languages);

struct DirTrace {
  Eigen::MatrixXd acts;    // 4H x T, post-activation i,f,g,o
  Eigen::MatrixXd c;       // H x T
  Eigen::MatrixXd tanh_c;  // H x T
  Eigen::MatrixXd h;       // H x T
};

struct LayerTrace {
  DirTrace fwd;
  DirTrace bwd;
  Eigen::MatrixXd h2;        // 2H x T
  Eigen::MatrixXd proj;      // P x T
  Eigen::MatrixXd gate_sig;  // P x T; empty when layer has no gate
  Eigen::MatrixXd out;       // layer output fed upward
};

struct ForwardTrace {
  Eigen::MatrixXd features;  // in x T
  std::vector<LayerTrace> layers;
  int language_index = -1;
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // T x K (or T x |Y_l| for kMultiTaskHeads)
  ForwardTrace trace;
};

// Runs the full encoder + head. `language_index` is the index into the
// registered language order (ignored, pass -1, for variants that do not
// consume language identity).
ForwardResult model_forward(const ModelParams& params, const FeatureMatrix& features,
                            int language_index);

// Exact gradients for every parameter reachable in the executed variant;
// unexecuted MTL branches stay zero.
ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace,
                           const Eigen::MatrixXd& grad_logits);

// Checkpoint container "PCM1": config + free-form metadata + named tensors
// with shapes, validated against the config on load.
void save_checkpoint(const ModelParams& params, const std::string& meta_json,
                     const std::string& path);
struct Checkpoint {
  ModelParams params;
  std::string meta_json;
};
Checkpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& json_text);

}  // namespace uctc

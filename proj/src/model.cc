// uctc/model.cc
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

#include "uctc/model.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace uctc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd sigmoid(const MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kMonolingual: return "mono";
    case Variant::kMultiTaskHeads: return "mtl";
    case Variant::kUniversal: return "univ";
    case Variant::kUniversalGated: return "gated";
    case Variant::kAuxInputOnly: return "aux";
    case Variant::kGateHOnly: return "gate-h";
    case Variant::kGateDOnly: return "gate-d";
  }
  fail("unknown variant value");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kMonolingual, Variant::kMultiTaskHeads, Variant::kUniversal,
                    Variant::kUniversalGated, Variant::kAuxInputOnly, Variant::kGateHOnly,
                    Variant::kGateDOnly}) {
    if (name == variant_name(v)) return v;
  }
  fail("unknown variant '" + name + "' (expected mono|mtl|univ|gated|aux|gate-h|gate-d)");
}

void ModelConfig::validate() const {
  require(num_layers >= 1, "config: num_layers must be >= 1");
  require(hidden_per_direction >= 1, "config: hidden_per_direction must be >= 1");
  require(projection_dim >= 1, "config: projection_dim must be >= 1");
  require(input_dim >= 1, "config: input_dim must be >= 1");
  for (int g : gate_layers) {
    require(g >= 1 && g <= num_layers, "config: gate layer index " + std::to_string(g) +
                                           " outside 1.." + std::to_string(num_layers));
  }
  if (is_mtl()) {
    require(mtl_branch_depth >= 0 && mtl_branch_depth <= num_layers,
            "config: mtl_branch_depth outside 0..num_layers");
    require(num_languages >= 1, "config: MTL needs at least one language");
    require(static_cast<int>(mtl_head_sizes.size()) == num_languages,
            "config: mtl_head_sizes must have one entry per language");
    for (int k : mtl_head_sizes) require(k >= 2, "config: MTL head size must be >= 2");
  } else {
    require(num_outputs >= 2, "config: num_outputs must be >= 2");
  }
  if (variant == Variant::kUniversalGated || variant == Variant::kAuxInputOnly ||
      variant == Variant::kGateDOnly) {
    require(num_languages >= 1, "config: variant needs registered languages");
  }
}

bool ModelConfig::layer_conditioned(int i) const {
  if (!has_gates() && !concats_indicator()) return false;
  if (gate_layers.empty()) return true;
  return std::find(gate_layers.begin(), gate_layers.end(), i + 1) != gate_layers.end();
}

int ModelConfig::layer_input_dim(int i) const {
  if (i == 0) return input_dim;
  int dim = projection_dim;
  if (layer_conditioned(i - 1) && concats_indicator()) dim += num_languages;
  return dim;
}

int ModelConfig::head_input_dim() const {
  int dim = projection_dim;
  if (!is_mtl() && layer_conditioned(num_layers - 1) && concats_indicator()) {
    dim += num_languages;
  }
  return dim;
}

namespace {

LayerParams allocate_layer(int input_dim, int hidden, int projection) {
  LayerParams layer;
  for (LstmDirParams* dir : {&layer.fwd, &layer.bwd}) {
    dir->w_x = MatrixXd::Zero(4 * hidden, input_dim);
    dir->w_h = MatrixXd::Zero(4 * hidden, hidden);
    dir->b = VectorXd::Zero(4 * hidden);
  }
  layer.proj = MatrixXd::Zero(projection, 2 * hidden);
  return layer;
}

void visit_dir(const std::string& prefix, LstmDirParams& d, const TensorVisitor& visit) {
  visit(prefix + ".w_x", d.w_x.rows(), d.w_x.cols(), d.w_x.data());
  visit(prefix + ".w_h", d.w_h.rows(), d.w_h.cols(), d.w_h.data());
  visit(prefix + ".b", d.b.size(), 1, d.b.data());
}

void visit_layer(const std::string& prefix, LayerParams& l, const TensorVisitor& visit) {
  visit_dir(prefix + ".fwd", l.fwd, visit);
  visit_dir(prefix + ".bwd", l.bwd, visit);
  visit(prefix + ".proj", l.proj.rows(), l.proj.cols(), l.proj.data());
}

}  // namespace

ModelParams allocate_params(const ModelConfig& config) {
  config.validate();
  ModelParams params;
  params.config = config;

  const int H = config.hidden_per_direction;
  const int P = config.projection_dim;
  for (int i = 0; i < config.num_shared_layers(); ++i) {
    params.layers.push_back(allocate_layer(config.layer_input_dim(i), H, P));
  }
  if (config.has_gates()) {
    params.gates.resize(config.num_layers);
    for (int i = 0; i < config.num_layers; ++i) {
      if (!config.layer_conditioned(i)) continue;
      GateParams& g = params.gates[i];
      if (config.variant != Variant::kGateDOnly) g.u = MatrixXd::Zero(P, P);
      if (config.variant != Variant::kGateHOnly) g.v = MatrixXd::Zero(P, config.num_languages);
      g.b = VectorXd::Zero(P);
    }
  }
  if (config.is_mtl()) {
    params.branch_layers.resize(config.num_languages);
    params.branch_heads.resize(config.num_languages);
    for (int l = 0; l < config.num_languages; ++l) {
      for (int j = config.num_shared_layers(); j < config.num_layers; ++j) {
        params.branch_layers[l].push_back(allocate_layer(config.layer_input_dim(j), H, P));
      }
      params.branch_heads[l].w = MatrixXd::Zero(config.mtl_head_sizes[l], config.head_input_dim());
      params.branch_heads[l].b = VectorXd::Zero(config.mtl_head_sizes[l]);
    }
  } else {
    params.head.w = MatrixXd::Zero(config.num_outputs, config.head_input_dim());
    params.head.b = VectorXd::Zero(config.num_outputs);
  }
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  return allocate_params(params.config);
}

void for_each_tensor(ModelParams& params, const TensorVisitor& visit) {
  for (size_t i = 0; i < params.layers.size(); ++i) {
    visit_layer("layer" + std::to_string(i), params.layers[i], visit);
    if (i < params.gates.size()) {
      GateParams& g = params.gates[i];
      const std::string prefix = "layer" + std::to_string(i) + ".gate";
      if (g.u.size() > 0) visit(prefix + ".u", g.u.rows(), g.u.cols(), g.u.data());
      if (g.v.size() > 0) visit(prefix + ".v", g.v.rows(), g.v.cols(), g.v.data());
      if (g.b.size() > 0) visit(prefix + ".b", g.b.size(), 1, g.b.data());
    }
  }
  for (size_t l = 0; l < params.branch_layers.size(); ++l) {
    for (size_t j = 0; j < params.branch_layers[l].size(); ++j) {
      visit_layer("branch" + std::to_string(l) + ".layer" + std::to_string(j),
                  params.branch_layers[l][j], visit);
    }
    HeadParams& h = params.branch_heads[l];
    visit("branch" + std::to_string(l) + ".head.w", h.w.rows(), h.w.cols(), h.w.data());
    visit("branch" + std::to_string(l) + ".head.b", h.b.size(), 1, h.b.data());
  }
  if (params.head.w.size() > 0) {
    visit("head.w", params.head.w.rows(), params.head.w.cols(), params.head.w.data());
    visit("head.b", params.head.b.size(), 1, params.head.b.data());
  }
}

void for_each_tensor(const ModelParams& params, const ConstTensorVisitor& visit) {
  for_each_tensor(const_cast<ModelParams&>(params),
                  [&](const std::string& name, Index rows, Index cols, double* data) {
                    visit(name, rows, cols, data);
                  });
}

size_t num_parameters(const ModelParams& params) {
  size_t n = 0;
  for_each_tensor(params, [&](const std::string&, Index rows, Index cols, const double*) {
    n += static_cast<size_t>(rows) * static_cast<size_t>(cols);
  });
  return n;
}

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
  ModelParams params = allocate_params(config);
  Rng rng(seed);
  for_each_tensor(params, [&](const std::string&, Index rows, Index cols, double* data) {
    const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols);
    for (size_t i = 0; i < n; ++i) data[i] = rng.uniform(-0.05, 0.05);
  });
  return params;
}

Eigen::VectorXd gate_forward(const Eigen::VectorXd& h, int language_index,
                             const GateParams& gate, int num_languages) {
  require(language_index >= 0 && language_index < num_languages,
          "gate_forward: language indicator is not one-hot");
  const Index P = h.size();
  VectorXd pre = VectorXd::Zero(P);
  if (gate.u.size() > 0) pre += gate.u * h;
  if (gate.v.size() > 0) pre += gate.v.col(language_index);
  pre += gate.b;
  const VectorXd g = (1.0 / (1.0 + (-pre.array()).exp())).matrix();
  VectorXd out(P + num_languages);
  out.head(P) = g.cwiseProduct(h);
  out.tail(num_languages).setZero();
  out(P + language_index) = 1.0;
  return out;
}

namespace {

DirTrace run_lstm_dir(const LstmDirParams& p, const MatrixXd& x, bool reverse) {
  const Index T = x.cols();
  const Index H = p.w_h.cols();
  DirTrace trace;
  trace.acts.resize(4 * H, T);
  trace.c.resize(H, T);
  trace.tanh_c.resize(H, T);
  trace.h.resize(H, T);

  MatrixXd a_in = p.w_x * x;
  a_in.colwise() += p.b;

  VectorXd z(4 * H);
  VectorXd h_prev = VectorXd::Zero(H);
  VectorXd c_prev = VectorXd::Zero(H);
  for (Index step = 0; step < T; ++step) {
    const Index t = reverse ? T - 1 - step : step;
    z.noalias() = p.w_h * h_prev;
    z += a_in.col(t);

    auto acts = trace.acts.col(t);
    acts.head(3 * H).array() = 1.0 / (1.0 + (-z.head(3 * H).array()).exp());
    acts.segment(2 * H, H).array() = z.segment(2 * H, H).array().tanh();
    acts.tail(H).array() = 1.0 / (1.0 + (-z.tail(H).array()).exp());
    auto i = acts.head(H).array();
    auto f = acts.segment(H, H).array();
    auto g = acts.segment(2 * H, H).array();
    auto o = acts.tail(H).array();

    auto c = trace.c.col(t).array();
    c = f * c_prev.array() + i * g;
    trace.tanh_c.col(t).array() = c.tanh();
    trace.h.col(t).array() = o * trace.tanh_c.col(t).array();
    h_prev = trace.h.col(t);
    c_prev = trace.c.col(t);
  }
  return trace;
}

// Accumulates parameter gradients into dp and input gradients into dx.
void lstm_backward_dir(const LstmDirParams& p, const DirTrace& trace, const MatrixXd& x,
                       const MatrixXd& dh_above, bool reverse, LstmDirParams& dp, MatrixXd& dx) {
  const Index T = x.cols();
  const Index H = p.w_h.cols();

  MatrixXd dz_all(4 * H, T);
  VectorXd dh(H);
  VectorXd dh_rec = VectorXd::Zero(H);
  VectorXd dc = VectorXd::Zero(H);
  for (Index step = T - 1; step >= 0; --step) {
    const Index t = reverse ? T - 1 - step : step;
    const Index prev_t = reverse ? t + 1 : t - 1;

    const auto i = trace.acts.col(t).head(H).array();
    const auto f = trace.acts.col(t).segment(H, H).array();
    const auto g = trace.acts.col(t).segment(2 * H, H).array();
    const auto o = trace.acts.col(t).tail(H).array();
    const auto tc = trace.tanh_c.col(t).array();

    dh = dh_above.col(t) + dh_rec;
    dc.array() += dh.array() * o * (1.0 - tc.square());

    auto dz = dz_all.col(t);
    dz.head(H).array() = dc.array() * g * i * (1.0 - i);
    if (step == 0) {
      dz.segment(H, H).setZero();  // no previous cell state
    } else {
      dz.segment(H, H).array() = dc.array() * trace.c.col(prev_t).array() * f * (1.0 - f);
    }
    dz.segment(2 * H, H).array() = dc.array() * i * (1.0 - g.square());
    dz.tail(H).array() = dh.array() * tc * o * (1.0 - o);

    dh_rec.noalias() = p.w_h.transpose() * dz;
    dc.array() *= f;
  }

  // h at the previous processing step, zero at the sequence start.
  MatrixXd h_prev = MatrixXd::Zero(H, T);
  for (Index step = 1; step < T; ++step) {
    const Index t = reverse ? T - 1 - step : step;
    const Index prev_t = reverse ? t + 1 : t - 1;
    h_prev.col(t) = trace.h.col(prev_t);
  }

  dp.w_x.noalias() += dz_all * x.transpose();
  dp.w_h.noalias() += dz_all * h_prev.transpose();
  dp.b.noalias() += dz_all.rowwise().sum();
  dx.noalias() += p.w_x.transpose() * dz_all;
}

// Applies the variant's language conditioning to the projected layer output.
void condition_layer(const ModelConfig& config, const GateParams* gate, int language_index,
                     LayerTrace& trace) {
  const Index P = trace.proj.rows();
  const Index T = trace.proj.cols();
  const int L = config.num_languages;

  if (config.variant == Variant::kAuxInputOnly) {
    trace.out.resize(P + L, T);
    trace.out.topRows(P) = trace.proj;
    trace.out.bottomRows(L).setZero();
    trace.out.row(P + language_index).setOnes();
    return;
  }

  require(gate != nullptr, "conditioned layer is missing gate parameters");
  MatrixXd pre = MatrixXd::Zero(P, T);
  if (gate->u.size() > 0) pre = gate->u * trace.proj;
  VectorXd bias = gate->b;
  if (gate->v.size() > 0) bias += gate->v.col(language_index);
  pre.colwise() += bias;
  trace.gate_sig = sigmoid(pre);

  const MatrixXd gated = trace.gate_sig.cwiseProduct(trace.proj);
  if (config.concats_indicator()) {
    trace.out.resize(P + L, T);
    trace.out.topRows(P) = gated;
    trace.out.bottomRows(L).setZero();
    trace.out.row(P + language_index).setOnes();
  } else {
    trace.out = gated;
  }
}

}  // namespace

ForwardResult model_forward(const ModelParams& params, const FeatureMatrix& features,
                            int language_index) {
  const ModelConfig& config = params.config;
  require(features.num_frames >= 1, "model_forward: empty features");
  require(features.dim == config.input_dim,
          "model_forward: feature dim " + std::to_string(features.dim) +
              " does not match config input_dim " + std::to_string(config.input_dim));
  if (config.needs_language()) {
    require(language_index >= 0 && language_index < config.num_languages,
            "model_forward: variant '" + std::string(variant_name(config.variant)) +
                "' needs a registered language");
  }

  const Index T = features.num_frames;
  ForwardResult result;
  ForwardTrace& trace = result.trace;
  trace.language_index = language_index;
  trace.layers.reserve(static_cast<size_t>(config.num_layers));
  trace.features.resize(config.input_dim, T);
  for (Index t = 0; t < T; ++t) {
    for (int d = 0; d < config.input_dim; ++d) {
      trace.features(d, t) = static_cast<double>(features.at(static_cast<int>(t), d));
    }
  }

  const MatrixXd* input = &trace.features;
  auto run_layer = [&](const LayerParams& layer, int layer_index) {
    LayerTrace lt;
    lt.fwd = run_lstm_dir(layer.fwd, *input, false);
    lt.bwd = run_lstm_dir(layer.bwd, *input, true);
    const Index H = config.hidden_per_direction;
    lt.h2.resize(2 * H, T);
    lt.h2.topRows(H) = lt.fwd.h;
    lt.h2.bottomRows(H) = lt.bwd.h;
    lt.proj = layer.proj * lt.h2;
    if (!config.is_mtl() && config.layer_conditioned(layer_index)) {
      const GateParams* gate =
          config.has_gates() ? &params.gates[static_cast<size_t>(layer_index)] : nullptr;
      condition_layer(config, gate, language_index, lt);
    } else {
      lt.out = lt.proj;
    }
    trace.layers.push_back(std::move(lt));
    input = &trace.layers.back().out;
  };

  for (size_t i = 0; i < params.layers.size(); ++i) {
    run_layer(params.layers[i], static_cast<int>(i));
  }
  const HeadParams* head = &params.head;
  if (config.is_mtl()) {
    const auto& branch = params.branch_layers[static_cast<size_t>(language_index)];
    for (size_t j = 0; j < branch.size(); ++j) {
      run_layer(branch[j], static_cast<int>(params.layers.size() + j));
    }
    head = &params.branch_heads[static_cast<size_t>(language_index)];
  }

  MatrixXd logits = head->w * (*input);
  logits.colwise() += head->b;
  result.logits = logits.transpose();
  return result;
}

ModelParams model_backward(const ModelParams& params, const ForwardTrace& trace,
                           const Eigen::MatrixXd& grad_logits) {
  const ModelConfig& config = params.config;
  const int lang = trace.language_index;
  require(!trace.layers.empty(), "model_backward: empty trace");
  const Index T = trace.features.cols();
  require(grad_logits.rows() == T, "model_backward: grad_logits frame count mismatch");

  ModelParams grads = zeros_like(params);

  const HeadParams* head = &params.head;
  HeadParams* dhead = &grads.head;
  if (config.is_mtl()) {
    head = &params.branch_heads[static_cast<size_t>(lang)];
    dhead = &grads.branch_heads[static_cast<size_t>(lang)];
  }
  require(grad_logits.cols() == head->w.rows(), "model_backward: grad_logits width mismatch");

  const MatrixXd dlogits = grad_logits.transpose();  // K x T
  const MatrixXd& top_out = trace.layers.back().out;
  dhead->w += dlogits * top_out.transpose();
  dhead->b += dlogits.rowwise().sum();
  MatrixXd dout = head->w.transpose() * dlogits;

  for (int li = static_cast<int>(trace.layers.size()) - 1; li >= 0; --li) {
    const LayerTrace& lt = trace.layers[static_cast<size_t>(li)];
    const bool in_branch = config.is_mtl() && li >= static_cast<int>(params.layers.size());
    const LayerParams& layer =
        in_branch ? params.branch_layers[static_cast<size_t>(lang)]
                                        [static_cast<size_t>(li) - params.layers.size()]
                  : params.layers[static_cast<size_t>(li)];
    LayerParams& dlayer =
        in_branch ? grads.branch_layers[static_cast<size_t>(lang)]
                                       [static_cast<size_t>(li) - params.layers.size()]
                  : grads.layers[static_cast<size_t>(li)];

    const Index P = config.projection_dim;
    MatrixXd dproj;
    if (!config.is_mtl() && config.layer_conditioned(li)) {
      if (config.variant == Variant::kAuxInputOnly) {
        dproj = dout.topRows(P);
      } else {
        GateParams& dgate = grads.gates[static_cast<size_t>(li)];
        const GateParams& gate = params.gates[static_cast<size_t>(li)];
        MatrixXd dgated;
        if (config.concats_indicator()) {
          dgated = dout.topRows(P);
        } else {
          dgated = std::move(dout);
        }
        const MatrixXd& sig = lt.gate_sig;
        dproj = dgated.cwiseProduct(sig);
        const MatrixXd dpre = dgated.cwiseProduct(lt.proj).cwiseProduct(sig).cwiseProduct(
            (1.0 - sig.array()).matrix());
        if (gate.u.size() > 0) {
          dgate.u += dpre * lt.proj.transpose();
          dproj += gate.u.transpose() * dpre;
        }
        if (gate.v.size() > 0) dgate.v.col(lang) += dpre.rowwise().sum();
        dgate.b += dpre.rowwise().sum();
      }
    } else {
      dproj = std::move(dout);
    }

    dlayer.proj += dproj * lt.h2.transpose();
    const MatrixXd dh2 = layer.proj.transpose() * dproj;
    const Index H = config.hidden_per_direction;

    const MatrixXd& layer_input =
        (li == 0) ? trace.features : trace.layers[static_cast<size_t>(li) - 1].out;
    MatrixXd dinput = MatrixXd::Zero(layer_input.rows(), T);
    lstm_backward_dir(layer.fwd, lt.fwd, layer_input, dh2.topRows(H), false, dlayer.fwd, dinput);
    lstm_backward_dir(layer.bwd, lt.bwd, layer_input, dh2.bottomRows(H), true, dlayer.bwd, dinput);
    dout = std::move(dinput);
  }
  return grads;
}

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'C', 'M', '1'};
constexpr uint32_t kCheckpointVersion = 1;

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
  require(in.gcount() == 4, "malformed checkpoint (truncated): " + path);
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& path) {
  const uint32_t n = read_u32(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  require(static_cast<uint32_t>(in.gcount()) == n, "malformed checkpoint (truncated): " + path);
  return s;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  nlohmann::json j;
  j["num_layers"] = config.num_layers;
  j["hidden_per_direction"] = config.hidden_per_direction;
  j["projection_dim"] = config.projection_dim;
  j["input_dim"] = config.input_dim;
  j["variant"] = variant_name(config.variant);
  j["gate_layers"] = config.gate_layers;
  j["mtl_branch_depth"] = config.mtl_branch_depth;
  j["num_languages"] = config.num_languages;
  j["num_outputs"] = config.num_outputs;
  j["mtl_head_sizes"] = config.mtl_head_sizes;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  ModelConfig config;
  config.num_layers = j.at("num_layers").get<int>();
  config.hidden_per_direction = j.at("hidden_per_direction").get<int>();
  config.projection_dim = j.at("projection_dim").get<int>();
  config.input_dim = j.at("input_dim").get<int>();
  config.variant = variant_from_name(j.at("variant").get<std::string>());
  config.gate_layers = j.at("gate_layers").get<std::vector<int>>();
  config.mtl_branch_depth = j.at("mtl_branch_depth").get<int>();
  config.num_languages = j.at("num_languages").get<int>();
  config.num_outputs = j.at("num_outputs").get<int>();
  config.mtl_head_sizes = j.at("mtl_head_sizes").get<std::vector<int>>();
  return config;
}

void save_checkpoint(const ModelParams& params, const std::string& meta_json,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  write_u32(out, kCheckpointVersion);
  write_string(out, model_config_to_json(params.config));
  write_string(out, meta_json.empty() ? "{}" : meta_json);

  uint32_t count = 0;
  for_each_tensor(params, [&](const std::string&, Index, Index, const double*) { ++count; });
  write_u32(out, count);
  for_each_tensor(params, [&](const std::string& name, Index rows, Index cols,
                              const double* data) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(rows));
    write_u32(out, static_cast<uint32_t>(cols));
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(rows) *
                                           static_cast<size_t>(cols)));
  });
  require(out.good(), "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, kCheckpointMagic, 4) == 0,
          "malformed checkpoint (bad magic): " + path);
  const uint32_t version = read_u32(in, path);
  require(version == kCheckpointVersion,
          "unsupported checkpoint version " + std::to_string(version) + ": " + path);

  Checkpoint ck;
  const std::string config_json = read_string(in, path);
  ck.params = allocate_params(model_config_from_json(config_json));
  ck.meta_json = read_string(in, path);

  const uint32_t count = read_u32(in, path);
  uint32_t expected = 0;
  for_each_tensor(ck.params, [&](const std::string&, Index, Index, const double*) { ++expected; });
  require(count == expected, "checkpoint tensor count " + std::to_string(count) +
                                 " does not match config (" + std::to_string(expected) +
                                 "): " + path);

  std::map<std::string, std::pair<std::pair<Index, Index>, double*>> slots;
  for_each_tensor(ck.params, [&](const std::string& name, Index rows, Index cols, double* data) {
    slots[name] = {{rows, cols}, data};
  });
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(in, path);
    const Index rows = static_cast<Index>(read_u32(in, path));
    const Index cols = static_cast<Index>(read_u32(in, path));
    const auto it = slots.find(name);
    require(it != slots.end(), "checkpoint tensor '" + name + "' not expected by config: " + path);
    require(it->second.first.first == rows && it->second.first.second == cols,
            "checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                std::to_string(cols) + ", config expects " +
                std::to_string(it->second.first.first) + "x" +
                std::to_string(it->second.first.second) + ": " + path);
    const size_t n = static_cast<size_t>(rows) * static_cast<size_t>(cols);
    in.read(reinterpret_cast<char*>(it->second.second),
            static_cast<std::streamsize>(sizeof(double) * n));
    require(static_cast<size_t>(in.gcount()) == sizeof(double) * n,
            "malformed checkpoint (truncated tensor '" + name + "'): " + path);
    slots.erase(it);
  }
  require(slots.empty(), "checkpoint is missing tensors: " + path);
  return ck;
}

}  // namespace uctc

// Copyright 2026 The evognn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evognn/autodiff.hpp"
#include "evognn/dataset.hpp"
#include "evognn/genome.hpp"
#include "evognn/graph.hpp"

namespace evognn {

// LeakyReLU slope used inside attention scoring (GAT convention); genome
// activations use the usual 0.01.
inline constexpr double kAttentionLeakySlope = 0.2;
inline constexpr double kProbEps = 1e-10;
inline constexpr std::size_t kDefaultParamCap = 20'000'000;

struct Hyperparams {
  double lr = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  int max_epochs = 1000;
  int patience = 50;
};

/// All learnable tensors for one genome instantiation. Parameter order is
/// fixed (per layer: W, then per head the attention vectors; finally the
/// output head) so optimizers and gradient checks can walk them uniformly.
struct Model {
  struct Layer {
    Mat w;                   // input_dim x heads*hidden
    std::vector<Mat> att_l;  // per head, hidden x 1
    std::vector<Mat> att_r;  // per head, hidden x 1
    std::vector<Mat> att_g;  // per head, 1 x 1 (gen_linear only)
  };
  std::vector<Layer> layers;
  Mat w_out;  // last_width x classes

  std::vector<Mat*> params() {
    std::vector<Mat*> out;
    for (Layer& l : layers) {
      out.push_back(&l.w);
      for (Mat& m : l.att_l) out.push_back(&m);
      for (Mat& m : l.att_r) out.push_back(&m);
      for (Mat& m : l.att_g) out.push_back(&m);
    }
    out.push_back(&w_out);
    return out;
  }

  std::vector<const Mat*> params() const {
    std::vector<const Mat*> out;
    for (const Layer& l : layers) {
      out.push_back(&l.w);
      for (const Mat& m : l.att_l) out.push_back(&m);
      for (const Mat& m : l.att_r) out.push_back(&m);
      for (const Mat& m : l.att_g) out.push_back(&m);
    }
    out.push_back(&w_out);
    return out;
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string base = "layer" + std::to_string(i + 1);
      out.push_back(base + ".w");
      for (std::size_t h = 0; h < layers[i].att_l.size(); ++h)
        out.push_back(base + ".att_l" + std::to_string(h));
      for (std::size_t h = 0; h < layers[i].att_r.size(); ++h)
        out.push_back(base + ".att_r" + std::to_string(h));
      for (std::size_t h = 0; h < layers[i].att_g.size(); ++h)
        out.push_back(base + ".att_g" + std::to_string(h));
    }
    out.push_back("head.w_out");
    return out;
  }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const Mat* p : params()) total += static_cast<std::size_t>(p->size());
    return total;
  }
};

namespace detail {

inline void glorot_fill(Mat& m, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-limit, limit);
    }
  }
}

inline bool uses_att_left(AttentionKind k) {
  return k == AttentionKind::Gat || k == AttentionKind::SymGat ||
         k == AttentionKind::GenLinear;
}

inline bool uses_att_right(AttentionKind k) {
  return uses_att_left(k) || k == AttentionKind::Linear;
}

}  // namespace detail

/// Allocates and Glorot-initializes every tensor; shapes follow
/// layer_input_dim. Deterministic under the rng seed.
inline Model build_model(const ArchitectureGenome& g, int feature_dim, Rng& rng,
                         std::size_t param_cap = kDefaultParamCap) {
  Model model;
  std::size_t total = 0;
  auto account = [&](std::size_t n) {
    total += n;
    if (total > param_cap) {
      throw CapacityError("model exceeds parameter cap of " +
                          std::to_string(param_cap));
    }
  };
  for (int k = 1; k <= g.depth(); ++k) {
    const LayerGene& gene = g.layers[static_cast<std::size_t>(k) - 1];
    Model::Layer layer;
    const int in_dim = layer_input_dim(g, k, feature_dim);
    account(static_cast<std::size_t>(in_dim) *
            static_cast<std::size_t>(gene.heads * gene.hidden_dim));
    layer.w.resize(in_dim, gene.heads * gene.hidden_dim);
    detail::glorot_fill(layer.w, rng);
    for (int h = 0; h < gene.heads; ++h) {
      if (detail::uses_att_left(gene.attention_fn)) {
        account(static_cast<std::size_t>(gene.hidden_dim));
        Mat a(gene.hidden_dim, 1);
        detail::glorot_fill(a, rng);
        layer.att_l.push_back(std::move(a));
      }
      if (detail::uses_att_right(gene.attention_fn)) {
        account(static_cast<std::size_t>(gene.hidden_dim));
        Mat a(gene.hidden_dim, 1);
        detail::glorot_fill(a, rng);
        layer.att_r.push_back(std::move(a));
      }
      if (gene.attention_fn == AttentionKind::GenLinear) {
        account(1);
        Mat a(1, 1);
        detail::glorot_fill(a, rng);
        layer.att_g.push_back(std::move(a));
      }
    }
    model.layers.push_back(std::move(layer));
  }
  const int last_width = layer_output_width(g, g.depth(), feature_dim);
  account(static_cast<std::size_t>(last_width) *
          static_cast<std::size_t>(g.output_classes));
  model.w_out.resize(last_width, g.output_classes);
  detail::glorot_fill(model.w_out, rng);
  return model;
}

/// Node features as the engine consumes them: always dense, optionally with
/// a sparse view used on the fast projection path.
struct FeatureInput {
  Mat dense;
  std::shared_ptr<const SpMat> sparse;

  static FeatureInput from_dataset(const GraphDataset& d,
                                   double sparsity_threshold = 0.25) {
    FeatureInput f;
    f.dense = d.features.cast<double>();
    const double density =
        f.dense.size() == 0
            ? 1.0
            : static_cast<double>((f.dense.array() != 0.0).count()) /
                  static_cast<double>(f.dense.size());
    if (density < sparsity_threshold) {
      auto sp = std::make_shared<SpMat>(f.dense.sparseView());
      sp->makeCompressed();
      f.sparse = std::move(sp);
    }
    return f;
  }
};

struct ForwardOptions {
  bool train = false;
  double dropout = 0.0;
  Rng* rng = nullptr;
};

struct ForwardGraph {
  std::vector<ad::Var> layer_outputs;  // H_1 .. H_depth (post-activation)
  ad::Var final_features;              // last layer after head combine
  ad::Var logits;
  ad::Var probs;
};

/// Tape leaves for every model parameter. `flat` matches Model::params()
/// order exactly, so grads read back through it line up with the optimizer's
/// view of the model.
struct ModelLeaves {
  struct Layer {
    ad::Var w;
    std::vector<ad::Var> att_l, att_r, att_g;
  };
  std::vector<Layer> layers;
  ad::Var w_out;
  std::vector<ad::Var> flat;
};

inline ModelLeaves make_param_leaves(ad::Tape& t, const Model& model) {
  ModelLeaves out;
  for (const Model::Layer& l : model.layers) {
    ModelLeaves::Layer ll;
    ll.w = t.leaf(l.w, true);
    out.flat.push_back(ll.w);
    for (const Mat& a : l.att_l) {
      ll.att_l.push_back(t.leaf(a, true));
      out.flat.push_back(ll.att_l.back());
    }
    for (const Mat& a : l.att_r) {
      ll.att_r.push_back(t.leaf(a, true));
      out.flat.push_back(ll.att_r.back());
    }
    for (const Mat& a : l.att_g) {
      ll.att_g.push_back(t.leaf(a, true));
      out.flat.push_back(ll.att_g.back());
    }
    out.layers.push_back(std::move(ll));
  }
  out.w_out = t.leaf(model.w_out, true);
  out.flat.push_back(out.w_out);
  return out;
}

namespace detail {

inline std::shared_ptr<const SpMat> dropout_sparse(const SpMat& s, double p,
                                                   Rng& rng) {
  auto out = std::make_shared<SpMat>(s);
  const double keep = 1.0 - p;
  double* values = out->valuePtr();
  const Eigen::Index nnz = out->nonZeros();
  for (Eigen::Index i = 0; i < nnz; ++i) {
    values[i] = rng.uniform() < keep ? values[i] / keep : 0.0;
  }
  return out;
}

/// Per-edge attention path for one head; either a tape variable of
/// softmax-normalized weights or a constant weight vector (const/gcn).
struct EdgeWeights {
  ad::Var var{};
  const std::vector<double>* constant = nullptr;
};

inline EdgeWeights attention_weights(ad::Tape& t, AttentionKind kind,
                                     ad::Var z_head,
                                     const ModelLeaves::Layer& leaves, int head,
                                     const EdgePlan* plan) {
  using ad::Var;
  switch (kind) {
    case AttentionKind::Const:
      return {Var{}, &plan->unit_w};
    case AttentionKind::Gcn:
      return {Var{}, &plan->gcn_w};
    case AttentionKind::Gat:
    case AttentionKind::SymGat: {
      Var u = ad::matmul(t, z_head, leaves.att_l[static_cast<std::size_t>(head)]);
      Var v = ad::matmul(t, z_head, leaves.att_r[static_cast<std::size_t>(head)]);
      Var s = ad::add(t, ad::gather_rows(t, u, &plan->dst),
                      ad::gather_rows(t, v, &plan->src));
      s = ad::activation(t, s, Activation::LeakyRelu, kAttentionLeakySlope);
      if (kind == AttentionKind::SymGat) {
        s = ad::add(t, s, ad::gather_rows(t, s, &plan->rev));
      }
      return {ad::segment_softmax(t, s, plan), nullptr};
    }
    case AttentionKind::Cos: {
      Var s = ad::edge_cosine(t, z_head, plan);
      return {ad::segment_softmax(t, s, plan), nullptr};
    }
    case AttentionKind::Linear: {
      Var v = ad::matmul(t, z_head, leaves.att_r[static_cast<std::size_t>(head)]);
      Var s = ad::activation(t, ad::gather_rows(t, v, &plan->src),
                             Activation::Tanh);
      return {ad::segment_softmax(t, s, plan), nullptr};
    }
    case AttentionKind::GenLinear: {
      Var u = ad::matmul(t, z_head, leaves.att_l[static_cast<std::size_t>(head)]);
      Var v = ad::matmul(t, z_head, leaves.att_r[static_cast<std::size_t>(head)]);
      Var s = ad::add(t, ad::gather_rows(t, u, &plan->dst),
                      ad::gather_rows(t, v, &plan->src));
      s = ad::activation(t, s, Activation::Tanh);
      s = ad::matmul(t, s, leaves.att_g[static_cast<std::size_t>(head)]);
      return {ad::segment_softmax(t, s, plan), nullptr};
    }
  }
  throw ConfigError("unknown attention kind");
}

}  // namespace detail

/// Builds the whole forward computation on the tape: per layer, the
/// column-wise concatenation of its sources (implicit previous layer plus
/// decoded skip connections, ascending), the per-head projection, attention
/// and aggregation over the edge plan, the gene's activation, and the head
/// concat; then the output head.
inline ForwardGraph build_forward(ad::Tape& t, const ModelLeaves& leaves,
                                  const ArchitectureGenome& g,
                                  const Graph& graph, const FeatureInput& x,
                                  const ForwardOptions& opts) {
  using ad::Var;
  const EdgePlan* plan = &graph.plan();
  const bool drop = opts.train && opts.dropout > 0.0;
  if (drop && opts.rng == nullptr) {
    throw ConfigError("forward: dropout in train mode needs an rng");
  }

  ForwardGraph out;
  std::vector<Var> outputs;  // H_1..H_k
  for (int k = 1; k <= g.depth(); ++k) {
    const LayerGene& gene = g.layers[static_cast<std::size_t>(k) - 1];
    const ModelLeaves::Layer& ll = leaves.layers[static_cast<std::size_t>(k) - 1];

    std::vector<ad::SourceRef> sources;
    for (int s : layer_input_sources(g, k)) {
      if (s == 0) {
        if (x.sparse) {
          auto sp = drop ? detail::dropout_sparse(*x.sparse, opts.dropout, *opts.rng)
                         : x.sparse;
          sources.push_back(ad::SourceRef::of(std::move(sp)));
        } else if (drop) {
          Var xv = t.leaf(x.dense, false);
          sources.push_back(
              ad::SourceRef::of(ad::dropout(t, xv, opts.dropout, *opts.rng)));
        } else {
          sources.push_back(ad::SourceRef::of(&x.dense));
        }
      } else {
        Var h = outputs[static_cast<std::size_t>(s) - 1];
        sources.push_back(ad::SourceRef::of(
            drop ? ad::dropout(t, h, opts.dropout, *opts.rng) : h));
      }
    }

    Var z_full = ad::project_concat(t, sources, ll.w);
    std::vector<Var> head_outputs;
    for (int h = 0; h < gene.heads; ++h) {
      Var z_h = gene.heads == 1
                    ? z_full
                    : ad::slice_cols(t, z_full, h * gene.hidden_dim,
                                     gene.hidden_dim);
      detail::EdgeWeights ew =
          detail::attention_weights(t, gene.attention_fn, z_h, ll, h, plan);
      Var m = ad::edge_aggregate(t, gene.aggregator, ew.var, ew.constant, z_h, plan);
      head_outputs.push_back(ad::activation(t, m, gene.activation));
    }
    Var h_k = head_outputs.size() == 1 ? head_outputs[0]
                                       : ad::concat_cols(t, head_outputs);
    if (!t.value(h_k).allFinite()) {
      throw NumericError("non-finite layer output", k);
    }
    outputs.push_back(h_k);
  }

  Var last = outputs.back();
  const LayerGene& last_gene = g.layers.back();
  if (g.head_combine == HeadCombine::Average && last_gene.heads > 1) {
    last = ad::average_blocks(t, last, last_gene.heads);
  }
  out.final_features = last;

  out.logits = ad::matmul(t, last, leaves.w_out);
  if (!t.value(out.logits).allFinite()) {
    throw NumericError("non-finite logits", 0);
  }
  out.probs = g.task == TaskKind::SingleLabel
                  ? ad::softmax_rows(t, out.logits)
                  : ad::activation(t, out.logits, Activation::Sigmoid);
  out.layer_outputs = std::move(outputs);
  return out;
}

inline ForwardGraph build_forward(ad::Tape& t, const Model& model,
                                  const ArchitectureGenome& g,
                                  const Graph& graph, const FeatureInput& x,
                                  const ForwardOptions& opts) {
  ModelLeaves leaves = make_param_leaves(t, model);
  return build_forward(t, leaves, g, graph, x, opts);
}

/// Per-edge weights one head would use for aggregation, given its projected
/// features z (n x hidden): softmax-normalized for the learned kinds, raw
/// constants for const/gcn. Indices follow plan.src/plan.dst.
inline std::vector<double> attention_coefficients(AttentionKind kind,
                                                  const Mat& z,
                                                  const Model::Layer& params,
                                                  int head,
                                                  const EdgePlan& plan) {
  ad::Tape t;
  ModelLeaves::Layer leaves;
  for (const Mat& a : params.att_l) leaves.att_l.push_back(t.leaf(a, false));
  for (const Mat& a : params.att_r) leaves.att_r.push_back(t.leaf(a, false));
  for (const Mat& a : params.att_g) leaves.att_g.push_back(t.leaf(a, false));
  ad::Var zv = t.leaf(z, false);
  detail::EdgeWeights ew =
      detail::attention_weights(t, kind, zv, leaves, head, &plan);
  if (ew.constant) return *ew.constant;
  const Mat& w = t.value(ew.var);
  std::vector<double> out(static_cast<std::size_t>(plan.m));
  for (int e = 0; e < plan.m; ++e) out[static_cast<std::size_t>(e)] = w(e, 0);
  return out;
}

/// Spec-level forward: probabilities plus retained per-layer activations.
struct ForwardResult {
  Mat probs;
  Mat logits;
  std::vector<Mat> layer_activations;
};

inline ForwardResult forward(const Model& model, const ArchitectureGenome& g,
                             const Graph& graph, const FeatureInput& x,
                             bool train = false, double dropout_rate = 0.0,
                             Rng* rng = nullptr) {
  ad::Tape t;
  ForwardOptions opts{train, dropout_rate, rng};
  ForwardGraph fg = build_forward(t, model, g, graph, x, opts);
  ForwardResult r;
  r.probs = t.value(fg.probs);
  r.logits = t.value(fg.logits);
  for (ad::Var v : fg.layer_outputs) r.layer_activations.push_back(t.value(v));
  return r;
}

/// Masked mean loss on an already-computed output matrix (probabilities).
inline double loss(const Mat& output, const GraphDataset& data,
                   const std::vector<int>& mask_rows, TaskKind task) {
  if (mask_rows.empty()) throw ConfigError("loss: empty mask");
  double total = 0.0;
  if (task == TaskKind::SingleLabel) {
    for (int r : mask_rows) {
      total -= std::log(std::max(
          output(r, data.labels[static_cast<std::size_t>(r)]), kProbEps));
    }
  } else {
    for (int r : mask_rows) {
      for (Eigen::Index c = 0; c < output.cols(); ++c) {
        const double y = data.label_matrix(r, c);
        total -= y * std::log(std::max(output(r, c), kProbEps)) +
                 (1.0 - y) * std::log(std::max(1.0 - output(r, c), kProbEps));
      }
    }
  }
  return total / static_cast<double>(mask_rows.size());
}

/// Pooled-confusion F1 over all (node, label) cells; 1.0 when both sides are
/// all-zero.
inline double micro_f1(const Eigen::MatrixXi& pred, const Eigen::MatrixXi& labels) {
  if (pred.rows() != labels.rows() || pred.cols() != labels.cols()) {
    throw ConfigError("micro_f1: shape mismatch");
  }
  long tp = 0, fp = 0, fn = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      const bool p = pred(r, c) != 0;
      const bool y = labels(r, c) != 0;
      tp += p && y;
      fp += p && !y;
      fn += !p && y;
    }
  }
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) /
         (2.0 * static_cast<double>(tp) + static_cast<double>(fp) +
          static_cast<double>(fn));
}

/// Accuracy (argmax) for single-label tasks, micro-F1 at threshold 0.5 for
/// multi-label, over the given split rows.
inline double evaluate_output(const Mat& probs, const GraphDataset& data,
                              const std::vector<int>& mask_rows, TaskKind task) {
  if (mask_rows.empty()) throw ConfigError("evaluate: empty split");
  if (task == TaskKind::SingleLabel) {
    int correct = 0;
    for (int r : mask_rows) {
      Eigen::Index best;
      probs.row(r).maxCoeff(&best);
      correct += static_cast<int>(best) == data.labels[static_cast<std::size_t>(r)];
    }
    return static_cast<double>(correct) / static_cast<double>(mask_rows.size());
  }
  Eigen::MatrixXi pred(static_cast<Eigen::Index>(mask_rows.size()), probs.cols());
  Eigen::MatrixXi truth(static_cast<Eigen::Index>(mask_rows.size()), probs.cols());
  for (std::size_t i = 0; i < mask_rows.size(); ++i) {
    const int r = mask_rows[i];
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      pred(static_cast<Eigen::Index>(i), c) = probs(r, c) > 0.5 ? 1 : 0;
      truth(static_cast<Eigen::Index>(i), c) =
          data.label_matrix(r, c) > 0.5 ? 1 : 0;
    }
  }
  return micro_f1(pred, truth);
}

struct TrainSummary {
  bool failed = false;
  std::string fail_reason;
  int best_epoch = 0;  // 1-based epoch whose parameters are returned
  int epochs_run = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double val_metric = 0.0;
  std::optional<double> test_metric;  // filled only for a final selected model
  std::vector<double> train_loss_curve;
  std::vector<double> val_loss_curve;
  std::size_t param_count = 0;
  double wall_seconds = 0.0;
};

/// The spec's TrainedModelRecord: tuned weights plus the training trace.
struct TrainedModel {
  Model model;
  ArchitectureGenome genome;
  Hyperparams hyperparams;
  TrainSummary summary;
};

namespace detail {

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  int step = 0;
};

inline void adam_step(std::vector<Mat*>& params, const std::vector<Mat>& grads,
                      AdamState& state, const Hyperparams& hp) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, state.step);
  const double bc2 = 1.0 - std::pow(beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat g = grads[i] + hp.weight_decay * (*params[i]);
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat mhat = state.m[i] / bc1;
    const Mat vhat = state.v[i] / bc2;
    *params[i] -= hp.lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
  }
}

}  // namespace detail

inline ad::Var build_loss(ad::Tape& t, ad::Var probs, const GraphDataset& data,
                          const std::vector<int>& mask_rows, TaskKind task) {
  return task == TaskKind::SingleLabel
             ? ad::masked_cross_entropy(t, probs, &data.labels, &mask_rows,
                                        kProbEps)
             : ad::masked_binary_cross_entropy(t, probs, &data.label_matrix,
                                               &mask_rows, kProbEps);
}

/// One backward pass: loss over `mask_rows` and the gradient of every
/// parameter in Model::params() order (no weight-decay term).
inline std::pair<double, std::vector<Mat>> loss_and_gradients(
    const Model& model, const ArchitectureGenome& g, const Graph& graph,
    const FeatureInput& x, const GraphDataset& data,
    const std::vector<int>& mask_rows, const ForwardOptions& opts) {
  ad::Tape t;
  ModelLeaves leaves = make_param_leaves(t, model);
  ForwardGraph fg = build_forward(t, leaves, g, graph, x, opts);
  ad::Var l = build_loss(t, fg.probs, data, mask_rows, g.task);
  const double loss_value = t.value(l)(0, 0);
  if (!std::isfinite(loss_value)) throw NumericError("non-finite loss", 0);
  t.backward(l);
  std::vector<Mat> grads;
  grads.reserve(leaves.flat.size());
  for (ad::Var v : leaves.flat) grads.push_back(t.grad_or_zero(v));
  return {loss_value, std::move(grads)};
}

/// Full-batch Adam with L2 weight decay and early stopping on validation
/// loss; returns the parameters of the best-validation epoch. A numeric
/// failure is reported in the summary, not thrown.
inline TrainedModel train(const ArchitectureGenome& g, const GraphDataset& data,
                          const Hyperparams& hp, Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainedModel out;
  out.genome = g;
  out.hyperparams = hp;
  if (g.output_classes != data.classes) {
    throw ConfigError("genome expects " + std::to_string(g.output_classes) +
                      " classes but dataset has " + std::to_string(data.classes));
  }
  if (g.task != data.task) {
    throw ConfigError("genome task does not match dataset task");
  }

  FeatureInput x = FeatureInput::from_dataset(data);
  const Graph& graph = data.graph;

  try {
    out.model = build_model(g, data.feature_dim(), rng);
    out.summary.param_count = out.model.param_count();

    detail::AdamState adam;
    {
      auto params = out.model.params();
      for (Mat* p : params) {
        adam.m.push_back(Mat::Zero(p->rows(), p->cols()));
        adam.v.push_back(Mat::Zero(p->rows(), p->cols()));
      }
    }

    Model best = out.model;
    int best_epoch = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
      ForwardOptions train_opts{true, hp.dropout, &rng};
      auto [train_loss, grads] = loss_and_gradients(
          out.model, g, graph, x, data, data.train_rows, train_opts);
      auto params = out.model.params();
      detail::adam_step(params, grads, adam, hp);

      ForwardResult eval = forward(out.model, g, graph, x);
      const double val_loss = loss(eval.probs, data, data.val_rows, g.task);
      if (!std::isfinite(val_loss)) throw NumericError("non-finite val loss", 0);
      out.summary.train_loss_curve.push_back(train_loss);
      out.summary.val_loss_curve.push_back(val_loss);
      out.summary.epochs_run = epoch;

      if (val_loss < best_val) {
        best_val = val_loss;
        best = out.model;
        best_epoch = epoch;
        bad_epochs = 0;
      } else {
        ++bad_epochs;
        if (bad_epochs > hp.patience) break;
      }
    }

    out.model = std::move(best);
    out.summary.best_epoch = best_epoch;
    out.summary.best_val_loss = best_val;
    ForwardResult final_eval = forward(out.model, g, graph, x);
    out.summary.val_metric =
        evaluate_output(final_eval.probs, data, data.val_rows, g.task);
  } catch (const NumericError& e) {
    out.summary.failed = true;
    out.summary.fail_reason = e.what();
  }

  out.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Metric of a trained model on one split ("train", "val" or "test").
inline double evaluate(const TrainedModel& tm, const GraphDataset& data,
                       const std::string& split) {
  const std::vector<int>* rows = nullptr;
  if (split == "train") rows = &data.train_rows;
  else if (split == "val") rows = &data.val_rows;
  else if (split == "test") rows = &data.test_rows;
  else throw ConfigError("evaluate: unknown split '" + split + "'");
  FeatureInput x = FeatureInput::from_dataset(data);
  ForwardResult r = forward(tm.model, tm.genome, data.graph, x);
  return evaluate_output(r.probs, data, *rows, tm.genome.task);
}

}  // namespace evognn

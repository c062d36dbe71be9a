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

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "evognn/genome.hpp"
#include "evognn/graph.hpp"

// Minimal define-by-run reverse-mode engine. The tape is rebuilt every
// training step; creation order is the topological order, so the backward
// sweep is a single reverse walk. Values are dense matrices; the input
// feature matrix may enter as a constant sparse operand of project_concat.
namespace evognn::ad {

using evognn::Mat;
using evognn::SpMat;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Mat&)>;

  Var leaf(Mat value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
  }

  Var push(Mat value, bool requires_grad, BackwardFn fn) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

  bool requires_grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }

  /// Gradient of a node after backward(); zeros if the node never
  /// received any contribution.
  Mat grad_or_zero(Var v) const {
    const Node& node = nodes_[static_cast<std::size_t>(v.id)];
    if (node.grad.size() == 0) {
      return Mat::Zero(node.value.rows(), node.value.cols());
    }
    return node.grad;
  }

  void accumulate(Var v, const Mat& g) {
    Node& node = nodes_[static_cast<std::size_t>(v.id)];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    node.grad += g;
  }

  Mat& grad_ref(Var v) {
    Node& node = nodes_[static_cast<std::size_t>(v.id)];
    if (node.grad.size() == 0) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  /// For ops whose backward needs the output node's own value.
  void set_backward(Var v, BackwardFn fn) {
    nodes_[static_cast<std::size_t>(v.id)].backward = std::move(fn);
  }

  void backward(Var loss) {
    Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.size() != 1) throw ConfigError("backward: loss must be scalar");
    ln.grad = Mat::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
      Node& node = nodes_[static_cast<std::size_t>(i)];
      if (!node.requires_grad || !node.backward) continue;
      if (node.grad.size() == 0) continue;  // not on a path to the loss
      node.backward(*this, node.grad);
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// --- basic matrix ops ---------------------------------------------------------

inline Var matmul(Tape& t, Var a, Var b) {
  Mat value = t.value(a) * t.value(b);
  const bool req = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(value), req, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

inline Var add(Tape& t, Var a, Var b) {
  Mat value = t.value(a) + t.value(b);
  const bool req = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(value), req, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var slice_cols(Tape& t, Var a, int start, int len) {
  Mat value = t.value(a).middleCols(start, len);
  return t.push(std::move(value), t.requires_grad(a),
                [a, start, len](Tape& t, const Mat& g) {
                  if (!t.requires_grad(a)) return;
                  t.grad_ref(a).middleCols(start, len) += g;
                });
}

inline Var concat_cols(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no inputs");
  Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool req = false;
  for (Var p : parts) {
    cols += t.value(p).cols();
    req = req || t.requires_grad(p);
  }
  Mat value(rows, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    value.middleCols(off, t.value(p).cols()) = t.value(p);
    off += t.value(p).cols();
  }
  return t.push(std::move(value), req, [parts](Tape& t, const Mat& g) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      const Eigen::Index w = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, w));
      off += w;
    }
  });
}

/// Mean over the nblocks equal column blocks (multi-head averaging).
inline Var average_blocks(Tape& t, Var a, int nblocks) {
  const Mat& x = t.value(a);
  if (x.cols() % nblocks != 0) throw ConfigError("average_blocks: ragged blocks");
  const Eigen::Index w = x.cols() / nblocks;
  Mat value = Mat::Zero(x.rows(), w);
  for (int b = 0; b < nblocks; ++b) value += x.middleCols(b * w, w);
  value /= static_cast<double>(nblocks);
  return t.push(std::move(value), t.requires_grad(a),
                [a, nblocks, w](Tape& t, const Mat& g) {
                  if (!t.requires_grad(a)) return;
                  Mat& ga = t.grad_ref(a);
                  const Mat share = g / static_cast<double>(nblocks);
                  for (int b = 0; b < nblocks; ++b) ga.middleCols(b * w, w) += share;
                });
}

// --- elementwise --------------------------------------------------------------

inline double act_apply(Activation kind, double x, double slope) {
  switch (kind) {
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::LeakyRelu: return x > 0.0 ? x : slope * x;
    case Activation::Elu: return x > 0.0 ? x : std::expm1(x);
    case Activation::Softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Activation::Identity: return x;
  }
  return x;
}

inline double act_grad(Activation kind, double x, double y, double slope) {
  switch (kind) {
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return x > 0.0 ? 1.0 : slope;
    case Activation::Elu: return x > 0.0 ? 1.0 : y + 1.0;
    case Activation::Softplus: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

inline Var activation(Tape& t, Var a, Activation kind, double slope = 0.01) {
  const Mat& x = t.value(a);
  Mat value = x.unaryExpr([kind, slope](double v) { return act_apply(kind, v, slope); });
  Var out = t.push(std::move(value), t.requires_grad(a), nullptr);
  t.set_backward(out, [a, out, kind, slope](Tape& t, const Mat& g) {
    if (!t.requires_grad(a)) return;
    const Mat& x = t.value(a);
    const Mat& y = t.value(out);
    Mat& ga = t.grad_ref(a);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        ga(r, c) += g(r, c) * act_grad(kind, x(r, c), y(r, c), slope);
      }
    }
  });
  return out;
}

// --- edge-level ops -----------------------------------------------------------

/// value(e) = a(index[e]); works on column vectors (or any matrix, by rows).
inline Var gather_rows(Tape& t, Var a, const std::vector<int>* index) {
  const Mat& x = t.value(a);
  Mat value(static_cast<Eigen::Index>(index->size()), x.cols());
  for (std::size_t e = 0; e < index->size(); ++e) {
    value.row(static_cast<Eigen::Index>(e)) = x.row((*index)[e]);
  }
  return t.push(std::move(value), t.requires_grad(a),
                [a, index](Tape& t, const Mat& g) {
                  if (!t.requires_grad(a)) return;
                  Mat& ga = t.grad_ref(a);
                  for (std::size_t e = 0; e < index->size(); ++e) {
                    ga.row((*index)[e]) += g.row(static_cast<Eigen::Index>(e));
                  }
                });
}

/// Per-edge cosine similarity of the endpoint rows of z. Zero-norm rows
/// score 0 with zero gradient.
inline Var edge_cosine(Tape& t, Var z, const EdgePlan* plan) {
  const Mat& Z = t.value(z);
  Mat value(plan->m, 1);
  for (int e = 0; e < plan->m; ++e) {
    const auto zi = Z.row(plan->dst[e]);
    const auto zj = Z.row(plan->src[e]);
    const double na = zi.norm();
    const double nb = zj.norm();
    value(e, 0) = (na > 0.0 && nb > 0.0) ? zi.dot(zj) / (na * nb) : 0.0;
  }
  return t.push(std::move(value), t.requires_grad(z),
                [z, plan](Tape& t, const Mat& g) {
                  if (!t.requires_grad(z)) return;
                  const Mat& Z = t.value(z);
                  Mat& gz = t.grad_ref(z);
                  for (int e = 0; e < plan->m; ++e) {
                    const double ge = g(e, 0);
                    if (ge == 0.0) continue;
                    const auto zi = Z.row(plan->dst[e]);
                    const auto zj = Z.row(plan->src[e]);
                    const double na = zi.norm();
                    const double nb = zj.norm();
                    if (na == 0.0 || nb == 0.0) continue;
                    const double c = zi.dot(zj) / (na * nb);
                    gz.row(plan->dst[e]) += ge * (zj / (na * nb) - c * zi / (na * na));
                    gz.row(plan->src[e]) += ge * (zi / (na * nb) - c * zj / (nb * nb));
                  }
                });
}

/// Softmax over each destination's incoming edges (segments are contiguous
/// because the plan is sorted by destination).
inline Var segment_softmax(Tape& t, Var scores, const EdgePlan* plan) {
  const Mat& s = t.value(scores);
  Mat value(plan->m, 1);
  for (int i = 0; i < plan->n; ++i) {
    const int lo = plan->seg_begin[static_cast<std::size_t>(i)];
    const int hi = plan->seg_begin[static_cast<std::size_t>(i) + 1];
    double mx = s(lo, 0);
    for (int e = lo + 1; e < hi; ++e) mx = std::max(mx, s(e, 0));
    double sum = 0.0;
    for (int e = lo; e < hi; ++e) {
      value(e, 0) = std::exp(s(e, 0) - mx);
      sum += value(e, 0);
    }
    for (int e = lo; e < hi; ++e) value(e, 0) /= sum;
  }
  Var out = t.push(std::move(value), t.requires_grad(scores), nullptr);
  t.set_backward(out, [scores, out, plan](Tape& t, const Mat& g) {
    if (!t.requires_grad(scores)) return;
    const Mat& w = t.value(out);
    Mat& gs = t.grad_ref(scores);
    for (int i = 0; i < plan->n; ++i) {
      const int lo = plan->seg_begin[static_cast<std::size_t>(i)];
      const int hi = plan->seg_begin[static_cast<std::size_t>(i) + 1];
      double dot = 0.0;
      for (int e = lo; e < hi; ++e) dot += g(e, 0) * w(e, 0);
      for (int e = lo; e < hi; ++e) gs(e, 0) += w(e, 0) * (g(e, 0) - dot);
    }
  });
  return out;
}

/// out[i] = reduce over incoming edges e of w[e] * z[src[e]].
/// w is either a tape variable (E x 1) or a constant weight vector.
inline Var edge_aggregate(Tape& t, Aggregator kind, Var w_var,
                          const std::vector<double>* w_const, Var z,
                          const EdgePlan* plan) {
  const Mat& Z = t.value(z);
  const Eigen::Index d = Z.cols();
  auto weight = [&](int e) {
    return w_var.valid() ? t.value(w_var)(e, 0) : (*w_const)[static_cast<std::size_t>(e)];
  };

  Mat value = Mat::Zero(plan->n, d);
  std::shared_ptr<Eigen::MatrixXi> argmax;
  switch (kind) {
    case Aggregator::Sum:
    case Aggregator::Mean: {
      for (int e = 0; e < plan->m; ++e) {
        const double scale =
            kind == Aggregator::Mean
                ? weight(e) * plan->inv_count[static_cast<std::size_t>(plan->dst[e])]
                : weight(e);
        value.row(plan->dst[e]) += scale * Z.row(plan->src[e]);
      }
      break;
    }
    case Aggregator::Max: {
      argmax = std::make_shared<Eigen::MatrixXi>(plan->n, d);
      for (int i = 0; i < plan->n; ++i) {
        const int lo = plan->seg_begin[static_cast<std::size_t>(i)];
        const int hi = plan->seg_begin[static_cast<std::size_t>(i) + 1];
        for (Eigen::Index c = 0; c < d; ++c) {
          double best = weight(lo) * Z(plan->src[lo], c);
          int best_e = lo;
          for (int e = lo + 1; e < hi; ++e) {
            const double m = weight(e) * Z(plan->src[e], c);
            if (m > best) {
              best = m;
              best_e = e;
            }
          }
          value(i, c) = best;
          (*argmax)(i, c) = best_e;
        }
      }
      break;
    }
  }

  const bool req = t.requires_grad(z) || (w_var.valid() && t.requires_grad(w_var));
  return t.push(std::move(value), req,
                [kind, w_var, w_const, z, plan, argmax](Tape& t, const Mat& g) {
                  const Mat& Z = t.value(z);
                  const Eigen::Index d = Z.cols();
                  const bool need_z = t.requires_grad(z);
                  const bool need_w = w_var.valid() && t.requires_grad(w_var);
                  auto weight = [&](int e) {
                    return w_var.valid() ? t.value(w_var)(e, 0)
                                         : (*w_const)[static_cast<std::size_t>(e)];
                  };
                  Mat* gz = need_z ? &t.grad_ref(z) : nullptr;
                  Mat* gw = need_w ? &t.grad_ref(w_var) : nullptr;
                  if (kind == Aggregator::Max) {
                    for (int i = 0; i < plan->n; ++i) {
                      for (Eigen::Index c = 0; c < d; ++c) {
                        const double gic = g(i, c);
                        if (gic == 0.0) continue;
                        const int e = (*argmax)(i, c);
                        if (need_z) (*gz)(plan->src[e], c) += gic * weight(e);
                        if (need_w) (*gw)(e, 0) += gic * Z(plan->src[e], c);
                      }
                    }
                    return;
                  }
                  for (int e = 0; e < plan->m; ++e) {
                    const double fold =
                        kind == Aggregator::Mean
                            ? plan->inv_count[static_cast<std::size_t>(plan->dst[e])]
                            : 1.0;
                    if (need_z) {
                      gz->row(plan->src[e]) += fold * weight(e) * g.row(plan->dst[e]);
                    }
                    if (need_w) {
                      (*gw)(e, 0) += fold * g.row(plan->dst[e]).dot(Z.row(plan->src[e]));
                    }
                  }
                });
}

// --- input projection ----------------------------------------------------------

/// One source of a layer's concatenated input: a tape variable, a constant
/// dense matrix, or a constant sparse matrix (the feature matrix).
struct SourceRef {
  Var var{};
  const Mat* dense = nullptr;
  std::shared_ptr<const SpMat> sparse;

  static SourceRef of(Var v) { return SourceRef{v, nullptr, nullptr}; }
  static SourceRef of(const Mat* m) { return SourceRef{Var{}, m, nullptr}; }
  static SourceRef of(std::shared_ptr<const SpMat> s) {
    return SourceRef{Var{}, nullptr, std::move(s)};
  }

  Eigen::Index cols(const Tape& t) const {
    if (var.valid()) return t.value(var).cols();
    if (dense) return dense->cols();
    return sparse->cols();
  }
};

/// Projection of the (virtual) column concatenation of the sources:
/// value = [S_0 | S_1 | ...] * W, computed blockwise as sum_i S_i * W_rows_i
/// so the concatenation is never materialized and sparse sources stay sparse.
inline Var project_concat(Tape& t, const std::vector<SourceRef>& sources, Var w) {
  Eigen::Index total = 0;
  for (const SourceRef& s : sources) total += s.cols(t);
  const Mat& W = t.value(w);
  if (total != W.rows()) throw ConfigError("project_concat: width mismatch");

  Eigen::Index rows = 0;
  {
    const SourceRef& s0 = sources.front();
    rows = s0.var.valid() ? t.value(s0.var).rows()
                          : (s0.dense ? s0.dense->rows() : s0.sparse->rows());
  }
  Mat value = Mat::Zero(rows, W.cols());
  Eigen::Index off = 0;
  for (const SourceRef& s : sources) {
    const Eigen::Index c = s.cols(t);
    const auto wrows = W.middleRows(off, c);
    if (s.var.valid()) {
      value.noalias() += t.value(s.var) * wrows;
    } else if (s.dense) {
      value.noalias() += (*s.dense) * wrows;
    } else {
      value += (*s.sparse) * wrows;
    }
    off += c;
  }

  bool req = t.requires_grad(w);
  for (const SourceRef& s : sources) {
    req = req || (s.var.valid() && t.requires_grad(s.var));
  }
  return t.push(std::move(value), req, [sources, w](Tape& t, const Mat& g) {
    const Mat& W = t.value(w);
    const bool need_w = t.requires_grad(w);
    Mat* gw = need_w ? &t.grad_ref(w) : nullptr;
    Eigen::Index off = 0;
    for (const SourceRef& s : sources) {
      const Eigen::Index c = s.cols(t);
      if (s.var.valid() && t.requires_grad(s.var)) {
        t.accumulate(s.var, g * W.middleRows(off, c).transpose());
      }
      if (need_w) {
        if (s.var.valid()) {
          gw->middleRows(off, c).noalias() += t.value(s.var).transpose() * g;
        } else if (s.dense) {
          gw->middleRows(off, c).noalias() += s.dense->transpose() * g;
        } else {
          gw->middleRows(off, c) += s.sparse->transpose() * g;
        }
      }
      off += c;
    }
  });
}

// --- dropout -------------------------------------------------------------------

/// Inverted dropout with a mask drawn at build time.
inline Var dropout(Tape& t, Var a, double p, Rng& rng) {
  const Mat& x = t.value(a);
  auto mask = std::make_shared<Mat>(x.rows(), x.cols());
  const double keep = 1.0 - p;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      (*mask)(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
  }
  Mat value = x.cwiseProduct(*mask);
  return t.push(std::move(value), t.requires_grad(a),
                [a, mask](Tape& t, const Mat& g) {
                  t.accumulate(a, g.cwiseProduct(*mask));
                });
}

// --- output head ---------------------------------------------------------------

inline Var softmax_rows(Tape& t, Var a) {
  const Mat& x = t.value(a);
  Mat value(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    value.row(r) = (x.row(r).array() - mx).exp();
    value.row(r) /= value.row(r).sum();
  }
  Var out = t.push(std::move(value), t.requires_grad(a), nullptr);
  t.set_backward(out, [a, out](Tape& t, const Mat& g) {
    if (!t.requires_grad(a)) return;
    const Mat& p = t.value(out);
    Mat& ga = t.grad_ref(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).dot(p.row(r));
      ga.row(r) += (p.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
  });
  return out;
}

/// -(1/|mask|) * sum over masked rows of log p(true class), probabilities
/// clamped at eps inside the log.
inline Var masked_cross_entropy(Tape& t, Var probs, const std::vector<int>* labels,
                                const std::vector<int>* mask_rows, double eps) {
  if (mask_rows->empty()) throw ConfigError("loss: empty mask");
  const Mat& P = t.value(probs);
  double total = 0.0;
  for (int r : *mask_rows) {
    total -= std::log(std::max(P(r, (*labels)[static_cast<std::size_t>(r)]), eps));
  }
  Mat value(1, 1);
  value(0, 0) = total / static_cast<double>(mask_rows->size());
  return t.push(std::move(value), t.requires_grad(probs),
                [probs, labels, mask_rows, eps](Tape& t, const Mat& g) {
                  if (!t.requires_grad(probs)) return;
                  const Mat& P = t.value(probs);
                  Mat& gp = t.grad_ref(probs);
                  const double scale =
                      g(0, 0) / static_cast<double>(mask_rows->size());
                  for (int r : *mask_rows) {
                    const int y = (*labels)[static_cast<std::size_t>(r)];
                    if (P(r, y) > eps) gp(r, y) -= scale / P(r, y);
                  }
                });
}

/// Mean over masked rows of the label-summed binary cross-entropy.
inline Var masked_binary_cross_entropy(Tape& t, Var probs, const Mat* targets,
                                       const std::vector<int>* mask_rows,
                                       double eps) {
  if (mask_rows->empty()) throw ConfigError("loss: empty mask");
  const Mat& P = t.value(probs);
  double total = 0.0;
  for (int r : *mask_rows) {
    for (Eigen::Index c = 0; c < P.cols(); ++c) {
      const double y = (*targets)(r, c);
      total -= y * std::log(std::max(P(r, c), eps)) +
               (1.0 - y) * std::log(std::max(1.0 - P(r, c), eps));
    }
  }
  Mat value(1, 1);
  value(0, 0) = total / static_cast<double>(mask_rows->size());
  return t.push(std::move(value), t.requires_grad(probs),
                [probs, targets, mask_rows, eps](Tape& t, const Mat& g) {
                  if (!t.requires_grad(probs)) return;
                  const Mat& P = t.value(probs);
                  Mat& gp = t.grad_ref(probs);
                  const double scale =
                      g(0, 0) / static_cast<double>(mask_rows->size());
                  for (int r : *mask_rows) {
                    for (Eigen::Index c = 0; c < P.cols(); ++c) {
                      const double y = (*targets)(r, c);
                      double d = 0.0;
                      if (P(r, c) > eps) d -= y / P(r, c);
                      if (1.0 - P(r, c) > eps) d += (1.0 - y) / (1.0 - P(r, c));
                      gp(r, c) += scale * d;
                    }
                  }
                });
}

}  // namespace evognn::ad

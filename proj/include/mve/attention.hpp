#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mve/embedding.hpp"
#include "mve/error.hpp"
#include "mve/graph.hpp"

namespace mve {

enum class Task { classification, link };

struct LabeledNode {
  NodeId node = 0;
  std::vector<double> y;  // binary indicator over label ids
};

// Supervision for the attention unit: labeled nodes or positive node pairs.
struct LabeledSet {
  Task task = Task::classification;
  std::vector<std::string> label_names;  // classification only
  std::vector<LabeledNode> nodes;
  std::vector<std::pair<NodeId, NodeId>> pairs;

  std::size_t label_count() const { return label_names.size(); }
  std::size_t size() const { return task == Task::classification ? nodes.size() : pairs.size(); }
  bool empty() const { return size() == 0; }

  void validate(std::size_t node_count) const {
    for (const auto& n : nodes) {
      if (n.node >= node_count) throw InputError("labeled node index out of range");
      if (n.y.size() != label_names.size()) throw InputError("label vector length mismatch");
    }
    for (const auto& [a, b] : pairs)
      if (a >= node_count || b >= node_count) throw InputError("labeled pair index out of range");
  }
};

// View feature vectors z_k (each of length K*d) plus, for classification, the
// linear map w (label_count x d) of the square loss.
struct AttentionParams {
  std::size_t views = 0;
  std::size_t dim = 0;
  std::size_t labels = 0;
  std::vector<double> z;
  std::vector<double> w;

  AttentionParams() = default;
  AttentionParams(std::size_t k, std::size_t d, std::size_t label_count = 0)
      : views(k), dim(d), labels(label_count), z(k * k * d, 0.0), w(label_count * d, 0.0) {}

  std::size_t concat_dim() const { return views * dim; }
  std::span<double> z_row(std::size_t k) { return {z.data() + k * concat_dim(), concat_dim()}; }
  std::span<const double> z_row(std::size_t k) const { return {z.data() + k * concat_dim(), concat_dim()}; }
  std::span<double> w_row(std::size_t l) { return {w.data() + l * dim, dim}; }
  std::span<const double> w_row(std::size_t l) const { return {w.data() + l * dim, dim}; }

  bool finite() const { return all_finite(z) && all_finite(w); }

  friend bool operator==(const AttentionParams&, const AttentionParams&) = default;
};

// Softmax over view logits with max subtraction.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  const double top = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

// lambda_k = softmax_k(z_k . x^C).
inline std::vector<double> view_weights(std::span<const double> concat, const AttentionParams& params) {
  if (concat.size() != params.concat_dim()) throw InputError("view_weights: dimension mismatch");
  std::vector<double> logits(params.views);
  for (std::size_t k = 0; k < params.views; ++k) logits[k] = dot(params.z_row(k), concat);
  return softmax(logits);
}

inline WeightMatrix weights_for_all(const EmbeddingStore& store, const AttentionParams& params) {
  WeightMatrix out(store.nodes(), store.views(), 0.0);
  for (std::size_t i = 0; i < store.nodes(); ++i) {
    const auto lambda = view_weights(store.concat(static_cast<NodeId>(i)), params);
    std::copy(lambda.begin(), lambda.end(), out.row(i).begin());
  }
  return out;
}

// Loss value plus dO/dx_i for each node the loss touches (nodes in first-touch
// order, gradients row-major).
struct NodeGradients {
  double loss = 0.0;
  std::size_t dim = 0;
  std::vector<NodeId> nodes;
  std::vector<double> grads;

  std::span<const double> grad(std::size_t r) const { return {grads.data() + r * dim, dim}; }

  std::span<double> accumulate(NodeId node, std::unordered_map<NodeId, std::size_t>& index) {
    auto [it, inserted] = index.try_emplace(node, nodes.size());
    if (inserted) {
      nodes.push_back(node);
      grads.resize(grads.size() + dim, 0.0);
    }
    return {grads.data() + it->second * dim, dim};
  }
};

// O = sum_i ||w x_i - y_i||^2 with dO/dx_i = 2 w^T (w x_i - y_i). `robust`
// maps a node to its robust vector.
template <typename RobustFn>
NodeGradients classification_loss(const LabeledSet& set, RobustFn&& robust, const AttentionParams& params) {
  NodeGradients out;
  out.dim = params.dim;
  std::unordered_map<NodeId, std::size_t> index;
  std::vector<double> residual(params.labels);
  for (const auto& item : set.nodes) {
    if (item.y.size() != params.labels) throw InputError("classification_loss: label length mismatch with w rows");
    const std::span<const double> x = robust(item.node);
    for (std::size_t l = 0; l < params.labels; ++l) {
      residual[l] = dot(params.w_row(l), x) - item.y[l];
      out.loss += residual[l] * residual[l];
    }
    auto g = out.accumulate(item.node, index);
    for (std::size_t l = 0; l < params.labels; ++l) {
      const auto wl = params.w_row(l);
      for (std::size_t a = 0; a < params.dim; ++a) g[a] += 2.0 * residual[l] * wl[a];
    }
  }
  return out;
}

// O = -sum_(i,j) cos(x_i, x_j). Pairs with a zero-norm endpoint are skipped.
template <typename RobustFn>
NodeGradients link_loss(const LabeledSet& set, RobustFn&& robust, std::size_t dim) {
  NodeGradients out;
  out.dim = dim;
  std::unordered_map<NodeId, std::size_t> index;
  std::size_t skipped = 0;
  for (const auto& [i, j] : set.pairs) {
    const std::span<const double> xi = robust(i);
    const std::span<const double> xj = robust(j);
    const double ni = std::sqrt(dot(xi, xi));
    const double nj = std::sqrt(dot(xj, xj));
    if (ni == 0.0 || nj == 0.0) {
      ++skipped;
      continue;
    }
    const double cos = dot(xi, xj) / (ni * nj);
    out.loss -= cos;
    // d cos / d x_i = x_j / (|x_i||x_j|) - cos * x_i / |x_i|^2
    auto gi = out.accumulate(i, index);
    for (std::size_t a = 0; a < dim; ++a) gi[a] -= xj[a] / (ni * nj) - cos * xi[a] / (ni * ni);
    auto gj = out.accumulate(j, index);
    for (std::size_t a = 0; a < dim; ++a) gj[a] -= xi[a] / (ni * nj) - cos * xj[a] / (nj * nj);
  }
  if (skipped > 0) warn("link_loss: skipped " + std::to_string(skipped) + " pair(s) with a zero-norm endpoint");
  return out;
}

template <typename RobustFn>
NodeGradients task_loss(const LabeledSet& set, RobustFn&& robust, const AttentionParams& params) {
  return set.task == Task::classification ? classification_loss(set, robust, params)
                                          : link_loss(set, robust, params.dim);
}

// dO/dz_k = sum_i [sum_l (dO/dl_i^k - dO/dl_i^l) l_i^k l_i^l] x_i^C,
// with dO/dl_i^k = (dO/dx_i) . x_i^k.
inline std::vector<double> attention_gradient(const NodeGradients& node_grads, const EmbeddingStore& store,
                                              const AttentionParams& params) {
  if (node_grads.dim != store.dim() || params.dim != store.dim() || params.views != store.views())
    throw InputError("attention_gradient: dimension mismatch");
  const std::size_t K = params.views;
  std::vector<double> gz(params.z.size(), 0.0);
  std::vector<double> dlambda(K);
  for (std::size_t r = 0; r < node_grads.nodes.size(); ++r) {
    const NodeId i = node_grads.nodes[r];
    const auto concat = store.concat(i);
    const auto lambda = view_weights(concat, params);
    const auto g = node_grads.grad(r);
    for (std::size_t k = 0; k < K; ++k) dlambda[k] = dot(g, store.view(static_cast<ViewId>(k), i));
    for (std::size_t k = 0; k < K; ++k) {
      double coeff = 0.0;
      for (std::size_t l = 0; l < K; ++l) coeff += (dlambda[k] - dlambda[l]) * lambda[k] * lambda[l];
      if (coeff == 0.0) continue;
      auto row = std::span<double>(gz.data() + k * params.concat_dim(), params.concat_dim());
      for (std::size_t a = 0; a < row.size(); ++a) row[a] += coeff * concat[a];
    }
  }
  return gz;
}

// Robust vectors of the nodes referenced by a labeled set, recomputed from the
// current z without touching the store.
class LocalRobust {
 public:
  LocalRobust(const EmbeddingStore& store, const LabeledSet& set) : store_(store) {
    auto add = [&](NodeId n) {
      if (slot_.try_emplace(n, nodes_.size()).second) nodes_.push_back(n);
    };
    for (const auto& item : set.nodes) add(item.node);
    for (const auto& [a, b] : set.pairs) {
      add(a);
      add(b);
    }
    values_.assign(nodes_.size() * store.dim(), 0.0);
  }

  void refresh(const AttentionParams& params) {
    const std::size_t d = store_.dim();
    for (std::size_t r = 0; r < nodes_.size(); ++r) {
      const auto lambda = view_weights(store_.concat(nodes_[r]), params);
      std::span<double> x(values_.data() + r * d, d);
      std::fill(x.begin(), x.end(), 0.0);
      for (std::size_t k = 0; k < store_.views(); ++k) {
        const auto v = store_.view(static_cast<ViewId>(k), nodes_[r]);
        for (std::size_t a = 0; a < d; ++a) x[a] += lambda[k] * v[a];
      }
    }
  }

  std::span<const double> operator()(NodeId n) const {
    return {values_.data() + slot_.at(n) * store_.dim(), store_.dim()};
  }

 private:
  const EmbeddingStore& store_;
  std::vector<NodeId> nodes_;
  std::unordered_map<NodeId, std::size_t> slot_;
  std::vector<double> values_;
};

// Task loss of the labeled set with robust vectors voted by softmax(z . x^C).
inline double attention_objective(const LabeledSet& set, const EmbeddingStore& store, const AttentionParams& params) {
  LocalRobust robust(store, set);
  robust.refresh(params);
  return task_loss(set, robust, params).loss;
}

struct AttentionOptions {
  std::size_t epochs = 200;
  double step = 0.1;             // z
  double tolerance = 1e-6;
  double classifier_step = 0.01;  // w; slower than z so the classifier cannot absorb the view choice
};

struct AttentionReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::size_t epochs_run = 0;
  double final_step_z = 0.0;
  double final_step_w = 0.0;
};

// Full-batch descent alternating a w step (classification only) with a z step.
// Steps follow the per-example mean gradient; a step that raises the loss is
// rejected and its step size halved, so the returned parameters are the best
// seen. View vectors are read-only here.
inline AttentionReport train_attention(const LabeledSet& set, const EmbeddingStore& store, AttentionParams& params,
                                       const AttentionOptions& opt = {}) {
  AttentionReport report;
  if (set.empty()) return report;
  if (set.task == Task::classification && params.labels != set.label_count())
    throw InputError("train_attention: classifier rows do not match label count");

  LocalRobust robust(store, set);
  auto evaluate = [&](const AttentionParams& p) {
    robust.refresh(p);
    return task_loss(set, robust, p);
  };

  const double scale = 1.0 / static_cast<double>(set.size());
  auto current = evaluate(params);
  if (!std::isfinite(current.loss))
    throw NumericError("attention loss is not finite at step size " + std::to_string(opt.step));
  report.loss_before = current.loss;
  double step_w = opt.classifier_step;
  double step_z = opt.step;
  const double min_step_z = opt.step * 1e-8;
  const double min_step_w = opt.classifier_step * 1e-8;

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const double epoch_start = current.loss;
    bool moved = false;

    if (set.task == Task::classification && step_w > min_step_w) {
      // dO/dw_l = sum_i 2 (w x_i - y_i)_l x_i
      std::vector<double> gw(params.w.size(), 0.0);
      for (const auto& item : set.nodes) {
        const auto x = robust(item.node);
        for (std::size_t l = 0; l < params.labels; ++l) {
          const double res = dot(params.w_row(l), x) - item.y[l];
          for (std::size_t a = 0; a < params.dim; ++a) gw[l * params.dim + a] += 2.0 * res * x[a];
        }
      }
      AttentionParams trial = params;
      for (std::size_t a = 0; a < gw.size(); ++a) trial.w[a] -= step_w * scale * gw[a];
      auto next = evaluate(trial);
      if (std::isfinite(next.loss) && next.loss < current.loss) {
        params = std::move(trial);
        current = std::move(next);
        moved = true;
      } else {
        step_w *= 0.5;
        robust.refresh(params);
      }
    }

    if (step_z > min_step_z) {
      const auto gz = attention_gradient(current, store, params);
      AttentionParams trial = params;
      for (std::size_t a = 0; a < gz.size(); ++a) trial.z[a] -= step_z * scale * gz[a];
      auto next = evaluate(trial);
      if (std::isfinite(next.loss) && next.loss < current.loss) {
        params = std::move(trial);
        current = std::move(next);
        moved = true;
      } else {
        step_z *= 0.5;
        robust.refresh(params);
      }
    }

    report.epochs_run = epoch + 1;
    const bool exhausted = step_z <= min_step_z && (set.task != Task::classification || step_w <= min_step_w);
    if (exhausted) break;
    if (moved && epoch_start - current.loss < opt.tolerance) break;
  }
  if (!params.finite()) throw NumericError("attention parameters became non-finite");
  report.loss_after = current.loss;
  report.final_step_z = step_z;
  report.final_step_w = step_w;
  return report;
}

// ---- labeled-set files --------------------------------------------------

// "TOKEN LABEL[,LABEL...]" per line. Unknown tokens are skipped with a warning;
// repeated tokens merge their labels.
inline LabeledSet read_labels(std::istream& in, const Vocabulary& vocab, const std::string& source = "labels") {
  LabeledSet set;
  set.task = Task::classification;
  std::map<std::string, std::size_t> label_id;
  std::vector<std::pair<NodeId, std::vector<std::size_t>>> rows;
  std::unordered_map<NodeId, std::size_t> row_of;
  std::string line;
  std::size_t line_no = 0, unknown = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != 2) throw InputError("malformed line " + std::to_string(line_no) + " in " + source);
    const auto node = vocab.find(fields[0]);
    if (!node) {
      ++unknown;
      continue;
    }
    auto [it, inserted] = row_of.try_emplace(*node, rows.size());
    if (inserted) rows.push_back({*node, {}});
    std::string_view labels = fields[1];
    while (!labels.empty()) {
      const auto comma = labels.find(',');
      const auto name = labels.substr(0, comma);
      if (name.empty()) throw InputError("empty label at line " + std::to_string(line_no) + " in " + source);
      auto [lit, fresh] = label_id.try_emplace(std::string(name), set.label_names.size());
      if (fresh) set.label_names.emplace_back(name);
      auto& ids = rows[it->second].second;
      if (std::find(ids.begin(), ids.end(), lit->second) == ids.end()) ids.push_back(lit->second);
      labels = comma == std::string_view::npos ? std::string_view{} : labels.substr(comma + 1);
    }
  }
  if (unknown > 0) warn(std::to_string(unknown) + " labeled token(s) in " + source + " are not in the graph");
  for (auto& [node, ids] : rows) {
    LabeledNode item{node, std::vector<double>(set.label_names.size(), 0.0)};
    for (auto id : ids) item.y[id] = 1.0;
    set.nodes.push_back(std::move(item));
  }
  return set;
}

// "TOKEN TOKEN" per line.
inline LabeledSet read_pairs(std::istream& in, const Vocabulary& vocab, const std::string& source = "pairs") {
  LabeledSet set;
  set.task = Task::link;
  std::string line;
  std::size_t line_no = 0, unknown = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != 2) throw InputError("malformed line " + std::to_string(line_no) + " in " + source);
    const auto a = vocab.find(fields[0]);
    const auto b = vocab.find(fields[1]);
    if (!a || !b) {
      ++unknown;
      continue;
    }
    set.pairs.emplace_back(*a, *b);
  }
  if (unknown > 0) warn(std::to_string(unknown) + " pair(s) in " + source + " reference unknown tokens");
  return set;
}

// Plain-text parameter dump: header "K d L", then K rows of z, then L rows of w,
// values in round-trip precision.
inline void write_attention(std::ostream& out, const AttentionParams& params) {
  out << params.views << ' ' << params.dim << ' ' << params.labels << '\n';
  char buf[40];
  auto emit = [&](std::span<const double> row) {
    for (std::size_t a = 0; a < row.size(); ++a) {
      std::snprintf(buf, sizeof buf, "%.17g", row[a]);
      out << (a ? " " : "") << buf;
    }
    out << '\n';
  };
  for (std::size_t k = 0; k < params.views; ++k) emit(params.z_row(k));
  for (std::size_t l = 0; l < params.labels; ++l) emit(params.w_row(l));
}

inline AttentionParams read_attention(std::istream& in) {
  std::size_t k = 0, d = 0, l = 0;
  if (!(in >> k >> d >> l) || k == 0 || d == 0) throw InputError("bad attention parameter header");
  AttentionParams params(k, d, l);
  for (double& v : params.z)
    if (!(in >> v)) throw InputError("truncated attention parameters");
  for (double& v : params.w)
    if (!(in >> v)) throw InputError("truncated attention parameters");
  return params;
}

}  // namespace mve

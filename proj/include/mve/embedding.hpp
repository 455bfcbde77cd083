#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mve/error.hpp"
#include "mve/graph.hpp"
#include "mve/rng.hpp"

namespace mve {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Per-node view weights (lambda), |V| rows by K columns, row-major.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(std::size_t nodes, std::size_t views, double fill) : nodes_(nodes), views_(views), data_(nodes * views, fill) {}

  static WeightMatrix uniform(std::size_t nodes, std::size_t views) {
    return WeightMatrix(nodes, views, 1.0 / static_cast<double>(views));
  }

  std::size_t nodes() const { return nodes_; }
  std::size_t views() const { return views_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * views_, views_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * views_, views_}; }
  double operator()(std::size_t i, std::size_t k) const { return data_[i * views_ + k]; }
  double& operator()(std::size_t i, std::size_t k) { return data_[i * views_ + k]; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

 private:
  std::size_t nodes_ = 0;
  std::size_t views_ = 0;
  std::vector<double> data_;
};

// Parameters of the collaboration model:
//   view-specific vectors x_i^k (K x |V| x d),
//   context vectors c_i (|V| x d, or K x |V| x d when contexts are per view),
//   robust vectors x_i (|V| x d), always the output of the last vote.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t nodes, std::size_t views, std::size_t dim, bool per_view_context = false)
      : nodes_(nodes),
        views_(views),
        dim_(dim),
        per_view_context_(per_view_context),
        view_(views * nodes * dim, 0.0),
        context_((per_view_context ? views : 1) * nodes * dim, 0.0),
        robust_(nodes * dim, 0.0) {}

  std::size_t nodes() const { return nodes_; }
  std::size_t views() const { return views_; }
  std::size_t dim() const { return dim_; }
  bool per_view_context() const { return per_view_context_; }

  std::span<double> view(ViewId k, NodeId i) { return {view_.data() + (k * nodes_ + i) * dim_, dim_}; }
  std::span<const double> view(ViewId k, NodeId i) const { return {view_.data() + (k * nodes_ + i) * dim_, dim_}; }

  std::span<double> context(ViewId k, NodeId i) { return {context_.data() + context_offset(k, i), dim_}; }
  std::span<const double> context(ViewId k, NodeId i) const { return {context_.data() + context_offset(k, i), dim_}; }

  std::span<double> robust(NodeId i) { return {robust_.data() + i * dim_, dim_}; }
  std::span<const double> robust(NodeId i) const { return {robust_.data() + i * dim_, dim_}; }

  // x_i^C: the K view vectors of node i laid end to end in view order.
  std::vector<double> concat(NodeId i) const {
    std::vector<double> out(views_ * dim_);
    for (std::size_t k = 0; k < views_; ++k) {
      auto v = view(static_cast<ViewId>(k), i);
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(k * dim_));
    }
    return out;
  }

  std::span<const double> all_view_params() const { return view_; }
  std::span<const double> all_context_params() const { return context_; }
  std::span<const double> all_robust_params() const { return robust_; }

  bool finite() const { return all_finite(view_) && all_finite(context_) && all_finite(robust_); }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::size_t context_offset(ViewId k, NodeId i) const {
    return ((per_view_context_ ? k * nodes_ : 0) + i) * dim_;
  }

  std::size_t nodes_ = 0;
  std::size_t views_ = 0;
  std::size_t dim_ = 0;
  bool per_view_context_ = false;
  std::vector<double> view_;
  std::vector<double> context_;
  std::vector<double> robust_;
};

// Node vectors uniform in [-0.5/d, 0.5/d], contexts zero, robust vectors the
// unweighted mean of the view vectors.
inline EmbeddingStore init_embeddings(std::size_t nodes, std::size_t views, std::size_t dim, std::uint64_t seed,
                                      bool per_view_context = false) {
  if (nodes == 0 || views == 0 || dim == 0) throw InputError("init_embeddings: sizes must be positive");
  EmbeddingStore store(nodes, views, dim, per_view_context);
  Rng rng(seed);
  const double half = 0.5 / static_cast<double>(dim);
  for (std::size_t k = 0; k < views; ++k)
    for (std::size_t i = 0; i < nodes; ++i)
      for (double& x : store.view(static_cast<ViewId>(k), static_cast<NodeId>(i))) x = rng.uniform(-half, half);
  for (std::size_t i = 0; i < nodes; ++i) {
    auto r = store.robust(static_cast<NodeId>(i));
    for (std::size_t k = 0; k < views; ++k) {
      auto v = store.view(static_cast<ViewId>(k), static_cast<NodeId>(i));
      for (std::size_t c = 0; c < dim; ++c) r[c] += v[c];
    }
    for (double& x : r) x /= static_cast<double>(views);
  }
  return store;
}

// Negative-sampling surrogate for one positive edge (i -> j) in view k:
//   log s(c_j . x_i^k) + sum_n log s(-c_n . x_i^k)
inline double edge_objective(const EmbeddingStore& store, ViewId k, NodeId i, NodeId j,
                             std::span<const NodeId> negatives) {
  const auto x = store.view(k, i);
  double value = std::log(sigmoid(dot(store.context(k, j), x)));
  for (NodeId n : negatives) value += std::log(sigmoid(-dot(store.context(k, n), x)));
  return value;
}

// One stochastic ascent step on the surrogate above. The x_i^k gradient is
// accumulated against the pre-update contexts and applied last.
inline void sgd_edge_step(EmbeddingStore& store, ViewId k, NodeId i, NodeId j, std::span<const NodeId> negatives,
                          double rho) {
  const std::size_t d = store.dim();
  thread_local std::vector<double> grad;
  grad.assign(d, 0.0);
  auto x = store.view(k, i);

  auto update = [&](NodeId target, double label) {
    auto c = store.context(k, target);
    const double g = (label - sigmoid(dot(c, x))) * rho;
    for (std::size_t a = 0; a < d; ++a) grad[a] += g * c[a];
    for (std::size_t a = 0; a < d; ++a) c[a] += g * x[a];
  };
  update(j, 1.0);
  for (NodeId n : negatives) update(n, 0.0);
  for (std::size_t a = 0; a < d; ++a) x[a] += grad[a];

  if (!all_finite(x)) {
    throw NumericError("non-finite view vector after edge step: view " + std::to_string(k) + " edge " +
                       std::to_string(i) + "->" + std::to_string(j) + " rate " + std::to_string(rho));
  }
}

// Gradient step on eta * lambda * ||x_i^k - x_i||^2 w.r.t. x_i^k; the robust
// vector is held fixed.
inline void regularization_step(EmbeddingStore& store, NodeId i, ViewId k, double lambda, double eta, double rho) {
  const double scale = rho * eta * lambda * 2.0;
  if (scale == 0.0) return;
  auto x = store.view(k, i);
  const auto r = store.robust(i);
  for (std::size_t a = 0; a < x.size(); ++a) x[a] -= scale * (x[a] - r[a]);
}

// x_i = sum_k lambda_i^k x_i^k for every node.
inline void vote_robust(EmbeddingStore& store, const WeightMatrix& weights) {
  if (weights.nodes() != store.nodes() || weights.views() != store.views())
    throw InputError("vote_robust: weight matrix shape mismatch");
  for (std::size_t i = 0; i < store.nodes(); ++i) {
    double total = 0.0;
    for (double w : weights.row(i)) total += w;
    if (std::abs(total - 1.0) > 1e-6)
      throw InputError("vote_robust: weights of node " + std::to_string(i) + " sum to " + std::to_string(total));
  }
  for (std::size_t i = 0; i < store.nodes(); ++i) {
    const auto node = static_cast<NodeId>(i);
    auto r = store.robust(node);
    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t k = 0; k < store.views(); ++k) {
      const double w = weights(i, k);
      const auto v = store.view(static_cast<ViewId>(k), node);
      for (std::size_t a = 0; a < r.size(); ++a) r[a] += w * v[a];
    }
  }
}

// Linear decay from rho0 with a floor of rho0 * 1e-4.
inline double learning_rate(std::uint64_t consumed, double rho0, std::uint64_t total) {
  if (total == 0) return rho0;
  const double frac = static_cast<double>(consumed) / static_cast<double>(total);
  return rho0 * std::max(1e-4, 1.0 - frac);
}

namespace detail {

inline void write_fixed(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out << buf;
}

}  // namespace detail

// "|V| d" header then "TOKEN f1 ... fd" with 6-decimal fixed-point values.
template <typename RowFn>
void write_embedding_table(std::ostream& out, const Vocabulary& vocab, std::size_t dim, RowFn&& row) {
  out << vocab.size() << ' ' << dim << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.token(static_cast<NodeId>(i));
    for (double v : row(static_cast<NodeId>(i))) {
      out << ' ';
      detail::write_fixed(out, v);
    }
    out << '\n';
  }
}

inline void write_robust(std::ostream& out, const Vocabulary& vocab, const EmbeddingStore& store) {
  write_embedding_table(out, vocab, store.dim(), [&](NodeId i) { return store.robust(i); });
}

inline void write_view(std::ostream& out, const Vocabulary& vocab, const EmbeddingStore& store, ViewId k) {
  write_embedding_table(out, vocab, store.dim(), [&](NodeId i) { return store.view(k, i); });
}

// "TOKEN l_1 ... l_K" per node.
inline void write_weights(std::ostream& out, const Vocabulary& vocab, const WeightMatrix& weights) {
  for (std::size_t i = 0; i < weights.nodes(); ++i) {
    out << vocab.token(static_cast<NodeId>(i));
    for (double w : weights.row(i)) {
      out << ' ';
      detail::write_fixed(out, w);
    }
    out << '\n';
  }
}

// Reads a table written by write_embedding_table. Rows are returned in file
// order together with their tokens.
struct EmbeddingTable {
  std::vector<std::string> tokens;
  std::size_t dim = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
  std::size_t rows() const { return tokens.size(); }
};

inline EmbeddingTable read_embedding_table(std::istream& in, const std::string& source = "embedding file") {
  EmbeddingTable table;
  std::size_t count = 0;
  if (!(in >> count >> table.dim) || table.dim == 0) throw InputError("bad header in " + source);
  table.tokens.resize(count);
  table.values.resize(count * table.dim);
  for (std::size_t r = 0; r < count; ++r) {
    if (!(in >> table.tokens[r])) throw InputError("truncated " + source);
    for (std::size_t a = 0; a < table.dim; ++a)
      if (!(in >> table.values[r * table.dim + a])) throw InputError("truncated " + source);
  }
  return table;
}

}  // namespace mve

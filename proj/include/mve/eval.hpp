#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mve/attention.hpp"
#include "mve/embedding.hpp"
#include "mve/error.hpp"
#include "mve/graph.hpp"
#include "mve/rng.hpp"

namespace mve {

using LabelSet = std::vector<std::size_t>;

// Row-major feature matrix.
struct Features {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t rows() const { return dim ? values.size() / dim : 0; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * dim, dim}; }
};

struct OvrOptions {
  double c = 1.0;  // inverse L2 strength, LibLinear convention
  std::size_t epochs = 200;
};

// One L2-regularized logistic regression per label over standardized inputs.
// Label l is predicted when its margin is positive; if no margin is positive
// the top-scoring label is predicted.
class ClassifierOvR {
 public:
  std::size_t dim = 0;
  std::size_t labels = 0;
  std::vector<double> mean, scale;  // input standardization
  std::vector<double> weights;      // labels x dim
  std::vector<double> bias;
  std::vector<bool> never_positive;  // labels without training positives
  std::vector<std::vector<double>> loss_history;  // per label, one entry per epoch (plus initial)

  double margin(std::size_t label, std::span<const double> x) const {
    if (never_positive[label]) return -std::numeric_limits<double>::infinity();
    double m = bias[label];
    for (std::size_t a = 0; a < dim; ++a) m += weights[label * dim + a] * (x[a] - mean[a]) / scale[a];
    return m;
  }

  LabelSet predict(std::span<const double> x) const {
    LabelSet out;
    std::size_t best = 0;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < labels; ++l) {
      const double m = margin(l, x);
      if (m > 0.0) out.push_back(l);
      if (m > best_margin || l == 0) {
        best_margin = m;
        best = l;
      }
    }
    if (out.empty() && labels > 0) out.push_back(best);
    return out;
  }
};

namespace detail {

// Regularized mean logistic loss for one binary problem over standardized rows.
inline double logistic_objective(const std::vector<double>& z, std::size_t dim, const std::vector<double>& y,
                                 std::span<const double> w, double b, double reg) {
  const std::size_t n = y.size();
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double m = b;
    for (std::size_t a = 0; a < dim; ++a) m += w[a] * z[r * dim + a];
    const double t = -y[r] * m;
    loss += t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  }
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return loss / static_cast<double>(n) + 0.5 * reg * sq;
}

}  // namespace detail

// Gradient of the mean regularized logistic loss w.r.t. (w, b); exposed for
// testing. Labels y are +1/-1.
inline std::vector<double> logistic_gradient(const Features& x, const std::vector<double>& y, std::span<const double> w,
                                             double b, double reg) {
  const std::size_t n = x.rows(), d = x.dim;
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.row(r);
    double m = b;
    for (std::size_t a = 0; a < d; ++a) m += w[a] * row[a];
    const double coeff = -y[r] * sigmoid(-y[r] * m) / static_cast<double>(n);
    for (std::size_t a = 0; a < d; ++a) g[a] += coeff * row[a];
    g[d] += coeff;
  }
  for (std::size_t a = 0; a < d; ++a) g[a] += reg * w[a];
  return g;
}

inline double logistic_objective(const Features& x, const std::vector<double>& y, std::span<const double> w, double b,
                                 double reg) {
  return detail::logistic_objective(x.values, x.dim, y, w, b, reg);
}

inline ClassifierOvR fit_ovr(const Features& x, std::span<const LabelSet> truth, std::size_t label_count,
                             const OvrOptions& opt = {}) {
  const std::size_t n = x.rows(), d = x.dim;
  if (truth.size() != n) throw InputError("fit_ovr: feature/label row mismatch");
  if (n == 0) throw InputError("fit_ovr: empty training set");
  ClassifierOvR clf;
  clf.dim = d;
  clf.labels = label_count;
  clf.mean.assign(d, 0.0);
  clf.scale.assign(d, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < d; ++a) clf.mean[a] += x.row(r)[a] / static_cast<double>(n);
  for (std::size_t a = 0; a < d; ++a) {
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += std::pow(x.row(r)[a] - clf.mean[a], 2) / static_cast<double>(n);
    clf.scale[a] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  Features z{d, std::vector<double>(n * d)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t a = 0; a < d; ++a) z.values[r * d + a] = (x.row(r)[a] - clf.mean[a]) / clf.scale[a];

  // Smoothness bound: 0.25 * lambda_max([z 1]^T [z 1] / n) + reg, via power iteration.
  const double reg = 1.0 / (opt.c * static_cast<double>(n));
  std::vector<double> v(d + 1, 1.0), next(d + 1);
  double lambda_max = 1.0;
  for (int it = 0; it < 100; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      double p = v[d];
      for (std::size_t a = 0; a < d; ++a) p += z.values[r * d + a] * v[a];
      for (std::size_t a = 0; a < d; ++a) next[a] += p * z.values[r * d + a] / static_cast<double>(n);
      next[d] += p / static_cast<double>(n);
    }
    double norm = 0.0;
    for (double t : next) norm += t * t;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda_max = norm;
    for (std::size_t a = 0; a <= d; ++a) v[a] = next[a] / norm;
  }
  const double step = 1.0 / (1.2 * (0.25 * lambda_max + reg));

  clf.weights.assign(label_count * d, 0.0);
  clf.bias.assign(label_count, 0.0);
  clf.never_positive.assign(label_count, false);
  clf.loss_history.assign(label_count, {});
  std::vector<double> y(n);
  for (std::size_t l = 0; l < label_count; ++l) {
    std::size_t positives = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const bool pos = std::find(truth[r].begin(), truth[r].end(), l) != truth[r].end();
      y[r] = pos ? 1.0 : -1.0;
      positives += pos;
    }
    if (positives == 0) {
      clf.never_positive[l] = true;
      warn("fit_ovr: label " + std::to_string(l) + " has no positive training examples; it is never predicted");
      continue;
    }
    std::span<double> w(clf.weights.data() + l * d, d);
    double& b = clf.bias[l];
    auto& history = clf.loss_history[l];
    history.push_back(detail::logistic_objective(z.values, d, y, w, b, reg));
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
      const auto g = logistic_gradient(z, y, w, b, reg);
      for (std::size_t a = 0; a < d; ++a) w[a] -= step * g[a];
      b -= step * g[d];
      history.push_back(detail::logistic_objective(z.values, d, y, w, b, reg));
    }
  }
  return clf;
}

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

// Macro and micro F1 in percent. Labels that appear in neither truth nor
// predictions are left out of the macro average.
inline F1Scores f1_scores(std::span<const LabelSet> predicted, std::span<const LabelSet> truth, std::size_t label_count) {
  if (predicted.size() != truth.size()) throw InputError("f1_scores: length mismatch");
  std::vector<double> tp(label_count, 0), fp(label_count, 0), fn(label_count, 0);
  for (std::size_t r = 0; r < truth.size(); ++r) {
    const std::set<std::size_t> t(truth[r].begin(), truth[r].end());
    const std::set<std::size_t> p(predicted[r].begin(), predicted[r].end());
    for (auto l : p) {
      if (l >= label_count) throw InputError("f1_scores: label out of range");
      (t.count(l) ? tp : fp)[l] += 1;
    }
    for (auto l : t) {
      if (l >= label_count) throw InputError("f1_scores: label out of range");
      if (!p.count(l)) fn[l] += 1;
    }
  }
  F1Scores out;
  double macro_sum = 0.0, counted = 0.0, TP = 0, FP = 0, FN = 0;
  for (std::size_t l = 0; l < label_count; ++l) {
    TP += tp[l];
    FP += fp[l];
    FN += fn[l];
    const double denom = 2 * tp[l] + fp[l] + fn[l];
    if (denom == 0) continue;
    macro_sum += 2 * tp[l] / denom;
    counted += 1;
  }
  out.macro = counted > 0 ? 100.0 * macro_sum / counted : 0.0;
  const double micro_denom = 2 * TP + FP + FN;
  out.micro = micro_denom > 0 ? 100.0 * 2 * TP / micro_denom : 0.0;
  return out;
}

// P(score_pos > score_neg) + 0.5 P(tie), via average ranks.
inline double link_auc(std::span<const std::pair<double, bool>> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scored[a].first < scored[b].first; });
  double positives = 0, negatives = 0, rank_sum = 0;
  for (std::size_t p = 0; p < order.size();) {
    std::size_t q = p;
    while (q < order.size() && scored[order[q]].first == scored[order[p]].first) ++q;
    const double avg_rank = 0.5 * static_cast<double>(p + 1 + q);  // ranks p+1..q
    for (std::size_t r = p; r < q; ++r)
      if (scored[order[r]].second) rank_sum += avg_rank;
    p = q;
  }
  for (const auto& [s, pos] : scored) (pos ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) throw InputError("link_auc: need at least one positive and one negative");
  return (rank_sum - positives * (positives + 1) / 2) / (positives * negatives);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// Which table to use as node features.
struct Representation {
  enum class Kind { robust, view, concat } kind = Kind::robust;
  ViewId view = 0;

  static Representation robust() { return {Kind::robust, 0}; }
  static Representation of_view(ViewId k) { return {Kind::view, k}; }
  static Representation concat() { return {Kind::concat, 0}; }
};

inline Features extract_features(const EmbeddingStore& store, Representation repr, std::span<const NodeId> nodes) {
  Features f;
  f.dim = repr.kind == Representation::Kind::concat ? store.dim() * store.views() : store.dim();
  f.values.reserve(nodes.size() * f.dim);
  for (NodeId i : nodes) {
    switch (repr.kind) {
      case Representation::Kind::robust: {
        const auto r = store.robust(i);
        f.values.insert(f.values.end(), r.begin(), r.end());
        break;
      }
      case Representation::Kind::view: {
        if (repr.view >= store.views()) throw InputError("representation: view index out of range");
        const auto r = store.view(repr.view, i);
        f.values.insert(f.values.end(), r.begin(), r.end());
        break;
      }
      case Representation::Kind::concat: {
        const auto r = store.concat(i);
        f.values.insert(f.values.end(), r.begin(), r.end());
        break;
      }
    }
  }
  return f;
}

// Ground-truth label sets keyed by node.
struct NodeLabels {
  std::size_t label_count = 0;
  std::vector<std::string> label_names;
  std::vector<NodeId> nodes;
  std::vector<LabelSet> labels;

  static NodeLabels from(const LabeledSet& set) {
    NodeLabels out;
    out.label_count = set.label_count();
    out.label_names = set.label_names;
    for (const auto& item : set.nodes) {
      LabelSet ls;
      for (std::size_t l = 0; l < item.y.size(); ++l)
        if (item.y[l] > 0.5) ls.push_back(l);
      out.nodes.push_back(item.node);
      out.labels.push_back(std::move(ls));
    }
    return out;
  }
};

struct ClassificationSplit {
  std::vector<std::size_t> train;  // row indices into NodeLabels
  std::vector<std::size_t> test;
};

// Random train/test split over labeled nodes. Nodes in `pinned` (e.g. the
// attention supervision) always land in train and never in test.
inline ClassificationSplit split_nodes(const NodeLabels& labels, double train_fraction, std::uint64_t seed,
                                       std::span<const NodeId> pinned = {}) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("split: train fraction must be in (0,1)");
  const std::unordered_set<NodeId> pin(pinned.begin(), pinned.end());
  std::vector<std::size_t> rows(labels.nodes.size());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(seed);
  for (std::size_t r = rows.size(); r > 1; --r) std::swap(rows[r - 1], rows[rng.below(r)]);
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
  ClassificationSplit split;
  std::vector<std::size_t> rest;
  for (auto r : rows) (pin.count(labels.nodes[r]) ? split.train : rest).push_back(r);
  for (auto r : rest) (split.train.size() < target ? split.train : split.test).push_back(r);
  return split;
}

inline void check_disjoint(const ClassificationSplit& split) {
  const std::unordered_set<std::size_t> train(split.train.begin(), split.train.end());
  for (auto r : split.test)
    if (train.count(r)) throw InputError("split: train and test overlap");
}

// Fits the probe on train rows and scores the test rows.
inline F1Scores evaluate_classification(const EmbeddingStore& store, Representation repr, const NodeLabels& labels,
                                        const ClassificationSplit& split, const OvrOptions& opt = {},
                                        std::vector<LabelSet>* predictions = nullptr) {
  check_disjoint(split);
  if (split.test.empty()) throw InputError("evaluate_classification: empty test split");
  auto pick = [&](const std::vector<std::size_t>& rows) {
    std::vector<NodeId> nodes;
    std::vector<LabelSet> truth;
    for (auto r : rows) {
      nodes.push_back(labels.nodes[r]);
      truth.push_back(labels.labels[r]);
    }
    return std::make_pair(nodes, truth);
  };
  const auto [train_nodes, train_truth] = pick(split.train);
  const auto [test_nodes, test_truth] = pick(split.test);
  const auto clf = fit_ovr(extract_features(store, repr, train_nodes), train_truth, labels.label_count, opt);
  const auto test_x = extract_features(store, repr, test_nodes);
  std::vector<LabelSet> pred;
  for (std::size_t r = 0; r < test_x.rows(); ++r) pred.push_back(clf.predict(test_x.row(r)));
  const auto scores = f1_scores(pred, test_truth, labels.label_count);
  if (predictions) *predictions = std::move(pred);
  return scores;
}

// Non-edge negatives: node pairs (i != j) absent from every view (either
// direction) and from `exclude`, sampled uniformly.
inline std::vector<std::pair<NodeId, NodeId>> sample_non_edges(const MultiViewGraph& graph, std::size_t count,
                                                               std::span<const std::pair<NodeId, NodeId>> exclude,
                                                               std::uint64_t seed) {
  const std::size_t n = graph.node_count();
  if (n < 2) throw InputError("sample_non_edges: need at least two nodes");
  std::unordered_set<std::uint64_t> blocked;
  auto key = [](NodeId a, NodeId b) { return detail::pair_key(std::min(a, b), std::max(a, b)); };
  for (const auto& v : graph.views())
    for (const auto& e : v.edges()) blocked.insert(key(e.src, e.dst));
  for (const auto& [a, b] : exclude) blocked.insert(key(a, b));
  const double possible = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  if (static_cast<double>(blocked.size() + count) > possible)
    throw InputError("sample_non_edges: not enough non-edges to sample");
  Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> out;
  std::unordered_set<std::uint64_t> taken;
  while (out.size() < count) {
    const auto a = static_cast<NodeId>(rng.below(n));
    const auto b = static_cast<NodeId>(rng.below(n));
    if (a == b) continue;
    const auto k = key(a, b);
    if (blocked.count(k) || !taken.insert(k).second) continue;
    out.emplace_back(a, b);
  }
  return out;
}

// Cosine-similarity AUC of positives against negatives on the chosen table.
inline double evaluate_link(const EmbeddingStore& store, Representation repr,
                            std::span<const std::pair<NodeId, NodeId>> positives,
                            std::span<const std::pair<NodeId, NodeId>> negatives) {
  std::vector<std::pair<double, bool>> scored;
  auto score = [&](const std::pair<NodeId, NodeId>& p) {
    const std::array<NodeId, 2> ids{p.first, p.second};
    const auto f = extract_features(store, repr, ids);
    return cosine(f.row(0), f.row(1));
  };
  for (const auto& p : positives) scored.emplace_back(score(p), true);
  for (const auto& p : negatives) scored.emplace_back(score(p), false);
  return link_auc(scored);
}

// Splits the given nodes into `buckets` groups of near-equal size by total
// degree (summed over views), highest degree first.
inline std::vector<std::vector<std::size_t>> degree_buckets(const MultiViewGraph& graph, std::span<const NodeId> nodes,
                                                            std::size_t buckets) {
  if (buckets == 0) throw InputError("degree_buckets: need at least one bucket");
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  auto total = [&](NodeId i) {
    double s = 0;
    for (const auto& v : graph.views()) s += v.degree(i);
    return s;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total(nodes[a]) > total(nodes[b]); });
  std::vector<std::vector<std::size_t>> out(buckets);
  for (std::size_t p = 0; p < order.size(); ++p) out[p * buckets / order.size()].push_back(order[p]);
  return out;
}

}  // namespace mve

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mve/alias_table.hpp"
#include "mve/error.hpp"
#include "mve/rng.hpp"

namespace mve {

using NodeId = std::uint32_t;
using ViewId = std::uint32_t;

enum class Directedness { directed, undirected };

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Bijection between external node tokens and contiguous internal indices.
// Indices are assigned in first-appearance order and never change.
class Vocabulary {
 public:
  NodeId intern(std::string_view token) {
    auto it = index_.find(std::string(token));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<NodeId>(tokens_.size());
    tokens_.emplace_back(token);
    index_.emplace(tokens_.back(), id);
    return id;
  }

  std::optional<NodeId> find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeId at(std::string_view token) const {
    if (auto id = find(token)) return *id;
    throw InputError("unknown node token '" + std::string(token) + "'");
  }

  const std::string& token(NodeId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  std::span<const std::string> tokens() const { return tokens_; }

  // "INDEX TOKEN" per line.
  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << i << ' ' << tokens_[i] << '\n';
  }

  static Vocabulary read(std::istream& in) {
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::size_t index = 0;
      std::string token;
      if (!(fields >> index >> token) || index != vocab.size())
        throw InputError("malformed vocabulary line " + std::to_string(line_no));
      vocab.intern(token);
    }
    return vocab;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, NodeId> index_;
};

// Parsed contents of one view file, before degrees are computed.
struct ViewEdges {
  std::string name;
  std::vector<Edge> edges;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

inline std::uint64_t pair_key(NodeId a, NodeId b) { return (static_cast<std::uint64_t>(a) << 32) | b; }

}  // namespace detail

// Parses "SRC DST [WEIGHT]" lines. '#' comment lines and blank lines are skipped.
// Self-loops are dropped with a warning and duplicate pairs are merged by summing
// weights. Undirected input produces both directions with equal weight.
inline ViewEdges parse_view(std::istream& in, Directedness directedness, Vocabulary& vocab,
                            std::string name = "view") {
  ViewEdges view{std::move(name), {}};
  std::unordered_map<std::uint64_t, std::size_t> slot;
  auto add = [&](NodeId s, NodeId d, double w) {
    auto [it, inserted] = slot.try_emplace(detail::pair_key(s, d), view.edges.size());
    if (inserted)
      view.edges.push_back({s, d, w});
    else
      view.edges[it->second].weight += w;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = detail::split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != 2 && fields.size() != 3)
      throw InputError("malformed line " + std::to_string(line_no) + " in " + view.name);
    double weight = 1.0;
    if (fields.size() == 3) {
      const auto parsed = detail::parse_real(fields[2]);
      if (!parsed || std::isnan(*parsed))
        throw InputError("malformed line " + std::to_string(line_no) + " in " + view.name);
      weight = *parsed;
      if (!(weight > 0.0) || !std::isfinite(weight))
        throw InputError("non-positive weight at line " + std::to_string(line_no));
    }
    if (fields[0] == fields[1]) {
      warn("self-loop on '" + std::string(fields[0]) + "' at line " + std::to_string(line_no) + " of " +
           view.name + " ignored");
      continue;
    }
    const NodeId s = vocab.intern(fields[0]);
    const NodeId d = vocab.intern(fields[1]);
    add(s, d, weight);
    if (directedness == Directedness::undirected) add(d, s, weight);
  }
  if (view.edges.empty()) throw InputError("empty view file: " + view.name);
  return view;
}

inline ViewEdges load_view(const std::filesystem::path& path, Directedness directedness, Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open view file " + path.string());
  return parse_view(in, directedness, vocab, path.string());
}

// One view of the graph with degree bookkeeping and a CSR index of out-edges.
class View {
 public:
  View(std::string name, std::vector<Edge> edges, std::size_t node_count)
      : name_(std::move(name)), edges_(std::move(edges)), out_degree_(node_count, 0.0), degree_(node_count, 0.0) {
    if (edges_.empty()) throw InputError("view '" + name_ + "' has no edges");
    std::vector<std::size_t> counts(node_count + 1, 0);
    for (const auto& e : edges_) {
      if (e.src >= node_count || e.dst >= node_count) throw InputError("edge endpoint out of range in " + name_);
      if (!(e.weight > 0.0)) throw InputError("non-positive weight in view " + name_);
      out_degree_[e.src] += e.weight;
      degree_[e.src] += e.weight;
      degree_[e.dst] += e.weight;
      ++counts[e.src + 1];
    }
    for (std::size_t i = 1; i <= node_count; ++i) counts[i] += counts[i - 1];
    offsets_ = counts;
    adjacency_.resize(edges_.size());
    auto cursor = counts;
    for (std::size_t e = 0; e < edges_.size(); ++e) adjacency_[cursor[edges_[e].src]++] = e;
    for (std::size_t i = 0; i < node_count; ++i) {
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]),
                [&](std::size_t a, std::size_t b) { return edges_[a].dst < edges_[b].dst; });
    }
  }

  const std::string& name() const { return name_; }
  std::span<const Edge> edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  // Weighted out-degree d_i: sum of outgoing edge weights.
  double out_degree(NodeId i) const { return out_degree_.at(i); }
  // Weighted in+out degree, used for the negative-sampling distribution.
  double degree(NodeId i) const { return degree_.at(i); }
  std::span<const double> out_degrees() const { return out_degree_; }
  std::span<const double> degrees() const { return degree_; }

  // Weight of edge i->j, or 0 if absent.
  double weight(NodeId i, NodeId j) const {
    const auto first = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_.at(i));
    const auto last = adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_.at(i + 1));
    auto it = std::lower_bound(first, last, j, [&](std::size_t e, NodeId target) { return edges_[e].dst < target; });
    return (it != last && edges_[*it].dst == j) ? edges_[*it].weight : 0.0;
  }

  // Out-neighbours of i as edge records, ordered by destination.
  std::vector<Edge> out_edges(NodeId i) const {
    std::vector<Edge> out;
    for (std::size_t p = offsets_.at(i); p < offsets_.at(i + 1); ++p) out.push_back(edges_[adjacency_[p]]);
    return out;
  }

 private:
  std::string name_;
  std::vector<Edge> edges_;
  std::vector<double> out_degree_;
  std::vector<double> degree_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> adjacency_;
};

// A node universe shared by K >= 1 weighted directed edge sets. Immutable after
// construction.
class MultiViewGraph {
 public:
  MultiViewGraph(Vocabulary vocab, std::vector<ViewEdges> views) : vocab_(std::move(vocab)) {
    if (views.empty()) throw InputError("graph needs at least one view");
    views_.reserve(views.size());
    for (auto& v : views) views_.emplace_back(std::move(v.name), std::move(v.edges), vocab_.size());
  }

  std::size_t node_count() const { return vocab_.size(); }
  std::size_t view_count() const { return views_.size(); }
  const View& view(ViewId k) const { return views_.at(k); }
  std::span<const View> views() const { return views_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  std::size_t total_edges() const {
    std::size_t n = 0;
    for (const auto& v : views_) n += v.edge_count();
    return n;
  }

  std::optional<ViewId> find_view(std::string_view name) const {
    for (std::size_t k = 0; k < views_.size(); ++k)
      if (views_[k].name() == name) return static_cast<ViewId>(k);
    return std::nullopt;
  }

 private:
  Vocabulary vocab_;
  std::vector<View> views_;
};

struct ViewSource {
  std::string name;
  std::filesystem::path path;
  Directedness directedness = Directedness::undirected;
};

inline MultiViewGraph load_graph(std::span<const ViewSource> sources) {
  Vocabulary vocab;
  std::vector<ViewEdges> views;
  for (const auto& src : sources) {
    auto v = load_view(src.path, src.directedness, vocab);
    v.name = src.name;
    views.push_back(std::move(v));
  }
  return MultiViewGraph(std::move(vocab), std::move(views));
}

// Alias table over the edges of one view, each edge weighted by w_ij.
inline AliasTable build_edge_alias(const View& view) {
  if (view.edge_count() == 0) throw InputError("empty view '" + view.name() + "'");
  std::vector<double> w;
  w.reserve(view.edge_count());
  for (const auto& e : view.edges()) w.push_back(e.weight);
  return AliasTable(w);
}

// Unnormalized negative-sampling mass d^{3/4}; zero-degree nodes get zero mass.
inline std::vector<double> negative_mass(std::span<const double> degrees) {
  std::vector<double> mass(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) mass[i] = degrees[i] > 0.0 ? std::pow(degrees[i], 0.75) : 0.0;
  return mass;
}

// Per-view noise distribution P_neg(v) proportional to (in+out degree)^{3/4}.
class NegativeSampler {
 public:
  NegativeSampler() = default;

  explicit NegativeSampler(const MultiViewGraph& graph) {
    tables_.reserve(graph.view_count());
    for (const auto& v : graph.views()) tables_.push_back(from_degrees(v.degrees()));
  }

  static AliasTable from_degrees(std::span<const double> degrees) {
    const auto mass = negative_mass(degrees);
    bool any = false;
    for (double m : mass) any = any || m > 0.0;
    if (!any) throw InputError("negative sampler: all degrees are zero");
    return AliasTable(mass);
  }

  NodeId sample(ViewId k, Rng& rng) const { return tables_[k].sample(rng); }
  const AliasTable& table(ViewId k) const { return tables_.at(k); }
  std::size_t view_count() const { return tables_.size(); }

 private:
  std::vector<AliasTable> tables_;
};

inline NegativeSampler build_negative_sampler(const MultiViewGraph& graph) { return NegativeSampler(graph); }

// Empirical neighbour probability w_ij / d_i in view k.
inline double empirical_neighbor_prob(const MultiViewGraph& graph, NodeId i, NodeId j, ViewId k) {
  const auto& v = graph.view(k);
  const double d = v.out_degree(i);
  if (!(d > 0.0)) throw InputError("node has no out-edges in view");
  return v.weight(i, j) / d;
}

}  // namespace mve

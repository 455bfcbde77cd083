#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mve/attention.hpp"
#include "mve/error.hpp"
#include "mve/graph.hpp"
#include "mve/rng.hpp"

namespace mve {

// One generated view: a stochastic block model over the shared communities
// when informative, otherwise Erdos-Renyi at p_noise.
struct SynthView {
  std::string name;
  bool informative = true;
  double p_in = 0.0;
  double p_out = 0.0;
  double p_noise = 0.0;

  static SynthView sbm(std::string name, double p_in, double p_out) { return {std::move(name), true, p_in, p_out, 0.0}; }
  static SynthView noise(std::string name, double p) { return {std::move(name), false, 0.0, 0.0, p}; }
};

struct SynthSpec {
  std::size_t nodes = 400;
  std::size_t communities = 4;
  std::vector<SynthView> views;
  double holdout_fraction = 0.1;
  bool weighted = false;  // integer weights in [1, 5] instead of unit weights
  std::uint64_t seed = 7;

  void validate() const {
    if (nodes < 2) throw InputError("synth: need at least two nodes");
    if (communities < 1 || communities > nodes) throw InputError("synth: communities must be in [1, nodes]");
    if (views.empty()) throw InputError("synth: need at least one view");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw InputError("synth: holdout fraction must be in [0,1)");
    for (const auto& v : views) {
      if (v.informative && !(0.0 <= v.p_out && v.p_out <= v.p_in && v.p_in <= 1.0))
        throw InputError("synth: view '" + v.name + "' needs 0 <= p_out <= p_in <= 1");
      if (!v.informative && !(0.0 <= v.p_noise && v.p_noise <= 1.0))
        throw InputError("synth: view '" + v.name + "' needs p_noise in [0,1]");
    }
  }
};

// The informative-vs-noise instance used throughout the test suite.
inline SynthSpec default_synth_spec(std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.nodes = 400;
  spec.communities = 4;
  spec.views = {SynthView::sbm("informative", 0.2, 0.01), SynthView::noise("noise", 0.05)};
  spec.seed = seed;
  return spec;
}

struct SynthResult {
  MultiViewGraph graph;
  LabeledSet labels;   // community ids of every node in the graph
  LabeledSet heldout;  // withheld positive pairs
  std::vector<std::size_t> generated_edges;  // undirected edges per view before withholding
  std::vector<std::string> view_text;        // file contents, one per view
  std::string labels_text;
  std::string heldout_text;
};

inline std::string synth_token(std::size_t i) { return "n" + std::to_string(i); }

inline std::size_t synth_community(const SynthSpec& spec, std::size_t i) {
  const std::size_t size = spec.nodes / spec.communities;
  return std::min(i / size, spec.communities - 1);
}

inline SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.nodes;

  struct Pair {
    std::uint32_t a, b, w;
  };
  std::vector<std::vector<Pair>> raw(spec.views.size());
  std::vector<std::size_t> generated(spec.views.size(), 0);
  for (std::size_t k = 0; k < spec.views.size(); ++k) {
    const auto& v = spec.views[k];
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        const double p = v.informative ? (synth_community(spec, i) == synth_community(spec, j) ? v.p_in : v.p_out)
                                       : v.p_noise;
        if (!rng.bernoulli(p)) continue;
        const auto w = spec.weighted ? static_cast<std::uint32_t>(1 + rng.below(5)) : 1u;
        raw[k].push_back({i, j, w});
      }
    }
    generated[k] = raw[k].size();
  }

  // Withhold a seeded fraction of the union of informative edges from every view.
  std::vector<std::uint64_t> candidates;
  {
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t k = 0; k < spec.views.size(); ++k) {
      if (!spec.views[k].informative) continue;
      for (const auto& e : raw[k]) {
        const auto key = detail::pair_key(e.a, e.b);
        if (seen.insert(key).second) candidates.push_back(key);
      }
    }
  }
  for (std::size_t r = candidates.size(); r > 1; --r) std::swap(candidates[r - 1], candidates[rng.below(r)]);
  const auto withheld_count =
      static_cast<std::size_t>(std::llround(spec.holdout_fraction * static_cast<double>(candidates.size())));
  candidates.resize(withheld_count);
  std::sort(candidates.begin(), candidates.end());
  const std::unordered_set<std::uint64_t> withheld(candidates.begin(), candidates.end());

  std::vector<std::string> view_text;
  Vocabulary vocab;
  std::vector<ViewEdges> views;
  for (std::size_t k = 0; k < spec.views.size(); ++k) {
    std::ostringstream text;
    text << "# synthetic view " << spec.views[k].name << '\n';
    for (const auto& e : raw[k]) {
      if (withheld.count(detail::pair_key(e.a, e.b))) continue;
      text << synth_token(e.a) << ' ' << synth_token(e.b);
      if (spec.weighted) text << ' ' << e.w;
      text << '\n';
    }
    view_text.push_back(text.str());
    std::istringstream in(view_text.back());
    try {
      views.push_back(parse_view(in, Directedness::undirected, vocab, spec.views[k].name));
    } catch (const InputError&) {
      throw InputError("synth: view '" + spec.views[k].name + "' came out empty");
    }
  }

  std::ostringstream labels, pairs;
  for (std::size_t i = 0; i < n; ++i) labels << synth_token(i) << " c" << synth_community(spec, i) << '\n';
  for (auto key : candidates)
    pairs << synth_token(static_cast<std::size_t>(key >> 32)) << ' ' << synth_token(static_cast<std::size_t>(key & 0xffffffffu)) << '\n';

  // Label and pair sets over nodes that made it into the graph.
  LabeledSet label_set, heldout_set;
  label_set.task = Task::classification;
  for (std::size_t c = 0; c < spec.communities; ++c) label_set.label_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < n; ++i) {
    if (auto id = vocab.find(synth_token(i))) {
      LabeledNode item{*id, std::vector<double>(spec.communities, 0.0)};
      item.y[synth_community(spec, i)] = 1.0;
      label_set.nodes.push_back(std::move(item));
    }
  }
  heldout_set.task = Task::link;
  for (auto key : candidates) {
    auto a = vocab.find(synth_token(static_cast<std::size_t>(key >> 32)));
    auto b = vocab.find(synth_token(static_cast<std::size_t>(key & 0xffffffffu)));
    if (a && b) heldout_set.pairs.emplace_back(*a, *b);
  }
  return SynthResult{MultiViewGraph(std::move(vocab), std::move(views)),
                     std::move(label_set),
                     std::move(heldout_set),
                     std::move(generated),
                     std::move(view_text),
                     labels.str(),
                     pairs.str()};
}

// Writes <view>.txt per view, labels.txt, heldout.txt and a train config
// listing the views.
inline void write_synth(const std::filesystem::path& dir, const SynthSpec& spec, const SynthResult& result) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    out << text;
  };
  std::ostringstream cfg;
  for (std::size_t k = 0; k < spec.views.size(); ++k) {
    put(spec.views[k].name + ".txt", result.view_text[k]);
    cfg << "view=" << spec.views[k].name << '=' << spec.views[k].name << ".txt\n";
  }
  put("labels.txt", result.labels_text);
  put("heldout.txt", result.heldout_text);
  put("views.cfg", cfg.str());
}

}  // namespace mve

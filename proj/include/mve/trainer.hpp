#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mve/alias_table.hpp"
#include "mve/attention.hpp"
#include "mve/config.hpp"
#include "mve/embedding.hpp"
#include "mve/error.hpp"
#include "mve/graph.hpp"
#include "mve/rng.hpp"

namespace mve {

enum class Phase { embedding, attention, weights, vote };

struct IterationStats {
  std::size_t iteration = 0;
  std::uint64_t samples = 0;
  double learning_rate = 0.0;
  double sampled_loss = 0.0;  // mean negated surrogate over probed samples
  double attention_loss_before = 0.0;
  double attention_loss_after = 0.0;
  double embedding_seconds = 0.0;
  double attention_seconds = 0.0;
  double vote_seconds = 0.0;
  std::vector<std::uint64_t> view_picks;  // samples drawn per view
  std::vector<Phase> phases;
};

// Everything the optimization loop mutates, plus the immutable samplers.
struct TrainState {
  const TrainConfig* config = nullptr;
  const MultiViewGraph* graph = nullptr;
  const LabeledSet* labeled = nullptr;

  EmbeddingStore store;
  AttentionParams attention;
  WeightMatrix weights;

  std::vector<AliasTable> edge_tables;
  NegativeSampler negatives;
  AliasTable view_table;  // proportional view choice

  Rng view_rng{0};
  std::vector<Rng> sample_rngs;  // one stream per view for edge + negative draws

  std::size_t iteration = 0;
  std::uint64_t samples_consumed = 0;
  std::uint64_t total_samples = 0;
  double current_lr = 0.0;
};

inline TrainState make_state(const TrainConfig& config, const MultiViewGraph& graph, const LabeledSet& labeled) {
  TrainState state;
  state.config = &config;
  state.graph = &graph;
  state.labeled = &labeled;
  const std::size_t n = graph.node_count();
  const std::size_t K = graph.view_count();
  state.store = init_embeddings(n, K, config.dim, config.seed, config.no_collaboration);
  state.attention = AttentionParams(K, config.dim, labeled.task == Task::classification ? labeled.label_count() : 0);
  state.weights = WeightMatrix::uniform(n, K);

  for (const auto& v : graph.views()) state.edge_tables.push_back(build_edge_alias(v));
  state.negatives = build_negative_sampler(graph);
  std::vector<double> sizes;
  for (const auto& v : graph.views()) sizes.push_back(static_cast<double>(v.edge_count()));
  state.view_table = AliasTable(sizes);

  Rng root(config.seed ^ 0x6d7665ULL);
  state.view_rng = root.split(0);
  for (std::size_t k = 0; k < K; ++k) state.sample_rngs.push_back(root.split(k + 1));
  state.total_samples = config.samples_per_iter * config.iterations;
  state.current_lr = config.lr;
  return state;
}

namespace detail {

struct SampleLoop {
  TrainState& state;
  Rng& view_rng;
  std::vector<Rng>& sample_rngs;
  std::uint64_t lr_offset;
  std::uint64_t lr_stride;
  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;
  std::vector<std::uint64_t> picks;

  void run(std::uint64_t count) {
    const auto& cfg = *state.config;
    const std::size_t K = state.graph->view_count();
    picks.assign(K, 0);
    std::vector<NodeId> neg(cfg.negatives);
    for (std::uint64_t s = 0; s < count; ++s) {
      const double rho = learning_rate(lr_offset + s * lr_stride, cfg.lr, state.total_samples);
      const ViewId k = cfg.view_sampling == ViewSampling::uniform ? static_cast<ViewId>(view_rng.below(K))
                                                                  : static_cast<ViewId>(state.view_table.sample(view_rng));
      ++picks[k];
      Rng& rng = sample_rngs[k];
      const Edge& e = state.graph->view(k).edges()[state.edge_tables[k].sample(rng)];
      for (auto& v : neg) {
        do {
          v = state.negatives.sample(k, rng);
        } while (v == e.dst);
      }
      if ((s & 127) == 0) {
        loss_sum -= edge_objective(state.store, k, e.src, e.dst, neg);
        ++loss_count;
      }
      sgd_edge_step(state.store, k, e.src, e.dst, neg, rho);
      if (cfg.eta > 0.0) regularization_step(state.store, e.src, k, state.weights(e.src, k), cfg.eta, rho);
    }
  }
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// One pass of the optimization loop: T edge-sampled SGD steps (each followed
// by the regularizer on the edge source), then attention training, then the
// weight refresh and the vote.
inline IterationStats run_iteration(TrainState& state) {
  const auto& cfg = *state.config;
  IterationStats stats;
  stats.iteration = state.iteration;
  const std::uint64_t T = cfg.samples_per_iter;

  auto t0 = std::chrono::steady_clock::now();
  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;
  if (cfg.workers <= 1) {
    detail::SampleLoop loop{state, state.view_rng, state.sample_rngs, state.samples_consumed, 1, 0.0, 0, {}};
    loop.run(T);
    loss_sum = loop.loss_sum;
    loss_count = loop.loss_count;
    stats.view_picks = loop.picks;
  } else {
    // Lock-free shared updates; collisions between workers are tolerated.
    const std::size_t W = cfg.workers;
    std::vector<Rng> view_rngs;
    std::vector<std::vector<Rng>> sample_rngs(W);
    for (std::size_t w = 0; w < W; ++w) {
      view_rngs.push_back(state.view_rng.split(w));
      for (std::size_t k = 0; k < state.sample_rngs.size(); ++k)
        sample_rngs[w].push_back(state.sample_rngs[k].split(w));
    }
    std::vector<detail::SampleLoop> loops;
    for (std::size_t w = 0; w < W; ++w)
      loops.push_back({state, view_rngs[w], sample_rngs[w], state.samples_consumed + w, W, 0.0, 0, {}});
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(W);
    for (std::size_t w = 0; w < W; ++w) {
      const std::uint64_t share = T / W + (w < T % W ? 1 : 0);
      pool.emplace_back([&, w, share] {
        try {
          loops[w].run(share);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    stats.view_picks.assign(state.sample_rngs.size(), 0);
    for (const auto& l : loops) {
      loss_sum += l.loss_sum;
      loss_count += l.loss_count;
      for (std::size_t k = 0; k < l.picks.size(); ++k) stats.view_picks[k] += l.picks[k];
    }
  }
  state.samples_consumed += T;
  state.current_lr = learning_rate(state.samples_consumed, cfg.lr, state.total_samples);
  stats.samples = T;
  stats.learning_rate = state.current_lr;
  stats.sampled_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
  stats.embedding_seconds = detail::seconds_since(t0);
  stats.phases.push_back(Phase::embedding);

  t0 = std::chrono::steady_clock::now();
  if (!cfg.no_attention && state.labeled && !state.labeled->empty()) {
    const auto report = train_attention(*state.labeled, state.store, state.attention,
                                        {cfg.attention_epochs, cfg.attention_step, cfg.attention_tolerance, cfg.classifier_step});
    stats.attention_loss_before = report.loss_before;
    stats.attention_loss_after = report.loss_after;
    stats.phases.push_back(Phase::attention);
  }
  stats.attention_seconds = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  state.weights = cfg.no_attention ? WeightMatrix::uniform(state.store.nodes(), state.store.views())
                                   : weights_for_all(state.store, state.attention);
  stats.phases.push_back(Phase::weights);
  vote_robust(state.store, state.weights);
  stats.phases.push_back(Phase::vote);
  stats.vote_seconds = detail::seconds_since(t0);

  if (!state.store.finite() || !state.attention.finite())
    throw NumericError("non-finite parameters after iteration " + std::to_string(state.iteration));
  ++state.iteration;
  return stats;
}

struct TrainResult {
  EmbeddingStore store;
  AttentionParams attention;
  WeightMatrix weights;
  std::vector<IterationStats> history;
};

using IterationCallback = std::function<void(const IterationStats&)>;

inline TrainResult train(const TrainConfig& config, const MultiViewGraph& graph, const LabeledSet& labeled,
                         const IterationCallback& on_iteration = {}) {
  config.validate();
  labeled.validate(graph.node_count());
  if (labeled.empty() && !config.no_attention)
    warn("no labeled data: attention is skipped and view weights stay at their initial values");
  auto state = make_state(config, graph, labeled);
  TrainResult result;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    auto stats = run_iteration(state);
    if (on_iteration) on_iteration(stats);
    result.history.push_back(std::move(stats));
  }
  if (config.iterations == 0) vote_robust(state.store, state.weights);
  result.store = std::move(state.store);
  result.attention = std::move(state.attention);
  result.weights = std::move(state.weights);
  return result;
}

// Per-iteration log lines as "metric=value" records. Timing is excluded so
// identical runs produce identical logs.
inline std::string format_iteration(const IterationStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iteration=%zu samples=%llu lr=%.6g sampled_loss=%.6f attention_loss_before=%.6f "
                "attention_loss_after=%.6f",
                s.iteration, static_cast<unsigned long long>(s.samples), s.learning_rate, s.sampled_loss,
                s.attention_loss_before, s.attention_loss_after);
  return buf;
}

// Writes vocab.txt, robust.emb, view_<name>.emb, weights.txt, attention.txt and
// train_log.txt into dir.
inline void write_outputs(const std::filesystem::path& dir, const MultiViewGraph& graph, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  const auto& vocab = graph.vocabulary();
  {
    auto out = open("vocab.txt");
    vocab.write(out);
  }
  {
    auto out = open("robust.emb");
    write_robust(out, vocab, result.store);
  }
  for (std::size_t k = 0; k < graph.view_count(); ++k) {
    auto out = open("view_" + graph.view(static_cast<ViewId>(k)).name() + ".emb");
    write_view(out, vocab, result.store, static_cast<ViewId>(k));
  }
  {
    auto out = open("weights.txt");
    write_weights(out, vocab, result.weights);
  }
  {
    auto out = open("attention.txt");
    write_attention(out, result.attention);
  }
  {
    auto out = open("views.txt");
    for (const auto& v : graph.views()) out << v.name() << '\n';
  }
  {
    auto out = open("train_log.txt");
    for (const auto& s : result.history) out << format_iteration(s) << '\n';
  }
}

}  // namespace mve

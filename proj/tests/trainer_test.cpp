#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mve/synth.hpp"
#include "mve/trainer.hpp"

namespace mve {
namespace {

MultiViewGraph ring_graph(std::size_t n, std::vector<std::size_t> strides) {
  Vocabulary vocab;
  for (std::size_t i = 0; i < n; ++i) vocab.intern("v" + std::to_string(i));
  std::vector<ViewEdges> views;
  for (std::size_t k = 0; k < strides.size(); ++k) {
    std::ostringstream text;
    for (std::size_t i = 0; i < n; ++i) text << "v" << i << " v" << (i + strides[k]) % n << '\n';
    std::istringstream in(text.str());
    views.push_back(parse_view(in, Directedness::undirected, vocab, "s" + std::to_string(strides[k])));
  }
  return MultiViewGraph(std::move(vocab), std::move(views));
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.samples_per_iter = 20'000;
  cfg.iterations = 2;
  cfg.seed = 3;
  return cfg;
}

LabeledSet ring_labels(const MultiViewGraph& g) {
  LabeledSet set;
  set.label_names = {"even", "odd"};
  for (NodeId i = 0; i < g.node_count(); i += 3) set.nodes.push_back({i, {i % 2 == 0 ? 1.0 : 0.0, i % 2 ? 1.0 : 0.0}});
  return set;
}

TEST(RunIteration, PhaseOrder) {
  const auto g = ring_graph(30, {1, 2});
  auto cfg = small_config();
  const auto labels = ring_labels(g);
  auto state = make_state(cfg, g, labels);
  const auto stats = run_iteration(state);
  EXPECT_EQ(stats.phases, (std::vector<Phase>{Phase::embedding, Phase::attention, Phase::weights, Phase::vote}));

  cfg.no_attention = true;
  auto plain = make_state(cfg, g, labels);
  EXPECT_EQ(run_iteration(plain).phases, (std::vector<Phase>{Phase::embedding, Phase::weights, Phase::vote}));
}

TEST(RunIteration, ZeroSamplesLeavesViewVectorsUnchanged) {
  const auto g = ring_graph(30, {1, 2});
  auto cfg = small_config();
  cfg.samples_per_iter = 0;
  const auto labels = ring_labels(g);
  auto state = make_state(cfg, g, labels);
  const auto before = state.store;
  const auto stats = run_iteration(state);
  EXPECT_EQ(stats.samples, 0u);
  EXPECT_TRUE(std::equal(before.all_view_params().begin(), before.all_view_params().end(),
                         state.store.all_view_params().begin()));
  EXPECT_TRUE(std::equal(before.all_context_params().begin(), before.all_context_params().end(),
                         state.store.all_context_params().begin()));
}

TEST(RunIteration, UniformViewChoice) {
  const auto g = ring_graph(20, {1, 2, 3, 5});
  auto cfg = small_config();
  cfg.dim = 2;
  cfg.negatives = 1;
  cfg.samples_per_iter = 1'000'000;
  cfg.no_attention = true;
  auto state = make_state(cfg, g, {});
  const auto stats = run_iteration(state);
  for (auto c : stats.view_picks) EXPECT_NEAR(static_cast<double>(c) / 1e6, 0.25, 0.005);
}

TEST(RunIteration, ProportionalViewChoice) {
  Vocabulary vocab;
  std::vector<ViewEdges> views;
  std::istringstream a("x y\n"), b("x y\ny z\nz w\n");
  views.push_back(parse_view(a, Directedness::directed, vocab, "a"));
  views.push_back(parse_view(b, Directedness::directed, vocab, "b"));
  const MultiViewGraph g(std::move(vocab), std::move(views));
  auto cfg = small_config();
  cfg.dim = 2;
  cfg.samples_per_iter = 200'000;
  cfg.no_attention = true;
  cfg.view_sampling = ViewSampling::proportional;
  auto state = make_state(cfg, g, {});
  const auto stats = run_iteration(state);
  EXPECT_NEAR(static_cast<double>(stats.view_picks[0]) / 2e5, 0.25, 0.005);
}

// Hand-rolled single-view LINE loop with the same random streams.
EmbeddingStore reference_line(const TrainConfig& cfg, const MultiViewGraph& g) {
  auto store = init_embeddings(g.node_count(), 1, cfg.dim, cfg.seed);
  const auto edges = build_edge_alias(g.view(0));
  const auto negs = NegativeSampler::from_degrees(g.view(0).degrees());
  Rng root(cfg.seed ^ 0x6d7665ULL);
  root.split(0);  // view-choice stream
  Rng rng = root.split(1);
  const std::uint64_t total = cfg.samples_per_iter * cfg.iterations;
  std::vector<NodeId> neg(cfg.negatives);
  for (std::uint64_t t = 0; t < total; ++t) {
    const double rho = cfg.lr * std::max(1e-4, 1.0 - static_cast<double>(t) / static_cast<double>(total));
    const auto& e = g.view(0).edges()[edges.sample(rng)];
    for (auto& v : neg) {
      do {
        v = static_cast<NodeId>(negs.sample(rng));
      } while (v == e.dst);
    }
    sgd_edge_step(store, 0, e.src, e.dst, neg, rho);
  }
  return store;
}

TEST(Train, SingleViewWithoutRegularizerIsLine) {
  const auto g = ring_graph(25, {3});
  auto cfg = small_config();
  cfg.eta = 0.0;
  cfg.no_attention = true;
  const auto result = train(cfg, g, {});
  const auto ref = reference_line(cfg, g);
  EXPECT_TRUE(std::equal(ref.all_view_params().begin(), ref.all_view_params().end(),
                         result.store.all_view_params().begin()));
  EXPECT_TRUE(std::equal(ref.all_context_params().begin(), ref.all_context_params().end(),
                         result.store.all_context_params().begin()));
}

// Separate contexts and no regularizer: view 0's parameters do not depend on
// what view 1 contains.
TEST(Train, NoCollaborationViewsAreIndependent) {
  auto cfg = small_config();
  cfg.eta = 0.0;
  cfg.no_collaboration = true;
  cfg.no_attention = true;
  const auto a = train(cfg, ring_graph(25, {1, 2}), {});
  const auto b = train(cfg, ring_graph(25, {1, 7}), {});
  const std::size_t block = 25 * cfg.dim;
  const auto va = a.store.all_view_params(), vb = b.store.all_view_params();
  EXPECT_TRUE(std::equal(va.begin(), va.begin() + block, vb.begin()));
  EXPECT_FALSE(std::equal(va.begin() + block, va.end(), vb.begin() + block));
  const auto ca = a.store.all_context_params(), cb = b.store.all_context_params();
  EXPECT_TRUE(std::equal(ca.begin(), ca.begin() + block, cb.begin()));
}

TEST(Train, SharedContextsCoupleViews) {
  auto cfg = small_config();
  cfg.eta = 0.0;
  cfg.no_attention = true;
  const auto a = train(cfg, ring_graph(25, {1, 2}), {});
  const auto b = train(cfg, ring_graph(25, {1, 7}), {});
  const std::size_t block = 25 * cfg.dim;
  EXPECT_FALSE(std::equal(a.store.all_view_params().begin(), a.store.all_view_params().begin() + block,
                          b.store.all_view_params().begin()));
}

TEST(Train, NoAttentionKeepsUniformWeightsAndMeanVote) {
  const auto g = ring_graph(30, {1, 2, 4});
  auto cfg = small_config();
  cfg.no_attention = true;
  const auto labels = ring_labels(g);
  const auto r = train(cfg, g, labels);
  for (std::size_t i = 0; i < r.weights.nodes(); ++i)
    for (double w : r.weights.row(i)) EXPECT_EQ(w, 1.0 / 3.0);
  for (NodeId i = 0; i < g.node_count(); ++i)
    for (std::size_t a = 0; a < cfg.dim; ++a) {
      double mean = 0;
      for (ViewId k = 0; k < 3; ++k) mean += r.store.view(k, i)[a] / 3.0;
      EXPECT_NEAR(r.store.robust(i)[a], mean, 1e-12);
    }
}

TEST(Train, SmokeRunOnSyntheticInstance) {
  ScopedQuietLog quiet;
  const auto syn = generate(default_synth_spec(7));
  LabeledSet labeled = syn.labels;
  labeled.nodes.resize(40);
  auto cfg = small_config();
  cfg.dim = 16;
  cfg.samples_per_iter = 100'000;
  const auto r = train(cfg, syn.graph, labeled);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_TRUE(r.store.finite());
  EXPECT_TRUE(r.attention.finite());
  for (const auto& s : r.history) EXPECT_LE(s.attention_loss_after, s.attention_loss_before);
  for (std::size_t i = 0; i < r.weights.nodes(); ++i) {
    double total = 0;
    for (double w : r.weights.row(i)) {
      EXPECT_GT(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Train, SameSeedSameResult) {
  const auto g = ring_graph(30, {1, 2});
  const auto labels = ring_labels(g);
  const auto cfg = small_config();
  const auto a = train(cfg, g, labels);
  const auto b = train(cfg, g, labels);
  EXPECT_TRUE(a.store == b.store);
  EXPECT_TRUE(a.attention == b.attention);
  auto other = cfg;
  other.seed = 4;
  EXPECT_FALSE(train(other, g, labels).store == a.store);
}

TEST(Train, ParallelWorkersStayFinite) {
  const auto g = ring_graph(40, {1, 3});
  auto cfg = small_config();
  cfg.workers = 3;
  const auto r = train(cfg, g, ring_labels(g));
  EXPECT_TRUE(r.store.finite());
  EXPECT_EQ(r.history[0].view_picks[0] + r.history[0].view_picks[1], cfg.samples_per_iter);
}

TEST(Train, InvalidConfigFailsBeforeWork) {
  const auto g = ring_graph(10, {1});
  auto cfg = small_config();
  cfg.dim = 0;
  int calls = 0;
  EXPECT_THROW(train(cfg, g, {}, [&](const IterationStats&) { ++calls; }), InputError);
  EXPECT_EQ(calls, 0);
  cfg = small_config();
  cfg.lr = -1;
  EXPECT_THROW(train(cfg, g, {}), InputError);
  LabeledSet bad;
  bad.label_names = {"x"};
  bad.nodes = {{99, {1.0}}};
  EXPECT_THROW(train(small_config(), g, bad), InputError);
}

TEST(WriteOutputs, FilesAndLogFormat) {
  const auto g = ring_graph(12, {1, 5});
  const auto r = train(small_config(), g, ring_labels(g));
  const auto dir = std::filesystem::temp_directory_path() / "mve_trainer_outputs";
  std::filesystem::remove_all(dir);
  write_outputs(dir, g, r);
  for (const char* f : {"vocab.txt", "robust.emb", "view_s1.emb", "view_s5.emb", "weights.txt", "attention.txt",
                        "views.txt", "train_log.txt"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::ifstream log(dir / "train_log.txt");
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line.rfind("iteration=0 samples=20000 ", 0), 0u) << line;
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mve

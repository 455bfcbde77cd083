#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mve/config.hpp"
#include "mve/synth.hpp"

namespace mve {
namespace {

TEST(Synth, ExpectedEdgeCountOfDefaultInstance) {
  const auto r = generate(default_synth_spec(7));
  // 4 blocks of 100: 4*C(100,2) intra pairs at 0.2, the remaining 60000 at 0.01
  const double expected = 4 * 4950 * 0.2 + (79800 - 4 * 4950) * 0.01;
  EXPECT_NEAR(expected, 0.5 * (4 * 100 * 99 * 0.2 + 400 * 300 * 0.01), 1e-9);
  EXPECT_NEAR(static_cast<double>(r.generated_edges[0]), expected, 0.05 * expected);
  EXPECT_NEAR(static_cast<double>(r.generated_edges[1]), 79800 * 0.05, 0.05 * 79800 * 0.05);
}

TEST(Synth, SameSeedIsByteIdentical) {
  const auto a = generate(default_synth_spec(11));
  const auto b = generate(default_synth_spec(11));
  EXPECT_EQ(a.view_text, b.view_text);
  EXPECT_EQ(a.labels_text, b.labels_text);
  EXPECT_EQ(a.heldout_text, b.heldout_text);
  EXPECT_NE(a.view_text, generate(default_synth_spec(12)).view_text);
}

TEST(Synth, HeldOutPairsAbsentFromEveryView) {
  const auto r = generate(default_synth_spec(5));
  const std::size_t informative_union = r.generated_edges[0];
  EXPECT_EQ(r.heldout.pairs.size(), static_cast<std::size_t>(std::llround(0.1 * informative_union)));
  for (auto [a, b] : r.heldout.pairs)
    for (const auto& v : r.graph.views()) {
      EXPECT_EQ(v.weight(a, b), 0.0);
      EXPECT_EQ(v.weight(b, a), 0.0);
    }
}

TEST(Synth, CommunitiesEvenWithRemainderInLast) {
  SynthSpec spec;
  spec.nodes = 10;
  spec.communities = 3;
  EXPECT_EQ(synth_community(spec, 0), 0u);
  EXPECT_EQ(synth_community(spec, 3), 1u);
  EXPECT_EQ(synth_community(spec, 8), 2u);
  EXPECT_EQ(synth_community(spec, 9), 2u);
}

TEST(Synth, TwoCliques) {
  SynthSpec spec;
  spec.nodes = 20;
  spec.communities = 2;
  spec.holdout_fraction = 0.0;
  spec.views = {SynthView::sbm("cliques", 1.0, 0.0)};
  const auto r = generate(spec);
  EXPECT_EQ(r.generated_edges[0], 2u * 45);
  const auto& v = r.graph.view(0);
  const auto& vocab = r.graph.vocabulary();
  EXPECT_EQ(v.weight(vocab.at("n0"), vocab.at("n9")), 1.0);
  EXPECT_EQ(v.weight(vocab.at("n0"), vocab.at("n10")), 0.0);
  ASSERT_EQ(r.labels.nodes.size(), 20u);
  EXPECT_EQ(r.labels.nodes[15].node, vocab.at("n15"));
  EXPECT_EQ(r.labels.nodes[15].y, (std::vector<double>{0, 1}));
}

TEST(Synth, InvalidSpecsRejected) {
  SynthSpec spec;
  spec.views = {SynthView::sbm("x", 0.1, 0.2)};
  EXPECT_THROW(generate(spec), InputError);
  spec.views = {SynthView::sbm("x", 0.0, 0.0)};
  EXPECT_THROW(generate(spec), InputError);
  spec.views = {};
  EXPECT_THROW(generate(spec), InputError);
  spec.views = {SynthView::noise("x", 1.5)};
  EXPECT_THROW(generate(spec), InputError);
}

TEST(Synth, FilesRoundTripThroughLoadView) {
  const auto spec = default_synth_spec(9);
  const auto r = generate(spec);
  const auto dir = std::filesystem::temp_directory_path() / "mve_synth_test";
  std::filesystem::remove_all(dir);
  write_synth(dir, spec, r);
  const auto cfg = load_config(dir / "views.cfg");
  ASSERT_EQ(cfg.views.size(), 2u);
  const auto g = load_graph(cfg.views);
  EXPECT_TRUE(g.vocabulary() == r.graph.vocabulary());
  for (ViewId k = 0; k < 2; ++k) {
    const auto a = g.view(k).edges(), b = r.graph.view(k).edges();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t e = 0; e < a.size(); ++e) {
      EXPECT_EQ(a[e].src, b[e].src);
      EXPECT_EQ(a[e].dst, b[e].dst);
      EXPECT_EQ(a[e].weight, b[e].weight);
    }
  }
  std::ifstream labels(dir / "labels.txt");
  std::stringstream text;
  text << labels.rdbuf();
  EXPECT_EQ(text.str(), r.labels_text);
  std::filesystem::remove_all(dir);
}

TEST(Synth, WeightedEdgesInRange) {
  auto spec = default_synth_spec(2);
  spec.weighted = true;
  const auto r = generate(spec);
  std::set<double> seen;
  for (const auto& e : r.graph.view(0).edges()) seen.insert(e.weight);
  EXPECT_EQ(*seen.begin(), 1.0);
  EXPECT_EQ(*seen.rbegin(), 5.0);
}

}  // namespace
}  // namespace mve

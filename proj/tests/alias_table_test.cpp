#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mve/alias_table.hpp"
#include "mve/graph.hpp"
#include "support/stats.hpp"

namespace mve {
namespace {

TEST(AliasTable, UniformWeightsGiveEqualProbabilities) {
  const std::vector<double> w{1, 1, 1, 1};
  AliasTable table(w);
  for (double p : table.implied_probabilities()) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(AliasTable, OneToThreeMatchesFrequencies) {
  const std::vector<double> w{1, 3};
  AliasTable table(w);
  const auto implied = table.implied_probabilities();
  EXPECT_NEAR(implied[0], 0.25, 1e-15);
  EXPECT_NEAR(implied[1], 0.75, 1e-15);

  const auto counts = testing::draw_counts(table, 1'000'000, 11);
  EXPECT_NEAR(counts[0] / 1e6, 0.25, 0.005);
  EXPECT_NEAR(counts[1] / 1e6, 0.75, 0.005);
  const auto chi = testing::chi_square(counts, testing::normalize(w), 0.001);
  EXPECT_TRUE(chi.pass()) << chi.statistic << " > " << chi.critical;
}

TEST(AliasTable, SingletonAlwaysDrawn) {
  const std::vector<double> w{5};
  AliasTable table(w);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(table.sample(rng), 0u);
}

TEST(AliasTable, ZeroWeightSlotsAreNeverDrawn) {
  const std::vector<double> w{0, 2, 0, 1};
  AliasTable table(w);
  const auto counts = testing::draw_counts(table, 200'000, 5);
  EXPECT_EQ(counts[0], 0u);
  EXPECT_EQ(counts[2], 0u);
}

TEST(AliasTable, RejectsBadInput) {
  EXPECT_THROW(AliasTable(std::vector<double>{}), InputError);
  EXPECT_THROW(AliasTable(std::vector<double>{0, 0}), InputError);
  EXPECT_THROW(AliasTable(std::vector<double>{1, -1}), InputError);
  EXPECT_THROW(AliasTable(std::vector<double>{1, NAN}), InputError);
}

// Property: for random weight vectors, the table's implied distribution equals
// the normalized weights and draws pass a chi-square test at 0.001.
TEST(AliasTable, RandomWeightVectorsPassGoodnessOfFit) {
  Rng gen(2024);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> w(1 + gen.below(40));
    for (double& v : w) v = gen.bernoulli(0.2) ? 0.0 : gen.uniform(0.01, 10.0);
    w[gen.below(w.size())] += 1.0;
    AliasTable table(w);
    const auto exact = testing::normalize(w);
    const auto implied = table.implied_probabilities();
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(implied[i], exact[i], 1e-12);
    const auto chi = testing::chi_square(testing::draw_counts(table, 200'000, 100 + trial), exact, 0.001);
    EXPECT_TRUE(chi.pass()) << "trial " << trial << ": " << chi.statistic << " > " << chi.critical;
  }
}

TEST(AliasTable, DrawIsConstantTimeLookup) {
  const std::vector<double> w{1, 3};
  AliasTable table(w);
  // Slot 0 holds threshold 0.5 with alias 1.
  EXPECT_EQ(table.draw(0.1, 0.49), 0u);
  EXPECT_EQ(table.draw(0.1, 0.51), 1u);
  EXPECT_EQ(table.draw(0.9, 0.99), 1u);
}

}  // namespace
}  // namespace mve

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mve/error.hpp"
#include "mve/rng.hpp"

namespace mve {

// Walker/Vose alias table: O(n) construction, O(1) draws from an arbitrary
// discrete distribution given by non-negative, unnormalized weights.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) { build(weights); }

  void build(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw InputError("alias table: no weights");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
        throw InputError("alias table: invalid weight at slot " + std::to_string(i));
      total += weights[i];
    }
    if (!(total > 0.0)) throw InputError("alias table: all weights are zero");

    threshold_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = n; i-- > 0;) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto l = large.back();
      large.pop_back();
      threshold_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    // Leftovers are within rounding of 1.
    for (auto i : large) {
      threshold_[i] = 1.0;
      alias_[i] = i;
    }
    for (auto i : small) {
      threshold_[i] = 1.0;
      alias_[i] = i;
    }
  }

  std::size_t size() const { return threshold_.size(); }
  bool empty() const { return threshold_.empty(); }

  // Draw from two independent uniforms in [0, 1).
  std::uint32_t draw(double u_slot, double u_coin) const {
    auto slot = static_cast<std::size_t>(u_slot * static_cast<double>(threshold_.size()));
    if (slot >= threshold_.size()) slot = threshold_.size() - 1;
    return u_coin < threshold_[slot] ? static_cast<std::uint32_t>(slot) : alias_[slot];
  }

  std::uint32_t sample(Rng& rng) const {
    const double a = rng.uniform();
    const double b = rng.uniform();
    return draw(a, b);
  }

  // Exact probability implied by the table (for tests and diagnostics).
  std::vector<double> implied_probabilities() const {
    const std::size_t n = threshold_.size();
    std::vector<double> p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] += threshold_[i] / static_cast<double>(n);
      p[alias_[i]] += (1.0 - threshold_[i]) / static_cast<double>(n);
    }
    return p;
  }

  std::span<const double> thresholds() const { return threshold_; }
  std::span<const std::uint32_t> aliases() const { return alias_; }

 private:
  std::vector<double> threshold_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace mve

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace mve::testing {

// Central differences of f with respect to every entry of `params` (h = 1e-5).
inline std::vector<double> central_difference(std::span<double> params, const std::function<double()>& f,
                                              double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t a = 0; a < params.size(); ++a) {
    const double keep = params[a];
    params[a] = keep + h;
    const double up = f();
    params[a] = keep - h;
    const double down = f();
    params[a] = keep;
    g[a] = (up - down) / (2 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace mve::testing

#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "regwave/graph.hpp"

namespace regwave::testing {

// Independent invariant checker: degree, loops, duplicates, symmetry.
inline std::string regular_graph_violation(const RegularGraph& g) {
  if ((static_cast<long long>(g.n()) * g.d()) % 2 != 0) return "odd n*d";
  for (Vertex v = 0; v < g.n(); ++v) {
    auto row = g.neighbors(v);
    if (static_cast<int>(row.size()) != g.d()) return "wrong degree";
    std::set<Vertex> seen(row.begin(), row.end());
    if (static_cast<int>(seen.size()) != g.d()) return "multi-edge";
    if (seen.count(v)) return "self-loop";
    for (Vertex u : row) {
      if (u < 0 || u >= g.n()) return "neighbor out of range";
      auto back = g.neighbors(u);
      if (std::find(back.begin(), back.end(), v) == back.end()) return "asymmetric";
    }
    if (!std::is_sorted(row.begin(), row.end())) return "unsorted row";
  }
  return {};
}

// Pearson chi-square p-value of observed counts against expected
// probabilities (classes with zero probability must have zero counts).
inline double chi_square_p(const std::vector<long long>& counts, const std::vector<double>& probs) {
  long long total = 0;
  for (long long c : counts) total += c;
  double stat = 0.0;
  int dof = -1;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = probs[k] * static_cast<double>(total);
    stat += (counts[k] - e) * (counts[k] - e) / e;
    ++dof;
  }
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace regwave::testing

#pragma once

#include <vector>

#include <json.hpp>

#include "regwave/graph.hpp"
#include "regwave/random.hpp"

namespace regwave {

// Local resampling data around `center`: the boundary edges (l, a) of the
// radius-ell ball, one uniformly drawn proposal edge (b, c) of the graph with
// the ball removed per boundary edge, and the admissible index set.
struct ResamplingData {
  Vertex center = 0;
  int radius_ell = 0;
  std::vector<OrientedEdge> boundary;   // (l_alpha, a_alpha), l inside, a outside
  std::vector<OrientedEdge> proposals;  // (b_alpha, c_alpha), both outside
  std::vector<int> admissible;          // ascending alpha

  int mu() const { return static_cast<int>(boundary.size()); }
};

// Edges leaving the ball, oriented inside -> outside, sorted by (l, a).
std::vector<OrientedEdge> boundary_edges(const RegularGraph& g, const TreeBall& b);

// Draws proposals i.i.d. uniform over oriented edges avoiding the ball
// (repetitions allowed) and evaluates admissibility at threshold R.
ResamplingData sample_resampling_data(const RegularGraph& g, Vertex center, int radius_ell,
                                      int big_r, Rng& rng);

// Recomputes the admissible set of `data` against `g` at threshold R.
std::vector<int> admissible_set(const RegularGraph& g, const ResamplingData& data, int big_r);

// I_alpha: with r = floor(R/4) and distances measured in the graph without
// the ball, (1) the radius-r neighborhood of {a, b, c} plus the edge {a, b}
// is a tree, and (2) every other triple lies at distance > r.
bool admissibility_indicator(const RegularGraph& g, const ResamplingData& data, int alpha,
                             int big_r);

// Applies the simple switchings {l,a},{b,c} -> {l,c},{a,b} for every
// admissible alpha in ascending order. Each swap is re-validated; a swap
// that would break simplicity throws IntegrityError.
RegularGraph apply_switchings(const RegularGraph& g, const ResamplingData& data);

// Same, with an explicit application order (must be a permutation of a
// subset of indices).
RegularGraph apply_switchings(const RegularGraph& g, const ResamplingData& data,
                              const std::vector<int>& order);

// Data that undoes `data`: for admissible alpha the boundary edge becomes
// (l, c) and the proposal (b, a); other entries are unchanged. Applying it
// to the switched graph restores the original.
ResamplingData reversed_data(const ResamplingData& data);

// I(F, G) for F = (i, o) plus all proposal edges: every pair is an edge,
// every vertex within ell of a c-endpoint has a radius-R tree neighborhood,
// and distinct c-endpoints are at distance >= 3R.
bool far_field_indicator(const RegularGraph& g, const ResamplingData& data,
                         OrientedEdge anchor, int big_r);

nlohmann::json to_json(const ResamplingData& data);
ResamplingData resampling_from_json(const nlohmann::json& j);

}  // namespace regwave

#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regwave/random.hpp"

namespace regwave {

using Vertex = std::int32_t;

struct OrientedEdge {
  Vertex tail = 0;
  Vertex head = 0;

  auto operator<=>(const OrientedEdge&) const = default;
};

// Simple d-regular graph stored as a flat n*d table of sorted neighbor rows.
// Immutable after construction; the constructor enforces simplicity,
// regularity and symmetry.
class RegularGraph {
 public:
  RegularGraph(int n, int d, std::vector<std::vector<Vertex>> adjacency);

  static RegularGraph from_edges(int n, int d,
                                 const std::vector<std::pair<Vertex, Vertex>>& edges);

  int n() const { return n_; }
  int d() const { return d_; }

  std::span<const Vertex> neighbors(Vertex v) const {
    return {adjacency_.data() + static_cast<std::size_t>(v) * d_,
            static_cast<std::size_t>(d_)};
  }

  bool has_edge(Vertex u, Vertex v) const;

  // Unoriented edges with u < v, lexicographically sorted.
  std::vector<std::pair<Vertex, Vertex>> edges() const;

  // Both orientations of every edge, sorted.
  std::vector<OrientedEdge> oriented_edges() const;

  std::vector<std::vector<Vertex>> adjacency_lists() const;

  friend bool operator==(const RegularGraph&, const RegularGraph&) = default;

 private:
  int n_;
  int d_;
  std::vector<Vertex> adjacency_;
};

struct SamplerOptions {
  int max_attempts = 100000;
};

// Uniform simple d-regular graph on n vertices: pairing model with
// whole-graph rejection of loops and multi-edges.
RegularGraph sample_regular_graph(int n, int d, Rng& rng, SamplerOptions options = {});

// Local ball around a vertex. Vertex positions are BFS order with neighbors
// visited in ascending id, so two tree balls of the same (d, radius) have
// identical shape position by position.
struct TreeBall {
  Vertex center = 0;
  int radius = 0;
  std::vector<Vertex> vertices;
  std::vector<int> depth;
  // Induced edges as pairs of positions into `vertices`.
  std::vector<std::pair<int, int>> local_edges;
  bool is_tree = true;
  int excess = 0;

  int size() const { return static_cast<int>(vertices.size()); }
  int position_of(Vertex v) const;  // -1 when absent
};

TreeBall ball(const RegularGraph& g, Vertex center, int radius);

// Ball of radius `radius` in the infinite d-regular tree (root degree d), or
// in the (d-1)-ary tree (root degree d-1). Vertex ids equal positions.
TreeBall regular_tree_ball(int d, int radius);
TreeBall ary_tree_ball(int d, int radius);

// Vertex count of a radius-r ball in the d-regular tree.
long long tree_ball_size(int d, int radius);

// Integer radius floor((c_frak/4) * log_{d-1}(n)), clamped to at least 1.
int tree_radius(int n, int d, double c_frak);

struct OmegaBarResult {
  bool flag = false;
  int bad_vertex_count = 0;
  int max_excess = 0;
  int radius = 0;
};

OmegaBarResult classify_omega_bar(const RegularGraph& g, double c_frak, int omega_d);

// Breadth-first distances from a set of sources, cut off at `max_depth`.
// Vertices flagged in `blocked` are neither entered nor used as sources.
// Unreached vertices get -1.
std::vector<int> bfs_distances(const RegularGraph& g, std::span<const Vertex> sources,
                               int max_depth, const std::vector<char>* blocked = nullptr);

// Serialization: JSON {"n","d","seed","adjacency":[[...],...]} and CSV "u,v" lines.
nlohmann::json to_json(const RegularGraph& g, std::uint64_t seed);
RegularGraph graph_from_json(const nlohmann::json& j);
std::string to_edge_csv(const RegularGraph& g);
RegularGraph graph_from_edge_csv(int n, int d, const std::string& csv);

}  // namespace regwave

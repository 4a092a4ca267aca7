#include "regwave/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "regwave/errors.hpp"

namespace regwave {

RegularGraph::RegularGraph(int n, int d, std::vector<std::vector<Vertex>> adjacency)
    : n_(n), d_(d) {
  if (n <= 0 || d < 1) throw ParameterError("graph needs n > 0 and d >= 1");
  if ((static_cast<long long>(n) * d) % 2 != 0) throw ParameterError("n*d must be even");
  if (static_cast<int>(adjacency.size()) != n)
    throw IntegrityError("adjacency has " + std::to_string(adjacency.size()) + " rows, expected " +
                         std::to_string(n));
  adjacency_.reserve(static_cast<std::size_t>(n) * d);
  for (Vertex v = 0; v < n; ++v) {
    auto& row = adjacency[v];
    if (static_cast<int>(row.size()) != d)
      throw IntegrityError("vertex " + std::to_string(v) + " has degree " +
                           std::to_string(row.size()));
    std::sort(row.begin(), row.end());
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] < 0 || row[k] >= n) throw IntegrityError("neighbor id out of range");
      if (row[k] == v) throw IntegrityError("self-loop at vertex " + std::to_string(v));
      if (k > 0 && row[k] == row[k - 1])
        throw IntegrityError("multi-edge at vertex " + std::to_string(v));
    }
    adjacency_.insert(adjacency_.end(), row.begin(), row.end());
  }
  for (Vertex v = 0; v < n; ++v)
    for (Vertex u : neighbors(v))
      if (!has_edge(u, v)) throw IntegrityError("adjacency is not symmetric");
}

RegularGraph RegularGraph::from_edges(int n, int d,
                                      const std::vector<std::pair<Vertex, Vertex>>& edges) {
  if (n <= 0) throw ParameterError("graph needs n > 0");
  std::vector<std::vector<Vertex>> adj(n);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw IntegrityError("edge endpoint out of range");
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  return RegularGraph(n, d, std::move(adj));
}

bool RegularGraph::has_edge(Vertex u, Vertex v) const {
  auto row = neighbors(u);
  return std::binary_search(row.begin(), row.end(), v);
}

std::vector<std::pair<Vertex, Vertex>> RegularGraph::edges() const {
  std::vector<std::pair<Vertex, Vertex>> out;
  out.reserve(static_cast<std::size_t>(n_) * d_ / 2);
  for (Vertex u = 0; u < n_; ++u)
    for (Vertex v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::vector<OrientedEdge> RegularGraph::oriented_edges() const {
  std::vector<OrientedEdge> out;
  out.reserve(adjacency_.size());
  for (Vertex u = 0; u < n_; ++u)
    for (Vertex v : neighbors(u)) out.push_back({u, v});
  return out;
}

std::vector<std::vector<Vertex>> RegularGraph::adjacency_lists() const {
  std::vector<std::vector<Vertex>> out(n_);
  for (Vertex v = 0; v < n_; ++v) {
    auto row = neighbors(v);
    out[v].assign(row.begin(), row.end());
  }
  return out;
}

RegularGraph sample_regular_graph(int n, int d, Rng& rng, SamplerOptions options) {
  if (d < 3 || d >= n) throw ParameterError("sampler requires 3 <= d < n");
  if ((static_cast<long long>(n) * d) % 2 != 0) throw ParameterError("n*d must be even");
  if (options.max_attempts <= 0) throw ParameterError("max_attempts must be positive");

  const std::size_t points = static_cast<std::size_t>(n) * d;
  std::vector<Vertex> slots(points);
  std::vector<std::vector<Vertex>> adj(n);
  for (auto& row : adj) row.reserve(d);

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    for (std::size_t p = 0; p < points; ++p) slots[p] = static_cast<Vertex>(p / d);
    std::shuffle(slots.begin(), slots.end(), rng);
    for (auto& row : adj) row.clear();
    bool simple = true;
    for (std::size_t p = 0; p < points && simple; p += 2) {
      Vertex u = slots[p], v = slots[p + 1];
      if (u == v || std::find(adj[u].begin(), adj[u].end(), v) != adj[u].end()) {
        simple = false;
        break;
      }
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    if (simple) return RegularGraph(n, d, std::move(adj));
  }
  throw SamplingError("pairing model rejected " + std::to_string(options.max_attempts) +
                      " attempts for n=" + std::to_string(n) + ", d=" + std::to_string(d));
}

int TreeBall::position_of(Vertex v) const {
  auto it = std::find(vertices.begin(), vertices.end(), v);
  return it == vertices.end() ? -1 : static_cast<int>(it - vertices.begin());
}

namespace {

// Connected components of the ball's induced subgraph.
int count_components(int size, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(size);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = size;
  for (auto [a, b] : edges) {
    int ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components;
}

void finish_ball(TreeBall& b) {
  const int v = b.size();
  const int e = static_cast<int>(b.local_edges.size());
  b.excess = e - v + count_components(v, b.local_edges);
  b.is_tree = b.excess == 0;
}

TreeBall abstract_tree_ball(int d, int radius, int root_children) {
  if (d < 2) throw ParameterError("tree balls need d >= 2");
  if (radius < 0) throw ParameterError("radius must be nonnegative");
  TreeBall b;
  b.center = 0;
  b.radius = radius;
  b.vertices.push_back(0);
  b.depth.push_back(0);
  std::size_t frontier_begin = 0;
  for (int r = 0; r < radius; ++r) {
    const std::size_t frontier_end = b.vertices.size();
    for (std::size_t p = frontier_begin; p < frontier_end; ++p) {
      const int children = (p == 0) ? root_children : d - 1;
      for (int c = 0; c < children; ++c) {
        const int id = static_cast<int>(b.vertices.size());
        b.vertices.push_back(id);
        b.depth.push_back(r + 1);
        b.local_edges.emplace_back(static_cast<int>(p), id);
      }
    }
    frontier_begin = frontier_end;
  }
  finish_ball(b);
  return b;
}

}  // namespace

TreeBall ball(const RegularGraph& g, Vertex center, int radius) {
  if (center < 0 || center >= g.n()) throw ParameterError("ball center out of range");
  if (radius < 0) throw ParameterError("radius must be nonnegative");
  TreeBall b;
  b.center = center;
  b.radius = radius;
  std::vector<int> pos(g.n(), -1);
  b.vertices.push_back(center);
  b.depth.push_back(0);
  pos[center] = 0;
  for (std::size_t head = 0; head < b.vertices.size(); ++head) {
    const Vertex u = b.vertices[head];
    if (b.depth[head] == radius) continue;
    for (Vertex w : g.neighbors(u)) {
      if (pos[w] >= 0) continue;
      pos[w] = static_cast<int>(b.vertices.size());
      b.vertices.push_back(w);
      b.depth.push_back(b.depth[head] + 1);
    }
  }
  for (int p = 0; p < b.size(); ++p)
    for (Vertex w : g.neighbors(b.vertices[p]))
      if (pos[w] > p) b.local_edges.emplace_back(p, pos[w]);
  finish_ball(b);
  return b;
}

TreeBall regular_tree_ball(int d, int radius) { return abstract_tree_ball(d, radius, d); }

TreeBall ary_tree_ball(int d, int radius) { return abstract_tree_ball(d, radius, d - 1); }

long long tree_ball_size(int d, int radius) {
  long long total = 1, layer = d;
  for (int r = 1; r <= radius; ++r) {
    total += layer;
    layer *= (d - 1);
  }
  return total;
}

int tree_radius(int n, int d, double c_frak) {
  if (d < 3 || n < 2) throw ParameterError("tree_radius needs d >= 3 and n >= 2");
  const double raw = (c_frak / 4.0) * std::log(static_cast<double>(n)) / std::log(d - 1.0);
  return std::max(1, static_cast<int>(std::floor(raw + 1e-12)));
}

OmegaBarResult classify_omega_bar(const RegularGraph& g, double c_frak, int omega_d) {
  if (!(c_frak > 0.0 && c_frak < 1.0)) throw ParameterError("c_frak must lie in (0,1)");
  OmegaBarResult out;
  out.radius = tree_radius(g.n(), g.d(), c_frak);
  for (Vertex v = 0; v < g.n(); ++v) {
    const TreeBall b = ball(g, v, out.radius);
    if (!b.is_tree) ++out.bad_vertex_count;
    out.max_excess = std::max(out.max_excess, b.excess);
  }
  const double allowed = std::pow(static_cast<double>(g.n()), c_frak);
  out.flag = out.bad_vertex_count <= allowed && out.max_excess <= omega_d;
  return out;
}

std::vector<int> bfs_distances(const RegularGraph& g, std::span<const Vertex> sources,
                               int max_depth, const std::vector<char>* blocked) {
  std::vector<int> dist(g.n(), -1);
  std::deque<Vertex> queue;
  for (Vertex s : sources) {
    if (blocked && (*blocked)[s]) continue;
    if (dist[s] == 0) continue;
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const Vertex u = queue.front();
    queue.pop_front();
    if (dist[u] >= max_depth) continue;
    for (Vertex w : g.neighbors(u)) {
      if (dist[w] >= 0 || (blocked && (*blocked)[w])) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  return dist;
}

nlohmann::json to_json(const RegularGraph& g, std::uint64_t seed) {
  return {{"n", g.n()}, {"d", g.d()}, {"seed", seed}, {"adjacency", g.adjacency_lists()}};
}

RegularGraph graph_from_json(const nlohmann::json& j) {
  try {
    return RegularGraph(j.at("n").get<int>(), j.at("d").get<int>(),
                        j.at("adjacency").get<std::vector<std::vector<Vertex>>>());
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed graph JSON: ") + e.what());
  }
}

std::string to_edge_csv(const RegularGraph& g) {
  std::ostringstream os;
  for (auto [u, v] : g.edges()) os << u << ',' << v << '\n';
  return os.str();
}

RegularGraph graph_from_edge_csv(int n, int d, const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::vector<std::pair<Vertex, Vertex>> edges;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParameterError("edge CSV line without comma: " + line);
    edges.emplace_back(std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
  }
  return RegularGraph::from_edges(n, d, edges);
}

}  // namespace regwave

#include "regwave/resampling.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "regwave/errors.hpp"

namespace regwave {

namespace {

std::vector<char> ball_mask(const RegularGraph& g, const TreeBall& b) {
  std::vector<char> mask(g.n(), 0);
  for (Vertex v : b.vertices) mask[v] = 1;
  return mask;
}

std::array<Vertex, 3> triple(const ResamplingData& data, int alpha) {
  return {data.boundary[alpha].head, data.proposals[alpha].tail, data.proposals[alpha].head};
}

// Mutable adjacency used while switching.
class EditableGraph {
 public:
  explicit EditableGraph(const RegularGraph& g) : d_(g.d()), adj_(g.adjacency_lists()) {}

  bool has_edge(Vertex u, Vertex v) const {
    const auto& row = adj_[u];
    return std::find(row.begin(), row.end(), v) != row.end();
  }

  void remove_edge(Vertex u, Vertex v) {
    erase(adj_[u], v);
    erase(adj_[v], u);
  }

  void add_edge(Vertex u, Vertex v) {
    adj_[u].push_back(v);
    adj_[v].push_back(u);
  }

  RegularGraph freeze() && {
    const int n = static_cast<int>(adj_.size());
    return RegularGraph(n, d_, std::move(adj_));
  }

 private:
  static void erase(std::vector<Vertex>& row, Vertex x) {
    row.erase(std::find(row.begin(), row.end(), x));
  }

  int d_;
  std::vector<std::vector<Vertex>> adj_;
};

struct AdmissibilityContext {
  std::vector<char> blocked;
  int radius = 0;
};

AdmissibilityContext make_context(const RegularGraph& g, const ResamplingData& data, int big_r) {
  if (big_r < 0) throw ParameterError("R must be nonnegative");
  AdmissibilityContext ctx;
  ctx.blocked = ball_mask(g, ball(g, data.center, data.radius_ell));
  ctx.radius = big_r / 4;
  return ctx;
}

bool indicator_with_context(const RegularGraph& g, const ResamplingData& data, int alpha,
                            const AdmissibilityContext& ctx) {
  const auto [a, b, c] = triple(data, alpha);
  // Tree condition on the neighborhood of {a, b, c} with the edge {a, b} added.
  if (a == b || g.has_edge(a, b)) return false;
  const std::array<Vertex, 3> sources{a, b, c};
  const std::vector<int> dist = bfs_distances(g, sources, ctx.radius, &ctx.blocked);
  long long vertex_count = 0, edge_count = 1;  // the added {a, b}
  for (Vertex x = 0; x < g.n(); ++x) {
    if (dist[x] < 0) continue;
    ++vertex_count;
    for (Vertex y : g.neighbors(x))
      if (y > x && dist[y] >= 0) ++edge_count;
  }
  // The neighborhood is connected through b-c and the added a-b.
  if (edge_count != vertex_count - 1) return false;
  // Isolation from every other triple.
  for (int beta = 0; beta < data.mu(); ++beta) {
    if (beta == alpha) continue;
    for (Vertex x : triple(data, beta))
      if (dist[x] >= 0) return false;
  }
  return true;
}

void check_data_shape(const RegularGraph& g, const ResamplingData& data) {
  if (data.proposals.size() != data.boundary.size())
    throw ParameterError("resampling data has mismatched boundary/proposal lengths");
  if (data.center < 0 || data.center >= g.n()) throw ParameterError("center out of range");
}

}  // namespace

std::vector<OrientedEdge> boundary_edges(const RegularGraph& g, const TreeBall& b) {
  const std::vector<char> inside = ball_mask(g, b);
  std::vector<OrientedEdge> out;
  for (Vertex l : b.vertices)
    for (Vertex a : g.neighbors(l))
      if (!inside[a]) out.push_back({l, a});
  std::sort(out.begin(), out.end());
  return out;
}

ResamplingData sample_resampling_data(const RegularGraph& g, Vertex center, int radius_ell,
                                      int big_r, Rng& rng) {
  if (radius_ell < 0) throw ParameterError("ell must be nonnegative");
  const TreeBall t = ball(g, center, radius_ell);
  const std::vector<char> inside = ball_mask(g, t);

  std::vector<OrientedEdge> pool;
  for (const OrientedEdge& e : g.oriented_edges())
    if (!inside[e.tail] && !inside[e.head]) pool.push_back(e);

  ResamplingData data;
  data.center = center;
  data.radius_ell = radius_ell;
  data.boundary = boundary_edges(g, t);
  if (data.boundary.empty()) return data;
  if (pool.empty()) throw SamplingError("graph without the ball has no edges to propose");

  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  data.proposals.reserve(data.boundary.size());
  for (std::size_t k = 0; k < data.boundary.size(); ++k) data.proposals.push_back(pool[pick(rng)]);
  data.admissible = admissible_set(g, data, big_r);
  return data;
}

std::vector<int> admissible_set(const RegularGraph& g, const ResamplingData& data, int big_r) {
  check_data_shape(g, data);
  const AdmissibilityContext ctx = make_context(g, data, big_r);
  std::vector<int> out;
  for (int alpha = 0; alpha < data.mu(); ++alpha)
    if (indicator_with_context(g, data, alpha, ctx)) out.push_back(alpha);
  return out;
}

bool admissibility_indicator(const RegularGraph& g, const ResamplingData& data, int alpha,
                             int big_r) {
  check_data_shape(g, data);
  if (alpha < 0 || alpha >= data.mu()) throw ParameterError("alpha out of range");
  return indicator_with_context(g, data, alpha, make_context(g, data, big_r));
}

RegularGraph apply_switchings(const RegularGraph& g, const ResamplingData& data) {
  return apply_switchings(g, data, data.admissible);
}

RegularGraph apply_switchings(const RegularGraph& g, const ResamplingData& data,
                              const std::vector<int>& order) {
  check_data_shape(g, data);
  if (order.empty()) return g;
  EditableGraph edit(g);
  for (int alpha : order) {
    if (alpha < 0 || alpha >= data.mu()) throw ParameterError("switching index out of range");
    const auto [l, a] = data.boundary[alpha];
    const auto [b, c] = data.proposals[alpha];
    const std::array<Vertex, 4> v{l, a, b, c};
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        if (v[i] == v[j])
          throw IntegrityError("switching " + std::to_string(alpha) + " has repeated vertices");
    if (!edit.has_edge(l, a) || !edit.has_edge(b, c))
      throw IntegrityError("switching " + std::to_string(alpha) + " removes a missing edge");
    if (edit.has_edge(l, c) || edit.has_edge(a, b))
      throw IntegrityError("switching " + std::to_string(alpha) + " would create a multi-edge");
    edit.remove_edge(l, a);
    edit.remove_edge(b, c);
    edit.add_edge(l, c);
    edit.add_edge(a, b);
  }
  return std::move(edit).freeze();
}

ResamplingData reversed_data(const ResamplingData& data) {
  ResamplingData out = data;
  for (int alpha : data.admissible) {
    const auto [l, a] = data.boundary[alpha];
    const auto [b, c] = data.proposals[alpha];
    out.boundary[alpha] = {l, c};
    out.proposals[alpha] = {b, a};
  }
  return out;
}

bool far_field_indicator(const RegularGraph& g, const ResamplingData& data,
                         OrientedEdge anchor, int big_r) {
  check_data_shape(g, data);
  if (big_r < 0) throw ParameterError("R must be nonnegative");
  if (!g.has_edge(anchor.tail, anchor.head)) throw ParameterError("anchor is not an edge");

  std::vector<OrientedEdge> family{anchor};
  family.insert(family.end(), data.proposals.begin(), data.proposals.end());

  for (const auto& [b, c] : family)
    if (!g.has_edge(b, c)) return false;

  std::map<Vertex, bool> tree_cache;
  for (const auto& e : family) {
    for (Vertex x : ball(g, e.head, data.radius_ell).vertices) {
      auto [it, fresh] = tree_cache.try_emplace(x, false);
      if (fresh) it->second = ball(g, x, big_r).is_tree;
      if (!it->second) return false;
    }
  }

  const int separation = 3 * big_r;
  if (separation == 0) return true;
  for (std::size_t k = 0; k < family.size(); ++k) {
    const Vertex source = family[k].head;
    const std::vector<int> dist =
        bfs_distances(g, std::span<const Vertex>(&source, 1), separation - 1);
    for (std::size_t m = k + 1; m < family.size(); ++m)
      if (dist[family[m].head] >= 0) return false;
  }
  return true;
}

nlohmann::json to_json(const ResamplingData& data) {
  auto edges = [](const std::vector<OrientedEdge>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : list) arr.push_back({e.tail, e.head});
    return arr;
  };
  return {{"center", data.center},
          {"ell", data.radius_ell},
          {"boundary", edges(data.boundary)},
          {"proposals", edges(data.proposals)},
          {"admissible", data.admissible}};
}

ResamplingData resampling_from_json(const nlohmann::json& j) {
  auto edges = [](const nlohmann::json& arr) {
    std::vector<OrientedEdge> out;
    for (const auto& e : arr) out.push_back({e.at(0).get<Vertex>(), e.at(1).get<Vertex>()});
    return out;
  };
  try {
    ResamplingData data;
    data.center = j.at("center").get<Vertex>();
    data.radius_ell = j.at("ell").get<int>();
    data.boundary = edges(j.at("boundary"));
    data.proposals = edges(j.at("proposals"));
    data.admissible = j.at("admissible").get<std::vector<int>>();
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed resampling JSON: ") + e.what());
  }
}

}  // namespace regwave

#include "regwave/isomorphism.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "regwave/errors.hpp"

namespace regwave {

namespace {

constexpr int kMaxVertices = 8;

int pair_bit(int u, int v) {
  if (u > v) std::swap(u, v);
  // Row-major index of (u, v), u < v, in the strict upper triangle of an 8x8 matrix.
  return u * (2 * kMaxVertices - u - 1) / 2 + (v - u - 1);
}

using EdgeList = std::vector<std::pair<int, int>>;

void enumerate(int n, int d, int v, std::array<int, kMaxVertices>& degree, EdgeList& edges,
               std::vector<std::uint32_t>& out) {
  while (v < n && degree[v] == d) ++v;
  if (v == n) {
    std::uint32_t mask = 0;
    for (auto [a, b] : edges) mask |= 1u << pair_bit(a, b);
    out.push_back(mask);
    return;
  }
  // Vertex v still needs (d - degree[v]) neighbors, all with larger ids
  // (smaller ids are already saturated).
  const int need = d - degree[v];
  std::vector<int> candidates;
  for (int w = v + 1; w < n; ++w)
    if (degree[w] < d) candidates.push_back(w);
  if (static_cast<int>(candidates.size()) < need) return;
  std::vector<char> pick(candidates.size(), 0);
  std::fill(pick.begin(), pick.begin() + need, 1);
  do {
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (pick[k]) {
        edges.emplace_back(v, candidates[k]);
        ++degree[candidates[k]];
      }
    degree[v] = d;
    enumerate(n, d, v + 1, degree, edges, out);
    degree[v] = d - need;
    for (std::size_t k = 0; k < candidates.size(); ++k)
      if (pick[k]) {
        edges.pop_back();
        --degree[candidates[k]];
      }
  } while (std::prev_permutation(pick.begin(), pick.end()));
}

}  // namespace

std::uint32_t edge_mask(const RegularGraph& g) {
  if (g.n() > kMaxVertices) throw ParameterError("edge_mask supports n <= 8 only");
  std::uint32_t mask = 0;
  for (auto [u, v] : g.edges()) mask |= 1u << pair_bit(u, v);
  return mask;
}

SmallGraphCatalogue::SmallGraphCatalogue(int n, int d) : n_(n), d_(d) {
  if (n < 2 || n > kMaxVertices) throw ParameterError("catalogue supports 2 <= n <= 8");
  if (d < 1 || d >= n || (n * d) % 2 != 0) throw ParameterError("invalid (n, d) for catalogue");

  std::vector<std::uint32_t> labeled;
  std::array<int, kMaxVertices> degree{};
  EdgeList edges;
  enumerate(n, d, 0, degree, edges, labeled);

  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) pairs.emplace_back(u, v);

  for (std::uint32_t mask : labeled) {
    if (class_of_mask_.contains(mask)) continue;
    const int cls = class_count();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    long long orbit = 0;
    std::uint32_t canonical = mask;
    do {
      std::uint32_t image = 0;
      for (auto [u, v] : pairs)
        if (mask & (1u << pair_bit(u, v))) image |= 1u << pair_bit(perm[u], perm[v]);
      if (class_of_mask_.emplace(image, cls).second) ++orbit;
      canonical = std::min(canonical, image);
    } while (std::next_permutation(perm.begin(), perm.end()));
    orbit_sizes_.push_back(orbit);
    canonical_.push_back(canonical);
  }
  if (class_of_mask_.size() != labeled.size())
    throw IntegrityError("relabeling produced graphs outside the enumeration");
}

int SmallGraphCatalogue::class_of(const RegularGraph& g) const {
  if (g.n() != n_ || g.d() != d_) throw ParameterError("graph does not match catalogue (n, d)");
  auto it = class_of_mask_.find(edge_mask(g));
  if (it == class_of_mask_.end()) throw IntegrityError("graph missing from exhaustive catalogue");
  return it->second;
}

}  // namespace regwave

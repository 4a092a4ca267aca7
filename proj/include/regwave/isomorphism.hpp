#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "regwave/graph.hpp"

namespace regwave {

// Upper-triangle adjacency bitmask; only defined for n <= 8 (28 vertex pairs).
std::uint32_t edge_mask(const RegularGraph& g);

// Every labeled simple d-regular graph on n <= 8 vertices, grouped into
// isomorphism classes by brute-force relabeling. The uniform law on labeled
// graphs induces class probabilities proportional to orbit sizes.
class SmallGraphCatalogue {
 public:
  SmallGraphCatalogue(int n, int d);

  int n() const { return n_; }
  int d() const { return d_; }
  int class_count() const { return static_cast<int>(orbit_sizes_.size()); }
  long long labeled_count() const { return static_cast<long long>(class_of_mask_.size()); }
  const std::vector<long long>& orbit_sizes() const { return orbit_sizes_; }
  double class_probability(int c) const {
    return static_cast<double>(orbit_sizes_.at(c)) / static_cast<double>(labeled_count());
  }

  // Throws ParameterError for graphs of another (n, d).
  int class_of(const RegularGraph& g) const;
  // Smallest mask in the isomorphism class (canonical form).
  std::uint32_t canonical_mask(int c) const { return canonical_.at(c); }

 private:
  int n_;
  int d_;
  std::unordered_map<std::uint32_t, int> class_of_mask_;
  std::vector<long long> orbit_sizes_;
  std::vector<std::uint32_t> canonical_;
};

}  // namespace regwave

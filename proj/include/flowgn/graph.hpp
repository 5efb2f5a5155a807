#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace flowgn {

using NodeId = std::uint32_t;

/// Undirected simple graph in compressed adjacency form. Neighbor lists are
/// symmetric, sorted ascending, and free of self-loops and duplicates.
class Graph {
public:
  Graph() : offsets_(1, 0) {}

  /// Build from an arbitrary edge list: edges are symmetrized, deduplicated,
  /// and self-loops are dropped. Endpoints must be < num_nodes.
  static Graph from_edges(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges) {
    std::vector<std::pair<NodeId, NodeId>> arcs;
    arcs.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
      if (u >= num_nodes || v >= num_nodes)
        throw IndexError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                         ") references a node >= " + std::to_string(num_nodes));
      if (u == v) continue;
      arcs.emplace_back(u, v);
      arcs.emplace_back(v, u);
    }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

    Graph g;
    g.offsets_.assign(num_nodes + 1, 0);
    for (auto [u, v] : arcs) ++g.offsets_[u + 1];
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
    g.neighbors_.reserve(arcs.size());
    for (auto [u, v] : arcs) g.neighbors_.push_back(v);
    return g;
  }

  std::size_t num_nodes() const noexcept { return offsets_.size() - 1; }
  /// Number of undirected edges.
  std::size_t num_edges() const noexcept { return neighbors_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId v) const noexcept {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::size_t degree(NodeId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(NodeId u, NodeId v) const noexcept {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  double mean_degree() const noexcept {
    return num_nodes() == 0 ? 0.0 : static_cast<double>(neighbors_.size()) / num_nodes();
  }

  /// Full scan of the structural invariants; throws FormatError on violation.
  void validate() const {
    for (NodeId u = 0; u < num_nodes(); ++u) {
      auto nb = neighbors(u);
      for (std::size_t i = 0; i < nb.size(); ++i) {
        if (nb[i] >= num_nodes()) throw FormatError("neighbor id out of range");
        if (nb[i] == u) throw FormatError("self-loop at node " + std::to_string(u));
        if (i > 0 && nb[i - 1] >= nb[i]) throw FormatError("unsorted or duplicate neighbors");
        if (!has_edge(nb[i], u)) throw FormatError("asymmetric edge");
      }
    }
  }

private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
};

/// 4-regular rows×cols torus; node (i, j) has id i·cols + j.
inline Graph grid_torus(std::size_t rows, std::size_t cols) {
  if (rows < 3 || cols < 3) throw ArgumentError("grid_torus needs rows >= 3 and cols >= 3");
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(rows * cols * 2);
  auto id = [cols](std::size_t i, std::size_t j) { return static_cast<NodeId>(i * cols + j); };
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      edges.emplace_back(id(i, j), id((i + 1) % rows, j));
      edges.emplace_back(id(i, j), id(i, (j + 1) % cols));
    }
  return Graph::from_edges(rows * cols, edges);
}

/// Translation (di, dj) on a rows×cols torus, applied to a node id.
inline NodeId torus_translate(NodeId v, std::size_t rows, std::size_t cols, std::size_t di, std::size_t dj) {
  const std::size_t i = v / cols, j = v % cols;
  return static_cast<NodeId>(((i + di) % rows) * cols + (j + dj) % cols);
}

/// Component id per node (ids assigned in order of lowest member).
inline std::vector<std::uint32_t> connected_components(const Graph& g) {
  constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> comp(g.num_nodes(), unset);
  std::vector<NodeId> stack;
  std::uint32_t next = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g.neighbors(u))
        if (comp[v] == unset) {
          comp[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return comp;
}

/// Members of the largest connected component, ascending. Ties go to the
/// component containing the lowest node id.
inline std::vector<NodeId> largest_component(const Graph& g) {
  if (g.num_nodes() == 0) return {};
  auto comp = connected_components(g);
  std::vector<std::size_t> sizes(*std::max_element(comp.begin(), comp.end()) + 1, 0);
  for (auto c : comp) ++sizes[c];
  const auto best = static_cast<std::uint32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<NodeId> members;
  members.reserve(sizes[best]);
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (comp[v] == best) members.push_back(v);
  return members;
}

struct PathLengthStats {
  double mean = 0.0;
  std::size_t lcc_size = 0;
  std::size_t sources = 0;  ///< BFS roots actually used
  bool exact = true;        ///< every LCC node was a root
  double std_error = 0.0;   ///< standard error of the sampled estimate, 0 when exact
  bool singleton = false;   ///< LCC has one node; mean reported as 0
};

/// Average shortest-path length over ordered pairs inside the largest
/// connected component. With `sample`, BFS runs from that many LCC roots drawn
/// without replacement; distance sums are integers, so the reduction is exact
/// regardless of thread count.
inline PathLengthStats avg_shortest_path(const Graph& g, std::optional<std::size_t> sample = std::nullopt,
                                         std::uint64_t seed = 0, unsigned threads = 1) {
  if (g.num_nodes() == 0) throw ArgumentError("avg_shortest_path on an empty graph");
  PathLengthStats out;
  auto lcc = largest_component(g);
  out.lcc_size = lcc.size();
  if (lcc.size() < 2) {
    out.singleton = true;
    return out;
  }

  std::vector<NodeId> roots = lcc;
  if (sample && *sample < lcc.size()) {
    CounterRng rng(derive_seed(seed, 0x5350ULL));
    for (std::size_t i = 0; i < *sample; ++i) std::swap(roots[i], roots[i + rng.below(roots.size() - i)]);
    roots.resize(*sample);
    out.exact = false;
  }
  if (roots.empty()) throw ArgumentError("avg_shortest_path sample must be >= 1");
  out.sources = roots.size();

  std::vector<std::uint64_t> dist_sum(roots.size(), 0);
  parallel_chunks(roots.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    constexpr auto unseen = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> dist(g.num_nodes(), unseen);
    std::vector<NodeId> frontier, touched;
    for (std::size_t r = begin; r < end; ++r) {
      for (auto v : touched) dist[v] = unseen;
      touched.clear();
      std::uint64_t total = 0;
      dist[roots[r]] = 0;
      touched.push_back(roots[r]);
      for (std::size_t head = 0; head < touched.size(); ++head) {
        NodeId u = touched[head];
        total += dist[u];
        for (NodeId v : g.neighbors(u))
          if (dist[v] == unseen) {
            dist[v] = dist[u] + 1;
            touched.push_back(v);
          }
      }
      dist_sum[r] = total;
    }
  });

  const double pairs_per_root = static_cast<double>(lcc.size() - 1);
  const std::uint64_t total = std::accumulate(dist_sum.begin(), dist_sum.end(), std::uint64_t{0});
  out.mean = static_cast<double>(total) / (pairs_per_root * roots.size());
  if (!out.exact && roots.size() > 1) {
    double var = 0.0;
    for (auto s : dist_sum) {
      const double d = s / pairs_per_root - out.mean;
      var += d * d;
    }
    var /= static_cast<double>(roots.size() - 1);
    const double fpc = static_cast<double>(lcc.size() - roots.size()) / static_cast<double>(lcc.size() - 1);
    out.std_error = std::sqrt(var / roots.size() * fpc);
  }
  return out;
}

/// Exact distribution of a uniform random walker after k steps from x.
inline std::vector<double> k_step_rw_distribution(const Graph& g, NodeId x, std::size_t k) {
  if (x >= g.num_nodes()) throw IndexError("start node out of range");
  std::vector<double> dist(g.num_nodes(), 0.0), next(g.num_nodes(), 0.0);
  dist[x] = 1.0;
  for (std::size_t step = 0; step < k; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (dist[v] == 0.0) continue;
      const auto deg = g.degree(v);
      if (deg == 0)
        throw DegenerateWalkError("walk reaches isolated node " + std::to_string(v) + " at step " +
                                  std::to_string(step));
      const double share = dist[v] / static_cast<double>(deg);
      for (NodeId u : g.neighbors(v)) next[u] += share;
    }
    dist.swap(next);
  }
  return dist;
}

} // namespace flowgn

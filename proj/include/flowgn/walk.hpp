#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace flowgn {

struct WalkParams {
  double p = 1.0;              ///< return parameter
  double q = 1.0;              ///< in-out parameter
  std::size_t length = 6;      ///< nodes per path, source and sink included
  std::size_t iterations = 10; ///< outer PATHGEN rounds (r)
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p > 0.0) || !std::isfinite(p)) throw ArgumentError("walk p must be a positive finite number");
    if (!(q > 0.0) || !std::isfinite(q)) throw ArgumentError("walk q must be a positive finite number");
    if (length < 2) throw ArgumentError("path length must be >= 2 nodes");
    if (iterations < 1) throw ArgumentError("path iterations must be >= 1");
  }
};

using FlowPath = std::vector<NodeId>;

/// Fixed-length flow paths stored back to back.
class PathSet {
public:
  PathSet() = default;
  PathSet(std::size_t length, WalkParams params = {}, std::uint32_t layer = 0)
      : length_(length), params_(params), layer_(layer) {
    params_.length = length;
  }

  std::size_t length() const noexcept { return length_; }
  std::size_t size() const noexcept { return length_ == 0 ? 0 : nodes_.size() / length_; }
  bool empty() const noexcept { return nodes_.empty(); }
  const WalkParams& params() const noexcept { return params_; }
  std::uint32_t layer() const noexcept { return layer_; }

  std::span<const NodeId> operator[](std::size_t i) const noexcept {
    return {nodes_.data() + i * length_, length_};
  }
  std::span<const NodeId> flat() const noexcept { return nodes_; }

  void add(std::span<const NodeId> path) {
    if (path.size() != length_)
      throw ShapeError("path has " + std::to_string(path.size()) + " nodes, expected " + std::to_string(length_));
    nodes_.insert(nodes_.end(), path.begin(), path.end());
  }

  /// Paths [begin, end) as a new set with the same parameters.
  PathSet slice(std::size_t begin, std::size_t end) const {
    PathSet out(length_, params_, layer_);
    out.nodes_.assign(nodes_.begin() + static_cast<std::ptrdiff_t>(begin * length_),
                      nodes_.begin() + static_cast<std::ptrdiff_t>(end * length_));
    return out;
  }

  /// Paths picked by index, in the given order.
  PathSet gather(std::span<const std::size_t> indices) const {
    PathSet out(length_, params_, layer_);
    out.nodes_.reserve(indices.size() * length_);
    for (auto i : indices) out.add((*this)[i]);
    return out;
  }

  std::vector<NodeId>& storage() noexcept { return nodes_; }

  std::size_t isolated_skipped = 0;  ///< isolated nodes PATHGEN could not start from

  bool operator==(const PathSet& o) const noexcept { return length_ == o.length_ && nodes_ == o.nodes_; }

private:
  std::size_t length_ = 0;
  WalkParams params_;
  std::uint32_t layer_ = 0;
  std::vector<NodeId> nodes_;
};

/// Walk restarts per PATHGEN round, from degree centrality:
/// r · max(1, round(deg / mean_deg)), or 0 for an isolated node.
inline std::size_t importance_restarts(const Graph& g, NodeId v, std::size_t r) {
  const auto deg = g.degree(v);
  if (deg == 0) return 0;
  const auto ratio = std::llround(static_cast<double>(deg) / g.mean_degree());
  return r * static_cast<std::size_t>(std::max<long long>(1, ratio));
}

struct StepWeights {
  std::span<const NodeId> neighbors;
  std::vector<double> weights;  ///< unnormalized, aligned with neighbors
};

namespace detail {

inline void fill_step_weights(const Graph& g, NodeId prev, NodeId cur, double inv_p, double inv_q,
                              std::vector<double>& w) {
  auto nb = g.neighbors(cur);
  auto prev_nb = g.neighbors(prev);
  w.resize(nb.size());
  // Both lists are sorted: merge instead of binary-searching each candidate.
  std::size_t j = 0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const NodeId x = nb[i];
    if (x == prev) {
      w[i] = inv_p;
      continue;
    }
    while (j < prev_nb.size() && prev_nb[j] < x) ++j;
    w[i] = (j < prev_nb.size() && prev_nb[j] == x) ? 1.0 : inv_q;
  }
}

} // namespace detail

/// Unnormalized second-order transition weights out of `cur` given the walk
/// arrived from `prev`: 1/p to return, 1 to a common neighbor, 1/q otherwise.
inline StepWeights second_order_step_weights(const Graph& g, NodeId prev, NodeId cur, double p, double q) {
  if (prev >= g.num_nodes() || cur >= g.num_nodes()) throw IndexError("node id out of range");
  if (!g.has_edge(cur, prev))
    throw ArgumentError("prev " + std::to_string(prev) + " is not adjacent to cur " + std::to_string(cur));
  StepWeights out{g.neighbors(cur), {}};
  detail::fill_step_weights(g, prev, cur, 1.0 / p, 1.0 / q, out.weights);
  return out;
}

namespace detail {

/// Writes one walk of out.size() nodes starting at `start`.
inline void walk_into(const Graph& g, NodeId start, double inv_p, double inv_q, CounterRng& rng,
                      std::span<NodeId> out, std::vector<double>& scratch) {
  out[0] = start;
  if (out.size() == 1) return;
  auto nb0 = g.neighbors(start);
  if (nb0.empty()) throw DegenerateWalkError("walk starts at isolated node " + std::to_string(start));
  out[1] = nb0[rng.below(nb0.size())];
  for (std::size_t step = 2; step < out.size(); ++step) {
    const NodeId prev = out[step - 2], cur = out[step - 1];
    fill_step_weights(g, prev, cur, inv_p, inv_q, scratch);
    const double total = std::accumulate(scratch.begin(), scratch.end(), 0.0);
    double u = rng.uniform() * total;
    auto nb = g.neighbors(cur);
    std::size_t pick = nb.size() - 1;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      u -= scratch[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    out[step] = nb[pick];
  }
}

} // namespace detail

/// One (p, q)-biased walk of params.length nodes. The first hop is uniform.
inline FlowPath node2vec_walk(const Graph& g, NodeId start, const WalkParams& params, CounterRng& rng) {
  params.validate();
  if (start >= g.num_nodes()) throw IndexError("start node out of range");
  FlowPath path(params.length);
  std::vector<double> scratch;
  detail::walk_into(g, start, 1.0 / params.p, 1.0 / params.q, rng, path, scratch);
  return path;
}

/// Stream key for the walks started at `node` in PATHGEN round `iter`.
inline std::uint64_t walk_stream(const WalkParams& params, std::uint32_t layer, std::uint64_t round, NodeId node,
                                 std::size_t iter) {
  return derive_seed(params.seed, layer, round, node, iter);
}

/// PATHGEN: r rounds; in each, every non-isolated node starts
/// importance_restarts(g, v, 1) walks. Output order is (round, node, restart)
/// and depends only on (graph, params, layer, round), never on `threads`.
inline PathSet pathgen(const Graph& g, const WalkParams& params, std::uint32_t layer = 0, std::uint64_t round = 0,
                       unsigned threads = 1) {
  params.validate();
  PathSet out(params.length, params, layer);
  const std::size_t n = g.num_nodes();

  std::vector<std::size_t> offset(n + 1, 0);
  for (NodeId v = 0; v < n; ++v) offset[v + 1] = offset[v] + importance_restarts(g, v, 1);
  for (NodeId v = 0; v < n; ++v)
    if (g.degree(v) == 0) ++out.isolated_skipped;
  const std::size_t per_round = offset[n];

  auto& storage = out.storage();
  storage.resize(per_round * params.iterations * params.length);
  const double inv_p = 1.0 / params.p, inv_q = 1.0 / params.q;
  for (std::size_t iter = 0; iter < params.iterations; ++iter) {
    const std::size_t round_base = iter * per_round;
    parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, unsigned) {
      std::vector<double> scratch;
      for (std::size_t v = begin; v < end; ++v) {
        const auto node = static_cast<NodeId>(v);
        const std::size_t count = offset[v + 1] - offset[v];
        if (count == 0) continue;
        CounterRng rng(walk_stream(params, layer, round, node, iter));
        for (std::size_t i = 0; i < count; ++i) {
          std::span<NodeId> dst(storage.data() + (round_base + offset[v] + i) * params.length, params.length);
          detail::walk_into(g, node, inv_p, inv_q, rng, dst, scratch);
        }
      }
    });
  }
  return out;
}

/// Throws ShapeError / FormatError unless every path has the set's length
/// and consecutive nodes are adjacent.
inline void validate_paths(const Graph& g, const PathSet& paths) {
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto p = paths[i];
    if (p.size() != paths.length()) throw ShapeError("path length mismatch");
    for (auto v : p)
      if (v >= g.num_nodes()) throw IndexError("path " + std::to_string(i) + " has node out of range");
    for (std::size_t j = 1; j < p.size(); ++j)
      if (!g.has_edge(p[j - 1], p[j]))
        throw FormatError("path " + std::to_string(i) + " uses missing edge " + std::to_string(p[j - 1]) + "-" +
                          std::to_string(p[j]));
  }
}

/// Path dump: one path per line, space-separated node ids.
inline void write_paths(std::ostream& os, const PathSet& paths) {
  std::string line;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    line.clear();
    auto p = paths[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j) line += ' ';
      line += std::to_string(p[j]);
    }
    line += '\n';
    os << line;
  }
}

inline PathSet read_paths(std::istream& is) {
  PathSet out;
  std::string line;
  std::vector<NodeId> buf;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    buf.clear();
    std::uint64_t v;
    while (ls >> v) buf.push_back(static_cast<NodeId>(v));
    if (!ls.eof()) throw ParseError("path dump line " + std::to_string(lineno) + ": non-numeric token");
    if (buf.empty()) continue;
    if (out.length() == 0) out = PathSet(buf.size());
    if (buf.size() != out.length())
      throw FormatError("path dump line " + std::to_string(lineno) + ": length " + std::to_string(buf.size()) +
                        " differs from " + std::to_string(out.length()));
    out.add(buf);
  }
  return out;
}

} // namespace flowgn

#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "graph.hpp"
#include "model.hpp"
#include "propagation.hpp"
#include "walk.hpp"

namespace flowgn {

/// (1/2)·Σ|a_i − b_i| between two probability vectors.
inline double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("tv_distance: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(sa - 1.0) > 1e-6 || std::abs(sb - 1.0) > 1e-6)
    throw ArgumentError("tv_distance: inputs must sum to 1 (got " + std::to_string(sa) + ", " + std::to_string(sb) + ")");
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

inline std::vector<double> normalize(std::vector<double> scores) {
  const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (!(total > 0.0)) throw EmptyInfluenceError("influence scores sum to zero");
  for (auto& s : scores) s /= total;
  return scores;
}

/// I(x, y) = Σ_{i,j} |∂h_x^K[i] / ∂h_y^0[j]| for every y, by one reverse
/// pass per output coordinate of h_x^K. Refuses inputs with more than
/// `max_input_entries` entries.
inline std::vector<double> influence_jacobian(const ModelParams& params, Features features,
                                              std::span<const PropagationMatrix> props, NodeId x,
                                              Activation activation = Activation::relu,
                                              std::size_t max_input_entries = 10'000) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (n * static_cast<std::size_t>(features.cols()) > max_input_entries)
    throw TooLargeError("dense Jacobian probe over " + std::to_string(n) + "x" + std::to_string(features.cols()) +
                        " inputs exceeds the limit of " + std::to_string(max_input_entries));
  if (x >= n) throw IndexError("target node out of range");
  const auto st = forward(features, props, params, activation);
  const auto out_dim = st.top().cols();
  std::vector<double> scores(n, 0.0);
  for (Eigen::Index i = 0; i < out_dim; ++i) {
    Matrix seed = Matrix::Zero(static_cast<Eigen::Index>(n), out_dim);
    seed(x, i) = 1.0;
    const Matrix grad = detail::backprop_layers(st, props, params, std::move(seed), nullptr, true);
    for (std::size_t y = 0; y < n; ++y) scores[y] += grad.row(static_cast<Eigen::Index>(y)).cwiseAbs().sum();
  }
  return scores;
}

/// Empirical distribution over the sources of flows conserved at x. With
/// sink_only, only flows that end at x count.
inline std::vector<double> flow_influence(const PathSet& paths, std::size_t num_nodes, NodeId x, bool sink_only) {
  if (x >= num_nodes) throw IndexError("target node out of range");
  std::vector<double> counts(num_nodes, 0.0);
  std::size_t total = 0;
  for (std::size_t m = 0; m < paths.size(); ++m) {
    auto p = paths[m];
    const std::size_t first = sink_only ? p.size() - 1 : 1;
    for (std::size_t i = first; i < p.size(); ++i)
      if (p[i] == x) {
        counts[p[0]] += 1.0;
        ++total;
      }
  }
  if (total == 0) throw EmptyInfluenceError("no flow is conserved at node " + std::to_string(x));
  for (auto& c : counts) c /= static_cast<double>(total);
  return counts;
}

struct InfluenceReport {
  NodeId x = 0;
  std::size_t k = 0;
  std::size_t samples = 0;
  double tv = 0.0;
  std::string method = "flow-count";  ///< "flow-count" or "jacobian"
  std::vector<double> dist;           ///< influence distribution at x
  std::vector<double> ref;            ///< k-step random-walk distribution from x
  std::size_t conserved = 0;          ///< flows that contributed to dist

  nlohmann::json to_json() const {
    return {{"x", x}, {"k", k}, {"samples", samples}, {"tv", tv}, {"method", method}, {"dist", dist}, {"ref", ref}};
  }
};

inline NodeId torus_center(std::size_t rows, std::size_t cols) {
  return static_cast<NodeId>((rows / 2) * cols + cols / 2);
}

/// `samples` uniform walks (p = q = 1) of k+1 nodes on the torus; walk j
/// starts at node j mod n with its own derived stream.
inline PathSet sample_torus_walks(const Graph& torus, std::size_t k, std::size_t samples, std::uint64_t seed,
                                  unsigned threads = 1) {
  WalkParams wp;
  wp.p = 1.0;
  wp.q = 1.0;
  wp.length = k + 1;
  wp.seed = seed;
  PathSet out(wp.length, wp, 0);
  auto& store = out.storage();
  store.resize(samples * wp.length);
  const std::size_t n = torus.num_nodes();
  parallel_chunks(samples, threads, [&](std::size_t begin, std::size_t end, unsigned) {
    std::vector<double> scratch;
    for (std::size_t j = begin; j < end; ++j) {
      const auto start = static_cast<NodeId>(j % n);
      CounterRng rng(derive_seed(seed, 0x544f5255ULL, start, j / n));
      detail::walk_into(torus, start, 1.0, 1.0, rng, std::span<NodeId>(store.data() + j * wp.length, wp.length), scratch);
    }
  });
  return out;
}

/// Flow-count influence at the torus center from sink-only uniform walks,
/// compared with the exact k-step random-walk distribution.
inline InfluenceReport verify_theorem(std::size_t rows, std::size_t cols, std::size_t k, std::size_t samples,
                                      std::uint64_t seed, unsigned threads = 1) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  const Graph torus = grid_torus(rows, cols);
  if (samples == 0) throw EmptyInfluenceError("no samples requested");
  const auto paths = sample_torus_walks(torus, k, samples, seed, threads);
  InfluenceReport r;
  r.x = torus_center(rows, cols);
  r.k = k;
  r.samples = samples;
  r.dist = flow_influence(paths, torus.num_nodes(), r.x, true);
  for (std::size_t m = 0; m < paths.size(); ++m) r.conserved += paths[m].back() == r.x;
  r.ref = k_step_rw_distribution(torus, r.x, k);
  r.tv = tv_distance(r.dist, r.ref);
  return r;
}

} // namespace flowgn

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <flowgn/flowgn.hpp>

namespace fixtures {

using flowgn::Graph;
using flowgn::NodeId;
using Edge = std::pair<NodeId, NodeId>;

inline Graph make(std::size_t n, std::vector<Edge> edges) { return Graph::from_edges(n, edges); }
inline Graph two_node() { return make(2, {{0, 1}}); }
inline Graph path3() { return make(3, {{0, 1}, {1, 2}}); }
inline Graph triangle() { return make(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline Graph star4() { return make(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}); }

/// Random spanning tree plus `extra` random edges; always connected.
inline Graph random_connected(std::size_t n, std::size_t extra, std::mt19937_64& rng) {
  std::vector<Edge> edges;
  for (NodeId v = 1; v < n; ++v) edges.emplace_back(v, static_cast<NodeId>(rng() % v));
  for (std::size_t i = 0; i < extra; ++i) {
    const auto a = static_cast<NodeId>(rng() % n), b = static_cast<NodeId>(rng() % n);
    if (a != b) edges.emplace_back(a, b);
  }
  return make(n, edges);
}

/// Uniform random walks of `length` nodes from random starts.
inline flowgn::PathSet random_paths(const Graph& g, std::size_t length, std::size_t count, std::mt19937_64& rng) {
  flowgn::PathSet ps(length);
  std::vector<NodeId> p(length);
  for (std::size_t m = 0; m < count; ++m) {
    p[0] = static_cast<NodeId>(rng() % g.num_nodes());
    for (std::size_t i = 1; i < length; ++i) {
      auto nb = g.neighbors(p[i - 1]);
      p[i] = nb[rng() % nb.size()];
    }
    ps.add(p);
  }
  return ps;
}

inline flowgn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  flowgn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

/// Model with every tensor drawn uniformly from [-scale, scale].
inline flowgn::ModelParams random_params(std::size_t d, std::size_t hidden, std::size_t classes, std::size_t depth,
                                         std::mt19937_64& rng, double scale = 1.0) {
  auto p = flowgn::init_params(d, hidden, classes, depth, 0);
  p.for_each_tensor([&](auto& t, bool) { t = random_matrix(t.rows(), t.cols(), rng, scale); });
  return p;
}

/// Two well separated 2-d blobs of 10 nodes, each blob a ring.
inline flowgn::DatasetBundle blobs() {
  flowgn::DatasetBundle b;
  const std::size_t n = 20;
  std::vector<Edge> edges;
  for (NodeId i = 0; i < 10; ++i) {
    edges.emplace_back(i, (i + 1) % 10);
    edges.emplace_back(10 + i, 10 + (i + 1) % 10);
  }
  b.graph = Graph::from_edges(n, edges);
  b.edge_records = edges.size();
  b.features.resize(n, 2);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (NodeId v = 0; v < n; ++v) {
    const double c = v < 10 ? -2.0 : 2.0;
    b.features(v, 0) = c + noise(rng);
    b.features(v, 1) = -c + noise(rng);
    b.labels.push_back(v < 10 ? 0 : 1);
    b.split.push_back(v % 10 < 7 ? flowgn::Split::train : flowgn::Split::val);
  }
  b.num_classes = 2;
  return b;
}

/// Writes a dataset directory from line lists.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& graph,
                                           const std::string& features, const std::string& labels,
                                           const std::string& split) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "graph.tsv") << graph;
  std::ofstream(dir / "features.tsv") << features;
  std::ofstream(dir / "labels.tsv") << labels;
  std::ofstream(dir / "split.tsv") << split;
  return dir;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("flowgn_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

} // namespace fixtures

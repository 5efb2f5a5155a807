#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "checks.hpp"

using namespace flowgn;

TEST(Restarts, UniformDegreesGiveR) {
  const auto g = grid_torus(4, 5);
  for (NodeId v = 0; v < g.num_nodes(); ++v) EXPECT_EQ(importance_restarts(g, v, 3), 3u);
}

TEST(Restarts, StarMatchesRecomputation) {
  const auto g = fixtures::star4();
  const double mean = 8.0 / 5.0;
  auto expected = [&](NodeId v, std::size_t r) {
    const double ratio = static_cast<double>(g.degree(v)) / mean;
    return r * static_cast<std::size_t>(std::max(1.0, std::round(ratio)));
  };
  EXPECT_EQ(importance_restarts(g, 0, 1), 3u);
  EXPECT_EQ(importance_restarts(g, 1, 1), 1u);
  for (NodeId v = 0; v < 5; ++v)
    for (std::size_t r : {1u, 2u, 7u}) EXPECT_EQ(importance_restarts(g, v, r), expected(v, r));
}

TEST(Restarts, IsolatedNodeGetsNone) {
  const auto g = fixtures::make(3, {{0, 1}});
  EXPECT_EQ(importance_restarts(g, 2, 5), 0u);
}

TEST(StepWeights, PathGraphUniformAtUnitParameters) {
  const auto w = second_order_step_weights(fixtures::path3(), 0, 1, 1.0, 1.0);
  ASSERT_EQ(w.neighbors.size(), 2u);
  EXPECT_DOUBLE_EQ(w.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(w.weights[1], 1.0);
}

TEST(StepWeights, MatchBruteForceProbabilities) {
  struct Case {
    Graph g;
    NodeId prev, cur;
    double p, q;
    std::vector<double> probs;
  };
  const std::vector<Case> cases{
      {fixtures::path3(), 0, 1, 2.0, 0.5, {0.2, 0.8}},
      {fixtures::triangle(), 0, 1, 2.0, 0.5, {1.0 / 3.0, 2.0 / 3.0}},
  };
  for (const auto& c : cases) {
    const auto w = second_order_step_weights(c.g, c.prev, c.cur, c.p, c.q);
    const auto ref = oracle::alpha_probs(c.g, c.prev, c.cur, c.p, c.q);
    double total = 0.0;
    for (double x : w.weights) total += x;
    for (std::size_t i = 0; i < w.neighbors.size(); ++i) {
      EXPECT_NEAR(w.weights[i] / total, c.probs[i], 1e-15);
      EXPECT_NEAR(w.weights[i] / total, ref.at(w.neighbors[i]), 1e-15);
    }
  }
  // raw weights of the path case: 1/p back to 0, 1/q on to 2
  const auto w = second_order_step_weights(fixtures::path3(), 0, 1, 2.0, 0.5);
  EXPECT_DOUBLE_EQ(w.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(w.weights[1], 2.0);
}

TEST(StepWeights, RandomGraphsMatchOracle) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const auto g = fixtures::random_connected(12, 20, rng);
    const auto cur = static_cast<NodeId>(rng() % 12);
    const auto prev = g.neighbors(cur)[rng() % g.degree(cur)];
    const double p = 0.25 + (rng() % 8), q = 0.25 + (rng() % 8);
    const auto w = second_order_step_weights(g, prev, cur, p, q);
    const auto ref = oracle::alpha_probs(g, prev, cur, p, q);
    double total = 0.0;
    for (double x : w.weights) total += x;
    ASSERT_EQ(w.neighbors.size(), ref.size());
    for (std::size_t i = 0; i < w.neighbors.size(); ++i) EXPECT_NEAR(w.weights[i] / total, ref.at(w.neighbors[i]), 1e-14);
  }
}

TEST(StepWeights, NonAdjacentPrevIsArgumentError) {
  EXPECT_THROW(second_order_step_weights(fixtures::path3(), 0, 2, 1.0, 1.0), ArgumentError);
}

TEST(Node2vecWalk, TwoNodeAlternates) {
  WalkParams wp;
  wp.length = 4;
  CounterRng rng(1);
  EXPECT_EQ(node2vec_walk(fixtures::two_node(), 0, wp, rng), (FlowPath{0, 1, 0, 1}));
}

TEST(Node2vecWalk, LengthTwoIsUniformFirstStep) {
  WalkParams wp;
  wp.length = 2;
  const auto g = fixtures::star4();
  std::vector<int> hits(5, 0);
  for (std::uint64_t s = 0; s < 40'000; ++s) {
    CounterRng rng(derive_seed(3, s));
    const auto p = node2vec_walk(g, 0, wp, rng);
    ASSERT_EQ(p.size(), 2u);
    ++hits[p[1]];
  }
  EXPECT_EQ(hits[0], 0);
  for (NodeId v = 1; v < 5; ++v) EXPECT_NEAR(hits[v] / 40'000.0, 0.25, 0.015);
}

TEST(Node2vecWalk, IsolatedStartThrows) {
  const auto g = fixtures::make(3, {{0, 1}});
  WalkParams wp;
  CounterRng rng(1);
  EXPECT_THROW(node2vec_walk(g, 2, wp, rng), DegenerateWalkError);
}

TEST(Node2vecWalk, EndpointsMatchRandomWalkOnTorus) {
  const auto g = grid_torus(5, 5);
  const std::size_t k = 3;
  WalkParams wp;
  wp.length = k + 1;
  std::vector<double> freq(g.num_nodes(), 0.0);
  const std::size_t n = 100'000;
  for (std::uint64_t s = 0; s < n; ++s) {
    CounterRng rng(derive_seed(5, s));
    freq[node2vec_walk(g, 12, wp, rng).back()] += 1.0 / n;
  }
  EXPECT_LT(tv_distance(freq, k_step_rw_distribution(g, 12, k)), 0.02);
}

TEST(Node2vecWalk, HighReturnParameterSuppressesBacktracking) {
  WalkParams wp;
  wp.p = 1000;
  wp.q = 1;
  wp.length = 100'001;
  CounterRng rng(9);
  const auto path = node2vec_walk(fixtures::triangle(), 0, wp, rng);
  std::size_t back = 0;
  for (std::size_t i = 2; i < path.size(); ++i) back += path[i] == path[i - 2];
  const double exact = (1.0 / 1000) / (1.0 / 1000 + 1.0);
  const double freq = static_cast<double>(back) / (path.size() - 2);
  EXPECT_LT(freq, 0.002);
  EXPECT_NEAR(freq, exact, 5 * std::sqrt(exact / (path.size() - 2)));
}

TEST(Node2vecWalk, KernelFrequenciesMatchWeights) {
  for (const auto& c : checks::kernel_cases()) {
    const auto r = checks::walk_kernel_tv(c, 20'000, 17);
    EXPECT_GE(r.min_steps, 20'000u) << c.name;
    EXPECT_LT(r.max_tv, 0.02) << c.name;
  }
}

TEST(Pathgen, TorusPathCount) {
  WalkParams wp;
  wp.iterations = 2;
  const auto g = grid_torus(10, 10);
  const auto ps = pathgen(g, wp);
  EXPECT_EQ(ps.size(), 200u);
  EXPECT_NO_THROW(validate_paths(g, ps));
}

TEST(Pathgen, StarPathCountAndOrder) {
  WalkParams wp;
  wp.iterations = 1;
  wp.length = 3;
  const auto ps = pathgen(fixtures::star4(), wp);
  ASSERT_EQ(ps.size(), 7u);
  // (round, node, restart) order: three from the center, then one per leaf
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ps[i][0], 0u);
  for (NodeId v = 1; v < 5; ++v) EXPECT_EQ(ps[2 + v][0], v);
}

TEST(Pathgen, EmptyEdgeSetGivesNoPaths) {
  const auto ps = pathgen(fixtures::make(4, {}), WalkParams{});
  EXPECT_EQ(ps.size(), 0u);
  EXPECT_EQ(ps.isolated_skipped, 4u);
}

TEST(Pathgen, EveryPathValid) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const auto g = fixtures::random_connected(40, 60, rng);
    WalkParams wp;
    wp.p = 0.5 + t;
    wp.q = 2.0 / (t + 1);
    wp.length = 2 + t;
    wp.iterations = 3;
    wp.seed = t;
    const auto ps = pathgen(g, wp, 1);
    EXPECT_EQ(ps.length(), wp.length);
    EXPECT_NO_THROW(validate_paths(g, ps));
  }
}

TEST(Pathgen, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(41);
  const auto g = fixtures::random_connected(300, 600, rng);
  WalkParams wp;
  wp.q = 0.3;
  wp.p = 4;
  wp.seed = 77;
  const auto a = pathgen(g, wp, 2, 0, 1);
  const auto b = pathgen(g, wp, 2, 0, 4);
  const auto c = pathgen(g, wp, 2, 0, 7);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  std::ostringstream sa, sb;
  write_paths(sa, a);
  write_paths(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Pathgen, LayerTagAndSeedChangeStreams) {
  const auto g = grid_torus(6, 6);
  WalkParams wp;
  const auto a = pathgen(g, wp, 1);
  const auto b = pathgen(g, wp, 2);
  wp.seed = 1;
  const auto c = pathgen(g, wp, 1);
  EXPECT_FALSE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Pathgen, InvalidParamsRejected) {
  WalkParams wp;
  wp.length = 1;
  EXPECT_THROW(pathgen(grid_torus(3, 3), wp), ArgumentError);
  wp = {};
  wp.q = 0;
  EXPECT_THROW(pathgen(grid_torus(3, 3), wp), ArgumentError);
}

TEST(PathDump, RoundTrip) {
  WalkParams wp;
  wp.iterations = 2;
  const auto ps = pathgen(grid_torus(4, 4), wp);
  std::stringstream ss;
  write_paths(ss, ps);
  const auto back = read_paths(ss);
  EXPECT_EQ(back, ps);
}

TEST(PathSet, AddRejectsWrongLength) {
  PathSet ps(3);
  const std::vector<NodeId> p{0, 1};
  EXPECT_THROW(ps.add(p), ShapeError);
}

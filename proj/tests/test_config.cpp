#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"

using namespace flowgn;

namespace {

DatasetBundle blobs_with_test() {
  auto b = fixtures::blobs();
  for (NodeId v = 0; v < 20; ++v) b.split[v] = v % 10 < 5 ? Split::train : v % 10 < 7 ? Split::val : Split::test;
  return b;
}

} // namespace

TEST(RunConfig, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.model.layers, 2u);
  EXPECT_EQ(c.model.hidden, 50u);
  EXPECT_DOUBLE_EQ(c.model.lr, 1e-4);
  EXPECT_DOUBLE_EQ(c.model.weight_decay, 1e-5);
  EXPECT_EQ(c.model.max_epochs, 100u);
  EXPECT_EQ(c.model.patience, 10u);
  EXPECT_EQ(c.model.batch_mode, BatchMode::full);
  EXPECT_FALSE(c.model.resample_per_epoch);
  EXPECT_DOUBLE_EQ(c.walk.p, 1000.0);
  EXPECT_EQ(c.walk.iterations, 10u);
}

TEST(RunConfig, ParseFile) {
  const auto kv = parse_config_text("# comment\nlr = 0.01\n\nwalk-q=0.5  # trailing\nresample-per-epoch = yes\n");
  const auto c = merge_config(kv, {});
  EXPECT_DOUBLE_EQ(c.model.lr, 0.01);
  EXPECT_DOUBLE_EQ(c.walk.q, 0.5);
  EXPECT_TRUE(c.model.resample_per_epoch);
}

TEST(RunConfig, UnknownKeyRejected) {
  EXPECT_THROW(parse_config_text("learning-rate = 1\n"), ConfigError);
  EXPECT_THROW(merge_config({}, {{"nope", "1"}}), ConfigError);
  EXPECT_THROW(parse_config_text("lr 0.1\n"), ConfigError);
}

TEST(RunConfig, BadValuesRejected) {
  EXPECT_THROW(merge_config({{"lr", "fast"}}, {}), ConfigError);
  EXPECT_THROW(merge_config({{"layers", "-1"}}, {}), ConfigError);
  EXPECT_THROW(merge_config({{"batch-mode", "mini"}}, {}), ConfigError);
  EXPECT_THROW(merge_config({{"resample-per-epoch", "maybe"}}, {}), ConfigError);
}

TEST(RunConfig, FlagsOverrideFileAndAreNoted) {
  const auto c = merge_config({{"lr", "0.5"}, {"hidden", "16"}}, {{"lr", "0.1"}, {"hidden", "16"}});
  EXPECT_DOUBLE_EQ(c.model.lr, 0.1);
  ASSERT_EQ(c.notes.size(), 1u);
  EXPECT_NE(c.notes[0].find("--lr"), std::string::npos);
}

TEST(RunConfig, SeedDrivesWalkAndModel) {
  const auto c = merge_config({}, {{"seed", "42"}});
  EXPECT_EQ(c.model.seed, 42u);
  EXPECT_EQ(c.walk.seed, 42u);
}

TEST(RunConfig, EveryKeyRoundTrips) {
  RunConfig c;
  c.dataset = "d";
  c.model.layers = 3;
  c.walk.q = 0.25;
  c.model.batch_mode = BatchMode::path_batch;
  const auto back = merge_config(parse_config_text(to_config_text(c)), {});
  EXPECT_EQ(to_config_text(back), to_config_text(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(ConfigHash, IgnoresExecutionOnlyKeys) {
  RunConfig a;
  RunConfig b = a;
  b.jobs = 8;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.model.lr = 0.5;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(hex64(config_hash(a)).size(), 16u);
}

TEST(MeanStd, SampleStd) {
  const std::vector<double> xs{1, 2, 3, 4};
  const auto m = mean_std(xs);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std, std::sqrt(5.0 / 3.0), 1e-15);
  const std::vector<double> one{0.7};
  EXPECT_EQ(mean_std(one).std, 0.0);
}

TEST(Sweep, ParseDimensions) {
  const auto l = parse_sweep_dimension("l=2..5");
  EXPECT_EQ(l.axis, SweepAxis::l);
  EXPECT_EQ(l.values, (std::vector<double>{2, 3, 4, 5}));
  const auto q = parse_sweep_dimension("q=0.1, 0.5,1");
  EXPECT_EQ(q.values, (std::vector<double>{0.1, 0.5, 1}));
  EXPECT_EQ(parse_sweep_dimension("K=1..3,5").values, (std::vector<double>{1, 2, 3, 5}));
  EXPECT_THROW(parse_sweep_dimension("x=1"), ArgumentError);
  EXPECT_THROW(parse_sweep_dimension("l="), ArgumentError);
  EXPECT_THROW(parse_sweep_dimension("l=1.5"), ArgumentError);
  EXPECT_THROW(parse_sweep_dimension("K=0"), ArgumentError);
  EXPECT_THROW(parse_sweep_dimension("q"), ArgumentError);
}

TEST(Sweep, GridOrderAndErrors) {
  RunConfig base;
  const std::vector<SweepDimension> dims{parse_sweep_dimension("l=2,4"), parse_sweep_dimension("q=1,2,3")};
  const auto cells = sweep_grid(base, dims);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].l, 2);
  EXPECT_EQ(cells[0].q, 1);
  EXPECT_EQ(cells[2].q, 3);
  EXPECT_EQ(cells[3].l, 4);
  EXPECT_EQ(cells[5].config.walk.length, 4u);
  EXPECT_EQ(cells[5].K, 2);
  EXPECT_THROW(sweep_grid(base, {}), ArgumentError);
  const std::vector<SweepDimension> three{parse_sweep_dimension("l=2"), parse_sweep_dimension("q=1"),
                                          parse_sweep_dimension("K=1")};
  EXPECT_THROW(sweep_grid(base, three), ArgumentError);
  const std::vector<SweepDimension> dup{parse_sweep_dimension("l=2"), parse_sweep_dimension("l=3")};
  EXPECT_THROW(sweep_grid(base, dup), ArgumentError);
}

TEST(Sweep, SingleCellMatchesTrainMetrics) {
  const auto dir = fixtures::temp_dir("sweep_ds");
  const auto b = blobs_with_test();
  {
    std::ofstream g(dir / "graph.tsv"), f(dir / "features.tsv"), l(dir / "labels.tsv"), s(dir / "split.tsv");
    for (NodeId u = 0; u < b.num_nodes(); ++u)
      for (NodeId v : b.graph.neighbors(u))
        if (u < v) g << u << ' ' << v << '\n';
    for (Eigen::Index v = 0; v < b.features.rows(); ++v) f << b.features(v, 0) << ' ' << b.features(v, 1) << '\n';
    for (int y : b.labels) l << y << '\n';
    for (auto sp : b.split) s << to_string(sp) << '\n';
  }
  RunConfig c;
  c.dataset = dir.string();
  c.normalize_features = false;
  c.model.hidden = 6;
  c.model.lr = 0.01;
  c.model.max_epochs = 20;
  c.walk.length = 3;
  c.runs = 2;
  const auto bundle = load_for(c);
  const auto runs = run_experiment(bundle, c);
  const auto metrics = metrics_json(c, runs);
  const std::vector<SweepDimension> dims{parse_sweep_dimension("l=3")};
  const auto rows = run_sweep(bundle, c, dims);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].test_acc.mean, metrics["test_acc"].get<double>());
  EXPECT_EQ(rows[0].test_acc.std, metrics["test_acc_std"].get<double>());
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_TRUE(os.str().starts_with("l,q,K,test_acc,std\n3,0.1,2,")) << os.str();
}

TEST(Metrics, JobsDoNotChangeMetrics) {
  const auto b = blobs_with_test();
  RunConfig c;
  c.model.hidden = 6;
  c.model.lr = 0.01;
  c.model.max_epochs = 10;
  c.walk.length = 3;
  c.runs = 3;
  const auto one = metrics_json(c, run_experiment(b, c));
  c.jobs = 3;
  const auto three = metrics_json(c, run_experiment(b, c));
  EXPECT_EQ(one.dump(), three.dump());
  EXPECT_EQ(one["schema"], 1);
  EXPECT_EQ(one["per_run"].size(), 3u);
}

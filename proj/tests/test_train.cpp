#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace flowgn;

namespace {

WalkParams ring_walks() {
  WalkParams wp;
  wp.length = 3;
  wp.iterations = 2;
  return wp;
}

TrainResult fit(const DatasetBundle& b, const ModelConfig& c, WalkParams wp = ring_walks()) {
  return train(b, c, std::span<const WalkParams>(&wp, 1));
}

} // namespace

TEST(EarlyStopping, PlateauFromEpochFiveHaltsAtFifteen) {
  EarlyStopping es(10);
  std::size_t stopped = 0;
  for (std::size_t epoch = 1; epoch <= 100; ++epoch) {
    const double v = epoch <= 5 ? 1.0 / static_cast<double>(epoch) : 0.2;
    if (es.observe(epoch, v)) {
      stopped = epoch;
      break;
    }
  }
  EXPECT_EQ(stopped, 15u);
  EXPECT_EQ(es.best_epoch(), 5u);
}

TEST(PathBatches, SliceSizes) {
  PathSet ps(4);
  const std::vector<NodeId> p{0, 1, 2, 3};
  for (int i = 0; i < 100; ++i) ps.add(p);
  const auto batches = path_batches(ps, 256);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].size(), 64u);
  EXPECT_EQ(batches[1].size(), 36u);
}

TEST(PathBatches, OnePathPerSliceAtBoundary) {
  const auto ranges = path_batch_ranges(5, 256, 256);
  ASSERT_EQ(ranges.size(), 5u);
  for (auto [b, e] : ranges) EXPECT_EQ(e - b, 1u);
  EXPECT_THROW(path_batch_ranges(5, 8, 7), ArgumentError);
}

TEST(PathBatches, SubproblemSharesSliceAcrossLayers) {
  const auto b = fixtures::blobs();
  PathSet slice(3);
  slice.add(std::vector<NodeId>{12, 11, 10});
  const auto bp = detail::make_batch_problem(b, slice, 3, 0.5, nullptr);
  EXPECT_EQ(bp.nodes, (std::vector<NodeId>{10, 11, 12}));
  ASSERT_EQ(bp.ops.size(), 3u);
  for (const auto& op : bp.ops) {
    EXPECT_DOUBLE_EQ(op.at(1, 2), 1.0);  // 11 holds 12's flow
    EXPECT_DOUBLE_EQ(op.at(0, 2), 0.5);  // decayed once by 11
    EXPECT_TRUE(op.row_empty(2));
  }
  // blobs: 10 and 11 are train nodes (v % 10 < 7)
  EXPECT_EQ(bp.mask, (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(bp.dense.row(2), b.features.row(12));
}

TEST(Train, BlobsReachFullTrainAccuracy) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 8;
  c.lr = 0.01;
  c.max_epochs = 200;
  c.patience = 200;
  const auto r = fit(b, c);
  EXPECT_DOUBLE_EQ(r.report.final_accuracy.train, 1.0);
  EXPECT_LE(r.report.epochs.size(), 200u);
}

TEST(Train, BestEpochHasLowestValLoss) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 8;
  c.lr = 0.05;
  c.max_epochs = 60;
  c.patience = 5;
  const auto r = fit(b, c);
  ASSERT_GE(r.report.best_epoch, 1u);
  const double best = r.report.epochs[r.report.best_epoch - 1].val_loss;
  for (const auto& e : r.report.epochs) EXPECT_LE(best, e.val_loss);
  // returned parameters are the best epoch's: re-evaluating reproduces its val loss
  const auto st = forward(Features(b.features), r.operators.ops, r.params, c.activation);
  EXPECT_NEAR(loss(st.logits, b.labels, b.nodes_in(Split::val), r.params, c.weight_decay), best, 1e-12);
}

TEST(Train, SmallStepsNeverIncreaseTrainLoss) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 8;
  c.lr = 1e-5;
  c.max_epochs = 30;
  c.patience = 100;
  const auto r = fit(b, c);
  ASSERT_EQ(r.report.epochs.size(), 30u);
  for (std::size_t i = 1; i < r.report.epochs.size(); ++i)
    EXPECT_LE(r.report.epochs[i].train_loss, r.report.epochs[i - 1].train_loss) << "epoch " << i + 1;
}

TEST(Train, ZeroEpochsEvaluatesInitialModel) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.max_epochs = 0;
  const auto r = fit(b, c);
  EXPECT_TRUE(r.report.epochs.empty());
  EXPECT_EQ(r.report.best_epoch, 0u);
  const auto init = init_params(2, c.hidden, 2, c.layers, c.seed);
  EXPECT_EQ(r.params.out_weight, init.out_weight);
}

TEST(Train, DeterministicAcrossRunsAndThreads) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 6;
  c.lr = 0.01;
  c.max_epochs = 20;
  c.seed = 4;
  const auto a = fit(b, c);
  c.threads = 3;
  const auto d = fit(b, c);
  EXPECT_EQ(a.params.layers[0].weight, d.params.layers[0].weight);
  EXPECT_EQ(a.params.out_weight, d.params.out_weight);
  ASSERT_EQ(a.report.epochs.size(), d.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i)
    EXPECT_EQ(a.report.epochs[i].val_loss, d.report.epochs[i].val_loss);
}

TEST(Train, ResamplePerEpochChangesOperators) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 6;
  c.lr = 0.01;
  c.max_epochs = 5;
  c.patience = 10;
  const auto fixed = fit(b, c);
  c.resample_per_epoch = true;
  const auto resampled = fit(b, c);
  EXPECT_EQ(resampled.report.epochs.size(), 5u);
  EXPECT_NE(fixed.report.epochs.back().train_loss, resampled.report.epochs.back().train_loss);
}

TEST(Train, PathBatchSkipsSlicesWithoutTrainNodes) {
  // two rings: the first all train, the second all validation
  auto b = fixtures::blobs();
  for (NodeId v = 0; v < 20; ++v) b.split[v] = v < 10 ? Split::train : Split::val;
  ModelConfig c;
  c.hidden = 6;
  c.lr = 0.01;
  c.max_epochs = 3;
  c.patience = 10;
  c.batch_mode = BatchMode::path_batch;
  c.batch_nodes = 3;  // one path of 3 nodes per slice
  const auto wp = ring_walks();
  const auto r = fit(b, c, wp);
  const std::size_t paths = pathgen(b.graph, wp).size();
  EXPECT_GT(r.report.skipped_batches, 0u);
  EXPECT_GT(r.report.optimizer_steps, 0u);
  EXPECT_EQ(r.report.skipped_batches + r.report.optimizer_steps, 3 * paths);
}

TEST(Train, PathBatchLearnsBlobs) {
  const auto b = fixtures::blobs();
  ModelConfig c;
  c.hidden = 8;
  c.lr = 0.01;
  c.max_epochs = 50;
  c.patience = 50;
  c.batch_mode = BatchMode::path_batch;
  c.batch_nodes = 12;
  const auto r = fit(b, c);
  EXPECT_DOUBLE_EQ(r.report.final_accuracy.train, 1.0);
}

TEST(Train, DivergenceNamesEpoch) {
  auto b = fixtures::blobs();
  b.features *= 1e200;
  ModelConfig c;
  c.lr = 1e150;
  c.max_epochs = 5;
  try {
    fit(b, c);
    FAIL() << "expected NumericsError";
  } catch (const NumericsError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(Train, RequiresTrainAndValNodes) {
  auto b = fixtures::blobs();
  for (auto& s : b.split)
    if (s == Split::val) s = Split::train;
  EXPECT_THROW(fit(b, ModelConfig{}), ArgumentError);
}

TEST(Checkpoint, RoundTrip) {
  const auto p = init_params(5, 4, 3, 3, 12);
  const auto file = fixtures::temp_dir("ckpt") / "m.ckpt";
  save_checkpoint(file, p);
  const auto q = load_checkpoint(file);
  ASSERT_EQ(q.depth(), 3u);
  std::vector<Matrix> a, b;
  p.for_each_tensor([&](const auto& t, bool) { a.emplace_back(t); });
  q.for_each_tensor([&](const auto& t, bool) { b.emplace_back(t); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto file = fixtures::temp_dir("ckpt_bad") / "m.ckpt";
  std::ofstream(file) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(file), FormatError);
}

TEST(Report, CsvColumns) {
  TrainReport r;
  r.epochs.push_back({1, 0.5, 0.25, 0.75, 1.0});
  std::ostringstream os;
  write_report_csv(os, r);
  EXPECT_EQ(os.str(), "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,0.75\n");
}

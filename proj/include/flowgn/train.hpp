#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "model.hpp"
#include "propagation.hpp"
#include "walk.hpp"

namespace flowgn {

enum class BatchMode : std::uint8_t { full, path_batch };

inline std::string_view to_string(BatchMode m) { return m == BatchMode::full ? "full" : "path-batch"; }

inline BatchMode parse_batch_mode(std::string_view s) {
  if (s == "full") return BatchMode::full;
  if (s == "path-batch" || s == "path_batch") return BatchMode::path_batch;
  throw ArgumentError("unknown batch mode '" + std::string(s) + "'");
}

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 50;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;
  bool resample_per_epoch = false;
  BatchMode batch_mode = BatchMode::full;
  std::size_t batch_nodes = 256;  ///< path-batch mode: node budget per step, batch = ⌈batch_nodes / l⌉ paths
  double decay = 1.0;             ///< flow decay per transmitting node; 1 is the identity mechanism
  unsigned threads = 1;

  void validate() const {
    if (layers < 1) throw ArgumentError("layers must be >= 1");
    if (hidden < 1) throw ArgumentError("hidden must be >= 1");
    if (!(lr > 0.0)) throw ArgumentError("learning rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be >= 0");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (!(decay > 0.0)) throw ArgumentError("decay must be > 0");
  }
};

/// Stops once the monitored value has not improved for `patience` epochs.
class EarlyStopping {
public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Record the value for `epoch`; returns true when training should stop.
  bool observe(std::size_t epoch, double value) {
    if (value < best_) {
      best_ = value;
      best_epoch_ = epoch;
      stale_ = 0;
      return false;
    }
    return ++stale_ >= patience_;
  }

  bool improved_at(std::size_t epoch) const noexcept { return best_epoch_ == epoch; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best() const noexcept { return best_; }

private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
};

/// Half-open path index ranges of ⌈batch_nodes / l⌉ paths each.
inline std::vector<std::pair<std::size_t, std::size_t>> path_batch_ranges(std::size_t num_paths, std::size_t length,
                                                                           std::size_t batch_nodes) {
  if (length == 0 || batch_nodes < length)
    throw ArgumentError("batch_nodes (" + std::to_string(batch_nodes) + ") must be >= path length (" +
                        std::to_string(length) + ")");
  const std::size_t per = (batch_nodes + length - 1) / length;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < num_paths; b += per) out.emplace_back(b, std::min(num_paths, b + per));
  return out;
}

inline std::vector<PathSet> path_batches(const PathSet& paths, std::size_t batch_nodes) {
  std::vector<PathSet> out;
  for (auto [b, e] : path_batch_ranges(paths.size(), paths.length(), batch_nodes)) out.push_back(paths.slice(b, e));
  return out;
}

/// Flow paths and their propagation operator, one entry per layer.
struct LayerOperators {
  std::vector<PathSet> paths;
  std::vector<PropagationMatrix> ops;
};

/// `walks` holds one WalkParams per layer, or a single entry shared by all.
inline LayerOperators build_layer_operators(const Graph& g, std::span<const WalkParams> walks, std::size_t layers,
                                            std::uint64_t round, double decay, unsigned threads) {
  if (walks.size() != 1 && walks.size() != layers)
    throw ArgumentError("need 1 or " + std::to_string(layers) + " walk parameter sets, got " +
                        std::to_string(walks.size()));
  LayerOperators out;
  for (std::size_t k = 0; k < layers; ++k) {
    const auto& wp = walks.size() == 1 ? walks[0] : walks[k];
    out.paths.push_back(pathgen(g, wp, static_cast<std::uint32_t>(k + 1), round, threads));
    out.ops.push_back(build_propagation_matrix(out.paths.back(), g.num_nodes(), decay));
  }
  return out;
}

struct SplitAccuracy {
  double train = 0.0, val = 0.0, test = 0.0;
};

inline SplitAccuracy evaluate(const ModelParams& params, const DatasetBundle& bundle,
                              std::span<const PropagationMatrix> ops, Activation activation = Activation::relu,
                              Features features = {}) {
  const auto st = forward(features.valid() ? features : Features(bundle.features), ops, params, activation);
  return {accuracy(st.logits, bundle.labels, bundle.nodes_in(Split::train)),
          accuracy(st.logits, bundle.labels, bundle.nodes_in(Split::val)),
          accuracy(st.logits, bundle.labels, bundle.nodes_in(Split::test))};
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  ///< 0 means the initial parameters were kept
  SplitAccuracy final_accuracy;
  std::size_t optimizer_steps = 0;
  std::size_t skipped_batches = 0;  ///< path-batch steps with no labeled conserving node
  std::size_t isolated_nodes = 0;
  double path_seconds = 0.0;
};

/// CSV with columns epoch, train_loss, val_loss, val_acc.
inline void write_report_csv(std::ostream& os, const TrainReport& report) {
  os << "epoch,train_loss,val_loss,val_acc\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss, e.val_acc);
    os << buf;
  }
}

/// Inputs sparser than this train through the sparse first-layer path.
inline constexpr double sparse_feature_density = 0.25;

struct TrainResult {
  ModelParams params;
  TrainReport report;
  LayerOperators operators;  ///< operators used for final evaluation
};

namespace detail {

/// One path-batch subproblem: nodes touched by the slice, renumbered densely.
struct BatchProblem {
  std::vector<NodeId> nodes;  ///< local -> global
  Matrix dense;
  SparseMatrix sparse;
  std::vector<int> labels;
  std::vector<PropagationMatrix> ops;
  std::vector<NodeId> mask;   ///< local ids of labeled train nodes with a nonempty last-layer row

  Features features() const { return sparse.rows() > 0 ? Features(sparse) : Features(dense); }
};

/// `sparse_features`, when non-null, is the sparse copy of bundle.features.
inline BatchProblem make_batch_problem(const DatasetBundle& bundle, const PathSet& slice, std::size_t layers,
                                       double decay, const SparseMatrix* sparse_features) {
  BatchProblem bp;
  bp.nodes.assign(slice.flat().begin(), slice.flat().end());
  std::sort(bp.nodes.begin(), bp.nodes.end());
  bp.nodes.erase(std::unique(bp.nodes.begin(), bp.nodes.end()), bp.nodes.end());
  std::unordered_map<NodeId, NodeId> local;
  local.reserve(bp.nodes.size() * 2);
  for (NodeId i = 0; i < bp.nodes.size(); ++i) local.emplace(bp.nodes[i], i);

  const auto n = bp.nodes.size();
  bp.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) bp.labels[i] = bundle.labels[bp.nodes[i]];
  if (sparse_features) {
    bp.sparse.resize(static_cast<Eigen::Index>(n), sparse_features->cols());
    Eigen::VectorXi nnz(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(bp.nodes[i]);
      nnz(static_cast<Eigen::Index>(i)) =
          static_cast<int>(sparse_features->outerIndexPtr()[r + 1] - sparse_features->outerIndexPtr()[r]);
    }
    bp.sparse.reserve(nnz);
    for (std::size_t i = 0; i < n; ++i)
      for (SparseMatrix::InnerIterator it(*sparse_features, static_cast<Eigen::Index>(bp.nodes[i])); it; ++it)
        bp.sparse.insert(static_cast<Eigen::Index>(i), it.col()) = it.value();
    bp.sparse.makeCompressed();
  } else {
    bp.dense.resize(static_cast<Eigen::Index>(n), bundle.features.cols());
    for (std::size_t i = 0; i < n; ++i) bp.dense.row(static_cast<Eigen::Index>(i)) = bundle.features.row(bp.nodes[i]);
  }
  PathSet relabeled(slice.length(), slice.params(), slice.layer());
  auto& store = relabeled.storage();
  store.reserve(slice.flat().size());
  for (NodeId v : slice.flat()) store.push_back(local.at(v));
  bp.ops.assign(layers, build_propagation_matrix(relabeled, n, decay));
  for (NodeId i = 0; i < n; ++i)
    if (bundle.split[bp.nodes[i]] == Split::train && !bp.ops.back().row_empty(i)) bp.mask.push_back(i);
  return bp;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Fits a FlowGN classifier with Adam and val-loss early stopping; returns the
/// parameters of the best validation epoch. `walks` holds per-layer walk
/// parameters (or one shared set).
inline TrainResult train(const DatasetBundle& bundle, const ModelConfig& config, std::span<const WalkParams> walks) {
  config.validate();
  const auto train_nodes = bundle.nodes_in(Split::train);
  const auto val_nodes = bundle.nodes_in(Split::val);
  if (train_nodes.empty()) throw ArgumentError("dataset has no training nodes");
  if (val_nodes.empty()) throw ArgumentError("dataset has no validation nodes");
  if (bundle.num_classes < 1) throw ArgumentError("dataset has no labeled classes");

  TrainResult result;
  auto& report = result.report;
  auto t0 = std::chrono::steady_clock::now();
  auto ops = build_layer_operators(bundle.graph, walks, config.layers, 0, config.decay, config.threads);
  report.path_seconds = detail::seconds_since(t0);
  report.isolated_nodes = ops.paths.front().isolated_skipped;

  ModelParams params = init_params(static_cast<std::size_t>(bundle.features.cols()), config.hidden,
                                   static_cast<std::size_t>(bundle.num_classes), config.layers, config.seed);
  ModelParams best = params;
  Adam adam(config.lr);
  EarlyStopping stopper(config.patience);
  SparseMatrix sparse_x;
  if (density(bundle.features) < sparse_feature_density) sparse_x = bundle.features.sparseView();
  const Features X = sparse_x.rows() > 0 ? Features(sparse_x) : Features(bundle.features);

  std::optional<ForwardState> current;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) try {
    const auto epoch_start = std::chrono::steady_clock::now();
    if (config.resample_per_epoch && epoch > 1) {
      ops = build_layer_operators(bundle.graph, walks, config.layers, epoch - 1, config.decay, config.threads);
      current.reset();
    }

    double train_loss = 0.0;
    if (config.batch_mode == BatchMode::full) {
      if (!current) current = forward(X, ops.ops, params, config.activation);
      train_loss = loss(current->logits, bundle.labels, train_nodes, params, config.weight_decay);
      auto grads = backward(*current, ops.ops, params, bundle.labels, train_nodes, config.weight_decay);
      adam.step(params, grads);
      ++report.optimizer_steps;
    } else {
      // One slice of the last layer's paths drives every layer of a step, so
      // the nodes a slice touches see flows at every depth, as in evaluation.
      const auto& last = ops.paths.back();
      std::vector<std::size_t> order(last.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      CounterRng shuffle_rng(derive_seed(config.seed, 0x42415443ULL, epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

      std::size_t used = 0;
      for (auto [b, e] : path_batch_ranges(last.size(), last.length(), config.batch_nodes)) {
        const auto slice = last.gather(std::span<const std::size_t>(order.data() + b, order.data() + e));
        auto bp = detail::make_batch_problem(bundle, slice, config.layers, config.decay,
                                             sparse_x.rows() > 0 ? &sparse_x : nullptr);
        if (bp.mask.empty()) {
          ++report.skipped_batches;
          continue;
        }
        auto st = forward(bp.features(), bp.ops, params, config.activation);
        train_loss += loss(st.logits, bp.labels, bp.mask, params, config.weight_decay);
        auto grads = backward(st, bp.ops, params, bp.labels, bp.mask, config.weight_decay);
        adam.step(params, grads);
        ++report.optimizer_steps;
        ++used;
      }
      if (used) train_loss /= static_cast<double>(used);
      current.reset();
    }
    if (!std::isfinite(train_loss) || !params.all_finite())
      throw NumericsError("non-finite training loss or parameters");

    current = forward(X, ops.ops, params, config.activation);
    const double val_loss = loss(current->logits, bundle.labels, val_nodes, params, config.weight_decay);
    if (!std::isfinite(val_loss)) throw NumericsError("non-finite validation loss");
    const double val_acc = accuracy(current->logits, bundle.labels, val_nodes);
    report.epochs.push_back({epoch, train_loss, val_loss, val_acc, detail::seconds_since(epoch_start)});

    const bool stop = stopper.observe(epoch, val_loss);
    if (stopper.improved_at(epoch)) best = params;
    if (stop) break;
  } catch (const NumericsError& e) {
    throw NumericsError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
  }
  report.best_epoch = stopper.best_epoch();

  if (config.resample_per_epoch) ops = build_layer_operators(bundle.graph, walks, config.layers, 0, config.decay, config.threads);
  report.final_accuracy = evaluate(best, bundle, ops.ops, config.activation, X);
  result.params = std::move(best);
  result.operators = std::move(ops);
  return result;
}

// Checkpoint: "FLOWGNCK", u32 version, u32 tensor count, then per tensor
// u64 rows, u64 cols and row-major little-endian f64 data, in
// ModelParams::for_each_tensor order.

inline constexpr std::uint32_t checkpoint_version = 1;

inline void save_checkpoint(const std::filesystem::path& file, const ModelParams& params) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw FormatError("cannot write checkpoint " + file.string());
  os.write("FLOWGNCK", 8);
  auto put = [&](auto v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put(checkpoint_version);
  put(static_cast<std::uint32_t>(2 * params.depth() + 2));
  params.for_each_tensor([&](const auto& t, bool) {
    put(static_cast<std::uint64_t>(t.rows()));
    put(static_cast<std::uint64_t>(t.cols()));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!os) throw FormatError("short write to checkpoint " + file.string());
}

inline ModelParams load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + file.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != "FLOWGNCK") throw FormatError("not a checkpoint: " + file.string());
  auto get = [&](auto& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw FormatError("truncated checkpoint " + file.string());
  };
  std::uint32_t version = 0, count = 0;
  get(version);
  if (version != checkpoint_version) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  get(count);
  if (count < 2 || count % 2) throw FormatError("bad tensor count in checkpoint");
  std::vector<Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t rows = 0, cols = 0;
    get(rows);
    get(cols);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw FormatError("truncated checkpoint " + file.string());
    tensors.push_back(std::move(m));
  }
  ModelParams p;
  for (std::uint32_t i = 0; i + 2 < count; i += 2) p.layers.push_back({tensors[i], tensors[i + 1]});
  p.out_weight = tensors[count - 2];
  p.out_bias = tensors[count - 1];
  return p;
}

} // namespace flowgn

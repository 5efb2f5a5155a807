#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "run_config.hpp"
#include "train.hpp"

namespace flowgn {

struct RunOutcome {
  std::uint64_t seed = 0;
  TrainResult result;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

inline DatasetBundle load_for(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw ArgumentError("no dataset given");
  return load_dataset(cfg.dataset, LoadOptions{.normalize_features = cfg.normalize_features});
}

/// Config for run `i` of a repeated experiment: seeds run consecutively from
/// the master seed.
inline RunConfig run_config_for(const RunConfig& cfg, std::size_t i) {
  RunConfig c = cfg;
  c.set_seed(cfg.seed() + i);
  c.runs = 1;
  return c;
}

/// Trains cfg.runs models. Runs spread over cfg.jobs threads; a single run uses
/// the threads for path generation instead. Results come back in run order.
inline std::vector<RunOutcome> run_experiment(const DatasetBundle& bundle, const RunConfig& cfg) {
  cfg.validate();
  std::vector<RunOutcome> out(cfg.runs);
  const unsigned inner = cfg.runs == 1 ? cfg.jobs : 1;
  parallel_chunks(cfg.runs, cfg.jobs, [&](std::size_t b, std::size_t e, unsigned) {
    for (std::size_t i = b; i < e; ++i) {
      auto c = run_config_for(cfg, i);
      c.model.threads = inner;
      out[i].seed = c.seed();
      out[i].result = train(bundle, c.model, std::span<const WalkParams>(&c.walk, 1));
    }
  });
  return out;
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg, true)) j[k] = v;
  return j;
}

/// Metrics document. Contains no timings so reruns compare byte-for-byte.
inline nlohmann::json metrics_json(const RunConfig& cfg, std::span<const RunOutcome> runs) {
  std::vector<double> tr, va, te;
  nlohmann::json per_run = nlohmann::json::array();
  for (const auto& r : runs) {
    const auto& rep = r.result.report;
    tr.push_back(rep.final_accuracy.train);
    va.push_back(rep.final_accuracy.val);
    te.push_back(rep.final_accuracy.test);
    per_run.push_back({{"seed", r.seed},
                       {"train_acc", rep.final_accuracy.train},
                       {"val_acc", rep.final_accuracy.val},
                       {"test_acc", rep.final_accuracy.test},
                       {"best_epoch", rep.best_epoch},
                       {"epochs", rep.epochs.size()},
                       {"optimizer_steps", rep.optimizer_steps},
                       {"skipped_batches", rep.skipped_batches},
                       {"isolated_nodes", rep.isolated_nodes}});
  }
  const auto test = mean_std(te);
  return {{"schema", 1},
          {"config_hash", hex64(config_hash(cfg))},
          {"seed", cfg.seed()},
          {"runs", runs.size()},
          {"train_acc", mean_std(tr).mean},
          {"val_acc", mean_std(va).mean},
          {"test_acc", test.mean},
          {"test_acc_std", test.std},
          {"config", config_json(cfg)},
          {"per_run", per_run}};
}

/// Checkpoint sidecar: tensor shapes and the run's full configuration.
inline nlohmann::json checkpoint_sidecar(const RunConfig& run_cfg, const ModelParams& params) {
  nlohmann::json shapes = nlohmann::json::array();
  params.for_each_tensor([&](const auto& t, bool) { shapes.push_back({t.rows(), t.cols()}); });
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(run_cfg)) cfg[k] = v;
  return {{"schema", 1}, {"format_version", checkpoint_version}, {"tensors", shapes}, {"config", cfg}};
}

// Sweeps -------------------------------------------------------------------

enum class SweepAxis : std::uint8_t { l, q, K };

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
  case SweepAxis::l: return "l";
  case SweepAxis::q: return "q";
  case SweepAxis::K: return "K";
  }
  return "?";
}

struct SweepDimension {
  SweepAxis axis;
  std::vector<double> values;
};

/// Parses "l=2,4,6", "K=1..7" or "q=0.1,0.5". Ranges are integer and inclusive.
inline SweepDimension parse_sweep_dimension(std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw ArgumentError("sweep spec '" + std::string(spec) + "' needs axis=values");
  const auto name = detail::trim(spec.substr(0, eq));
  SweepDimension d;
  if (name == "l" || name == "path-len") d.axis = SweepAxis::l;
  else if (name == "q" || name == "walk-q") d.axis = SweepAxis::q;
  else if (name == "K" || name == "layers") d.axis = SweepAxis::K;
  else throw ArgumentError("unknown sweep axis '" + name + "' (expected l, q or K)");

  auto parse = [&](std::string_view t) {
    try {
      return detail::parse_value<double>(name, detail::trim(t));
    } catch (const ConfigError& e) {
      throw ArgumentError(e.what());
    }
  };
  std::string_view rest = spec.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (detail::trim(item).empty()) continue;
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const double lo = parse(item.substr(0, dots)), hi = parse(item.substr(dots + 2));
      if (lo != std::floor(lo) || hi != std::floor(hi) || hi < lo)
        throw ArgumentError("bad range '" + std::string(item) + "'");
      for (double v = lo; v <= hi; v += 1.0) d.values.push_back(v);
    } else {
      d.values.push_back(parse(item));
    }
  }
  if (d.values.empty()) throw ArgumentError("sweep axis " + name + " has no values");
  if (d.axis != SweepAxis::q)
    for (double v : d.values)
      if (v < 1 || v != std::floor(v)) throw ArgumentError("sweep axis " + name + " needs positive integers");
  return d;
}

struct SweepCell {
  double l = 0, q = 0, K = 0;
  RunConfig config;
};

/// Expands one or two dimensions into cells, first dimension outermost.
inline std::vector<SweepCell> sweep_grid(const RunConfig& base, std::span<const SweepDimension> dims) {
  if (dims.empty()) throw ArgumentError("empty sweep grid: give --vary for one or two of l, q, K");
  if (dims.size() > 2) throw ArgumentError("a sweep varies at most two of l, q, K");
  if (dims.size() == 2 && dims[0].axis == dims[1].axis)
    throw ArgumentError("sweep axis " + std::string(to_string(dims[0].axis)) + " given twice");
  auto apply = [](RunConfig& c, SweepAxis a, double v) {
    switch (a) {
    case SweepAxis::l: c.walk.length = static_cast<std::size_t>(v); break;
    case SweepAxis::q: c.walk.q = v; break;
    case SweepAxis::K: c.model.layers = static_cast<std::size_t>(v); break;
    }
  };
  std::vector<SweepCell> cells;
  const std::vector<double> unit{0.0};
  const auto& outer = dims[0];
  for (double a : outer.values)
    for (double b : dims.size() == 2 ? dims[1].values : unit) {
      SweepCell cell;
      cell.config = base;
      apply(cell.config, outer.axis, a);
      if (dims.size() == 2) apply(cell.config, dims[1].axis, b);
      cell.l = static_cast<double>(cell.config.walk.length);
      cell.q = cell.config.walk.q;
      cell.K = static_cast<double>(cell.config.model.layers);
      cells.push_back(std::move(cell));
    }
  return cells;
}

struct SweepRow {
  double l, q, K;
  MeanStd test_acc;
};

/// Runs every (cell, seed) pair across cfg.jobs threads; rows stay in grid order.
inline std::vector<SweepRow> run_sweep(const DatasetBundle& bundle, const RunConfig& base,
                                       std::span<const SweepDimension> dims) {
  auto cells = sweep_grid(base, dims);
  for (const auto& c : cells) c.config.validate();
  const std::size_t runs = base.runs;
  std::vector<double> acc(cells.size() * runs);
  parallel_chunks(acc.size(), base.jobs, [&](std::size_t b, std::size_t e, unsigned) {
    for (std::size_t i = b; i < e; ++i) {
      auto c = run_config_for(cells[i / runs].config, i % runs);
      c.model.threads = 1;
      acc[i] = train(bundle, c.model, std::span<const WalkParams>(&c.walk, 1)).report.final_accuracy.test;
    }
  });
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i)
    rows.push_back({cells[i].l, cells[i].q, cells[i].K,
                    mean_std(std::span<const double>(acc.data() + i * runs, runs))});
  return rows;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "l,q,K,test_acc,std\n";
  using detail::format_double;
  for (const auto& r : rows)
    os << format_double(r.l) << ',' << format_double(r.q) << ',' << format_double(r.K) << ','
       << format_double(r.test_acc.mean) << ',' << format_double(r.test_acc.std) << '\n';
}

} // namespace flowgn

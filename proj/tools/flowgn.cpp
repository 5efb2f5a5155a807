// flowgn command-line driver: stats, walks, train, eval, sweep, influence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <flowgn/flowgn.hpp>

namespace fs = std::filesystem;
using namespace flowgn;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Config-key flags registered on one subcommand, plus --config.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> storage;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app, const std::set<std::string>& only = {}) {
    app->add_option("--config", config_file, "flat key = value file; flags override it")->check(CLI::ExistingFile);
    for (const auto& k : config_keys()) {
      if (!only.empty() && !only.count(k.name)) continue;
      auto& slot = storage[k.name];
      options[k.name] = k.is_flag ? app->add_flag("--" + k.name + "{true}", slot, k.help)
                                  : app->add_option("--" + k.name, slot, k.help);
    }
  }

  /// Flags given on this command line.
  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) out[name] = storage.at(name);
    return out;
  }

  RunConfig resolve(std::map<std::string, std::string> base = {}) const {
    if (!config_file.empty())
      for (auto& [k, v] : read_config_file(config_file)) base[k] = v;
    auto cfg = merge_config(base, given());
    for (const auto& n : cfg.notes) std::cerr << "note: " << n << "\n";
    cfg.validate();
    return cfg;
  }
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw FormatError("cannot write " + file.string());
  os << text;
  if (!os) throw FormatError("short write to " + file.string());
}

// stats ----------------------------------------------------------------------

struct StatsArgs {
  std::string dataset;
  std::optional<std::size_t> sp_samples;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::size_t exact_limit = 5000;
};

int cmd_stats(const StatsArgs& a) {
  const auto b = load_dataset(a.dataset);
  std::optional<std::size_t> sample = a.sp_samples;
  if (!sample && b.num_nodes() >= a.exact_limit) sample = 1000;
  const auto sp = avg_shortest_path(b.graph, sample, a.seed, a.jobs);

  std::printf("dataset          %s\n", a.dataset.c_str());
  std::printf("nodes            %zu\n", b.num_nodes());
  std::printf("edges            %zu\n", b.edge_records);
  std::printf("undirected edges %zu\n", b.graph.num_edges());
  std::printf("classes          %d\n", b.num_classes);
  std::printf("features         %lld\n", static_cast<long long>(b.features.cols()));
  std::printf("train/val/test   %zu/%zu/%zu\n", b.count(Split::train), b.count(Split::val), b.count(Split::test));
  std::printf("unlabeled        %zu\n", b.count(Split::unlabeled));
  if (sp.exact) {
    std::printf("avg SP           %.4f (exact, %zu BFS roots)\n", sp.mean, sp.sources);
  } else {
    std::printf("avg SP           %.4f +/- %.4f (95%% CI, %zu sampled roots)\n", sp.mean, 1.96 * sp.std_error,
                sp.sources);
  }
  std::printf("LCC              %zu of %zu nodes\n", sp.lcc_size, b.num_nodes());
  if (sp.lcc_size < b.num_nodes())
    std::printf("note: graph is disconnected; avg SP covers ordered pairs inside the largest component only\n");
  if (sp.singleton) std::fprintf(stderr, "warning: largest component is a single node; avg SP reported as 0\n");
  return 0;
}

// walks ----------------------------------------------------------------------

struct WalksArgs {
  std::string torus;  ///< "RxC"
  std::uint32_t layer = 0;
  std::string out = "-";
};

Graph parse_torus(const std::string& spec) {
  const auto x = spec.find('x');
  if (x == std::string::npos) throw ArgumentError("torus spec must look like 10x10");
  try {
    return grid_torus(std::stoul(spec.substr(0, x)), std::stoul(spec.substr(x + 1)));
  } catch (const std::logic_error&) {
    throw ArgumentError("bad torus spec '" + spec + "'");
  }
}

int cmd_walks(const WalksArgs& a, const ConfigFlags& flags) {
  const auto cfg = flags.resolve();
  Graph g;
  if (!a.torus.empty()) {
    if (!cfg.dataset.empty()) throw ArgumentError("give either --dataset or --torus, not both");
    g = parse_torus(a.torus);
  } else {
    g = load_for(cfg).graph;
  }
  const auto t0 = Clock::now();
  const auto paths = pathgen(g, cfg.walk, a.layer, 0, cfg.jobs);
  const double secs = since(t0);

  auto& log = a.out == "-" ? std::cerr : std::cout;
  if (a.out == "-") {
    write_paths(std::cout, paths);
  } else {
    std::ofstream os(a.out);
    if (!os) throw FormatError("cannot write " + a.out);
    write_paths(os, paths);
  }
  if (paths.size() == 0) std::cerr << "warning: no paths generated (every node is isolated)\n";
  if (paths.isolated_skipped) log << "isolated nodes skipped: " << paths.isolated_skipped << "\n";
  log << "paths: " << paths.size() << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.0f", secs > 0 ? static_cast<double>(paths.size()) / secs : 0.0);
  log << "throughput: " << buf << " paths/s\n";
  return 0;
}

// train ----------------------------------------------------------------------

int cmd_train(const ConfigFlags& flags) {
  const auto cfg = flags.resolve();
  const auto bundle = load_for(cfg);
  const auto t0 = Clock::now();
  const auto runs = run_experiment(bundle, cfg);
  const double secs = since(t0);

  const fs::path out = cfg.out;
  fs::create_directories(out);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    const auto stem = "run-" + std::to_string(i);
    std::ostringstream csv;
    write_report_csv(csv, r.result.report);
    write_text(out / (stem + ".csv"), csv.str());
    save_checkpoint(out / (stem + ".ckpt"), r.result.params);
    write_text(out / (stem + ".ckpt.json"), checkpoint_sidecar(run_config_for(cfg, i), r.result.params).dump(2) + "\n");
    const auto& rep = r.result.report;
    std::fprintf(stderr, "run %zu seed %llu: train %.4f val %.4f test %.4f (best epoch %zu of %zu)\n", i,
                 static_cast<unsigned long long>(r.seed), rep.final_accuracy.train, rep.final_accuracy.val,
                 rep.final_accuracy.test, rep.best_epoch, rep.epochs.size());
  }
  const auto metrics = metrics_json(cfg, runs);
  write_text(out / "metrics.json", metrics.dump(2) + "\n");
  std::cout << metrics.dump(2) << "\n";
  std::fprintf(stderr, "test accuracy %.2f +/- %.2f %% over %zu run(s), %.1f s\n",
               100.0 * metrics["test_acc"].get<double>(), 100.0 * metrics["test_acc_std"].get<double>(), runs.size(),
               secs);
  return 0;
}

// eval -----------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const ConfigFlags& flags) {
  std::map<std::string, std::string> base;
  const fs::path sidecar = checkpoint + ".json";
  if (fs::exists(sidecar)) {
    std::ifstream is(sidecar);
    const auto j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded() || !j.contains("config")) throw FormatError("bad checkpoint sidecar " + sidecar.string());
    for (const auto& [k, v] : j["config"].items()) base[k] = v.get<std::string>();
  }
  const auto cfg = flags.resolve(base);
  const auto params = load_checkpoint(checkpoint);
  const auto bundle = load_for(cfg);
  if (params.depth() != cfg.model.layers)
    throw ShapeError("checkpoint has " + std::to_string(params.depth()) + " layers, config says " +
                     std::to_string(cfg.model.layers));
  const auto ops = build_layer_operators(bundle.graph, std::span<const WalkParams>(&cfg.walk, 1), cfg.model.layers, 0,
                                         cfg.model.decay, cfg.jobs);
  const auto acc = evaluate(params, bundle, ops.ops, cfg.model.activation);
  const nlohmann::json j{{"schema", 1}, {"config_hash", hex64(config_hash(cfg))}, {"seed", cfg.seed()},
                         {"train_acc", acc.train}, {"val_acc", acc.val}, {"test_acc", acc.test}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

// sweep ----------------------------------------------------------------------

int cmd_sweep(const std::vector<std::string>& vary, const ConfigFlags& flags) {
  const auto cfg = flags.resolve();
  std::vector<SweepDimension> dims;
  for (const auto& v : vary) dims.push_back(parse_sweep_dimension(v));
  sweep_grid(cfg, dims);  // validate the grid before loading data
  const auto bundle = load_for(cfg);
  const auto t0 = Clock::now();
  const auto rows = run_sweep(bundle, cfg, dims);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  fs::create_directories(cfg.out);
  write_text(fs::path(cfg.out) / "sweep.csv", csv.str());
  std::cout << csv.str();
  std::fprintf(stderr, "%zu cells, %.1f s\n", rows.size(), since(t0));
  return 0;
}

// influence ------------------------------------------------------------------

struct InfluenceArgs {
  std::size_t rows = 10, cols = 10, k = 3, samples = 200000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  double threshold = 0.05;
  std::string out;
};

int cmd_influence(const InfluenceArgs& a) {
  const auto t0 = Clock::now();
  const auto rep = verify_theorem(a.rows, a.cols, a.k, a.samples, a.seed, a.jobs);
  const bool pass = rep.tv < a.threshold;
  auto j = rep.to_json();
  j["threshold"] = a.threshold;
  j["pass"] = pass;
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  std::printf("torus %zux%zu  x=%u  k=%zu  samples=%zu  conserved=%zu\n", a.rows, a.cols, rep.x, rep.k, rep.samples,
              rep.conserved);
  std::printf("tv = %.6f  threshold = %g  %s\n", rep.tv, a.threshold, pass ? "PASS" : "FAIL");
  std::fprintf(stderr, "%.2f s\n", since(t0));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlowGN: flow-path graph networks"};
  app.require_subcommand(1);

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "dataset statistics");
  s->add_option("--dataset", stats.dataset, "dataset directory")->required();
  s->add_option("--sp-samples", stats.sp_samples, "BFS roots for sampled avg SP (default: exact below 5000 nodes)");
  s->add_option("--seed", stats.seed, "sampling seed");
  s->add_option("--jobs", stats.jobs, "worker threads");

  WalksArgs walks;
  ConfigFlags walk_flags;
  auto* w = app.add_subcommand("walks", "generate and dump flow paths");
  walk_flags.attach(w, {"dataset", "path-len", "walk-p", "walk-q", "restarts", "seed", "jobs", "normalize-features"});
  w->add_option("--torus", walks.torus, "use an RxC torus grid instead of a dataset");
  w->add_option("--layer", walks.layer, "layer tag mixed into the RNG streams");
  w->add_option("--out", walks.out, "path dump file ('-' for stdout)");

  ConfigFlags train_flags;
  auto* t = app.add_subcommand("train", "train and evaluate");
  train_flags.attach(t);

  std::string checkpoint;
  ConfigFlags eval_flags;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_flags.attach(e);

  std::vector<std::string> vary;
  ConfigFlags sweep_flags;
  auto* sw = app.add_subcommand("sweep", "grid over l, q and K");
  sw->add_option("--vary", vary, "axis=values, e.g. l=2..10 or q=0.1,0.5,1 (one or two axes)");
  sweep_flags.attach(sw);

  InfluenceArgs inf;
  auto* in = app.add_subcommand("influence", "compare flow influence with the k-step random walk on a torus");
  in->add_option("--rows", inf.rows, "torus rows");
  in->add_option("--cols", inf.cols, "torus columns");
  in->add_option("-k,--steps", inf.k, "walk steps k (paths have k+1 nodes)");
  in->add_option("--samples", inf.samples, "number of sampled walks");
  in->add_option("--seed", inf.seed, "seed");
  in->add_option("--jobs", inf.jobs, "worker threads");
  in->add_option("--threshold", inf.threshold, "TV pass threshold");
  in->add_option("--out", inf.out, "JSON report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*s) return cmd_stats(stats);
    if (*w) return cmd_walks(walks, walk_flags);
    if (*t) return cmd_train(train_flags);
    if (*e) return cmd_eval(checkpoint, eval_flags);
    if (*sw) return cmd_sweep(vary, sweep_flags);
    if (*in) return cmd_influence(inf);
  } catch (const flowgn::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.exit_code();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 1;
}

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "train.hpp"
#include "walk.hpp"

namespace flowgn {

/// Everything a CLI run needs. Walk defaults follow the citation-graph
/// experiments (p = 1000, q = 0.1, l = 6); model defaults come from ModelConfig.
struct RunConfig {
  std::string dataset;
  ModelConfig model;
  WalkParams walk{.p = 1000.0, .q = 0.1, .length = 6, .iterations = 10, .seed = 0};
  std::size_t runs = 1;
  unsigned jobs = 1;
  bool normalize_features = true;
  std::string out = "flowgn_out";
  std::vector<std::string> notes;  ///< precedence decisions made while merging

  /// Walk seed and model seed both derive from the master seed.
  void set_seed(std::uint64_t s) {
    model.seed = s;
    walk.seed = s;
  }
  std::uint64_t seed() const { return model.seed; }

  void validate() const {
    model.validate();
    walk.validate();
    if (runs < 1) throw ArgumentError("runs must be >= 1");
    if (jobs < 1) throw ArgumentError("jobs must be >= 1");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

template <class T>
T parse_value(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean '" + std::string(text) + "' for key '" + std::string(key) + "'");
}

} // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  bool is_flag = false;  ///< boolean switch on the command line
  bool hashed = true;    ///< part of the config hash
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every addressable setting, in canonical order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::format_double;
  using detail::parse_value;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto sz = [&](std::string name, std::string help, auto field) {
      k.push_back({name, std::move(help), false, true,
                   [name, field](RunConfig& c, std::string_view v) { field(c) = parse_value<std::size_t>(name, v); },
                   [field](const RunConfig& c) { return std::to_string(field(c)); }});
    };
    auto real = [&](std::string name, std::string help, auto field) {
      k.push_back({name, std::move(help), false, true,
                   [name, field](RunConfig& c, std::string_view v) { field(c) = parse_value<double>(name, v); },
                   [field](const RunConfig& c) { return format_double(field(c)); }});
    };
    auto flag = [&](std::string name, std::string help, auto field) {
      k.push_back({name, std::move(help), true, true,
                   [name, field](RunConfig& c, std::string_view v) { field(c) = detail::parse_bool(name, v); },
                   [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); }});
    };

    k.push_back({"dataset", "dataset directory", false, true,
                 [](RunConfig& c, std::string_view v) { c.dataset = std::string(v); },
                 [](const RunConfig& c) { return c.dataset; }});
    sz("layers", "number of FlowGN layers K", [](auto& c) -> auto& { return c.model.layers; });
    sz("path-len", "nodes per flow path l", [](auto& c) -> auto& { return c.walk.length; });
    real("walk-p", "return parameter p", [](auto& c) -> auto& { return c.walk.p; });
    real("walk-q", "in-out parameter q", [](auto& c) -> auto& { return c.walk.q; });
    sz("restarts", "path iterations r", [](auto& c) -> auto& { return c.walk.iterations; });
    sz("hidden", "hidden dimension", [](auto& c) -> auto& { return c.model.hidden; });
    real("lr", "Adam learning rate", [](auto& c) -> auto& { return c.model.lr; });
    real("weight-decay", "L2 penalty on weight matrices", [](auto& c) -> auto& { return c.model.weight_decay; });
    sz("epochs", "maximum epochs", [](auto& c) -> auto& { return c.model.max_epochs; });
    sz("patience", "early-stopping patience", [](auto& c) -> auto& { return c.model.patience; });
    k.push_back({"seed", "master seed", false, true,
                 [](RunConfig& c, std::string_view v) { c.set_seed(parse_value<std::uint64_t>("seed", v)); },
                 [](const RunConfig& c) { return std::to_string(c.seed()); }});
    sz("runs", "repeated runs with seeds seed..seed+runs-1", [](auto& c) -> auto& { return c.runs; });
    k.push_back({"jobs", "worker threads", false, false,
                 [](RunConfig& c, std::string_view v) { c.jobs = parse_value<unsigned>("jobs", v); },
                 [](const RunConfig& c) { return std::to_string(c.jobs); }});
    flag("resample-per-epoch", "draw fresh flow paths every epoch",
         [](auto& c) -> auto& { return c.model.resample_per_epoch; });
    k.push_back({"batch-mode", "full or path-batch", false, true,
                 [](RunConfig& c, std::string_view v) {
                   try {
                     c.model.batch_mode = parse_batch_mode(v);
                   } catch (const ArgumentError& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.model.batch_mode)); }});
    sz("batch-nodes", "path-batch node budget per step", [](auto& c) -> auto& { return c.model.batch_nodes; });
    real("decay", "flow decay per transmitting node (1 = identity mechanism)",
         [](auto& c) -> auto& { return c.model.decay; });
    k.push_back({"activation", "relu or identity", false, true,
                 [](RunConfig& c, std::string_view v) {
                   try {
                     c.model.activation = parse_activation(v);
                   } catch (const ArgumentError& e) {
                     throw ConfigError(e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.model.activation)); }});
    flag("normalize-features", "L1-normalize feature rows on load",
         [](auto& c) -> auto& { return c.normalize_features; });
    k.push_back({"out", "output directory", false, false, [](RunConfig& c, std::string_view v) { c.out = std::string(v); },
                 [](const RunConfig& c) { return c.out; }});
    return k;
  }();
  return keys;
}

inline const ConfigKey& find_config_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

/// Parses flat `key = value` lines; '#' starts a comment. Later duplicates win.
inline std::map<std::string, std::string> parse_config_text(std::string_view text, std::string_view origin = "config") {
  std::map<std::string, std::string> out;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(std::string_view(body).substr(0, eq));
    auto value = detail::trim(std::string_view(body).substr(eq + 1));
    find_config_key(key);  // reject unknown keys early, with position
    out[std::move(key)] = std::move(value);
  }
  return out;
}

inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file " + file.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config_text(text, file.string());
}

/// Merges defaults < file < flags. Conflicting file values are recorded in
/// `notes`.
inline RunConfig merge_config(const std::map<std::string, std::string>& file_values,
                              const std::map<std::string, std::string>& flag_values) {
  RunConfig c;
  for (const auto& [key, value] : file_values) find_config_key(key).set(c, value);
  for (const auto& [key, value] : flag_values) {
    const auto& k = find_config_key(key);
    if (auto it = file_values.find(key); it != file_values.end() && it->second != value)
      c.notes.push_back("--" + key + "=" + value + " overrides config file value " + it->second);
    k.set(c, value);
  }
  return c;
}

/// Canonical key/value listing, in config_keys() order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c, bool hashed_only = false) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : config_keys())
    if (!hashed_only || k.hashed) out.emplace_back(k.name, k.get(c));
  return out;
}

inline std::string to_config_text(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
  return s;
}

/// 64-bit FNV-1a over the hashed entries. jobs and out are excluded, so the
/// hash identifies the experiment rather than how it was executed.
inline std::uint64_t config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config_entries(c, true)) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

} // namespace flowgn

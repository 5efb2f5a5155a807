#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dense.hpp"
#include "error.hpp"
#include "graph.hpp"

namespace flowgn {

enum class Split : std::uint8_t { train, val, test, unlabeled };

inline std::string_view to_string(Split s) {
  constexpr std::array<std::string_view, 4> names{"train", "val", "test", "unlabeled"};
  return names[static_cast<std::size_t>(s)];
}

struct DatasetBundle {
  Graph graph;
  Matrix features;            ///< num_nodes × d
  std::vector<int> labels;    ///< class id, or -1 when unlabeled
  std::vector<Split> split;
  int num_classes = 0;
  std::size_t edge_records = 0;  ///< edge lines as read, before symmetrization and dedup

  std::size_t num_nodes() const noexcept { return graph.num_nodes(); }
  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
  }
  std::vector<NodeId> nodes_in(Split s) const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < split.size(); ++v)
      if (split[v] == s) out.push_back(v);
    return out;
  }
};

struct LoadOptions {
  bool normalize_features = true;  ///< L1 row normalization; all-zero rows stay zero
};

namespace detail {

/// Calls fn(line_number, fields) for each non-blank line with '#' comments
/// stripped. Fields are split on spaces and tabs.
template <typename Fn>
void for_each_record(const std::filesystem::path& file, Fn&& fn) {
  std::ifstream in(file);
  if (!in) throw FormatError("missing dataset file: " + file.string());
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    fields.clear();
    std::size_t pos = 0;
    while (pos < view.size()) {
      while (pos < view.size() && (view[pos] == ' ' || view[pos] == '\t' || view[pos] == '\r')) ++pos;
      std::size_t end = pos;
      while (end < view.size() && view[end] != ' ' && view[end] != '\t' && view[end] != '\r') ++end;
      if (end > pos) fields.push_back(view.substr(pos, end - pos));
      pos = end;
    }
    if (!fields.empty()) fn(lineno, std::span<const std::string_view>(fields));
  }
}

template <typename T>
T parse_number(std::string_view text, std::string_view file, std::size_t lineno) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(std::string(file) + ":" + std::to_string(lineno) + ": cannot parse '" +
                     std::string(text) + "'");
  return value;
}

} // namespace detail

inline void normalize_rows_l1(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).cwiseAbs().sum();
    if (s > 0.0) m.row(r) /= s;
  }
}

/// Load graph.tsv / features.tsv / labels.tsv / split.tsv from `dir`. The node
/// count is the number of feature rows.
inline DatasetBundle load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {}) {
  namespace fs = std::filesystem;
  for (const char* name : {"graph.tsv", "features.tsv", "labels.tsv", "split.tsv"})
    if (!fs::exists(dir / name)) throw FormatError("missing dataset file: " + (dir / name).string());

  DatasetBundle b;

  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  detail::for_each_record(dir / "features.tsv", [&](std::size_t lineno, auto fields) {
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols)
      throw FormatError("features.tsv:" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                        " values, got " + std::to_string(fields.size()));
    for (auto f : fields) values.push_back(detail::parse_number<double>(f, "features.tsv", lineno));
    ++rows;
  });
  b.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  values = {};
  const std::size_t n = rows;

  detail::for_each_record(dir / "labels.tsv", [&](std::size_t lineno, auto fields) {
    if (fields.size() != 1) throw FormatError("labels.tsv:" + std::to_string(lineno) + ": expected one value");
    const int y = detail::parse_number<int>(fields[0], "labels.tsv", lineno);
    if (y < -1) throw FormatError("labels.tsv:" + std::to_string(lineno) + ": negative class id");
    b.labels.push_back(y);
  });
  if (b.labels.size() != n)
    throw FormatError("labels.tsv has " + std::to_string(b.labels.size()) + " rows but features.tsv has " +
                      std::to_string(n));

  detail::for_each_record(dir / "split.tsv", [&](std::size_t lineno, auto fields) {
    if (fields.size() != 1) throw FormatError("split.tsv:" + std::to_string(lineno) + ": expected one tag");
    const auto tag = fields[0];
    if (tag == "train") b.split.push_back(Split::train);
    else if (tag == "val") b.split.push_back(Split::val);
    else if (tag == "test") b.split.push_back(Split::test);
    else if (tag == "unlabeled") b.split.push_back(Split::unlabeled);
    else throw ParseError("split.tsv:" + std::to_string(lineno) + ": unknown tag '" + std::string(tag) + "'");
  });
  if (b.split.size() != n)
    throw FormatError("split.tsv has " + std::to_string(b.split.size()) + " rows but features.tsv has " +
                      std::to_string(n));

  int max_label = -1;
  for (std::size_t v = 0; v < n; ++v) {
    if (b.split[v] != Split::unlabeled && b.labels[v] < 0)
      throw FormatError("node " + std::to_string(v) + " is in split '" + std::string(to_string(b.split[v])) +
                        "' but has no label");
    max_label = std::max(max_label, b.labels[v]);
  }
  b.num_classes = max_label + 1;

  std::vector<std::pair<NodeId, NodeId>> edges;
  detail::for_each_record(dir / "graph.tsv", [&](std::size_t lineno, auto fields) {
    if (fields.size() != 2) throw FormatError("graph.tsv:" + std::to_string(lineno) + ": expected 'u v'");
    const auto u = detail::parse_number<std::uint64_t>(fields[0], "graph.tsv", lineno);
    const auto v = detail::parse_number<std::uint64_t>(fields[1], "graph.tsv", lineno);
    if (u >= n || v >= n)
      throw IndexError("graph.tsv:" + std::to_string(lineno) + ": node id >= num_nodes (" + std::to_string(n) + ")");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  });
  b.edge_records = edges.size();
  b.graph = Graph::from_edges(n, edges);

  if (options.normalize_features) normalize_rows_l1(b.features);
  return b;
}

} // namespace flowgn

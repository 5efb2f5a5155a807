#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dense.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "walk.hpp"

namespace flowgn {

using Flow = std::vector<double>;

/// Generate / transmit / conserve hooks applied along each flow path.
template <typename M>
concept PropagationMechanism = requires(const M& m, NodeId v, std::span<const double> h, const Flow& f) {
  { m.generate(v, h) } -> std::convertible_to<Flow>;
  { m.transmit(v, f) } -> std::convertible_to<Flow>;
  { m.conserve(v, f) } -> std::convertible_to<Flow>;
};

/// Lossless flow: the source's hidden vector travels unchanged.
struct IdentityMechanism {
  Flow generate(NodeId, std::span<const double> h) const { return {h.begin(), h.end()}; }
  Flow transmit(NodeId, const Flow& f) const { return f; }
  Flow conserve(NodeId, const Flow& f) const { return f; }
};

/// Flow scaled by gamma at every transmitting node. gamma = 1 is the identity.
struct DecayMechanism {
  double gamma = 1.0;

  Flow generate(NodeId, std::span<const double> h) const { return {h.begin(), h.end()}; }
  Flow transmit(NodeId, const Flow& f) const {
    Flow out(f);
    for (auto& x : out) x *= gamma;
    return out;
  }
  Flow conserve(NodeId, const Flow& f) const { return f; }
};

static_assert(PropagationMechanism<IdentityMechanism>);
static_assert(PropagationMechanism<DecayMechanism>);

/// Elementwise mean, summed in the order given. Empty input gives zeros.
inline Flow mean_aggregate(std::span<const Flow> records, std::size_t dim) {
  Flow out(dim, 0.0);
  for (const auto& r : records) {
    if (r.size() != dim)
      throw ShapeError("record of dimension " + std::to_string(r.size()) + " in aggregate of dimension " +
                       std::to_string(dim));
    for (std::size_t j = 0; j < dim; ++j) out[j] += r[j];
  }
  if (!records.empty())
    for (auto& x : out) x /= static_cast<double>(records.size());
  return out;
}

struct ConservedRecord {
  NodeId source;
  Flow flow;

  auto operator<=>(const ConservedRecord&) const = default;
};

/// Mean after sorting records by (source, flow). The result is bit-identical
/// for every permutation of the input.
inline Flow canonical_mean(std::vector<ConservedRecord> records, std::size_t dim) {
  std::sort(records.begin(), records.end());
  std::vector<Flow> flows;
  flows.reserve(records.size());
  for (auto& r : records) flows.push_back(std::move(r.flow));
  return mean_aggregate(flows, dim);
}

/// Literal information propagation over `paths`. The source generates the
/// flow; every later node (intermediates, then the sink) conserves the
/// incoming flow, and intermediates transmit it onward. Each occurrence of a
/// node conserves separately. Nodes that conserve nothing get a zero row.
///
/// Holds every conserved record in memory: O(records × d). Intended as the
/// reference path; training uses build_propagation_matrix.
template <PropagationMechanism Mechanism = IdentityMechanism>
Matrix info_propagate(const Matrix& hidden, const PathSet& paths, std::size_t num_nodes,
                      const Mechanism& mech = {}) {
  if (static_cast<std::size_t>(hidden.rows()) != num_nodes)
    throw ShapeError("hidden has " + std::to_string(hidden.rows()) + " rows, graph has " + std::to_string(num_nodes));
  const auto dim = static_cast<std::size_t>(hidden.cols());
  std::vector<std::vector<ConservedRecord>> conserved(num_nodes);

  for (std::size_t m = 0; m < paths.size(); ++m) {
    auto path = paths[m];
    const NodeId source = path.front();
    if (source >= num_nodes) throw IndexError("path source out of range");
    Flow flow = mech.generate(source, std::span<const double>(hidden.row(source).data(), dim));
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      if (path[i] >= num_nodes) throw IndexError("path node out of range");
      conserved[path[i]].push_back({source, mech.conserve(path[i], flow)});
      flow = mech.transmit(path[i], flow);
    }
    const NodeId sink = path.back();
    if (sink >= num_nodes) throw IndexError("path sink out of range");
    conserved[sink].push_back({source, mech.conserve(sink, flow)});
  }

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(num_nodes), hidden.cols());
  for (NodeId v = 0; v < num_nodes; ++v) {
    if (conserved[v].empty()) continue;
    Flow mean = canonical_mean(std::move(conserved[v]), dim);
    for (std::size_t j = 0; j < dim; ++j) out(v, static_cast<Eigen::Index>(j)) = mean[j];
  }
  return out;
}

/// Compressed sparse rows with ascending column ids.
struct SparseRows {
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<NodeId> cols;
  std::vector<double> vals;

  std::size_t nnz() const noexcept { return cols.size(); }
  std::span<const NodeId> row_cols(std::size_t r) const noexcept {
    return {cols.data() + row_ptr[r], cols.data() + row_ptr[r + 1]};
  }
  std::span<const double> row_vals(std::size_t r) const noexcept {
    return {vals.data() + row_ptr[r], vals.data() + row_ptr[r + 1]};
  }

  /// this · dense, accumulating each row's terms in column order.
  Matrix multiply(const Matrix& dense) const {
    if (static_cast<std::size_t>(dense.rows()) != num_cols)
      throw ShapeError("sparse-dense product: " + std::to_string(num_cols) + " columns vs " +
                       std::to_string(dense.rows()) + " rows");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(num_rows), dense.cols());
    for (std::size_t r = 0; r < num_rows; ++r) {
      auto c = row_cols(r);
      auto w = row_vals(r);
      for (std::size_t i = 0; i < c.size(); ++i) out.row(static_cast<Eigen::Index>(r)) += w[i] * dense.row(c[i]);
    }
    return out;
  }

  SparseRows transpose() const {
    SparseRows t;
    t.num_rows = num_cols;
    t.num_cols = num_rows;
    t.row_ptr.assign(num_cols + 1, 0);
    for (auto c : cols) ++t.row_ptr[c + 1];
    for (std::size_t i = 0; i < num_cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
    t.cols.resize(nnz());
    t.vals.resize(nnz());
    std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
    for (std::size_t r = 0; r < num_rows; ++r)
      for (std::size_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
        const auto dst = cursor[cols[i]]++;
        t.cols[dst] = static_cast<NodeId>(r);
        t.vals[dst] = vals[i];
      }
    return t;
  }
};

/// Linear-operator form of information propagation: entry (v, s) is the
/// share of v's conserved records that originated at s (weighted by the
/// decay factor for non-identity flows). Rows of nodes that conserve
/// nothing are empty.
class PropagationMatrix {
public:
  PropagationMatrix() = default;
  explicit PropagationMatrix(SparseRows forward)
      : forward_(std::move(forward)), backward_(forward_.transpose()) {}

  /// All-zero operator on n nodes.
  static PropagationMatrix zero(std::size_t n) {
    SparseRows s;
    s.num_rows = s.num_cols = n;
    s.row_ptr.assign(n + 1, 0);
    return PropagationMatrix(std::move(s));
  }

  std::size_t num_nodes() const noexcept { return forward_.num_rows; }
  std::size_t nnz() const noexcept { return forward_.nnz(); }
  const SparseRows& rows() const noexcept { return forward_; }

  /// P · H
  Matrix apply(const Matrix& h) const { return forward_.multiply(h); }
  /// Pᵀ · G
  Matrix apply_transpose(const Matrix& g) const { return backward_.multiply(g); }

  bool row_empty(NodeId v) const noexcept { return forward_.row_ptr[v] == forward_.row_ptr[v + 1]; }

  double at(NodeId v, NodeId s) const noexcept {
    auto c = forward_.row_cols(v);
    auto it = std::lower_bound(c.begin(), c.end(), s);
    return (it != c.end() && *it == s) ? forward_.row_vals(v)[static_cast<std::size_t>(it - c.begin())] : 0.0;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(num_nodes()), static_cast<Eigen::Index>(num_nodes()));
    for (std::size_t r = 0; r < num_nodes(); ++r) {
      auto c = forward_.row_cols(r);
      auto w = forward_.row_vals(r);
      for (std::size_t i = 0; i < c.size(); ++i) d(static_cast<Eigen::Index>(r), c[i]) = w[i];
    }
    return d;
  }

  /// Debug dump: "v s weight" per nonzero.
  void write_triplets(std::ostream& os) const {
    os.precision(17);
    for (std::size_t r = 0; r < num_nodes(); ++r) {
      auto c = forward_.row_cols(r);
      auto w = forward_.row_vals(r);
      for (std::size_t i = 0; i < c.size(); ++i) os << r << ' ' << c[i] << ' ' << w[i] << '\n';
    }
  }

private:
  SparseRows forward_;
  SparseRows backward_;
};

/// Builds the operator equivalent to info_propagate with DecayMechanism{decay}
/// (decay = 1 gives the identity mechanism and row-stochastic rows).
inline PropagationMatrix build_propagation_matrix(const PathSet& paths, std::size_t num_nodes, double decay = 1.0) {
  struct Event {
    NodeId sink, source;
    std::uint32_t position;
    auto operator<=>(const Event&) const = default;
  };
  std::vector<Event> events;
  events.reserve(paths.size() * (paths.length() > 0 ? paths.length() - 1 : 0));
  for (std::size_t m = 0; m < paths.size(); ++m) {
    auto path = paths[m];
    for (std::size_t i = 1; i < path.size(); ++i) {
      if (path[i] >= num_nodes || path[0] >= num_nodes) throw IndexError("path node out of range");
      events.push_back({path[i], path[0], static_cast<std::uint32_t>(i)});
    }
  }
  std::sort(events.begin(), events.end());

  // decay^(position-1): conserve happens before transmit at each node.
  std::vector<double> factor(paths.length() + 1, 1.0);
  for (std::size_t i = 2; i < factor.size(); ++i) factor[i] = factor[i - 1] * decay;

  SparseRows s;
  s.num_rows = s.num_cols = num_nodes;
  s.row_ptr.assign(num_nodes + 1, 0);
  std::size_t i = 0;
  while (i < events.size()) {
    const NodeId v = events[i].sink;
    std::size_t row_end = i;
    while (row_end < events.size() && events[row_end].sink == v) ++row_end;
    const double records = static_cast<double>(row_end - i);
    while (i < row_end) {
      const NodeId src = events[i].source;
      double weight = 0.0;
      for (; i < row_end && events[i].source == src; ++i) weight += factor[events[i].position];
      s.cols.push_back(src);
      s.vals.push_back(weight / records);
    }
    s.row_ptr[v + 1] = s.cols.size();
  }
  for (std::size_t r = 0; r < num_nodes; ++r) s.row_ptr[r + 1] = std::max(s.row_ptr[r + 1], s.row_ptr[r]);
  return PropagationMatrix(std::move(s));
}

} // namespace flowgn

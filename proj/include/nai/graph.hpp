#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nai/matrix.hpp"
#include "nai/metering.hpp"

namespace nai {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

// Normalization of the hop operator: output row i sums
// (d_i+1)^(r-1) * (d_j+1)^(-r) * x_j over j in N(i) and i itself.
// r = 1 is the transition operator, r = 0.5 symmetric, r = 0 reverse
// transition.
struct NormKind {
  double r = 0.5;

  static NormKind transition() { return {1.0}; }
  static NormKind symmetric() { return {0.5}; }
  static NormKind reverse_transition() { return {0.0}; }

  void validate() const;
};

/// Undirected simple graph in CSR form. Self-loops are implicit: the CSR
/// never stores (i, i); normalization uses d_i + 1 throughout. Immutable
/// after construction and safe for concurrent reads.
class Graph {
public:
  Graph() = default;
  Graph(std::size_t n, std::vector<std::size_t> offsets, std::vector<NodeId> targets);

  std::size_t node_count() const { return n_; }
  /// Undirected edge count, self-loops excluded.
  std::size_t edge_count() const { return m_; }

  std::size_t degree(NodeId u) const {
    return offsets_[static_cast<std::size_t>(u) + 1] - offsets_[static_cast<std::size_t>(u)];
  }
  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets_.data() + offsets_[static_cast<std::size_t>(u)], degree(u)};
  }
  bool has_edge(NodeId u, NodeId v) const;

  const std::vector<std::size_t>& csr_offsets() const { return offsets_; }
  const std::vector<NodeId>& csr_targets() const { return targets_; }
  std::vector<std::size_t> degrees() const;

  /// Checks CSR symmetry, per-row sortedness/dedup, and degree bookkeeping.
  void validate() const;

private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> targets_;
};

struct BuildStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_merged = 0;
};

/// Builds a symmetric, deduplicated CSR. Directed input pairs are
/// symmetrized; (u, u) pairs are dropped and counted in `stats`.
Graph build_graph(std::span<const Edge> edges, std::size_t n, BuildStats* stats = nullptr);

struct InductiveSplit {
  std::vector<NodeId> labeled_train;
  std::vector<NodeId> unlabeled_train;
  std::vector<NodeId> validation;
  std::vector<NodeId> test;

  /// Pairwise disjoint, ids in [0, n), labeled_train nonempty.
  void validate(std::size_t n) const;
  /// labeled ∪ unlabeled, sorted ascending.
  std::vector<NodeId> train_nodes() const;
};

struct ComponentLabeling {
  std::vector<int> label;               // per node
  std::vector<std::size_t> comp_nodes;  // n_c per component
  std::vector<std::size_t> comp_edges;  // m_c per component

  int count() const { return static_cast<int>(comp_nodes.size()); }
};

ComponentLabeling connected_components(const Graph& g);

struct InducedGraph {
  Graph graph;
  std::vector<NodeId> old_to_new; // -1 for dropped nodes
  std::vector<NodeId> new_to_old;
};

/// Subgraph on labeled ∪ unlabeled train nodes, keeping only edges with
/// both endpoints inside, plus the id remapping.
InducedGraph induce_train_graph(const Graph& g, const InductiveSplit& split);

struct DegreeDelta {
  struct Entry {
    NodeId node;
    std::size_t old_degree;
    std::size_t new_degree;
  };
  std::vector<Entry> entries;
};

struct ComponentMerge {
  int new_label;
  std::vector<int> old_labels; // empty for brand-new components
};

struct ExtendResult {
  Graph graph;
  DegreeDelta delta;          // pre-existing nodes whose degree changed
  ComponentLabeling comps;    // labeling of the extended graph
  std::vector<ComponentMerge> merges;
  NodeId first_new_node = 0;
};

/// Appends `new_nodes` fresh ids and the given edges. Component labels are
/// merged incrementally from `comps` by union-find (edge addition never
/// splits a component). Duplicate and self-loop pairs are ignored.
ExtendResult extend_graph(const Graph& g, std::size_t new_nodes, std::span<const Edge> new_edges,
                          const ComponentLabeling& comps);
ExtendResult extend_graph(const Graph& g, std::size_t new_nodes, std::span<const Edge> new_edges);

/// Degree powers used by the hop kernel: row_scale[i] = (d_i+1)^(r-1),
/// col_scale[j] = (d_j+1)^(-r). Reusable across hops on the same graph.
struct NormCoeffs {
  std::vector<double> row_scale;
  std::vector<double> col_scale;

  static NormCoeffs compute(const Graph& g, NormKind norm);
};

/// One propagation hop restricted to `support` output rows; rows outside
/// the support are left untouched (undefined for the caller). Row order of
/// accumulation is fixed by the CSR, so output bytes do not depend on the
/// thread count.
void propagate_hop_into(const Graph& g, const NormCoeffs& coeffs, const Matrix& x,
                        std::span<const NodeId> support, Matrix& out, MacsTrace* trace = nullptr);

Matrix propagate_hop(const Graph& g, NormKind norm, const Matrix& x, MacsTrace* trace = nullptr);
Matrix propagate_hop(const Graph& g, NormKind norm, const Matrix& x, std::span<const NodeId> support,
                     MacsTrace* trace = nullptr);

// Edge-list text format: one "u v" pair per line, '#' comments ignored.
std::vector<Edge> read_edge_list(const std::string& path);
void write_edge_list(const Graph& g, const std::string& path);

} // namespace nai

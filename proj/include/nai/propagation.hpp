#pragma once

#include <span>
#include <string>
#include <vector>

#include "nai/graph.hpp"
#include "nai/matrix.hpp"
#include "nai/metering.hpp"

namespace nai {

enum class Backend { Sgc, S2gc, Sign };

Backend backend_from_string(const std::string& name);
std::string to_string(Backend b);

/// Width of the classifier input at order `l` for raw feature dim `f`:
/// plain and averaged stacks keep f, concatenated stacks grow to (l+1)*f.
std::size_t backend_input_width(Backend b, int order, std::size_t f);

/// Per-order propagated features X^(0..k) over one graph, plus the
/// backend-specific classifier inputs: X^(l) itself (Sgc), the running mean
/// of X^(1..l) (S2gc), or the concatenation X^(0)..X^(l) (Sign).
class PropagatedStack {
public:
  static PropagatedStack compute(const Graph& g, NormKind norm, const Matrix& x, int k,
                                 Backend backend, MacsTrace* trace = nullptr);

  Backend backend() const { return backend_; }
  int order() const { return static_cast<int>(hops_.size()) - 1; }
  std::size_t feature_dim() const { return hops_.empty() ? 0 : hops_[0].cols(); }

  /// X^(l), l in 0..k.
  const Matrix& hop(int l) const;
  /// Classifier input rows at order l (1..k).
  const Matrix& order_input(int l) const;
  Matrix order_input_rows(int l, std::span<const int> rows) const;

private:
  Backend backend_ = Backend::Sgc;
  std::vector<Matrix> hops_;
  std::vector<Matrix> transformed_; // S2gc means / Sign concatenations, index l-1
};

/// Rank-1 factorization of the propagation limit, per connected component:
/// mass M_c = 2*m_c + n_c and weighted sum S_c = sum_j (d_j+1)^(1-r) x_j.
/// The limit row for node i is (d_i+1)^r / M_c * S_c, evaluated in O(f).
/// Single-writer updates via apply_extension; concurrent reads are safe.
class StationarySummary {
public:
  static StationarySummary build(const Graph& g, NormKind norm, const Matrix& x,
                                 const ComponentLabeling& comps, MacsTrace* trace = nullptr);

  std::size_t node_count() const { return component_.size(); }
  std::size_t feature_dim() const { return weighted_sum_.cols(); }
  double r() const { return r_; }

  double mass(int comp) const { return mass_[static_cast<std::size_t>(comp)]; }
  std::span<const double> weighted_sum(int comp) const {
    return weighted_sum_.row(static_cast<std::size_t>(comp));
  }
  int component_of(NodeId i) const;

  void state_into(NodeId i, std::span<double> out, MacsTrace* trace = nullptr) const;
  Matrix state(NodeId i) const;

  /// Incremental form of the limit under node/edge arrival: adjusts the
  /// weighted sums for changed degrees, adds new rows, and fuses merged
  /// components. `x_extended` must cover the extended node universe.
  void apply_extension(const ExtendResult& er, const Matrix& x_extended, MacsTrace* trace = nullptr);

private:
  double r_ = 0.5;
  std::vector<int> component_;      // node -> component label
  std::vector<double> node_coeff_;  // (d_i+1)^r
  std::vector<double> mass_;        // per component
  Matrix weighted_sum_;             // one row per component
};

/// Euclidean distance between a propagated row and its limit row; with
/// `row_normalized` both operands are scaled to unit l2 norm first
/// (zero rows are left as-is).
double smoothness_distance(std::span<const double> x_l, std::span<const double> x_inf,
                           bool row_normalized = false);

/// Nested supporting-node sets for a target batch: sets[L] is the batch and
/// sets[l] = sets[l+1] ∪ N(sets[l+1]), so hop l only needs rows of sets[l-1].
struct SupportLayers {
  std::vector<std::vector<NodeId>> sets;

  int max_order() const { return static_cast<int>(sets.size()) - 1; }
};

SupportLayers layered_support(const Graph& g, std::span<const NodeId> batch, int max_order);

} // namespace nai

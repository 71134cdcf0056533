#include "nai/propagation.hpp"

#include <algorithm>
#include <cmath>

#include "nai/errors.hpp"

namespace nai {

Backend backend_from_string(const std::string& name) {
  if (name == "sgc") return Backend::Sgc;
  if (name == "s2gc") return Backend::S2gc;
  if (name == "sign") return Backend::Sign;
  throw ConfigError("unknown backend '" + name + "' (expected sgc|s2gc|sign)");
}

std::string to_string(Backend b) {
  switch (b) {
    case Backend::Sgc: return "sgc";
    case Backend::S2gc: return "s2gc";
    case Backend::Sign: return "sign";
  }
  return "?";
}

std::size_t backend_input_width(Backend b, int order, std::size_t f) {
  switch (b) {
    case Backend::Sgc:
    case Backend::S2gc: return f;
    case Backend::Sign: return f * static_cast<std::size_t>(order + 1);
  }
  return f;
}

PropagatedStack PropagatedStack::compute(const Graph& g, NormKind norm, const Matrix& x, int k,
                                         Backend backend, MacsTrace* trace) {
  if (k < 1) throw InputError("precompute stack: order k must be >= 1");
  if (!x.all_finite()) throw InputError("precompute stack: non-finite input features");
  if (x.rows() != g.node_count()) throw InputError("precompute stack: feature rows != node count");

  PropagatedStack s;
  s.backend_ = backend;
  s.hops_.reserve(static_cast<std::size_t>(k) + 1);
  s.hops_.push_back(x);

  const NormCoeffs coeffs = NormCoeffs::compute(g, norm);
  std::vector<NodeId> all(g.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<NodeId>(i);

  Matrix running_sum(x.rows(), x.cols());
  for (int l = 1; l <= k; ++l) {
    Matrix next(x.rows(), x.cols());
    propagate_hop_into(g, coeffs, s.hops_.back(), all, next, trace);
    s.hops_.push_back(std::move(next));

    if (backend == Backend::S2gc) {
      const auto& hop = s.hops_.back();
      for (std::size_t i = 0; i < running_sum.flat().size(); ++i)
        running_sum.flat()[i] += hop.flat()[i];
      Matrix mean = running_sum;
      const double inv = 1.0 / static_cast<double>(l);
      for (double& v : mean.flat()) v *= inv;
      s.transformed_.push_back(std::move(mean));
    } else if (backend == Backend::Sign) {
      Matrix cat = l == 1 ? hstack(s.hops_[0], s.hops_[1]) : hstack(s.transformed_.back(), s.hops_.back());
      s.transformed_.push_back(std::move(cat));
    }
  }
  return s;
}

const Matrix& PropagatedStack::hop(int l) const {
  if (l < 0 || l > order()) throw InputError("stack: hop order out of range");
  return hops_[static_cast<std::size_t>(l)];
}

const Matrix& PropagatedStack::order_input(int l) const {
  if (l < 1 || l > order()) throw InputError("stack: classifier order out of range");
  if (backend_ == Backend::Sgc) return hops_[static_cast<std::size_t>(l)];
  return transformed_[static_cast<std::size_t>(l) - 1];
}

Matrix PropagatedStack::order_input_rows(int l, std::span<const int> rows) const {
  return gather_rows(order_input(l), rows);
}

StationarySummary StationarySummary::build(const Graph& g, NormKind norm, const Matrix& x,
                                           const ComponentLabeling& comps, MacsTrace* trace) {
  norm.validate();
  if (x.rows() != g.node_count()) throw InputError("stationary summary: feature rows != node count");
  if (comps.label.size() != g.node_count())
    throw InputError("stationary summary: component labeling does not match graph");

  StationarySummary s;
  s.r_ = norm.r;
  s.component_ = comps.label;
  const std::size_t n = g.node_count(), f = x.cols();
  s.node_coeff_.resize(n);
  s.mass_.resize(static_cast<std::size_t>(comps.count()));
  s.weighted_sum_ = Matrix(static_cast<std::size_t>(comps.count()), f);

  for (int c = 0; c < comps.count(); ++c)
    s.mass_[static_cast<std::size_t>(c)] =
        2.0 * static_cast<double>(comps.comp_edges[static_cast<std::size_t>(c)]) +
        static_cast<double>(comps.comp_nodes[static_cast<std::size_t>(c)]);

  for (std::size_t i = 0; i < n; ++i) {
    const double d1 = static_cast<double>(g.degree(static_cast<NodeId>(i))) + 1.0;
    s.node_coeff_[i] = std::pow(d1, norm.r);
    const double w = std::pow(d1, 1.0 - norm.r);
    auto dst = s.weighted_sum_.row(static_cast<std::size_t>(s.component_[i]));
    auto src = x.row(i);
    for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
  }
  if (trace != nullptr) trace->add(KernelKind::SummaryBuild, static_cast<std::uint64_t>(n) * f);
  return s;
}

int StationarySummary::component_of(NodeId i) const {
  if (i < 0 || static_cast<std::size_t>(i) >= component_.size())
    throw InputError("stationary summary: unknown node " + std::to_string(i));
  return component_[static_cast<std::size_t>(i)];
}

void StationarySummary::state_into(NodeId i, std::span<double> out, MacsTrace* trace) const {
  const int c = component_of(i);
  const double scale = node_coeff_[static_cast<std::size_t>(i)] / mass_[static_cast<std::size_t>(c)];
  auto s = weighted_sum_.row(static_cast<std::size_t>(c));
  if (out.size() != s.size()) throw InputError("stationary state: output length mismatch");
  for (std::size_t j = 0; j < s.size(); ++j) out[j] = scale * s[j];
  if (trace != nullptr) trace->add(KernelKind::StationaryState, static_cast<std::uint64_t>(s.size()));
}

Matrix StationarySummary::state(NodeId i) const {
  Matrix m(1, feature_dim());
  state_into(i, m.row(0));
  return m;
}

void StationarySummary::apply_extension(const ExtendResult& er, const Matrix& x_extended,
                                        MacsTrace* trace) {
  const std::size_t n = er.graph.node_count(), f = feature_dim();
  if (x_extended.rows() != n) throw InputError("update summary: feature rows != extended node count");
  if (x_extended.cols() != f) throw InputError("update summary: feature width changed");
  if (static_cast<std::size_t>(er.first_new_node) != component_.size())
    throw InputError("update summary: extension does not start at the current node count");

  const std::size_t comp_count = static_cast<std::size_t>(er.comps.count());
  Matrix sums(comp_count, f);
  std::uint64_t touched = 0;

  // Fold absorbed old components into their new labels.
  for (const ComponentMerge& m : er.merges) {
    auto dst = sums.row(static_cast<std::size_t>(m.new_label));
    for (int old_label : m.old_labels) {
      auto src = weighted_sum_.row(static_cast<std::size_t>(old_label));
      for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
    }
  }
  // Re-weight rows whose degree changed.
  for (const auto& e : er.delta.entries) {
    const double w_new = std::pow(static_cast<double>(e.new_degree) + 1.0, 1.0 - r_);
    const double w_old = std::pow(static_cast<double>(e.old_degree) + 1.0, 1.0 - r_);
    const double dw = w_new - w_old;
    auto dst = sums.row(static_cast<std::size_t>(er.comps.label[static_cast<std::size_t>(e.node)]));
    auto src = x_extended.row(static_cast<std::size_t>(e.node));
    for (std::size_t j = 0; j < f; ++j) dst[j] += dw * src[j];
    node_coeff_[static_cast<std::size_t>(e.node)] =
        std::pow(static_cast<double>(e.new_degree) + 1.0, r_);
    ++touched;
  }
  // New rows enter with their full weight.
  node_coeff_.resize(n);
  for (std::size_t i = static_cast<std::size_t>(er.first_new_node); i < n; ++i) {
    const double d1 = static_cast<double>(er.graph.degree(static_cast<NodeId>(i))) + 1.0;
    node_coeff_[i] = std::pow(d1, r_);
    const double w = std::pow(d1, 1.0 - r_);
    auto dst = sums.row(static_cast<std::size_t>(er.comps.label[i]));
    auto src = x_extended.row(i);
    for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
    ++touched;
  }

  mass_.assign(comp_count, 0.0);
  for (std::size_t c = 0; c < comp_count; ++c)
    mass_[c] = 2.0 * static_cast<double>(er.comps.comp_edges[c]) + static_cast<double>(er.comps.comp_nodes[c]);
  weighted_sum_ = std::move(sums);
  component_ = er.comps.label;

  if (trace != nullptr) trace->add(KernelKind::SummaryBuild, touched * f);
}

double smoothness_distance(std::span<const double> x_l, std::span<const double> x_inf,
                           bool row_normalized) {
  if (x_l.size() != x_inf.size()) throw InputError("smoothness distance: length mismatch");
  if (!row_normalized) return l2_distance(x_l, x_inf);

  const double na = l2_norm(x_l), nb = l2_norm(x_inf);
  double acc = 0.0;
  for (std::size_t i = 0; i < x_l.size(); ++i) {
    const double a = na > 0.0 ? x_l[i] / na : x_l[i];
    const double b = nb > 0.0 ? x_inf[i] / nb : x_inf[i];
    acc += (a - b) * (a - b);
  }
  return std::sqrt(acc);
}

SupportLayers layered_support(const Graph& g, std::span<const NodeId> batch, int max_order) {
  if (batch.empty()) throw InputError("layered_support: empty batch");
  if (max_order < 1) throw InputError("layered_support: max order must be >= 1");
  for (NodeId v : batch) {
    if (v < 0 || static_cast<std::size_t>(v) >= g.node_count())
      throw InputError("layered_support: batch node out of range");
  }

  SupportLayers out;
  out.sets.resize(static_cast<std::size_t>(max_order) + 1);
  auto& top = out.sets[static_cast<std::size_t>(max_order)];
  top.assign(batch.begin(), batch.end());
  std::sort(top.begin(), top.end());
  top.erase(std::unique(top.begin(), top.end()), top.end());

  std::vector<char> mark(g.node_count(), 0);
  for (NodeId v : top) mark[static_cast<std::size_t>(v)] = 1;
  for (int l = max_order - 1; l >= 0; --l) {
    const auto& upper = out.sets[static_cast<std::size_t>(l) + 1];
    auto& cur = out.sets[static_cast<std::size_t>(l)];
    cur = upper;
    for (NodeId u : upper) {
      for (NodeId v : g.neighbors(u)) {
        if (!mark[static_cast<std::size_t>(v)]) {
          mark[static_cast<std::size_t>(v)] = 1;
          cur.push_back(v);
        }
      }
    }
    std::sort(cur.begin(), cur.end());
    // Marks persist downward: inner layers are supersets of outer ones.
  }
  return out;
}

} // namespace nai

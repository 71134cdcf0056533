#pragma once

#include <cmath>
#include <vector>

#include "nai/graph.hpp"
#include "nai/matrix.hpp"
#include "nai/rng.hpp"

namespace nai::test {

// Dense hop operator: out[i][j] = (d_i+1)^(r-1) (d_j+1)^(-r) for j in
// N(i) ∪ {i}, zero elsewhere.
inline Matrix dense_hop_operator(const Graph& g, NormKind norm) {
  const std::size_t n = g.node_count();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = std::pow(static_cast<double>(g.degree(static_cast<NodeId>(i))) + 1.0, norm.r - 1.0);
    auto set = [&](std::size_t j) {
      const double cj = std::pow(static_cast<double>(g.degree(static_cast<NodeId>(j))) + 1.0, -norm.r);
      a.at(i, j) = ri * cj;
    };
    set(i);
    for (NodeId v : g.neighbors(static_cast<NodeId>(i))) set(static_cast<std::size_t>(v));
  }
  return a;
}

inline Matrix dense_apply(const Matrix& a, const Matrix& x) { return matmul(a, x); }

inline Matrix dense_power_apply(const Matrix& a, Matrix x, int times) {
  for (int t = 0; t < times; ++t) x = matmul(a, x);
  return x;
}

// Entrywise rank-1 limit per connected component:
// (d_i+1)^r (d_j+1)^(1-r) / (2 m_c + n_c) within a component, zero across.
inline Matrix dense_stationary_operator(const Graph& g, NormKind norm, const ComponentLabeling& comps) {
  const std::size_t n = g.node_count();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (comps.label[i] != comps.label[j]) continue;
      const std::size_t c = static_cast<std::size_t>(comps.label[i]);
      const double mass = 2.0 * static_cast<double>(comps.comp_edges[c]) +
                          static_cast<double>(comps.comp_nodes[c]);
      a.at(i, j) = std::pow(static_cast<double>(g.degree(static_cast<NodeId>(i))) + 1.0, norm.r) *
                   std::pow(static_cast<double>(g.degree(static_cast<NodeId>(j))) + 1.0, 1.0 - norm.r) /
                   mass;
    }
  }
  return a;
}

// Random connected graph: a random spanning tree plus independent extra
// edges with probability `edge_prob`.
inline Graph random_connected_graph(Rng& rng, std::size_t n, double edge_prob) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v)
    edges.emplace_back(static_cast<NodeId>(rng.bounded(v)), static_cast<NodeId>(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(edge_prob)) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  return build_graph(edges, n);
}

inline Graph random_graph(Rng& rng, std::size_t n, double edge_prob) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(edge_prob)) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  return build_graph(edges, n);
}

inline Matrix random_features(Rng& rng, std::size_t n, std::size_t f, double lo = -1.0, double hi = 1.0) {
  Matrix x(n, f);
  for (double& v : x.flat()) v = rng.uniform(lo, hi);
  return x;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.flat().size(); ++i)
    worst = std::max(worst, std::abs(a.flat()[i] - b.flat()[i]));
  return worst;
}

} // namespace nai::test

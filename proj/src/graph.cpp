#include "nai/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nai/errors.hpp"
#include "nai/parallel.hpp"

namespace nai {

void NormKind::validate() const {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("convolution coefficient r must lie in [0, 1]");
}

Graph::Graph(std::size_t n, std::vector<std::size_t> offsets, std::vector<NodeId> targets)
    : n_(n), offsets_(std::move(offsets)), targets_(std::move(targets)) {
  if (offsets_.size() != n_ + 1) throw InputError("graph: offsets size must be n+1");
  m_ = targets_.size() / 2;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = offsets_[i + 1] - offsets_[i];
  return d;
}

void Graph::validate() const {
  if (offsets_.size() != n_ + 1 || offsets_.front() != 0 || offsets_.back() != targets_.size())
    throw InputError("graph: corrupt CSR offsets");
  std::size_t total = 0;
  for (std::size_t u = 0; u < n_; ++u) {
    auto nb = neighbors(static_cast<NodeId>(u));
    total += nb.size();
    for (std::size_t t = 0; t < nb.size(); ++t) {
      const NodeId v = nb[t];
      if (v < 0 || static_cast<std::size_t>(v) >= n_) throw InputError("graph: neighbor id out of range");
      if (static_cast<std::size_t>(v) == u) throw InputError("graph: explicit self-loop stored");
      if (t > 0 && nb[t - 1] >= v) throw InputError("graph: row not sorted/deduplicated");
      if (!has_edge(v, static_cast<NodeId>(u))) throw InputError("graph: asymmetric edge");
    }
  }
  if (total != 2 * m_) throw InputError("graph: degree sum != 2m");
}

Graph build_graph(std::span<const Edge> edges, std::size_t n, BuildStats* stats) {
  BuildStats local;
  std::vector<Edge> sym;
  sym.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      std::ostringstream os;
      os << "edge (" << u << ", " << v << ") references a node outside [0, " << n << ")";
      throw InputError(os.str());
    }
    if (u == v) {
      ++local.self_loops_dropped;
      continue;
    }
    sym.emplace_back(u, v);
    sym.emplace_back(v, u);
  }
  std::sort(sym.begin(), sym.end());
  const auto last = std::unique(sym.begin(), sym.end());
  local.duplicates_merged = static_cast<std::size_t>(std::distance(last, sym.end())) / 2;
  sym.erase(last, sym.end());

  std::vector<std::size_t> offsets(n + 1, 0);
  for (const auto& [u, v] : sym) ++offsets[static_cast<std::size_t>(u) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<NodeId> targets(sym.size());
  for (std::size_t i = 0; i < sym.size(); ++i) targets[i] = sym[i].second;

  if (stats != nullptr) *stats = local;
  return Graph(n, std::move(offsets), std::move(targets));
}

void InductiveSplit::validate(std::size_t n) const {
  if (labeled_train.empty()) throw InputError("split: labeled_train must be nonempty");
  std::vector<signed char> seen(n, 0);
  auto check = [&](const std::vector<NodeId>& ids, const char* section) {
    for (NodeId v : ids) {
      if (v < 0 || static_cast<std::size_t>(v) >= n)
        throw InputError(std::string("split: id out of range in ") + section);
      if (seen[static_cast<std::size_t>(v)]++)
        throw InputError(std::string("split: sections overlap at node ") + std::to_string(v));
    }
  };
  check(labeled_train, "labeled_train");
  check(unlabeled_train, "unlabeled_train");
  check(validation, "validation");
  check(test, "test");
}

std::vector<NodeId> InductiveSplit::train_nodes() const {
  std::vector<NodeId> nodes(labeled_train);
  nodes.insert(nodes.end(), unlabeled_train.begin(), unlabeled_train.end());
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

ComponentLabeling connected_components(const Graph& g) {
  const std::size_t n = g.node_count();
  ComponentLabeling out;
  out.label.assign(n, -1);
  std::vector<NodeId> queue;
  for (std::size_t root = 0; root < n; ++root) {
    if (out.label[root] != -1) continue;
    const int c = out.count();
    out.comp_nodes.push_back(0);
    out.comp_edges.push_back(0);
    queue.clear();
    queue.push_back(static_cast<NodeId>(root));
    out.label[root] = c;
    std::size_t degree_sum = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const NodeId u = queue[q];
      ++out.comp_nodes[static_cast<std::size_t>(c)];
      degree_sum += g.degree(u);
      for (NodeId v : g.neighbors(u)) {
        if (out.label[static_cast<std::size_t>(v)] == -1) {
          out.label[static_cast<std::size_t>(v)] = c;
          queue.push_back(v);
        }
      }
    }
    out.comp_edges[static_cast<std::size_t>(c)] = degree_sum / 2;
  }
  return out;
}

InducedGraph induce_train_graph(const Graph& g, const InductiveSplit& split) {
  split.validate(g.node_count());
  const std::vector<NodeId> keep = split.train_nodes();
  if (keep.empty()) throw InputError("induce_train_graph: empty train set");

  InducedGraph out;
  out.old_to_new.assign(g.node_count(), -1);
  out.new_to_old = keep;
  for (std::size_t i = 0; i < keep.size(); ++i) out.old_to_new[static_cast<std::size_t>(keep[i])] = static_cast<NodeId>(i);

  std::vector<Edge> edges;
  for (NodeId u : keep) {
    for (NodeId v : g.neighbors(u)) {
      const NodeId nu = out.old_to_new[static_cast<std::size_t>(u)];
      const NodeId nv = out.old_to_new[static_cast<std::size_t>(v)];
      if (nv != -1 && u < v) edges.emplace_back(nu, nv);
    }
  }
  out.graph = build_graph(edges, keep.size());
  return out;
}

namespace {

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

private:
  std::vector<std::size_t> parent_;
};

} // namespace

ExtendResult extend_graph(const Graph& g, std::size_t new_nodes, std::span<const Edge> new_edges,
                          const ComponentLabeling& comps) {
  const std::size_t old_n = g.node_count();
  const std::size_t n = old_n + new_nodes;

  // Deduplicate the incoming pairs against themselves and the existing CSR.
  std::vector<Edge> fresh;
  fresh.reserve(new_edges.size());
  for (const auto& [u, v] : new_edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      std::ostringstream os;
      os << "extend_graph: edge (" << u << ", " << v << ") references a node outside [0, " << n << ")";
      throw InputError(os.str());
    }
    if (u == v) continue;
    const Edge e{std::min(u, v), std::max(u, v)};
    if (static_cast<std::size_t>(e.second) < old_n && g.has_edge(e.first, e.second)) continue;
    fresh.push_back(e);
  }
  std::sort(fresh.begin(), fresh.end());
  fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());

  // Merge the sorted new neighbor lists into the old rows.
  std::vector<std::vector<NodeId>> extra(n);
  for (const auto& [u, v] : fresh) {
    extra[static_cast<std::size_t>(u)].push_back(v);
    extra[static_cast<std::size_t>(v)].push_back(u);
  }
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t old_deg = u < old_n ? g.degree(static_cast<NodeId>(u)) : 0;
    offsets[u + 1] = offsets[u] + old_deg + extra[u].size();
  }
  std::vector<NodeId> targets(offsets[n]);
  for (std::size_t u = 0; u < n; ++u) {
    auto& add = extra[u];
    std::sort(add.begin(), add.end());
    auto old_nb = u < old_n ? g.neighbors(static_cast<NodeId>(u)) : std::span<const NodeId>{};
    std::merge(old_nb.begin(), old_nb.end(), add.begin(), add.end(), targets.begin() + static_cast<std::ptrdiff_t>(offsets[u]));
  }

  ExtendResult out;
  out.first_new_node = static_cast<NodeId>(old_n);
  out.graph = Graph(n, std::move(offsets), std::move(targets));

  for (std::size_t u = 0; u < old_n; ++u) {
    if (!extra[u].empty())
      out.delta.entries.push_back({static_cast<NodeId>(u), g.degree(static_cast<NodeId>(u)),
                                   out.graph.degree(static_cast<NodeId>(u))});
  }

  // Union-find over groups: one per old component, one per new node.
  const std::size_t old_comps = static_cast<std::size_t>(comps.count());
  UnionFind uf(old_comps + new_nodes);
  auto group_of = [&](NodeId v) -> std::size_t {
    return static_cast<std::size_t>(v) < old_n
               ? static_cast<std::size_t>(comps.label[static_cast<std::size_t>(v)])
               : old_comps + (static_cast<std::size_t>(v) - old_n);
  };
  for (const auto& [u, v] : fresh) uf.unite(group_of(u), group_of(v));

  // Canonical labels in order of first appearance over node ids.
  std::vector<int> root_label(old_comps + new_nodes, -1);
  out.comps.label.assign(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t root = uf.find(group_of(static_cast<NodeId>(v)));
    if (root_label[root] == -1) {
      root_label[root] = static_cast<int>(out.comps.comp_nodes.size());
      out.comps.comp_nodes.push_back(0);
      out.comps.comp_edges.push_back(0);
      out.merges.push_back({root_label[root], {}});
    }
    out.comps.label[v] = root_label[root];
    ++out.comps.comp_nodes[static_cast<std::size_t>(root_label[root])];
  }
  for (std::size_t c = 0; c < old_comps; ++c) {
    const int nl = root_label[uf.find(c)];
    out.merges[static_cast<std::size_t>(nl)].old_labels.push_back(static_cast<int>(c));
    out.comps.comp_edges[static_cast<std::size_t>(nl)] += comps.comp_edges[c];
  }
  for (const auto& [u, v] : fresh)
    ++out.comps.comp_edges[static_cast<std::size_t>(out.comps.label[static_cast<std::size_t>(u)])];

  return out;
}

ExtendResult extend_graph(const Graph& g, std::size_t new_nodes, std::span<const Edge> new_edges) {
  return extend_graph(g, new_nodes, new_edges, connected_components(g));
}

NormCoeffs NormCoeffs::compute(const Graph& g, NormKind norm) {
  norm.validate();
  NormCoeffs c;
  const std::size_t n = g.node_count();
  c.row_scale.resize(n);
  c.col_scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d1 = static_cast<double>(g.degree(static_cast<NodeId>(i))) + 1.0;
    c.row_scale[i] = std::pow(d1, norm.r - 1.0);
    c.col_scale[i] = std::pow(d1, -norm.r);
  }
  return c;
}

void propagate_hop_into(const Graph& g, const NormCoeffs& coeffs, const Matrix& x,
                        std::span<const NodeId> support, Matrix& out, MacsTrace* trace) {
  if (x.rows() != g.node_count()) throw InputError("propagate_hop: feature row count != node count");
  if (out.rows() != x.rows() || out.cols() != x.cols())
    throw InputError("propagate_hop: output shape mismatch");
  const std::size_t f = x.cols();

  parallel_for(support.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const NodeId i = support[s];
      const std::size_t ui = static_cast<std::size_t>(i);
      auto dst = out.row(ui);
      // Implicit self-loop term first, then neighbors in CSR order.
      const double self = coeffs.col_scale[ui];
      auto src = x.row(ui);
      for (std::size_t j = 0; j < f; ++j) dst[j] = self * src[j];
      for (NodeId v : g.neighbors(i)) {
        const double w = coeffs.col_scale[static_cast<std::size_t>(v)];
        auto xs = x.row(static_cast<std::size_t>(v));
        for (std::size_t j = 0; j < f; ++j) dst[j] += w * xs[j];
      }
      const double rs = coeffs.row_scale[ui];
      for (std::size_t j = 0; j < f; ++j) dst[j] *= rs;
    }
  });

  if (trace != nullptr) {
    std::uint64_t macs = 0;
    for (NodeId i : support) macs += static_cast<std::uint64_t>(g.degree(i) + 1) * f;
    trace->add(KernelKind::Propagation, macs);
  }
}

Matrix propagate_hop(const Graph& g, NormKind norm, const Matrix& x, std::span<const NodeId> support,
                     MacsTrace* trace) {
  const NormCoeffs coeffs = NormCoeffs::compute(g, norm);
  Matrix out(x.rows(), x.cols());
  propagate_hop_into(g, coeffs, x, support, out, trace);
  return out;
}

Matrix propagate_hop(const Graph& g, NormKind norm, const Matrix& x, MacsTrace* trace) {
  std::vector<NodeId> all(g.node_count());
  std::iota(all.begin(), all.end(), 0);
  return propagate_hop(g, norm, x, all, trace);
}

std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list: " + path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    long long u = 0, v = 0;
    if (!(ls >> u >> v))
      throw InputError("edge list " + path + ": malformed line " + std::to_string(lineno));
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write edge list: " + path);
  out << "# undirected edge list, one 'u v' per line\n";
  for (std::size_t u = 0; u < g.node_count(); ++u) {
    for (NodeId v : g.neighbors(static_cast<NodeId>(u))) {
      if (static_cast<NodeId>(u) < v) out << u << ' ' << v << '\n';
    }
  }
  if (!out) throw IoError("failed while writing edge list: " + path);
}

} // namespace nai

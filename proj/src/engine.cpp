#include "nai/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nai/errors.hpp"

namespace nai {

void NapConfig::validate(int bank_order) const {
  if (ts < 0.0) throw ConfigError("nap: threshold ts must be >= 0");
  if (t_min < 1 || t_min > t_max) throw ConfigError("nap: need 1 <= t_min <= t_max");
  if (t_max > bank_order)
    throw ConfigError("nap: t_max " + std::to_string(t_max) + " exceeds bank order " +
                      std::to_string(bank_order));
  if (batch_size < 1) throw ConfigError("nap: batch size must be >= 1");
}

namespace {

using clock = std::chrono::steady_clock;

double seconds_since(clock::time_point t0) {
  return std::chrono::duration<double>(clock::now() - t0).count();
}

// Classifier input row for a batch member at exit order l.
struct BackendRows {
  Backend backend;
  std::size_t f = 0;
  const Matrix* current = nullptr;       // X^(l) (full-width, support rows valid)
  const Matrix* running_sum = nullptr;   // per-position sums (batch rows), S2gc
  const Matrix* sign_rows = nullptr;     // per-position hop concatenation, Sign

  std::size_t width(int l) const { return backend_input_width(backend, l, f); }

  void fill(NodeId node, std::size_t pos, int l, std::span<double> out) const {
    switch (backend) {
      case Backend::Sgc: {
        auto src = current->row(static_cast<std::size_t>(node));
        std::copy(src.begin(), src.end(), out.begin());
        break;
      }
      case Backend::S2gc: {
        auto src = running_sum->row(pos);
        const double inv = 1.0 / static_cast<double>(l);
        for (std::size_t j = 0; j < f; ++j) out[j] = src[j] * inv;
        break;
      }
      case Backend::Sign: {
        auto src = sign_rows->row(pos);
        std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(width(l)), out.begin());
        break;
      }
    }
  }
};

} // namespace

InferenceOutcome infer_batch(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                             const StationarySummary& summary, NormKind norm, const NapConfig& cfg,
                             std::span<const NodeId> batch, MacsTrace* trace) {
  cfg.validate(bank.order());
  if (batch.empty()) throw InputError("infer: empty batch");
  if (x.rows() != g.node_count()) throw InputError("infer: feature rows != node count");
  for (int l = std::min(cfg.t_min, cfg.t_max); l <= cfg.t_max; ++l) {
    if (l >= cfg.t_min && !bank.has_order(l))
      throw ConfigError("infer: bank lacks classifier for order " + std::to_string(l));
  }
  const bool adaptive = cfg.t_min < cfg.t_max;
  if (adaptive && summary.node_count() != g.node_count())
    throw ConfigError("infer: stationary summary is stale for this graph");

  MacsTrace local_trace;
  MacsTrace* tr = trace != nullptr ? trace : &local_trace;
  const std::size_t tr_start = tr->events().size();

  const auto t_total = clock::now();
  double fp_seconds = 0.0;

  const int L = cfg.t_max;
  SupportLayers layers = layered_support(g, batch, L);
  const std::vector<NodeId> targets = layers.sets[static_cast<std::size_t>(L)]; // sorted, unique
  const std::size_t nb = targets.size();
  const std::size_t f = x.cols();

  // Positions of targets in the extended graph's id space.
  std::vector<int> position(g.node_count(), -1);
  for (std::size_t p = 0; p < nb; ++p) position[static_cast<std::size_t>(targets[p])] = static_cast<int>(p);

  // Stationary rows are only needed when exits can fire before t_max.
  Matrix xinf;
  if (adaptive) {
    xinf = Matrix(nb, f);
    for (std::size_t p = 0; p < nb; ++p) summary.state_into(targets[p], xinf.row(p), tr);
  }

  Matrix bufs[2] = {Matrix(g.node_count(), f), Matrix(g.node_count(), f)};
  int write_idx = 0;
  const Matrix* x_prev = &x;

  Matrix running_sum;
  if (bank.backend() == Backend::S2gc) running_sum = Matrix(nb, f);
  Matrix sign_rows;
  if (bank.backend() == Backend::Sign) {
    sign_rows = Matrix(nb, f * static_cast<std::size_t>(L + 1));
    for (std::size_t p = 0; p < nb; ++p) {
      auto src = x.row(static_cast<std::size_t>(targets[p]));
      std::copy(src.begin(), src.end(), sign_rows.row(p).begin());
    }
  }

  std::vector<char> active(nb, 1);
  std::size_t active_count = nb;
  std::size_t last_rebuild_count = nb;
  std::vector<ExitRecord> records(nb);

  const NormCoeffs coeffs = NormCoeffs::compute(g, norm);

  auto classify_exits = [&](int l, const Matrix& x_cur, const std::vector<std::size_t>& exit_pos,
                            bool forced) {
    if (exit_pos.empty()) return;
    const Classifier& clf = bank.classifier(l);
    BackendRows rows{bank.backend(), f, &x_cur, &running_sum, &sign_rows};
    Matrix inputs(exit_pos.size(), rows.width(l));
    for (std::size_t i = 0; i < exit_pos.size(); ++i)
      rows.fill(targets[exit_pos[i]], exit_pos[i], l, inputs.row(i));
    Matrix logits = forward_logits(clf, inputs, tr);
    Matrix probs = tempered_softmax(logits, 1.0);
    for (std::size_t i = 0; i < exit_pos.size(); ++i) {
      const std::size_t p = exit_pos[i];
      ExitRecord& r = records[p];
      r.node = targets[p];
      r.order = l;
      r.predicted = argmax_row(probs.row(i));
      r.confidence = probs.at(i, static_cast<std::size_t>(r.predicted));
      if (forced) r.distance.reset();
      active[p] = 0;
    }
    active_count -= exit_pos.size();
  };

  for (int l = 1; l <= L && active_count > 0; ++l) {
    const std::vector<NodeId>& out_set = layers.sets[static_cast<std::size_t>(l)];
    Matrix& x_cur = bufs[write_idx];

    const auto t_fp = clock::now();
    propagate_hop_into(g, coeffs, *x_prev, out_set, x_cur, tr);
    fp_seconds += seconds_since(t_fp);

    if (bank.backend() == Backend::S2gc) {
      for (std::size_t p = 0; p < nb; ++p) {
        if (!active[p]) continue;
        auto src = x_cur.row(static_cast<std::size_t>(targets[p]));
        auto dst = running_sum.row(p);
        for (std::size_t j = 0; j < f; ++j) dst[j] += src[j];
      }
    } else if (bank.backend() == Backend::Sign) {
      for (std::size_t p = 0; p < nb; ++p) {
        if (!active[p]) continue;
        auto src = x_cur.row(static_cast<std::size_t>(targets[p]));
        auto dst = sign_rows.row(p);
        std::copy(src.begin(), src.end(),
                  dst.begin() + static_cast<std::ptrdiff_t>(f * static_cast<std::size_t>(l)));
      }
    }

    if (l < cfg.t_min) {
      // below the minimum order: keep propagating, no exit checks
    } else if (l < cfg.t_max) {
      std::vector<std::size_t> exit_pos;
      const auto t_dist = clock::now();
      std::uint64_t comparisons = 0;
      for (std::size_t p = 0; p < nb; ++p) {
        if (!active[p]) continue;
        const double d = smoothness_distance(x_cur.row(static_cast<std::size_t>(targets[p])),
                                             xinf.row(p), cfg.normalized_distance);
        ++comparisons;
        if (d < cfg.ts) {
          records[p].distance = d;
          exit_pos.push_back(p);
        }
      }
      fp_seconds += seconds_since(t_dist);
      if (comparisons > 0) tr->add(KernelKind::Distance, comparisons * f);

      classify_exits(l, x_cur, exit_pos, /*forced=*/false);

      // Lazy support shrink: rebuild the remaining layers once the active
      // set dropped by >= 25% since the last rebuild. Layers stay supersets
      // otherwise, which only affects the traversed-edge accounting.
      if (active_count > 0 && l < L && active_count * 4 <= last_rebuild_count * 3) {
        std::vector<NodeId> remaining;
        remaining.reserve(active_count);
        for (std::size_t p = 0; p < nb; ++p)
          if (active[p]) remaining.push_back(targets[p]);
        SupportLayers rebuilt = layered_support(g, remaining, L - l);
        for (int j = l + 1; j <= L; ++j)
          layers.sets[static_cast<std::size_t>(j)] = rebuilt.sets[static_cast<std::size_t>(j - l)];
        last_rebuild_count = active_count;
      }
    } else {
      std::vector<std::size_t> exit_pos;
      for (std::size_t p = 0; p < nb; ++p)
        if (active[p]) exit_pos.push_back(p);
      classify_exits(l, x_cur, exit_pos, /*forced=*/true);
    }

    x_prev = &x_cur;
    write_idx ^= 1;
  }

  InferenceOutcome out;
  out.nodes.assign(batch.begin(), batch.end());
  out.predictions.resize(batch.size());
  out.exits.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int p = position[static_cast<std::size_t>(batch[i])];
    out.exits[i] = records[static_cast<std::size_t>(p)];
    out.predictions[i] = out.exits[i].predicted;
  }
  out.histogram = exit_histogram(out.exits, bank.order());
  out.total_seconds = seconds_since(t_total);
  out.fp_seconds = fp_seconds;

  // Fold only this call's events into the breakdown.
  MacsTrace call_events;
  for (std::size_t i = tr_start; i < tr->events().size(); ++i)
    call_events.add(tr->events()[i].kind, tr->events()[i].macs);
  out.macs = meter_macs(call_events);
  return out;
}

InferenceOutcome infer(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                       const StationarySummary& summary, NormKind norm, const NapConfig& cfg,
                       std::span<const NodeId> targets, MacsTrace* trace) {
  if (targets.empty()) throw InputError("infer: empty target set");
  InferenceOutcome merged;
  merged.histogram.assign(static_cast<std::size_t>(bank.order()) + 1, 0);
  for (std::size_t begin = 0; begin < targets.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(targets.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    InferenceOutcome part =
        infer_batch(g, x, bank, summary, norm, cfg, targets.subspan(begin, end - begin), trace);
    merged.nodes.insert(merged.nodes.end(), part.nodes.begin(), part.nodes.end());
    merged.predictions.insert(merged.predictions.end(), part.predictions.begin(), part.predictions.end());
    merged.exits.insert(merged.exits.end(), part.exits.begin(), part.exits.end());
    merged.macs += part.macs;
    merged.total_seconds += part.total_seconds;
    merged.fp_seconds += part.fp_seconds;
    for (std::size_t l = 0; l < merged.histogram.size(); ++l) merged.histogram[l] += part.histogram[l];
  }
  return merged;
}

std::vector<std::uint64_t> exit_histogram(std::span<const ExitRecord> records, int k) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(k) + 1, 0);
  for (const ExitRecord& r : records) {
    if (r.order < 1 || r.order > k) throw InputError("exit_histogram: record order out of range");
    ++counts[static_cast<std::size_t>(r.order)];
  }
  return counts;
}

SweepResult sweep(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                  const StationarySummary& summary, NormKind norm,
                  std::span<const SweepPoint> grid, std::span<const NodeId> val_nodes,
                  std::span<const int> val_labels, int batch_size, const SweepBudget& budget) {
  if (grid.empty()) throw InputError("sweep: empty grid");
  if (val_nodes.size() != val_labels.size()) throw InputError("sweep: one label per validation node");

  SweepResult out;
  for (const SweepPoint& pt : grid) {
    NapConfig cfg;
    cfg.ts = pt.ts;
    cfg.t_min = pt.t_min;
    cfg.t_max = pt.t_max;
    cfg.batch_size = batch_size;
    cfg.validate(bank.order());

    InferenceOutcome run = infer(g, x, bank, summary, norm, cfg, val_nodes);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < val_nodes.size(); ++i)
      if (run.predictions[i] == val_labels[i]) ++hits;

    SweepCandidate cand;
    cand.point = pt;
    cand.accuracy = static_cast<double>(hits) / static_cast<double>(val_nodes.size());
    cand.macs = run.macs;
    cand.nodes = val_nodes.size();
    if (budget.max_fp_macs && cand.macs.fp() > *budget.max_fp_macs) continue;
    if (budget.max_total_macs && cand.macs.total() > *budget.max_total_macs) continue;
    out.ranked.push_back(cand);
  }

  std::sort(out.ranked.begin(), out.ranked.end(), [](const SweepCandidate& a, const SweepCandidate& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.macs.fp() != b.macs.fp()) return a.macs.fp() < b.macs.fp();
    if (a.point.t_max != b.point.t_max) return a.point.t_max < b.point.t_max;
    if (a.point.ts != b.point.ts) return a.point.ts > b.point.ts;
    return a.point.t_min < b.point.t_min;
  });

  for (const SweepCandidate& c : out.ranked) {
    bool dominated = false;
    for (const SweepCandidate& d : out.ranked) {
      if (d.accuracy >= c.accuracy && d.macs.fp() <= c.macs.fp() &&
          (d.accuracy > c.accuracy || d.macs.fp() < c.macs.fp())) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.pareto.push_back(c);
  }
  return out;
}

void write_inference_csv(const InferenceOutcome& outcome, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write inference csv: " + path);
  out << "id,exit_order,distance,predicted_class\n";
  char buf[128];
  for (std::size_t i = 0; i < outcome.nodes.size(); ++i) {
    const ExitRecord& r = outcome.exits[i];
    if (r.distance.has_value()) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%d\n", outcome.nodes[i], r.order, *r.distance,
                    r.predicted);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%d,,%d\n", outcome.nodes[i], r.order, r.predicted);
    }
    out << buf;
  }
  if (!out) throw IoError("failed while writing inference csv: " + path);
}

std::string inference_summary_json(const InferenceOutcome& outcome, std::optional<double> accuracy) {
  nlohmann::json j;
  if (accuracy.has_value()) j["accuracy"] = *accuracy;
  j["nodes"] = outcome.nodes.size();
  j["macs"] = {{"stationary", outcome.macs.stationary},
               {"propagation", outcome.macs.propagation},
               {"distance", outcome.macs.distance},
               {"classification", outcome.macs.classification},
               {"total", outcome.macs.total()},
               {"fp", outcome.macs.fp()},
               {"summary_build_amortized", outcome.macs.summary_build}};
  j["timings"] = {{"total_seconds", outcome.total_seconds}, {"fp_seconds", outcome.fp_seconds}};
  j["exit_histogram"] = std::vector<std::uint64_t>(outcome.histogram.begin() + 1, outcome.histogram.end());
  return j.dump(2);
}

std::string inference_report_text(const InferenceOutcome& outcome, std::optional<double> accuracy) {
  std::ostringstream os;
  os << "nodes: " << outcome.nodes.size() << "\n";
  if (accuracy.has_value()) os << "accuracy: " << *accuracy << "\n";
  os << "exit histogram (order 1..k): [";
  for (std::size_t l = 1; l < outcome.histogram.size(); ++l) {
    if (l > 1) os << ", ";
    os << outcome.histogram[l];
  }
  os << "]\n";
  os << "MACs: stationary=" << outcome.macs.stationary << " propagation=" << outcome.macs.propagation
     << " distance=" << outcome.macs.distance << " classification=" << outcome.macs.classification
     << " total=" << outcome.macs.total() << " (fp=" << outcome.macs.fp() << ")\n";
  os << "time: total=" << outcome.total_seconds << "s fp=" << outcome.fp_seconds << "s\n";
  return os.str();
}

namespace {
std::string candidates_csv(std::span<const SweepCandidate> list) {
  std::ostringstream os;
  os << "ts,tmin,tmax,accuracy,macs,fp_macs\n";
  char buf[160];
  for (const SweepCandidate& c : list) {
    std::snprintf(buf, sizeof(buf), "%.9g,%d,%d,%.6f,%llu,%llu\n", c.point.ts, c.point.t_min,
                  c.point.t_max, c.accuracy, static_cast<unsigned long long>(c.macs.total()),
                  static_cast<unsigned long long>(c.macs.fp()));
    os << buf;
  }
  return os.str();
}
} // namespace

std::string sweep_candidates_csv(const SweepResult& result) { return candidates_csv(result.ranked); }

std::string sweep_pareto_csv(const SweepResult& result) { return candidates_csv(result.pareto); }

} // namespace nai

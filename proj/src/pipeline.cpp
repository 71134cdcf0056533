#include "nai/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "nai/errors.hpp"

namespace nai {

namespace {

// Remaps the train sections of `split` into the induced-graph id space.
InductiveSplit remap_train_split(const InductiveSplit& split, const std::vector<NodeId>& old_to_new) {
  InductiveSplit out;
  for (NodeId v : split.labeled_train) out.labeled_train.push_back(old_to_new[static_cast<std::size_t>(v)]);
  for (NodeId v : split.unlabeled_train)
    out.unlabeled_train.push_back(old_to_new[static_cast<std::size_t>(v)]);
  std::sort(out.labeled_train.begin(), out.labeled_train.end());
  std::sort(out.unlabeled_train.begin(), out.unlabeled_train.end());
  return out;
}

} // namespace

ArrivalSet build_arrivals(const DatasetBundle& ds, NormKind norm, EvalSection section) {
  ds.validate();
  const std::vector<NodeId>& arrivals_old =
      section == EvalSection::Validation ? ds.split.validation : ds.split.test;
  if (arrivals_old.empty()) throw InputError("arrivals: requested split section is empty");

  InducedGraph induced = induce_train_graph(ds.graph, ds.split);
  const std::size_t n_train = induced.graph.node_count();
  const std::size_t f = ds.features.cols();

  // Arrival ids follow the train universe in sorted original order.
  std::vector<NodeId> sorted_arrivals(arrivals_old.begin(), arrivals_old.end());
  std::sort(sorted_arrivals.begin(), sorted_arrivals.end());
  std::vector<NodeId> old_to_new = induced.old_to_new;
  for (std::size_t i = 0; i < sorted_arrivals.size(); ++i)
    old_to_new[static_cast<std::size_t>(sorted_arrivals[i])] = static_cast<NodeId>(n_train + i);

  // Edges incident to arrivals whose other endpoint is present.
  std::vector<Edge> new_edges;
  for (NodeId a : sorted_arrivals) {
    const NodeId na = old_to_new[static_cast<std::size_t>(a)];
    for (NodeId u : ds.graph.neighbors(a)) {
      const NodeId nu = old_to_new[static_cast<std::size_t>(u)];
      if (nu == -1) continue; // endpoint absent (other eval section)
      if (nu < static_cast<NodeId>(n_train) || u < a) new_edges.emplace_back(na, nu);
    }
  }

  ArrivalSet out;
  out.features = Matrix(n_train + sorted_arrivals.size(), f);
  for (std::size_t i = 0; i < n_train; ++i) {
    auto src = ds.features.row(static_cast<std::size_t>(induced.new_to_old[i]));
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
  }
  for (std::size_t i = 0; i < sorted_arrivals.size(); ++i) {
    auto src = ds.features.row(static_cast<std::size_t>(sorted_arrivals[i]));
    std::copy(src.begin(), src.end(), out.features.row(n_train + i).begin());
  }

  Matrix train_features(n_train, f);
  for (std::size_t i = 0; i < n_train; ++i) {
    auto src = out.features.row(i);
    std::copy(src.begin(), src.end(), train_features.row(i).begin());
  }

  MacsTrace trace;
  const ComponentLabeling train_comps = connected_components(induced.graph);
  StationarySummary summary =
      StationarySummary::build(induced.graph, norm, train_features, train_comps, &trace);
  ExtendResult er = extend_graph(induced.graph, sorted_arrivals.size(), new_edges, train_comps);
  summary.apply_extension(er, out.features, &trace);

  out.graph = std::move(er.graph);
  out.summary = std::move(summary);
  out.summary_build_macs = meter_macs(trace).summary_build;
  out.targets.resize(sorted_arrivals.size());
  std::iota(out.targets.begin(), out.targets.end(), static_cast<NodeId>(n_train));
  out.target_labels.resize(sorted_arrivals.size());
  for (std::size_t i = 0; i < sorted_arrivals.size(); ++i)
    out.target_labels[i] = ds.labels[static_cast<std::size_t>(sorted_arrivals[i])];
  return out;
}

std::vector<EvalRows> arrival_order_inputs(const ArrivalSet& arrivals, NormKind norm,
                                           Backend backend, int k) {
  const Graph& g = arrivals.graph;
  const std::size_t f = arrivals.features.cols();
  const std::size_t nb = arrivals.targets.size();

  SupportLayers layers = layered_support(g, arrivals.targets, k);
  const NormCoeffs coeffs = NormCoeffs::compute(g, norm);

  std::vector<EvalRows> out(static_cast<std::size_t>(k) + 1);
  Matrix bufs[2] = {Matrix(g.node_count(), f), Matrix(g.node_count(), f)};
  const Matrix* prev = &arrivals.features;
  int write_idx = 0;

  Matrix running_sum(nb, f);
  Matrix sign_rows;
  if (backend == Backend::Sign) {
    sign_rows = Matrix(nb, f * static_cast<std::size_t>(k + 1));
    for (std::size_t p = 0; p < nb; ++p) {
      auto src = arrivals.features.row(static_cast<std::size_t>(arrivals.targets[p]));
      std::copy(src.begin(), src.end(), sign_rows.row(p).begin());
    }
  }

  for (int l = 1; l <= k; ++l) {
    Matrix& cur = bufs[write_idx];
    propagate_hop_into(g, coeffs, *prev, layers.sets[static_cast<std::size_t>(l)], cur);

    EvalRows& rows = out[static_cast<std::size_t>(l)];
    rows.labels = arrivals.target_labels;
    rows.inputs = Matrix(nb, backend_input_width(backend, l, f));
    for (std::size_t p = 0; p < nb; ++p) {
      auto hop_row = cur.row(static_cast<std::size_t>(arrivals.targets[p]));
      auto dst = rows.inputs.row(p);
      switch (backend) {
        case Backend::Sgc:
          std::copy(hop_row.begin(), hop_row.end(), dst.begin());
          break;
        case Backend::S2gc: {
          auto sum = running_sum.row(p);
          for (std::size_t j = 0; j < f; ++j) {
            sum[j] += hop_row[j];
            dst[j] = sum[j] / static_cast<double>(l);
          }
          break;
        }
        case Backend::Sign: {
          auto cat = sign_rows.row(p);
          std::copy(hop_row.begin(), hop_row.end(),
                    cat.begin() + static_cast<std::ptrdiff_t>(f * static_cast<std::size_t>(l)));
          std::copy(cat.begin(), cat.begin() + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
          break;
        }
      }
    }
    prev = &cur;
    write_idx ^= 1;
  }
  return out;
}

TrainingContext prepare_training(const DatasetBundle& ds, NormKind norm, Backend backend, int k) {
  ds.validate();
  norm.validate();

  TrainingContext ctx{.induced = induce_train_graph(ds.graph, ds.split),
                      .train_features = {},
                      .train_labels = {},
                      .train_split = {},
                      .stack = {},
                      .holdouts = {}};
  const std::size_t n_train = ctx.induced.graph.node_count();

  ctx.train_features = Matrix(n_train, ds.features.cols());
  ctx.train_labels.assign(n_train, kUnlabeled);
  for (std::size_t i = 0; i < n_train; ++i) {
    auto src = ds.features.row(static_cast<std::size_t>(ctx.induced.new_to_old[i]));
    std::copy(src.begin(), src.end(), ctx.train_features.row(i).begin());
    ctx.train_labels[i] = ds.labels[static_cast<std::size_t>(ctx.induced.new_to_old[i])];
  }
  ctx.train_split = remap_train_split(ds.split, ctx.induced.old_to_new);

  ctx.stack = PropagatedStack::compute(ctx.induced.graph, norm, ctx.train_features, k, backend);

  // Model selection sees validation exactly as it will arrive at inference.
  if (!ds.split.validation.empty()) {
    ArrivalSet val = build_arrivals(ds, norm, EvalSection::Validation);
    ctx.holdouts = arrival_order_inputs(val, norm, backend, k);
  }
  return ctx;
}

TrainedModel train_pipeline(const DatasetBundle& ds, const PipelineConfig& cfg, bool run_distill) {
  NormKind norm{cfg.r_coef};
  cfg.train.validate();
  if (run_distill) cfg.distill.validate(cfg.k);

  TrainingContext ctx = prepare_training(ds, norm, cfg.backend, cfg.k);
  TrainResult base = train_base(ctx.stack, ctx.train_labels, ctx.train_split, cfg.train,
                                ds.class_count, ctx.holdout_for(cfg.k));

  TrainedModel model;
  model.r_coef = cfg.r_coef;
  if (!run_distill) {
    model.bank = ClassifierBank(cfg.backend, cfg.k);
    model.bank.set_classifier(cfg.k, base.classifier, base.best_val);
    model.scorer = AttentionScorer::zeros(static_cast<std::size_t>(ds.class_count),
                                          cfg.distill.scorer_activation);
    return model;
  }

  ClassifierBank offline =
      offline_distill(base.classifier, ctx.stack, ctx.train_labels, ctx.train_split, cfg.distill,
                      ds.class_count, ctx.holdouts.empty() ? nullptr : &ctx.holdouts);
  OnlineResult online = online_distill(
      offline,
      AttentionScorer::zeros(static_cast<std::size_t>(ds.class_count), cfg.distill.scorer_activation),
      ctx.stack, ctx.train_labels, ctx.train_split, cfg.distill, ds.class_count,
      ctx.holdouts.empty() ? nullptr : &ctx.holdouts);

  model.bank = std::move(online.bank);
  model.scorer = std::move(online.scorer);
  return model;
}

EvalRun evaluate(const ArrivalSet& arrivals, const TrainedModel& model, const NapConfig& cfg) {
  EvalRun run;
  run.outcome = infer(arrivals.graph, arrivals.features, model.bank, arrivals.summary, model.norm(),
                      cfg, arrivals.targets);
  run.outcome.macs.summary_build = arrivals.summary_build_macs;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < arrivals.targets.size(); ++i)
    if (run.outcome.predictions[i] == arrivals.target_labels[i]) ++hits;
  run.accuracy = arrivals.targets.empty()
                     ? 0.0
                     : static_cast<double>(hits) / static_cast<double>(arrivals.targets.size());
  return run;
}

SweepResult sweep_arrivals(const ArrivalSet& arrivals, const TrainedModel& model,
                           std::span<const SweepPoint> grid, int batch_size,
                           const SweepBudget& budget) {
  return sweep(arrivals.graph, arrivals.features, model.bank, arrivals.summary, model.norm(), grid,
               arrivals.targets, arrivals.target_labels, batch_size, budget);
}

std::vector<double> distance_quantile_grid(const ArrivalSet& arrivals, const TrainedModel& model,
                                           int count) {
  if (count < 1) throw InputError("distance grid: count must be >= 1");
  const Graph& g = arrivals.graph;
  const std::size_t f = arrivals.features.cols();

  SupportLayers layers = layered_support(g, arrivals.targets, 1);
  const NormCoeffs coeffs = NormCoeffs::compute(g, model.norm());
  Matrix hop1(g.node_count(), f);
  propagate_hop_into(g, coeffs, arrivals.features, layers.sets[1], hop1);

  std::vector<double> dist(arrivals.targets.size());
  std::vector<double> state(f);
  for (std::size_t p = 0; p < arrivals.targets.size(); ++p) {
    arrivals.summary.state_into(arrivals.targets[p], state);
    dist[p] = smoothness_distance(hop1.row(static_cast<std::size_t>(arrivals.targets[p])), state);
  }
  std::sort(dist.begin(), dist.end());

  std::vector<double> grid;
  for (int q = 1; q <= count; ++q) {
    const double frac = static_cast<double>(q) / static_cast<double>(count + 1);
    const std::size_t idx = std::min(dist.size() - 1,
                                     static_cast<std::size_t>(frac * static_cast<double>(dist.size())));
    grid.push_back(dist[idx]);
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

} // namespace nai

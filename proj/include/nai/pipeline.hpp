#pragma once

#include <span>
#include <string>
#include <vector>

#include "nai/dataset.hpp"
#include "nai/distill.hpp"
#include "nai/engine.hpp"
#include "nai/training.hpp"

namespace nai {

// Inductive protocol: models are fitted on the induced train graph
// (labeled ∪ unlabeled); validation and test nodes arrive later as unseen
// nodes, each set extending the train graph independently.

struct PipelineConfig {
  Backend backend = Backend::Sgc;
  double r_coef = 0.5;
  int k = 5;
  TrainConfig train;
  DistillConfig distill;
};

struct TrainedModel {
  ClassifierBank bank;
  AttentionScorer scorer;
  double r_coef = 0.5;

  NormKind norm() const { return NormKind{r_coef}; }
};

enum class EvalSection { Validation, Test };

/// Train graph extended with one arrival section, with the stationary
/// summary maintained incrementally (built on the train graph, updated for
/// the arrivals), ready for adaptive inference over `targets`.
struct ArrivalSet {
  Graph graph;
  Matrix features;
  std::vector<NodeId> targets; // ids in the extended space, sorted
  std::vector<int> target_labels;
  StationarySummary summary;
  std::uint64_t summary_build_macs = 0; // amortized build + update cost
};

ArrivalSet build_arrivals(const DatasetBundle& ds, NormKind norm, EvalSection section);

/// Per-order classifier inputs of the arrival targets (vanilla hop-by-hop
/// propagation over the extended graph); index l in 1..k, [0] unused.
std::vector<EvalRows> arrival_order_inputs(const ArrivalSet& arrivals, NormKind norm,
                                           Backend backend, int k);

/// Shared preparation for the training phases: induced train graph,
/// remapped labels/split, the propagated stack, and per-order validation
/// holdouts (empty when the dataset has no validation section).
struct TrainingContext {
  InducedGraph induced;
  Matrix train_features;
  std::vector<int> train_labels;
  InductiveSplit train_split;
  PropagatedStack stack;
  std::vector<EvalRows> holdouts;

  const EvalRows* holdout_for(int order) const {
    return holdouts.empty() ? nullptr : &holdouts[static_cast<std::size_t>(order)];
  }
};

TrainingContext prepare_training(const DatasetBundle& ds, NormKind norm, Backend backend, int k);

/// Full training procedure: base classifier at order k on the train graph,
/// then offline and online distillation. Validation accuracy for model
/// selection comes from the validation arrival rows.
TrainedModel train_pipeline(const DatasetBundle& ds, const PipelineConfig& cfg,
                            bool run_distill = true);

struct EvalRun {
  InferenceOutcome outcome;
  double accuracy = 0.0;
};

EvalRun evaluate(const ArrivalSet& arrivals, const TrainedModel& model, const NapConfig& cfg);

SweepResult sweep_arrivals(const ArrivalSet& arrivals, const TrainedModel& model,
                           std::span<const SweepPoint> grid, int batch_size,
                           const SweepBudget& budget = {});

/// Data-driven threshold grid: `count` quantiles of the targets' first-hop
/// smoothness distances over the extended graph.
std::vector<double> distance_quantile_grid(const ArrivalSet& arrivals, const TrainedModel& model,
                                           int count);

} // namespace nai

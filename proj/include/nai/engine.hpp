#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nai/distill.hpp"
#include "nai/graph.hpp"
#include "nai/metering.hpp"
#include "nai/propagation.hpp"

namespace nai {

struct NapConfig {
  double ts = 0.0;   // smoothness threshold; exits fire on distance < ts (strict)
  int t_min = 1;     // first order at which exits are checked
  int t_max = 1;     // forced-exit order
  int batch_size = 500;
  bool normalized_distance = false;

  void validate(int bank_order) const;
};

struct ExitRecord {
  NodeId node = -1;
  int order = 0;
  std::optional<double> distance; // absent when the exit was forced at t_max
  int predicted = -1;
  double confidence = 0.0;
};

struct InferenceOutcome {
  std::vector<NodeId> nodes;      // request order
  std::vector<int> predictions;   // aligned with nodes
  std::vector<ExitRecord> exits;  // aligned with nodes
  MacsBreakdown macs;
  double total_seconds = 0.0;
  double fp_seconds = 0.0;                // propagation + distance share
  std::vector<std::uint64_t> histogram;   // exits per order, index 1..bank order
};

/// One batch of Algorithm-1 inference: stationary rows for the batch,
/// layered supporting nodes, hop-by-hop propagation with per-node exits on
/// distance < ts for t_min <= l < t_max, forced classification at t_max.
/// With t_min == t_max no stationary/distance work happens at all, which is
/// exactly vanilla fixed-order inference.
InferenceOutcome infer_batch(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                             const StationarySummary& summary, NormKind norm, const NapConfig& cfg,
                             std::span<const NodeId> batch, MacsTrace* trace = nullptr);

/// Processes `targets` in chunks of cfg.batch_size and merges the outcomes.
InferenceOutcome infer(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                       const StationarySummary& summary, NormKind norm, const NapConfig& cfg,
                       std::span<const NodeId> targets, MacsTrace* trace = nullptr);

/// counts[l] = exits at order l, for l in 1..k.
std::vector<std::uint64_t> exit_histogram(std::span<const ExitRecord> records, int k);

struct SweepPoint {
  double ts = 0.0;
  int t_min = 1;
  int t_max = 1;
};

struct SweepCandidate {
  SweepPoint point;
  double accuracy = 0.0;
  MacsBreakdown macs;
  std::size_t nodes = 0;
};

struct SweepBudget {
  std::optional<std::uint64_t> max_fp_macs;
  std::optional<std::uint64_t> max_total_macs;
};

struct SweepResult {
  /// All in-budget candidates, sorted by accuracy desc, then FP MACs asc,
  /// then smaller t_max, then larger ts, then smaller t_min.
  std::vector<SweepCandidate> ranked;
  /// Non-dominated accuracy-vs-FP-MACs front of `ranked`.
  std::vector<SweepCandidate> pareto;
};

SweepResult sweep(const Graph& g, const Matrix& x, const ClassifierBank& bank,
                  const StationarySummary& summary, NormKind norm,
                  std::span<const SweepPoint> grid, std::span<const NodeId> val_nodes,
                  std::span<const int> val_labels, int batch_size, const SweepBudget& budget = {});

// Inference report surfaces: per-node CSV, human-readable text, JSON summary.
void write_inference_csv(const InferenceOutcome& outcome, const std::string& path);
std::string inference_summary_json(const InferenceOutcome& outcome, std::optional<double> accuracy);
std::string inference_report_text(const InferenceOutcome& outcome, std::optional<double> accuracy);

std::string sweep_candidates_csv(const SweepResult& result);
std::string sweep_pareto_csv(const SweepResult& result);

} // namespace nai

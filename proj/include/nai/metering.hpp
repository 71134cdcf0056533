#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace nai {

// Counting rules (a multiply-add is 1 MAC, norms count f for the squares and
// ignore the root):
//   propagation  — (deg(i)+1) * f per computed output row i
//   stationary   — f per per-node stationary-state evaluation
//   distance     — f per comparison
//   classification — sum over layers of in*out per classified node
// The one-time weighted-sum build behind the stationary state is amortized
// bookkeeping and reported on its own line, outside the four-procedure total.
enum class KernelKind : std::uint8_t {
  StationaryState,
  Propagation,
  Distance,
  Classification,
  SummaryBuild,
};

struct KernelEvent {
  KernelKind kind;
  std::uint64_t macs;
};

/// Append-only record emitted by instrumented kernels.
class MacsTrace {
public:
  void add(KernelKind kind, std::uint64_t macs) { events_.push_back({kind, macs}); }
  std::span<const KernelEvent> events() const { return events_; }
  void clear() { events_.clear(); }

private:
  std::vector<KernelEvent> events_;
};

struct MacsBreakdown {
  std::uint64_t stationary = 0;
  std::uint64_t propagation = 0;
  std::uint64_t distance = 0;
  std::uint64_t classification = 0;
  std::uint64_t summary_build = 0; // amortized, excluded from total

  std::uint64_t total() const { return stationary + propagation + distance + classification; }
  /// Feature-processing share: propagation + distance.
  std::uint64_t fp() const { return propagation + distance; }

  MacsBreakdown& operator+=(const MacsBreakdown& o);
};

/// Folds a kernel trace into the four-procedure breakdown.
MacsBreakdown meter_macs(const MacsTrace& trace);

struct TimingReport {
  double total_mean_s = 0.0;
  double total_std_s = 0.0;
  double fp_mean_s = 0.0;
  double fp_std_s = 0.0;
  int repetitions = 0;
  std::size_t batch_size = 0;
  std::size_t nodes = 0;

  double per_node_ms() const { return nodes == 0 ? 0.0 : total_mean_s * 1e3 / static_cast<double>(nodes); }
  double fp_per_node_ms() const { return nodes == 0 ? 0.0 : fp_mean_s * 1e3 / static_cast<double>(nodes); }
};

// Times `run` with a monotonic clock, single-threaded, discarding `warmup`
// runs. The closure returns the feature-processing seconds it measured
// internally (0 when not applicable).
TimingReport benchmark(const std::function<double()>& run, int repetitions, int warmup = 0);

struct MethodResult {
  std::string name;
  double accuracy = 0.0;
  MacsBreakdown macs;
  double total_seconds = 0.0;
  double fp_seconds = 0.0;
  std::size_t nodes = 0;
};

struct ComparisonRow {
  std::string method;
  double acc = 0.0;
  double mmacs = 0.0;      // per-node mega-MACs
  double fp_mmacs = 0.0;
  double time_ms = 0.0;    // per-node milliseconds
  double fp_time_ms = 0.0;
  double ratio_mmacs = 1.0;
  double ratio_fp_mmacs = 1.0;
  double ratio_time = 1.0;
  double ratio_fp_time = 1.0;
};

// Per-node metric rows with acceleration ratios against the vanilla row
// (ratio = vanilla / method). Ratios are always computed, never entered.
class ComparisonTable {
public:
  static ComparisonTable build(std::span<const MethodResult> results, const std::string& vanilla_name);

  const std::vector<ComparisonRow>& rows() const { return rows_; }
  std::string to_text() const;
  /// Schema: method,acc,mmacs,fp_mmacs,time_ms,fp_time_ms,ratio_time,ratio_fp
  std::string to_csv() const;

private:
  std::vector<ComparisonRow> rows_;
};

} // namespace nai

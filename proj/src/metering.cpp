#include "nai/metering.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nai/errors.hpp"
#include "nai/parallel.hpp"

namespace nai {

MacsBreakdown& MacsBreakdown::operator+=(const MacsBreakdown& o) {
  stationary += o.stationary;
  propagation += o.propagation;
  distance += o.distance;
  classification += o.classification;
  summary_build += o.summary_build;
  return *this;
}

MacsBreakdown meter_macs(const MacsTrace& trace) {
  MacsBreakdown b;
  for (const KernelEvent& e : trace.events()) {
    switch (e.kind) {
      case KernelKind::StationaryState: b.stationary += e.macs; break;
      case KernelKind::Propagation: b.propagation += e.macs; break;
      case KernelKind::Distance: b.distance += e.macs; break;
      case KernelKind::Classification: b.classification += e.macs; break;
      case KernelKind::SummaryBuild: b.summary_build += e.macs; break;
      default: throw InputError("meter_macs: unknown kernel kind in trace");
    }
  }
  return b;
}

TimingReport benchmark(const std::function<double()>& run, int repetitions, int warmup) {
  if (repetitions < 1) throw InputError("benchmark: repetitions must be >= 1");
  ThreadCountGuard guard(1); // reported numbers are single-threaded
  using clock = std::chrono::steady_clock;

  for (int i = 0; i < warmup; ++i) run();

  std::vector<double> totals, fps;
  totals.reserve(static_cast<std::size_t>(repetitions));
  fps.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto t0 = clock::now();
    const double fp = run();
    const auto t1 = clock::now();
    totals.push_back(std::chrono::duration<double>(t1 - t0).count());
    fps.push_back(fp);
  }

  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };

  TimingReport r;
  std::tie(r.total_mean_s, r.total_std_s) = mean_std(totals);
  std::tie(r.fp_mean_s, r.fp_std_s) = mean_std(fps);
  r.repetitions = repetitions;
  return r;
}

ComparisonTable ComparisonTable::build(std::span<const MethodResult> results,
                                       const std::string& vanilla_name) {
  const MethodResult* vanilla = nullptr;
  for (const auto& r : results) {
    if (r.name == vanilla_name) vanilla = &r;
  }
  if (vanilla == nullptr) throw InputError("comparison table: vanilla row '" + vanilla_name + "' missing");

  auto per_node = [](double v, std::size_t nodes) {
    return nodes == 0 ? 0.0 : v / static_cast<double>(nodes);
  };
  auto ratio = [](double base, double v) { return v <= 0.0 ? 0.0 : base / v; };

  ComparisonTable t;
  for (const auto& r : results) {
    ComparisonRow row;
    row.method = r.name;
    row.acc = r.accuracy;
    row.mmacs = per_node(static_cast<double>(r.macs.total()), r.nodes) / 1e6;
    row.fp_mmacs = per_node(static_cast<double>(r.macs.fp()), r.nodes) / 1e6;
    row.time_ms = per_node(r.total_seconds * 1e3, r.nodes);
    row.fp_time_ms = per_node(r.fp_seconds * 1e3, r.nodes);

    ComparisonRow base;
    base.mmacs = per_node(static_cast<double>(vanilla->macs.total()), vanilla->nodes) / 1e6;
    base.fp_mmacs = per_node(static_cast<double>(vanilla->macs.fp()), vanilla->nodes) / 1e6;
    base.time_ms = per_node(vanilla->total_seconds * 1e3, vanilla->nodes);
    base.fp_time_ms = per_node(vanilla->fp_seconds * 1e3, vanilla->nodes);

    row.ratio_mmacs = ratio(base.mmacs, row.mmacs);
    row.ratio_fp_mmacs = ratio(base.fp_mmacs, row.fp_mmacs);
    row.ratio_time = ratio(base.time_ms, row.time_ms);
    row.ratio_fp_time = ratio(base.fp_time_ms, row.fp_time_ms);
    t.rows_.push_back(std::move(row));
  }
  return t;
}

std::string ComparisonTable::to_text() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %14s %14s %14s %14s\n", "method", "acc(%)", "mMACs", "FP mMACs",
                "time(ms)", "FP time(ms)");
  os << buf;
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof(buf), "%-16s %8.2f %8.3f (%3.0f) %8.3f (%3.0f) %8.3f (%3.0f) %8.3f (%3.0f)\n",
                  r.method.c_str(), r.acc * 100.0, r.mmacs, r.ratio_mmacs, r.fp_mmacs, r.ratio_fp_mmacs,
                  r.time_ms, r.ratio_time, r.fp_time_ms, r.ratio_fp_time);
    os << buf;
  }
  return os.str();
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "method,acc,mmacs,fp_mmacs,time_ms,fp_time_ms,ratio_time,ratio_fp\n";
  char buf[256];
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(), r.acc,
                  r.mmacs, r.fp_mmacs, r.time_ms, r.fp_time_ms, r.ratio_time, r.ratio_fp_time);
    os << buf;
  }
  return os.str();
}

} // namespace nai

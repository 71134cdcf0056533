#include <chrono>
#include <doctest.h>
#include <thread>

#include "nai/classifier.hpp"
#include "nai/errors.hpp"
#include "nai/metering.hpp"
#include "nai/propagation.hpp"
#include "testutil.hpp"

using namespace nai;

TEST_CASE("propagation MACs counting") {
  SUBCASE("two connected nodes, one hop, two features") {
    Graph g = build_graph(std::vector<Edge>{{0, 1}}, 2);
    Matrix x(2, 2);
    MacsTrace trace;
    propagate_hop(g, NormKind::symmetric(), x, &trace);
    MacsBreakdown b = meter_macs(trace);
    CHECK(b.propagation == 8); // (1+1)*2 per node, both nodes active
  }
  SUBCASE("classification counts in*out per node") {
    Rng rng(1);
    Classifier c = Classifier::init(4, 3, ClassifierSpec{}, rng);
    Matrix x(10, 4);
    MacsTrace trace;
    forward_logits(c, x, &trace);
    MacsBreakdown b = meter_macs(trace);
    CHECK(b.classification == 120);
  }
}

TEST_CASE("traced propagation equals the closed-form support sum") {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 10 + rng.bounded(40);
    Graph g = test::random_connected_graph(rng, n, 0.12);
    const std::size_t f = 3 + rng.bounded(6);
    Matrix x = test::random_features(rng, n, f);
    const int order = 1 + static_cast<int>(rng.bounded(4));

    std::vector<NodeId> batch;
    for (std::size_t i = 0; i < n; ++i)
      if (rng.bernoulli(0.3)) batch.push_back(static_cast<NodeId>(i));
    if (batch.empty()) batch.push_back(0);

    SupportLayers layers = layered_support(g, batch, order);
    const NormCoeffs coeffs = NormCoeffs::compute(g, NormKind::symmetric());

    MacsTrace trace;
    Matrix prev = x;
    Matrix cur(n, f);
    for (int l = 1; l <= order; ++l) {
      propagate_hop_into(g, coeffs, prev, layers.sets[static_cast<std::size_t>(l)], cur, &trace);
      std::swap(prev, cur);
    }

    std::uint64_t expected = 0;
    for (int l = 1; l <= order; ++l)
      for (NodeId i : layers.sets[static_cast<std::size_t>(l)])
        expected += static_cast<std::uint64_t>(g.degree(i) + 1) * f;

    CHECK(meter_macs(trace).propagation == expected);
  }
}

TEST_CASE("meter_macs rejects unknown kernel kinds") {
  MacsTrace trace;
  trace.add(static_cast<KernelKind>(250), 1);
  CHECK_THROWS_AS(meter_macs(trace), InputError);
}

TEST_CASE("breakdown totals") {
  MacsTrace trace;
  trace.add(KernelKind::StationaryState, 10);
  trace.add(KernelKind::Propagation, 100);
  trace.add(KernelKind::Distance, 5);
  trace.add(KernelKind::Classification, 20);
  trace.add(KernelKind::SummaryBuild, 1000);
  MacsBreakdown b = meter_macs(trace);
  CHECK(b.total() == 135); // the amortized build stays outside the total
  CHECK(b.fp() == 105);
  CHECK(b.summary_build == 1000);
}

TEST_CASE("benchmark") {
  SUBCASE("repetitions below one rejected") {
    CHECK_THROWS_AS(benchmark([] { return 0.0; }, 0), InputError);
  }
  SUBCASE("near-empty closure times near zero") {
    TimingReport r = benchmark([] { return 0.0; }, 5, 1);
    CHECK(r.total_mean_s < 5e-3);
    CHECK(r.repetitions == 5);
  }
  SUBCASE("sleep-like closure lands within twenty percent") {
    TimingReport r = benchmark(
        [] {
          std::this_thread::sleep_for(std::chrono::milliseconds(50));
          return 0.01;
        },
        3, 0);
    CHECK(r.total_mean_s >= 0.040);
    CHECK(r.total_mean_s <= 0.060);
    CHECK(r.fp_mean_s == doctest::Approx(0.01));
  }
}

TEST_CASE("comparison table") {
  SUBCASE("acceleration ratios divide vanilla by method") {
    MethodResult vanilla;
    vanilla.name = "vanilla";
    vanilla.accuracy = 0.80;
    vanilla.macs.propagation = 243'500'000;
    vanilla.macs.classification = 800'000;
    vanilla.total_seconds = 0.393;
    vanilla.fp_seconds = 0.3406;
    vanilla.nodes = 1;

    MethodResult nai;
    nai.name = "nai_1";
    nai.accuracy = 0.7997;
    nai.macs.propagation = 1'300'000;
    nai.macs.classification = 800'000;
    nai.total_seconds = 0.0184;
    nai.fp_seconds = 0.0115;
    nai.nodes = 1;

    const std::vector<MethodResult> rows{vanilla, nai};
    ComparisonTable t = ComparisonTable::build(rows, "vanilla");
    REQUIRE(t.rows().size() == 2);
    CHECK(t.rows()[0].ratio_fp_mmacs == doctest::Approx(1.0));
    CHECK(std::llround(t.rows()[1].ratio_fp_mmacs) == 187);
    CHECK(t.rows()[1].ratio_time == doctest::Approx(0.393 / 0.0184));
  }
  SUBCASE("a method equal to vanilla has unit ratios") {
    MethodResult vanilla;
    vanilla.name = "vanilla";
    vanilla.accuracy = 0.5;
    vanilla.macs.propagation = 1000;
    vanilla.total_seconds = 1.0;
    vanilla.fp_seconds = 0.5;
    vanilla.nodes = 10;
    MethodResult twin = vanilla;
    twin.name = "twin";
    const std::vector<MethodResult> rows{vanilla, twin};
    ComparisonTable t = ComparisonTable::build(rows, "vanilla");
    CHECK(t.rows()[1].ratio_mmacs == doctest::Approx(1.0));
    CHECK(t.rows()[1].ratio_time == doctest::Approx(1.0));
    CHECK(t.rows()[1].ratio_fp_time == doctest::Approx(1.0));
  }
  SUBCASE("missing vanilla row rejected") {
    MethodResult only;
    only.name = "nai";
    const std::vector<MethodResult> rows{only};
    CHECK_THROWS_AS(ComparisonTable::build(rows, "vanilla"), InputError);
  }
  SUBCASE("csv schema is stable") {
    MethodResult vanilla;
    vanilla.name = "vanilla";
    vanilla.nodes = 1;
    const std::vector<MethodResult> rows{vanilla};
    ComparisonTable t = ComparisonTable::build(rows, "vanilla");
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("method,acc,mmacs,fp_mmacs,time_ms,fp_time_ms,ratio_time,ratio_fp\n", 0) == 0);
  }
}

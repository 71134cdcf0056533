#include <cmath>
#include <doctest.h>

#include "nai/errors.hpp"
#include "nai/propagation.hpp"
#include "testutil.hpp"

using namespace nai;

namespace {
Graph p2() { return build_graph(std::vector<Edge>{{0, 1}}, 2); }
Graph k3() { return build_graph(std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}, 3); }
} // namespace

TEST_CASE("precompute_stack") {
  SUBCASE("p2 symmetric stack is idempotent after one hop") {
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    PropagatedStack s = PropagatedStack::compute(p2(), NormKind::symmetric(), x, 3, Backend::Sgc);
    for (int l = 1; l <= 3; ++l)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          CHECK(s.hop(l).at(i, j) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("concatenated backend widths grow with the order") {
    Rng rng(3);
    Graph g = test::random_graph(rng, 6, 0.4);
    Matrix x = test::random_features(rng, 6, 4);
    PropagatedStack s = PropagatedStack::compute(g, NormKind::symmetric(), x, 2, Backend::Sign);
    CHECK(s.order_input(2).cols() == 12);
    CHECK(s.order_input(1).cols() == 8);
    CHECK(backend_input_width(Backend::Sign, 2, 4) == 12);
  }
  SUBCASE("isolated node keeps its raw feature at every order") {
    Graph g = build_graph({}, 1);
    Matrix x = Matrix::from_rows({{2.0, -1.0, 0.5}});
    for (Backend b : {Backend::Sgc, Backend::S2gc}) {
      PropagatedStack s = PropagatedStack::compute(g, NormKind::symmetric(), x, 4, b);
      for (int l = 1; l <= 4; ++l)
        for (std::size_t j = 0; j < 3; ++j)
          CHECK(s.order_input(l).at(0, j) == doctest::Approx(x.at(0, j)).epsilon(1e-14));
    }
  }
  SUBCASE("k=0 and non-finite input rejected") {
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(PropagatedStack::compute(p2(), NormKind::symmetric(), x, 0, Backend::Sgc),
                    InputError);
    x.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(PropagatedStack::compute(p2(), NormKind::symmetric(), x, 1, Backend::Sgc),
                    InputError);
  }
  SUBCASE("averaged backend equals the arithmetic mean of hops") {
    Rng rng(4);
    Graph g = test::random_graph(rng, 20, 0.2);
    Matrix x = test::random_features(rng, 20, 6);
    PropagatedStack s = PropagatedStack::compute(g, NormKind::symmetric(), x, 4, Backend::S2gc);
    for (int l = 1; l <= 4; ++l) {
      Matrix mean(20, 6);
      for (int t = 1; t <= l; ++t)
        for (std::size_t i = 0; i < mean.flat().size(); ++i) mean.flat()[i] += s.hop(t).flat()[i];
      for (double& v : mean.flat()) v /= l;
      CHECK(test::max_abs_diff(mean, s.order_input(l)) <= 1e-10);
    }
  }
}

TEST_CASE("stationary summary and state") {
  SUBCASE("p2 symmetric") {
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    Graph g = p2();
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    CHECK(s.mass(0) == doctest::Approx(4.0));
    CHECK(s.weighted_sum(0)[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(s.weighted_sum(0)[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    Matrix st = s.state(0);
    CHECK(st.at(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(st.at(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("isolated node is its own limit") {
    Graph g = build_graph({}, 1);
    Matrix x = Matrix::from_rows({{3.0, -1.0}});
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    CHECK(s.mass(0) == doctest::Approx(1.0));
    Matrix st = s.state(0);
    CHECK(st.at(0, 0) == doctest::Approx(3.0));
    CHECK(st.at(0, 1) == doctest::Approx(-1.0));
  }
  SUBCASE("triangle with transition normalization") {
    Graph g = k3();
    Matrix x(3, 3);
    for (std::size_t j = 0; j < 3; ++j) x.at(j, j) = 1.0;
    StationarySummary s =
        StationarySummary::build(g, NormKind::transition(), x, connected_components(g));
    CHECK(s.mass(0) == doctest::Approx(9.0));
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.weighted_sum(0)[j] == doctest::Approx(1.0));
  }
  SUBCASE("triangle symmetric state is uniform") {
    Graph g = k3();
    Matrix x(3, 3);
    for (std::size_t j = 0; j < 3; ++j) x.at(j, j) = 1.0;
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    for (NodeId v = 0; v < 3; ++v) {
      Matrix st = s.state(v);
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(st.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
  }
  SUBCASE("unknown node rejected") {
    Graph g = p2();
    Matrix x(2, 1);
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    CHECK_THROWS_AS(s.state(5), InputError);
  }
}

TEST_CASE("stationary state matches the dense power iterate") {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 8 + rng.bounded(57);
    Graph g = test::random_connected_graph(rng, n, 0.15);
    Matrix x = test::random_features(rng, n, 8);
    for (double r : {0.0, 0.5, 1.0}) {
      const NormKind norm{r};
      Matrix a = test::dense_hop_operator(g, norm);
      Matrix limit = test::dense_power_apply(a, x, 200);
      StationarySummary s = StationarySummary::build(g, norm, x, connected_components(g));
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        Matrix st = s.state(static_cast<NodeId>(i));
        for (std::size_t j = 0; j < 8; ++j)
          worst = std::max(worst, std::abs(st.at(0, j) - limit.at(i, j)));
      }
      CHECK(worst <= 1e-4);
    }
  }
}

TEST_CASE("rank-1 operator equals the summary on small graphs") {
  Rng rng(22);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 4 + rng.bounded(29);
    Graph g = test::random_graph(rng, n, 0.2);
    Matrix x = test::random_features(rng, n, 5);
    const NormKind norm{0.5};
    const ComponentLabeling comps = connected_components(g);
    Matrix dense = matmul(test::dense_stationary_operator(g, norm, comps), x);
    StationarySummary s = StationarySummary::build(g, norm, x, comps);
    for (std::size_t i = 0; i < n; ++i) {
      Matrix st = s.state(static_cast<NodeId>(i));
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(std::abs(st.at(0, j) - dense.at(i, j)) <= 1e-10);
    }
  }
}

TEST_CASE("monotone smoothing toward the limit") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 8 + rng.bounded(57);
    Graph g = test::random_connected_graph(rng, n, 0.15);
    Matrix x = test::random_features(rng, n, 6);
    const NormKind norm{0.5};
    StationarySummary s = StationarySummary::build(g, norm, x, connected_components(g));

    Matrix hop1 = propagate_hop(g, norm, x);
    Matrix hop100 = hop1;
    for (int l = 1; l < 100; ++l) hop100 = propagate_hop(g, norm, hop100);

    for (std::size_t i = 0; i < n; ++i) {
      Matrix st = s.state(static_cast<NodeId>(i));
      const double d1 = smoothness_distance(hop1.row(i), st.row(0));
      const double d100 = smoothness_distance(hop100.row(i), st.row(0));
      CHECK(d100 <= 1e-6 * (d1 + 1e-12));
    }
  }
}

TEST_CASE("update_summary") {
  SUBCASE("adding an isolated node creates a singleton component") {
    Graph g = p2();
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    ExtendResult er = extend_graph(g, 1, {});
    Matrix x2 = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {7.0, -2.0}});
    s.apply_extension(er, x2);
    const int comp = s.component_of(2);
    CHECK(s.mass(comp) == doctest::Approx(1.0));
    Matrix st = s.state(2);
    CHECK(st.at(0, 0) == doctest::Approx(7.0));
    CHECK(st.at(0, 1) == doctest::Approx(-2.0));
  }
  SUBCASE("merging two singletons matches the from-scratch summary") {
    Graph g = build_graph({}, 2);
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    ExtendResult er = extend_graph(g, 0, std::vector<Edge>{{0, 1}});
    s.apply_extension(er, x);
    const int comp = s.component_of(0);
    CHECK(s.mass(comp) == doctest::Approx(4.0));
    CHECK(s.weighted_sum(comp)[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(s.weighted_sum(comp)[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("empty extension leaves the summary unchanged") {
    Graph g = p2();
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    ExtendResult er = extend_graph(g, 0, {});
    StationarySummary before = s;
    s.apply_extension(er, x);
    CHECK(s.mass(0) == before.mass(0));
    CHECK(s.state(0).at(0, 0) == before.state(0).at(0, 0));
  }
  SUBCASE("incremental summary tracks from-scratch over random extension chains") {
    Rng rng(31);
    for (int trial = 0; trial < 4; ++trial) {
      std::size_t n = 6 + rng.bounded(10);
      Graph g = test::random_graph(rng, n, 0.2);
      Matrix x = test::random_features(rng, n, 4);
      const NormKind norm{0.5};
      StationarySummary incremental =
          StationarySummary::build(g, norm, x, connected_components(g));
      ComponentLabeling comps = connected_components(g);

      for (int step = 0; step < 10; ++step) {
        const std::size_t add = rng.bounded(3);
        std::vector<Edge> new_edges;
        const std::size_t total = n + add;
        for (std::size_t t = 0; t < 1 + rng.bounded(4); ++t) {
          const NodeId a = static_cast<NodeId>(rng.bounded(total));
          const NodeId b = static_cast<NodeId>(rng.bounded(total));
          if (a != b) new_edges.emplace_back(a, b);
        }
        Matrix x2(total, 4);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < 4; ++j) x2.at(i, j) = x.at(i, j);
        for (std::size_t i = n; i < total; ++i)
          for (std::size_t j = 0; j < 4; ++j) x2.at(i, j) = rng.uniform(-1.0, 1.0);

        ExtendResult er = extend_graph(g, add, new_edges, comps);
        incremental.apply_extension(er, x2);
        g = er.graph;
        comps = er.comps;
        x = x2;
        n = total;

        StationarySummary scratch = StationarySummary::build(g, norm, x, comps);
        for (std::size_t i = 0; i < n; ++i) {
          Matrix a = incremental.state(static_cast<NodeId>(i));
          Matrix b = scratch.state(static_cast<NodeId>(i));
          for (std::size_t j = 0; j < 4; ++j) {
            const double denom = std::max(1e-12, std::abs(b.at(0, j)));
            CHECK(std::abs(a.at(0, j) - b.at(0, j)) / denom <= 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("smoothness_distance") {
  SUBCASE("identical rows have distance zero") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK(smoothness_distance(a, a) == 0.0);
  }
  SUBCASE("unit basis rows") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
    CHECK(smoothness_distance(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  }
  SUBCASE("p2 reaches its limit after one hop") {
    Graph g = p2();
    Matrix x = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    Matrix hop = propagate_hop(g, NormKind::symmetric(), x);
    StationarySummary s =
        StationarySummary::build(g, NormKind::symmetric(), x, connected_components(g));
    Matrix st = s.state(0);
    CHECK(smoothness_distance(hop.row(0), st.row(0)) <= 1e-15);
  }
  SUBCASE("length mismatch rejected") {
    const std::vector<double> a{1.0}, b{1.0, 2.0};
    CHECK_THROWS_AS(smoothness_distance(a, b), InputError);
  }
  SUBCASE("row-normalized mode ignores scale") {
    const std::vector<double> a{2.0, 0.0}, b{10.0, 0.0};
    CHECK(smoothness_distance(a, b, true) == doctest::Approx(0.0));
    CHECK(smoothness_distance(a, b, false) == doctest::Approx(8.0));
  }
}

TEST_CASE("layered_support") {
  SUBCASE("path rings") {
    Graph g = build_graph(std::vector<Edge>{{0, 1}, {1, 2}}, 3);
    const std::vector<NodeId> batch{0};
    SupportLayers s = layered_support(g, batch, 2);
    CHECK(s.sets[2] == std::vector<NodeId>{0});
    CHECK(s.sets[1] == std::vector<NodeId>{0, 1});
    CHECK(s.sets[0] == std::vector<NodeId>{0, 1, 2});
  }
  SUBCASE("isolated node never grows") {
    Graph g = build_graph({}, 1);
    const std::vector<NodeId> batch{0};
    SupportLayers s = layered_support(g, batch, 5);
    for (const auto& layer : s.sets) CHECK(layer == std::vector<NodeId>{0});
  }
  SUBCASE("triangle saturates after a hop") {
    Graph g = k3();
    const std::vector<NodeId> batch{0};
    SupportLayers s = layered_support(g, batch, 1);
    CHECK(s.sets[1] == std::vector<NodeId>{0});
    CHECK(s.sets[0] == std::vector<NodeId>{0, 1, 2});
  }
  SUBCASE("empty batch rejected") {
    Graph g = k3();
    CHECK_THROWS_AS(layered_support(g, {}, 1), InputError);
  }
}

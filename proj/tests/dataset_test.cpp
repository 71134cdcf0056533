#include <doctest.h>
#include <filesystem>

#include "nai/dataset.hpp"
#include "nai/errors.hpp"
#include "testutil.hpp"

using namespace nai;

namespace {

DatasetBundle minimal_bundle() {
  DatasetBundle ds;
  ds.graph = build_graph(std::vector<Edge>{{0, 1}}, 2);
  ds.features = Matrix::from_rows({{0.25, -1.5}, {3.0, 0.125}});
  ds.labels = {0, 1};
  ds.split.labeled_train = {0};
  ds.split.test = {1};
  ds.class_count = 2;
  ds.name = "minimal";
  return ds;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("dataset round trip") {
  TempDir dir("nai_ds_roundtrip");
  DatasetBundle ds = minimal_bundle();
  write_dataset(ds, dir.path.string());
  DatasetBundle back = load_dataset_dir(dir.path.string());

  CHECK(back.graph.csr_offsets() == ds.graph.csr_offsets());
  CHECK(back.graph.csr_targets() == ds.graph.csr_targets());
  CHECK(back.features == ds.features); // float32 storage, bit-exact
  CHECK(back.labels == ds.labels);
  CHECK(back.split.labeled_train == ds.split.labeled_train);
  CHECK(back.split.test == ds.split.test);
  CHECK(back.class_count == 2);
}

TEST_CASE("sentinel labels survive the round trip") {
  TempDir dir("nai_ds_sentinel");
  DatasetBundle ds = minimal_bundle();
  ds.graph = build_graph(std::vector<Edge>{{0, 1}, {1, 2}}, 3);
  ds.features = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}});
  ds.labels = {0, kUnlabeled, 1};
  ds.split.labeled_train = {0};
  ds.split.unlabeled_train = {1};
  ds.split.test = {2};
  write_dataset(ds, dir.path.string());
  DatasetBundle back = load_dataset_dir(dir.path.string());
  CHECK(back.labels == std::vector<int>{0, kUnlabeled, 1});
}

TEST_CASE("shape mismatch errors name both counts") {
  TempDir dir("nai_ds_mismatch");
  DatasetBundle ds = minimal_bundle();
  write_dataset(ds, dir.path.string());
  // three feature rows against a two-node dataset
  Matrix wide = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  write_feature_file(wide, (dir.path / "features.bin").string());
  CHECK_THROWS_WITH_AS(load_dataset_dir(dir.path.string()),
                       doctest::Contains("3"), InputError);
  try {
    load_dataset_dir(dir.path.string());
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2") != std::string::npos);
  }
}

TEST_CASE("zero-width features rejected") {
  TempDir dir("nai_ds_zerof");
  DatasetBundle ds = minimal_bundle();
  ds.features = Matrix(2, 0);
  CHECK_THROWS_AS(write_dataset(ds, dir.path.string()), InputError);
}

TEST_CASE("sbm generation") {
  SUBCASE("deterministic per seed") {
    SbmConfig cfg;
    cfg.n = 200;
    cfg.blocks = 4;
    cfg.p_in = 0.05;
    cfg.p_out = 0.01;
    cfg.feature_dim = 8;
    DatasetBundle a = generate_sbm(cfg, 42);
    DatasetBundle b = generate_sbm(cfg, 42);
    CHECK(a.graph.csr_offsets() == b.graph.csr_offsets());
    CHECK(a.graph.csr_targets() == b.graph.csr_targets());
    CHECK(a.features == b.features);
    CHECK(a.split.labeled_train == b.split.labeled_train);
    CHECK(a.split.test == b.split.test);

    DatasetBundle c = generate_sbm(cfg, 43);
    CHECK(a.graph.csr_targets() != c.graph.csr_targets());
  }
  SUBCASE("deterministic regime splits into clean blocks") {
    SbmConfig cfg;
    cfg.n = 6;
    cfg.blocks = 2;
    cfg.p_in = 1.0;
    cfg.p_out = 0.0;
    cfg.feature_dim = 4;
    cfg.frac_labeled = 0.4;
    cfg.frac_unlabeled = 0.0;
    cfg.frac_validation = 0.3;
    DatasetBundle ds = generate_sbm(cfg, 7);
    ComponentLabeling comps = connected_components(ds.graph);
    CHECK(comps.count() == 2);
    CHECK(comps.comp_nodes[0] == 3);
    CHECK(comps.comp_edges[0] == 3); // a 3-clique per block
  }
  SUBCASE("split sections stay disjoint through write/load") {
    TempDir dir("nai_ds_sbm");
    SbmConfig cfg;
    cfg.n = 120;
    cfg.blocks = 3;
    cfg.p_in = 0.1;
    cfg.p_out = 0.01;
    cfg.feature_dim = 6;
    DatasetBundle ds = generate_sbm(cfg, 3);
    write_dataset(ds, dir.path.string());
    DatasetBundle back = load_dataset_dir(dir.path.string());
    back.split.validate(back.graph.node_count()); // throws on overlap
    CHECK(back.split.labeled_train.size() == ds.split.labeled_train.size());
    CHECK(back.features == ds.features);
  }
  SUBCASE("invalid fractions rejected") {
    SbmConfig cfg;
    cfg.frac_labeled = 0.6;
    cfg.frac_unlabeled = 0.5;
    cfg.frac_validation = 0.2;
    CHECK_THROWS_AS(generate_sbm(cfg, 1), ConfigError);
  }
}

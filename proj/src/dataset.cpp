#include "nai/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nai/errors.hpp"
#include "nai/rng.hpp"

namespace nai {

namespace {
constexpr std::uint32_t kFeatureVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
} // namespace

void DatasetBundle::validate() const {
  if (features.rows() != graph.node_count())
    throw InputError("dataset: feature rows " + std::to_string(features.rows()) +
                     " != node count " + std::to_string(graph.node_count()));
  if (features.cols() == 0) throw InputError("dataset: zero feature dimension");
  if (labels.size() != graph.node_count()) throw InputError("dataset: one label per node required");
  if (class_count < 2) throw InputError("dataset: need at least two classes");
  if (!features.all_finite()) throw InputError("dataset: non-finite feature values");
  split.validate(graph.node_count());
  auto check_labeled = [&](const std::vector<NodeId>& ids, const char* section) {
    for (NodeId v : ids) {
      const int y = labels[static_cast<std::size_t>(v)];
      if (y == kUnlabeled)
        throw InputError(std::string("dataset: unlabeled node in ") + section);
      if (y < 0 || y >= class_count) throw InputError("dataset: label out of range");
    }
  };
  check_labeled(split.labeled_train, "labeled_train");
  check_labeled(split.validation, "validation");
  check_labeled(split.test, "test");
}

void SbmConfig::validate() const {
  if (n < 2) throw ConfigError("sbm: need at least two nodes");
  if (blocks < 2) throw ConfigError("sbm: need at least two blocks");
  if (static_cast<std::size_t>(blocks) > n) throw ConfigError("sbm: more blocks than nodes");
  if (!(p_out >= 0.0 && p_out <= p_in && p_in <= 1.0))
    throw ConfigError("sbm: need 0 <= p_out <= p_in <= 1");
  if (feature_dim < static_cast<std::size_t>(blocks))
    throw ConfigError("sbm: feature_dim must be >= blocks for the rotated means");
  if (sigma <= 0.0) throw ConfigError("sbm: sigma must be positive");
  const double fsum = frac_labeled + frac_unlabeled + frac_validation;
  if (frac_labeled <= 0.0 || frac_unlabeled < 0.0 || frac_validation < 0.0 || fsum > 1.0)
    throw ConfigError("sbm: split fractions (frac_labeled+frac_unlabeled+frac_validation) must be "
                      "positive and sum to <= 1");
}

DatasetBundle generate_sbm(const SbmConfig& cfg, std::uint64_t seed) {
  cfg.validate();

  DatasetBundle ds;
  ds.name = "sbm";
  ds.class_count = cfg.blocks;

  // Contiguous planted blocks.
  const std::size_t per_block = cfg.n / static_cast<std::size_t>(cfg.blocks);
  ds.labels.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i)
    ds.labels[i] = std::min<int>(cfg.blocks - 1, static_cast<int>(i / per_block));

  // Edges: independent draws per unordered pair.
  Rng edge_rng(Rng::mix(seed, 0xedce5));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (std::size_t j = i + 1; j < cfg.n; ++j) {
      const double p = ds.labels[i] == ds.labels[j] ? cfg.p_in : cfg.p_out;
      if (p > 0.0 && edge_rng.bernoulli(p))
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  ds.graph = build_graph(edges, cfg.n);

  // Class means: mu times the columns of a seeded orthonormal f x blocks
  // frame (Gram-Schmidt over Gaussian draws).
  Rng feat_rng(Rng::mix(seed, 0xfea7));
  const std::size_t f = cfg.feature_dim;
  std::vector<std::vector<double>> frame(static_cast<std::size_t>(cfg.blocks), std::vector<double>(f));
  for (auto& col : frame) {
    for (double& v : col) v = feat_rng.normal();
  }
  for (std::size_t c = 0; c < frame.size(); ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t j = 0; j < f; ++j) dot += frame[c][j] * frame[prev][j];
      for (std::size_t j = 0; j < f; ++j) frame[c][j] -= dot * frame[prev][j];
    }
    double norm = 0.0;
    for (double v : frame[c]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw NumericError("sbm: degenerate rotation frame");
    for (double& v : frame[c]) v /= norm;
  }

  ds.features = Matrix(cfg.n, f);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const auto& mean = frame[static_cast<std::size_t>(ds.labels[i])];
    auto row = ds.features.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      const double v = cfg.mu * mean[j] + feat_rng.normal(0.0, cfg.sigma);
      row[j] = static_cast<double>(static_cast<float>(v)); // snap to storage precision
    }
  }

  // Stratified split per class: labeled / unlabeled / validation / test.
  Rng split_rng(Rng::mix(seed, 0x5b117));
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(cfg.blocks));
  for (std::size_t i = 0; i < cfg.n; ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(static_cast<NodeId>(i));
  for (auto& members : by_class) {
    split_rng.shuffle(members);
    const std::size_t n_lab = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                           std::floor(cfg.frac_labeled * members.size())));
    const std::size_t n_unl = static_cast<std::size_t>(std::floor(cfg.frac_unlabeled * members.size()));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.frac_validation * members.size()));
    std::size_t idx = 0;
    for (std::size_t t = 0; t < n_lab && idx < members.size(); ++t)
      ds.split.labeled_train.push_back(members[idx++]);
    for (std::size_t t = 0; t < n_unl && idx < members.size(); ++t)
      ds.split.unlabeled_train.push_back(members[idx++]);
    for (std::size_t t = 0; t < n_val && idx < members.size(); ++t)
      ds.split.validation.push_back(members[idx++]);
    while (idx < members.size()) ds.split.test.push_back(members[idx++]);
  }
  auto sort_ids = [](std::vector<NodeId>& v) { std::sort(v.begin(), v.end()); };
  sort_ids(ds.split.labeled_train);
  sort_ids(ds.split.unlabeled_train);
  sort_ids(ds.split.validation);
  sort_ids(ds.split.test);

  ds.validate();
  return ds;
}

DatasetBundle generate_sbm(const SbmConfig& cfg) { return generate_sbm(cfg, cfg.seed); }

Matrix read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAIF", 4) != 0) throw IoError("bad feature file magic: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kFeatureVersion)
    throw IoError("unsupported feature file version " + std::to_string(version));
  const std::uint64_t n = get_u64(in);
  const std::uint64_t f = get_u64(in);
  if (!in || f == 0) throw IoError("feature file with empty shape: " + path);

  Matrix m(n, f);
  std::vector<float> rowbuf(f);
  for (std::uint64_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(rowbuf.data()), static_cast<std::streamsize>(f * sizeof(float)));
    if (!in) throw IoError("truncated feature file: " + path);
    auto dst = m.row(static_cast<std::size_t>(i));
    for (std::uint64_t j = 0; j < f; ++j) dst[j] = static_cast<double>(rowbuf[j]);
  }
  return m;
}

void write_feature_file(const Matrix& features, const std::string& path) {
  if (features.cols() == 0) throw InputError("write features: zero feature dimension");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file: " + path);
  out.write("NAIF", 4);
  put_u32(out, kFeatureVersion);
  put_u64(out, features.rows());
  put_u64(out, features.cols());
  std::vector<float> rowbuf(features.cols());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto src = features.row(i);
    for (std::size_t j = 0; j < features.cols(); ++j) rowbuf[j] = static_cast<float>(src[j]);
    out.write(reinterpret_cast<const char*>(rowbuf.data()),
              static_cast<std::streamsize>(rowbuf.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed while writing feature file: " + path);
}

namespace {

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    labels.push_back(std::stoi(line));
  }
  return labels;
}

InductiveSplit read_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file: " + path);
  InductiveSplit split;
  std::vector<NodeId>* section = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string tok = line.substr(first, last - first + 1);
    if (tok == "[labeled_train]") {
      section = &split.labeled_train;
    } else if (tok == "[unlabeled_train]") {
      section = &split.unlabeled_train;
    } else if (tok == "[validation]") {
      section = &split.validation;
    } else if (tok == "[test]") {
      section = &split.test;
    } else if (tok.front() == '[') {
      throw InputError("split file " + path + ": unknown section " + tok);
    } else {
      if (section == nullptr)
        throw InputError("split file " + path + ": id before any section at line " +
                         std::to_string(lineno));
      section->push_back(static_cast<NodeId>(std::stol(tok)));
    }
  }
  return split;
}

} // namespace

DatasetBundle load_dataset(const std::string& edge_path, const std::string& feature_path,
                           const std::string& label_path, const std::string& split_path) {
  DatasetBundle ds;
  ds.labels = read_labels(label_path);
  const std::size_t n = ds.labels.size();
  if (n == 0) throw InputError("dataset: empty label file " + label_path);

  ds.features = read_feature_file(feature_path);
  if (ds.features.rows() != n)
    throw InputError("dataset: feature rows " + std::to_string(ds.features.rows()) +
                     " != label count " + std::to_string(n));

  const std::vector<Edge> edges = read_edge_list(edge_path);
  ds.graph = build_graph(edges, n);
  ds.split = read_split(split_path);

  int max_label = kUnlabeled;
  for (int y : ds.labels) {
    if (y < kUnlabeled) throw InputError("dataset: invalid class id " + std::to_string(y));
    max_label = std::max(max_label, y);
  }
  ds.class_count = max_label + 1;
  ds.name = std::filesystem::path(edge_path).parent_path().filename().string();
  ds.validate();
  return ds;
}

DatasetBundle load_dataset_dir(const std::string& dir) {
  return load_dataset(dir + "/edges.txt", dir + "/features.bin", dir + "/labels.txt",
                      dir + "/split.txt");
}

void write_dataset(const DatasetBundle& bundle, const std::string& dir) {
  bundle.validate();
  std::filesystem::create_directories(dir);
  write_edge_list(bundle.graph, dir + "/edges.txt");
  write_feature_file(bundle.features, dir + "/features.bin");

  std::ofstream labels(dir + "/labels.txt");
  if (!labels) throw IoError("cannot write labels in " + dir);
  for (int y : bundle.labels) labels << y << '\n';
  if (!labels) throw IoError("failed while writing labels in " + dir);

  std::ofstream split(dir + "/split.txt");
  if (!split) throw IoError("cannot write split in " + dir);
  auto section = [&](const char* name, const std::vector<NodeId>& ids) {
    split << '[' << name << "]\n";
    for (NodeId v : ids) split << v << '\n';
  };
  section("labeled_train", bundle.split.labeled_train);
  section("unlabeled_train", bundle.split.unlabeled_train);
  section("validation", bundle.split.validation);
  section("test", bundle.split.test);
  if (!split) throw IoError("failed while writing split in " + dir);
}

} // namespace nai

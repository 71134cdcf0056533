#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nai/graph.hpp"
#include "nai/matrix.hpp"

namespace nai {

constexpr int kUnlabeled = -1;

struct DatasetBundle {
  Graph graph;
  Matrix features;         // n x f, widened from float32 storage
  std::vector<int> labels; // class id per node, -1 for unlabeled
  InductiveSplit split;
  int class_count = 0;
  std::string name;

  void validate() const;
};

struct SbmConfig {
  std::size_t n = 4000;
  int blocks = 4;
  double p_in = 0.02;
  double p_out = 0.002;
  std::size_t feature_dim = 32;
  double mu = 1.0;    // class-mean separation
  double sigma = 3.0; // per-coordinate feature noise
  double frac_labeled = 0.05;
  double frac_unlabeled = 0.50;
  double frac_validation = 0.20; // remainder is the test section
  std::uint64_t seed = 1;

  void validate() const;
};

/// Planted-partition graph with class-conditional Gaussian features
/// (means mu * R e_class for a fixed seeded orthonormal R) and a stratified
/// split. Deterministic per seed; feature values are snapped to float32
/// precision so a write/load round trip is bit-exact.
DatasetBundle generate_sbm(const SbmConfig& cfg, std::uint64_t seed);
DatasetBundle generate_sbm(const SbmConfig& cfg);

// On-disk layout inside a dataset directory:
//   edges.txt    — "u v" per line, '#' comments
//   features.bin — "NAIF", u32 version, u64 n, u64 f, float32 row-major LE
//   labels.txt   — one decimal class id per line, -1 for unlabeled
//   split.txt    — sections [labeled_train] [unlabeled_train] [validation]
//                  [test], one node id per line
DatasetBundle load_dataset(const std::string& edge_path, const std::string& feature_path,
                           const std::string& label_path, const std::string& split_path);
DatasetBundle load_dataset_dir(const std::string& dir);

void write_dataset(const DatasetBundle& bundle, const std::string& dir);

Matrix read_feature_file(const std::string& path);
void write_feature_file(const Matrix& features, const std::string& path);

} // namespace nai

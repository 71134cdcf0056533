#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nai/classifier.hpp"
#include "nai/distill.hpp"

namespace nai {

// Classifier checkpoint ("NAIC"): magic, u32 version, u32 kind tag
// (0 linear, 1 mlp+relu, 2 mlp+tanh, 3 mlp+sigmoid), u32 layer count, then
// per layer u64 rows, u64 cols, float64 weights row-major, float64 biases,
// followed by u32 propagation order and u32 backend tag. All fields are
// little-endian.
void save_classifier(const Classifier& c, const std::string& path);
Classifier load_classifier(const std::string& path);

struct BankManifest {
  Backend backend = Backend::Sgc;
  int k = 0;
  int r_ens = 2;
  double temperature = 1.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double r_coef = 0.5;
  AttentionScorer scorer;
  std::map<int, double> val_acc;
};

/// Bank directory: manifest.txt (key = value lines) plus one
/// classifier_<order>.naic file per present order.
void save_bank(const ClassifierBank& bank, const BankManifest& meta, const std::string& dir);

struct LoadedBank {
  ClassifierBank bank;
  BankManifest meta;
};

LoadedBank load_bank(const std::string& dir);

} // namespace nai

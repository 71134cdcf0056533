#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nai/matrix.hpp"
#include "nai/metering.hpp"
#include "nai/propagation.hpp"
#include "nai/rng.hpp"

namespace nai {

enum class ClassifierKind : std::uint32_t { Linear = 0, Mlp = 1 };
enum class Activation : std::uint32_t { Relu = 0, Tanh = 1, Sigmoid = 2 };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::Linear;
  std::vector<std::size_t> hidden; // ignored for Linear
  Activation activation = Activation::Relu;
};

/// Feed-forward classification head. Layer t maps widths[t] -> widths[t+1]
/// with weights W_t (in x out, row-major) and bias b_t. Parameters are
/// exclusively owned while training and immutable afterwards.
class Classifier {
public:
  struct Layer {
    Matrix weight; // in x out
    Matrix bias;   // 1 x out
  };

  Classifier() = default;

  /// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases.
  static Classifier init(std::size_t input_width, std::size_t classes, const ClassifierSpec& spec,
                         Rng& rng);

  bool empty() const { return layers_.empty(); }
  std::size_t input_width() const { return layers_.empty() ? 0 : layers_.front().weight.rows(); }
  std::size_t output_width() const { return layers_.empty() ? 0 : layers_.back().weight.cols(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers_mut() { return layers_; }
  ClassifierKind kind() const { return kind_; }
  Activation activation() const { return activation_; }

  /// MACs per classified row: sum over layers of in*out.
  std::uint64_t macs_per_row() const;

  std::size_t param_count() const;
  void flatten_into(std::span<double> out) const;
  void load_flat(std::span<const double> flat);
  std::vector<double> flatten() const;

  // Metadata recorded in checkpoints.
  int trained_order = 0;
  Backend trained_backend = Backend::Sgc;

  bool operator==(const Classifier&) const;

private:
  ClassifierKind kind_ = ClassifierKind::Linear;
  Activation activation_ = Activation::Relu;
  std::vector<Layer> layers_;
};

/// Forward pass without gradients. Width mismatch raises an input error.
Matrix forward_logits(const Classifier& c, const Matrix& rows, MacsTrace* trace = nullptr);

/// softmax(z / T) row by row, max-stabilized; entries sum to 1.
Matrix tempered_softmax(const Matrix& logits, double temperature);
void tempered_softmax_row(std::span<const double> logits, double temperature, std::span<double> out);

/// -(1/|subset|) sum over subset of log p[label], logs clamped at 1e-12.
/// `labels` holds a class id per probs row.
double hard_ce(const Matrix& probs, std::span<const int> labels, std::span<const int> subset);

/// Fraction of subset rows whose argmax matches the label.
double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const int> subset);

int argmax_row(std::span<const double> row);

} // namespace nai

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nai/matrix.hpp"

namespace nai::ad {

// Minimal reverse-mode tape over dense matrices. Nodes are created in
// topological order; backward() replays them in reverse. Every loss in the
// training stack is certified against central finite differences, so new
// ops must come with a backward rule covered by that harness.

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Targets for the fused softmax cross-entropy op. Exactly one source is
/// set: integer class labels, a frozen probability matrix, or a tape
/// variable carrying probabilities (gradients then flow into the target).
struct CeTarget {
  std::span<const int> labels;
  const Matrix* probs = nullptr;
  Var probs_var;
};

class Tape {
public:
  Var leaf(Matrix value);
  Var constant(Matrix value) { return leaf(std::move(value)); }

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].val; }
  const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  Var matmul(Var a, Var b);
  /// Adds a 1-row bias to every row of a.
  Var add_row_broadcast(Var a, Var bias);
  Var relu(Var a);
  Var tanh_act(Var a);
  Var sigmoid(Var a);
  /// Row-wise softmax(a / temperature), max-stabilized.
  Var softmax_rows(Var a, double temperature);
  /// Elementwise product with a fixed mask (dropout with inverted scaling).
  Var mask(Var a, const Matrix& mask);
  /// Columns side by side; each input must be n x 1.
  Var concat_cols(std::span<const Var> cols);
  /// out = sum_l w[:, l] * ys[l]; w is n x r, each ys[l] is n x c.
  Var weighted_mix(Var w, std::span<const Var> ys);

  /// loss = -scale * sum over `rows` of target . log softmax(logits/T).
  /// Logs are clamped at 1e-12. Returns a 1x1 scalar.
  Var cross_entropy(Var logits, double temperature, const CeTarget& target,
                    std::span<const int> rows, double scale);

  /// Scalar combination sum_i coeff_i * term_i of 1x1 vars.
  Var add_scaled(std::span<const std::pair<double, Var>> terms);

  void backward(Var root);

private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void(Tape&, int)> back; // null for leaves
  };

  Var push(Matrix val, std::function<void(Tape&, int)> back);
  Matrix& grad_mut(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  std::vector<Node> nodes_;
};

} // namespace nai::ad

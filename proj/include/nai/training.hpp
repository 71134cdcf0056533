#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nai/classifier.hpp"
#include "nai/graph.hpp"
#include "nai/matrix.hpp"
#include "nai/propagation.hpp"

namespace nai {

struct TrainConfig {
  int epochs = 100;
  double lr = 0.1;
  double weight_decay = 0.0;
  double dropout = 0.0; // on classifier inputs and hidden layers, inverted scaling
  int batch_size = 0;   // 0 = full batch
  std::uint64_t seed = 1;
  ClassifierSpec classifier;

  void validate() const;
};

/// Held-out rows (already backend-transformed) with labels, used for
/// per-epoch validation accuracy and best-epoch selection.
struct EvalRows {
  Matrix inputs;
  std::vector<int> labels;

  bool empty() const { return labels.empty(); }
};

/// One supervised objective over a fixed row universe:
///   (1-lambda) * hard CE over `hard_rows`  +  lambda * T^2 * soft CE
/// against `teacher_probs` over all rows. teacher_probs == nullptr (or
/// lambda == 0) reduces to plain hard-CE training on exactly the same
/// code path, so the degenerate case is byte-identical.
struct SupervisedTask {
  const Matrix* inputs = nullptr;        // training rows
  std::span<const int> labels;           // one entry per input row
  std::vector<int> hard_rows;            // row positions carrying label loss
  const Matrix* teacher_probs = nullptr; // tempered teacher rows, aligned with inputs
  double lambda = 0.0;
  double temperature = 1.0;
  int class_count = 0;
};

struct TrainResult {
  Classifier classifier;
  std::vector<double> train_acc;
  std::vector<double> val_acc;
  double best_val = -1.0; // -1 when no holdout was given
};

/// Loss + gradient of the supervised objective at `flat` parameters
/// (layout per Classifier::flatten). `step_rows` selects the rows of this
/// step; `masks` optionally carries one dropout mask per layer input
/// (element 0 masks the gathered features). Returns the loss.
double supervised_loss_grad(const Classifier& shape, std::span<const double> flat,
                            const SupervisedTask& task, std::span<const int> step_rows,
                            const std::vector<Matrix>* masks, std::span<double> grad_out);

/// Full training loop: Adam, deterministic seeding, optional mini-batching,
/// best-validation-epoch selection when a holdout is present.
TrainResult train_supervised(const SupervisedTask& task, const TrainConfig& cfg,
                             const EvalRows* holdout);

/// Hard-CE training of the order-l classifier on the stack's order-l inputs
/// over split.labeled_train; shared by train_base (l = k) and the
/// lambda == 0 distillation path so the degenerate case is byte-identical.
TrainResult train_order(const PropagatedStack& stack, int l, std::span<const int> labels,
                        const InductiveSplit& split, const TrainConfig& cfg, int class_count,
                        const EvalRows* holdout = nullptr);

/// Trains the top-order classifier on the stack's order-k inputs with hard
/// CE over split.labeled_train. Validation accuracy comes from `holdout`
/// when given, otherwise from split.validation rows of the stack itself.
TrainResult train_base(const PropagatedStack& stack, std::span<const int> labels,
                       const InductiveSplit& split, const TrainConfig& cfg, int class_count,
                       const EvalRows* holdout = nullptr);

struct GradProblem {
  std::function<double(std::span<const double>)> loss;
  std::function<void(std::span<const double>, std::span<double>)> grad;
};

/// Central finite differences with step 1e-5 on `probes` random coordinates;
/// returns max over probes of |analytic - numeric| / max(1e-8, |numeric|).
double gradient_check(const GradProblem& problem, std::span<const double> params, int probes,
                      std::uint64_t seed);

/// Per-student seed used by the distillation phases, exposed so independent
/// retraining can reproduce a student bit-for-bit.
std::uint64_t student_seed(std::uint64_t base_seed, int order);

} // namespace nai

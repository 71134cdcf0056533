#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nai/classifier.hpp"
#include "nai/training.hpp"

namespace nai {

/// Learned attention over the top classifiers: member scores are
/// activation(probs . s) with s sized to the class count, softmax-normalized
/// across members. s starts at zero, which makes the attention exactly
/// uniform.
struct AttentionScorer {
  std::vector<double> s;
  Activation activation = Activation::Tanh;

  static AttentionScorer zeros(std::size_t class_count, Activation act = Activation::Tanh);
};

struct DistillConfig {
  double temperature = 1.2; // searched in [1, 2] by convention
  double lambda = 0.5;      // balance between hard and distillation losses
  int r_ens = 2;            // ensemble size, in [2, k]
  TrainConfig offline;      // per-student loop; effective seed is student_seed(seed, l)
  TrainConfig online;       // joint loop over all students + scorer
  Activation scorer_activation = Activation::Tanh;
  bool mix_logits = false;       // mix pre-softmax logits in the ensemble
  bool stop_teacher_grad = false; // freeze ensemble members in the online phase

  void validate(int k) const;
};

/// One classifier per propagation order 1..k, sharing a backend. Orders may
/// be missing before distillation completes.
class ClassifierBank {
public:
  ClassifierBank() = default;
  ClassifierBank(Backend backend, int k);

  Backend backend() const { return backend_; }
  int order() const { return k_; }
  bool has_order(int l) const;
  bool complete() const;

  const Classifier& classifier(int l) const;
  void set_classifier(int l, Classifier clf, double val_acc = -1.0);
  double val_acc(int l) const;

private:
  Backend backend_ = Backend::Sgc;
  int k_ = 0;
  std::vector<std::optional<Classifier>> by_order_; // index l-1
  std::vector<double> val_acc_;
};

/// -(1/|subset|) sum of teacher_probs . log student_probs over the subset.
double soft_ce(const Matrix& student_probs, const Matrix& teacher_probs,
               std::span<const int> subset);

struct EnsembleOutput {
  Matrix teacher_probs; // tempered ensemble prediction
  Matrix mixed_logits;  // pre-temperature ensemble logits
  Matrix weights;       // attention weights, rows sum to 1
};

/// Ensemble teacher over the top members (lowest order first). By default
/// the members' probability rows are mixed and re-normalized with another
/// softmax; with `mix_logits` the pre-softmax logits are mixed instead and
/// `member_logits` must be supplied.
EnsembleOutput ensemble_teacher(std::span<const Matrix> member_probs, const AttentionScorer& scorer,
                                double temperature, bool mix_logits = false,
                                std::span<const Matrix> member_logits = {});

// Flat layout of the online phase: classifiers for orders 1..k in flatten
// order, then the scorer vector.
std::size_t online_param_count(const ClassifierBank& bank, std::size_t class_count);
void flatten_online(const ClassifierBank& bank, const AttentionScorer& scorer, std::span<double> out);
void load_online(std::span<const double> flat, ClassifierBank& bank, AttentionScorer& scorer);

struct OnlineLossSpec {
  const ClassifierBank* bank = nullptr;
  const AttentionScorer* scorer = nullptr;       // provides length/activation
  std::vector<const Matrix*> inputs_by_order;     // index l-1, rows = train universe
  std::span<const int> labels;                    // per row
  std::vector<int> hard_rows;                     // labeled row positions
  int class_count = 0;
  double lambda = 0.5;
  double temperature = 1.2;
  int r_ens = 2;
  bool mix_logits = false;
  bool stop_teacher_grad = false;
  // optional per-student dropout masks: [l-1][layer] (element 0 = inputs)
  const std::vector<std::vector<Matrix>>* dropout_masks = nullptr;
};

/// Loss + gradient of the joint online objective: for every student order
/// l < k, (1-lambda) * hard CE + lambda * T^2 * soft CE against the tempered
/// ensemble prediction. Gradients flow into students, the scorer, and the
/// ensemble members (unless stop_teacher_grad).
double online_loss_grad(const OnlineLossSpec& spec, std::span<const double> flat,
                        std::span<double> grad_out);

/// Trains orders 1..k-1 against the frozen top-order teacher's tempered
/// outputs and installs all k classifiers in the returned bank. With
/// lambda == 0 each student trains on exactly the plain hard-CE path.
ClassifierBank offline_distill(const Classifier& teacher, const PropagatedStack& stack,
                               std::span<const int> labels, const InductiveSplit& split,
                               const DistillConfig& cfg, int class_count,
                               const std::vector<EvalRows>* holdout_by_order = nullptr);

struct OnlineResult {
  ClassifierBank bank;
  AttentionScorer scorer;
};

/// Joint phase over all students plus the attention scorer; per-order
/// parameters are snapshotted at their best validation epoch (the incoming
/// state counts as epoch zero). With lambda == 0 the scorer is untouched.
OnlineResult online_distill(const ClassifierBank& bank, const AttentionScorer& scorer,
                            const PropagatedStack& stack, std::span<const int> labels,
                            const InductiveSplit& split, const DistillConfig& cfg, int class_count,
                            const std::vector<EvalRows>* holdout_by_order = nullptr);

} // namespace nai

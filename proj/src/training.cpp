#include "nai/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nai/autodiff.hpp"
#include "nai/errors.hpp"
#include "nai/optimizer.hpp"
#include "nai/rng.hpp"

namespace nai {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (lr <= 0.0) throw ConfigError("train: learning rate must be positive");
  if (dropout < 0.0 || dropout > 0.7) throw ConfigError("train: dropout must lie in [0, 0.7]");
  if (weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
}

namespace {

// Forward through the classifier shape on the tape; returns the logits var.
// Leaves for each layer are created from `flat` in flatten order and
// reported through `param_vars`.
ad::Var tape_forward(ad::Tape& tape, const Classifier& shape, std::span<const double> flat,
                     ad::Var x, const std::vector<Matrix>* masks, std::size_t mask_offset,
                     std::vector<ad::Var>& param_vars) {
  std::size_t pos = 0;
  ad::Var cur = x;
  const auto& layers = shape.layers();
  for (std::size_t t = 0; t < layers.size(); ++t) {
    Matrix w(layers[t].weight.rows(), layers[t].weight.cols());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), w.flat().size(), w.flat().begin());
    pos += w.flat().size();
    Matrix b(1, layers[t].bias.cols());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), b.flat().size(), b.flat().begin());
    pos += b.flat().size();

    ad::Var wv = tape.leaf(std::move(w));
    ad::Var bv = tape.leaf(std::move(b));
    param_vars.push_back(wv);
    param_vars.push_back(bv);

    cur = tape.add_row_broadcast(tape.matmul(cur, wv), bv);
    if (t + 1 < layers.size()) {
      switch (shape.activation()) {
        case Activation::Relu: cur = tape.relu(cur); break;
        case Activation::Tanh: cur = tape.tanh_act(cur); break;
        case Activation::Sigmoid: cur = tape.sigmoid(cur); break;
      }
      // masks[0] covers the input features, masks[t+1] the output of layer t
      if (masks != nullptr && t + 1 < masks->size()) cur = tape.mask(cur, (*masks)[t + 1]);
    }
  }
  (void)mask_offset;
  return cur;
}

void collect_param_grads(const ad::Tape& tape, std::span<const ad::Var> param_vars,
                         std::span<double> grad_out) {
  std::size_t pos = 0;
  for (ad::Var v : param_vars) {
    const Matrix& g = tape.grad(v);
    for (double gv : g.flat()) grad_out[pos++] += gv;
  }
}

Matrix draw_mask(Rng& rng, std::size_t rows, std::size_t cols, double dropout) {
  Matrix m(rows, cols);
  const double keep = 1.0 - dropout;
  const double scale = 1.0 / keep;
  for (double& v : m.flat()) v = rng.uniform01() < keep ? scale : 0.0;
  return m;
}

} // namespace

double supervised_loss_grad(const Classifier& shape, std::span<const double> flat,
                            const SupervisedTask& task, std::span<const int> step_rows,
                            const std::vector<Matrix>* masks, std::span<double> grad_out) {
  if (task.inputs == nullptr || task.class_count < 2) throw InputError("supervised task: incomplete");
  std::fill(grad_out.begin(), grad_out.end(), 0.0);

  ad::Tape tape;
  Matrix gathered = gather_rows(*task.inputs, step_rows);
  ad::Var x = tape.constant(std::move(gathered));
  if (masks != nullptr && !masks->empty()) x = tape.mask(x, (*masks)[0]);

  std::vector<ad::Var> param_vars;
  ad::Var logits = tape_forward(tape, shape, flat, x, masks, 0, param_vars);

  // Positions of hard-loss rows inside this step, plus per-position labels.
  std::vector<char> is_hard(task.inputs->rows(), 0);
  for (int r : task.hard_rows) is_hard[static_cast<std::size_t>(r)] = 1;
  std::vector<int> hard_pos;
  std::vector<int> step_labels(step_rows.size(), -1);
  for (std::size_t p = 0; p < step_rows.size(); ++p) {
    step_labels[p] = task.labels[static_cast<std::size_t>(step_rows[p])];
    if (is_hard[static_cast<std::size_t>(step_rows[p])]) hard_pos.push_back(static_cast<int>(p));
  }

  std::vector<std::pair<double, ad::Var>> terms;
  const bool with_teacher = task.teacher_probs != nullptr && task.lambda > 0.0;
  Matrix teacher_rows;
  if (with_teacher) teacher_rows = gather_rows(*task.teacher_probs, step_rows);

  if ((task.lambda < 1.0 || !with_teacher) && !hard_pos.empty()) {
    ad::CeTarget t;
    t.labels = step_labels;
    ad::Var lc = tape.cross_entropy(logits, 1.0, t, hard_pos, 1.0 / static_cast<double>(hard_pos.size()));
    terms.emplace_back(with_teacher ? 1.0 - task.lambda : 1.0, lc);
  }
  if (terms.empty() && !with_teacher) throw InputError("supervised task: step carries no loss terms");
  if (with_teacher) {
    std::vector<int> all_pos(step_rows.size());
    std::iota(all_pos.begin(), all_pos.end(), 0);
    ad::CeTarget t;
    t.probs = &teacher_rows;
    ad::Var ld = tape.cross_entropy(logits, task.temperature, t, all_pos,
                                    1.0 / static_cast<double>(all_pos.size()));
    terms.emplace_back(task.lambda * task.temperature * task.temperature, ld);
  }

  ad::Var loss = tape.add_scaled(terms);
  tape.backward(loss);
  collect_param_grads(tape, param_vars, grad_out);
  return tape.value(loss).at(0, 0);
}

TrainResult train_supervised(const SupervisedTask& task, const TrainConfig& cfg,
                             const EvalRows* holdout) {
  cfg.validate();
  if (task.inputs == nullptr || task.inputs->rows() == 0) throw InputError("train: no input rows");
  if (task.hard_rows.empty()) throw InputError("train: no labeled rows");
  if (task.labels.size() != task.inputs->rows()) throw InputError("train: one label per row required");

  Rng rng(cfg.seed);
  Classifier clf = Classifier::init(task.inputs->cols(), static_cast<std::size_t>(task.class_count),
                                    cfg.classifier, rng);
  std::vector<double> flat = clf.flatten();
  std::vector<double> grad(flat.size(), 0.0);
  Adam adam(flat.size());

  TrainResult out;
  std::vector<double> best_flat = flat;
  double best_val = -1.0;

  std::vector<int> all_rows(task.inputs->rows());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<char> hard_mask(task.inputs->rows(), 0);
  for (int r : task.hard_rows) hard_mask[static_cast<std::size_t>(r)] = 1;

  auto eval_epoch = [&]() {
    clf.load_flat(flat);
    Matrix train_logits = forward_logits(clf, gather_rows(*task.inputs, task.hard_rows));
    std::vector<int> hard_labels(task.hard_rows.size());
    std::vector<int> idx(task.hard_rows.size());
    for (std::size_t i = 0; i < task.hard_rows.size(); ++i) {
      hard_labels[i] = task.labels[static_cast<std::size_t>(task.hard_rows[i])];
      idx[i] = static_cast<int>(i);
    }
    out.train_acc.push_back(accuracy(train_logits, hard_labels, idx));
    if (holdout != nullptr && !holdout->empty()) {
      Matrix val_logits = forward_logits(clf, holdout->inputs);
      std::vector<int> vidx(holdout->labels.size());
      std::iota(vidx.begin(), vidx.end(), 0);
      const double va = accuracy(val_logits, holdout->labels, vidx);
      out.val_acc.push_back(va);
      if (va > best_val) {
        best_val = va;
        best_flat = flat;
      }
    }
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::vector<int>> steps;
    if (cfg.batch_size > 0 && static_cast<std::size_t>(cfg.batch_size) < all_rows.size()) {
      std::vector<int> order = all_rows;
      rng.shuffle(order);
      for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
        const auto end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
        steps.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(steps.back().begin(), steps.back().end());
      }
    } else {
      steps.push_back(all_rows);
    }

    for (const auto& step_rows : steps) {
      std::vector<Matrix> masks;
      const std::vector<Matrix>* masks_ptr = nullptr;
      if (cfg.dropout > 0.0) {
        masks.push_back(draw_mask(rng, step_rows.size(), task.inputs->cols(), cfg.dropout));
        for (std::size_t t = 0; t + 1 < clf.layers().size(); ++t)
          masks.push_back(draw_mask(rng, step_rows.size(), clf.layers()[t].weight.cols(), cfg.dropout));
        masks_ptr = &masks;
      }
      bool any_hard = false;
      for (int r : step_rows) {
        if (hard_mask[static_cast<std::size_t>(r)]) {
          any_hard = true;
          break;
        }
      }
      if (!any_hard && (task.teacher_probs == nullptr || task.lambda <= 0.0)) continue;

      const double loss = supervised_loss_grad(clf, flat, task, step_rows, masks_ptr, grad);
      if (!std::isfinite(loss)) throw NumericError("train: non-finite loss");
      if (cfg.weight_decay > 0.0) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += cfg.weight_decay * flat[i];
      }
      adam.step(flat, grad, cfg.lr);
    }
    eval_epoch();
  }

  if (holdout != nullptr && !holdout->empty() && best_val >= 0.0) {
    clf.load_flat(best_flat);
    out.best_val = best_val;
  } else {
    clf.load_flat(flat);
  }
  out.classifier = std::move(clf);
  return out;
}

TrainResult train_order(const PropagatedStack& stack, int l, std::span<const int> labels,
                        const InductiveSplit& split, const TrainConfig& cfg, int class_count,
                        const EvalRows* holdout) {
  const std::size_t n = stack.hop(0).rows();
  split.validate(n);
  if (labels.size() != n) throw InputError("train: one label per stack row required");
  for (NodeId v : split.labeled_train) {
    if (labels[static_cast<std::size_t>(v)] < 0)
      throw InputError("train: labeled_train node " + std::to_string(v) + " has no label");
  }

  std::vector<int> train_ids(split.labeled_train.begin(), split.labeled_train.end());
  std::sort(train_ids.begin(), train_ids.end());
  Matrix inputs = stack.order_input_rows(l, train_ids);

  std::vector<int> row_labels(train_ids.size());
  for (std::size_t i = 0; i < train_ids.size(); ++i)
    row_labels[i] = labels[static_cast<std::size_t>(train_ids[i])];

  SupervisedTask task;
  task.inputs = &inputs;
  task.labels = row_labels;
  task.hard_rows.resize(train_ids.size());
  std::iota(task.hard_rows.begin(), task.hard_rows.end(), 0);
  task.class_count = class_count;

  EvalRows val;
  const EvalRows* val_ptr = holdout;
  if (val_ptr == nullptr && !split.validation.empty()) {
    std::vector<int> val_ids(split.validation.begin(), split.validation.end());
    std::sort(val_ids.begin(), val_ids.end());
    val.inputs = stack.order_input_rows(l, val_ids);
    val.labels.resize(val_ids.size());
    for (std::size_t i = 0; i < val_ids.size(); ++i)
      val.labels[i] = labels[static_cast<std::size_t>(val_ids[i])];
    val_ptr = &val;
  }

  TrainResult r = train_supervised(task, cfg, val_ptr);
  r.classifier.trained_order = l;
  r.classifier.trained_backend = stack.backend();
  return r;
}

TrainResult train_base(const PropagatedStack& stack, std::span<const int> labels,
                       const InductiveSplit& split, const TrainConfig& cfg, int class_count,
                       const EvalRows* holdout) {
  return train_order(stack, stack.order(), labels, split, cfg, class_count, holdout);
}

double gradient_check(const GradProblem& problem, std::span<const double> params, int probes,
                      std::uint64_t seed) {
  if (probes < 1) throw InputError("gradient_check: probe count must be >= 1");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> analytic(p.size(), 0.0);
  problem.grad(p, analytic);

  Rng rng(seed);
  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(p.size()));
    const double saved = p[j];
    p[j] = saved + h;
    const double lp = problem.loss(p);
    p[j] = saved - h;
    const double lm = problem.loss(p);
    p[j] = saved;
    if (!std::isfinite(lp) || !std::isfinite(lm)) throw NumericError("gradient_check: non-finite loss");
    const double numeric = (lp - lm) / (2.0 * h);
    const double rel = std::abs(analytic[j] - numeric) / std::max(1e-8, std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

std::uint64_t student_seed(std::uint64_t base_seed, int order) {
  return Rng::mix(base_seed, static_cast<std::uint64_t>(order));
}

} // namespace nai

#include "nai/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nai/autodiff.hpp"
#include "nai/errors.hpp"
#include "nai/optimizer.hpp"
#include "nai/rng.hpp"

namespace nai {

AttentionScorer AttentionScorer::zeros(std::size_t class_count, Activation act) {
  AttentionScorer s;
  s.s.assign(class_count, 0.0);
  s.activation = act;
  return s;
}

void DistillConfig::validate(int k) const {
  if (temperature <= 0.0) throw ConfigError("distill: temperature must be positive");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("distill: lambda must lie in [0, 1]");
  if (r_ens < 2 || r_ens > k)
    throw ConfigError("distill: ensemble size " + std::to_string(r_ens) + " must lie in [2, k=" +
                      std::to_string(k) + "]");
  offline.validate();
  online.validate();
}

ClassifierBank::ClassifierBank(Backend backend, int k) : backend_(backend), k_(k) {
  if (k < 1) throw ConfigError("classifier bank: order must be >= 1");
  by_order_.resize(static_cast<std::size_t>(k));
  val_acc_.assign(static_cast<std::size_t>(k), -1.0);
}

bool ClassifierBank::has_order(int l) const {
  return l >= 1 && l <= k_ && by_order_[static_cast<std::size_t>(l) - 1].has_value();
}

bool ClassifierBank::complete() const {
  for (int l = 1; l <= k_; ++l)
    if (!has_order(l)) return false;
  return true;
}

const Classifier& ClassifierBank::classifier(int l) const {
  if (!has_order(l)) throw InputError("classifier bank: missing order " + std::to_string(l));
  return *by_order_[static_cast<std::size_t>(l) - 1];
}

void ClassifierBank::set_classifier(int l, Classifier clf, double val_acc) {
  if (l < 1 || l > k_) throw InputError("classifier bank: order out of range");
  by_order_[static_cast<std::size_t>(l) - 1] = std::move(clf);
  val_acc_[static_cast<std::size_t>(l) - 1] = val_acc;
}

double ClassifierBank::val_acc(int l) const {
  if (l < 1 || l > k_) throw InputError("classifier bank: order out of range");
  return val_acc_[static_cast<std::size_t>(l) - 1];
}

double soft_ce(const Matrix& student_probs, const Matrix& teacher_probs,
               std::span<const int> subset) {
  if (subset.empty()) throw InputError("soft_ce: empty node subset");
  if (student_probs.rows() != teacher_probs.rows() || student_probs.cols() != teacher_probs.cols())
    throw InputError("soft_ce: probability shapes differ");
  double loss = 0.0;
  for (int i : subset) {
    const std::size_t r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < student_probs.cols(); ++j)
      loss -= teacher_probs.at(r, j) * std::log(std::max(student_probs.at(r, j), 1e-12));
  }
  return loss / static_cast<double>(subset.size());
}

namespace {

double apply_activation(Activation a, double v) {
  switch (a) {
    case Activation::Relu: return v > 0.0 ? v : 0.0;
    case Activation::Tanh: return std::tanh(v);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

} // namespace

EnsembleOutput ensemble_teacher(std::span<const Matrix> member_probs, const AttentionScorer& scorer,
                                double temperature, bool mix_logits,
                                std::span<const Matrix> member_logits) {
  if (member_probs.size() < 2) throw InputError("ensemble teacher: needs at least two members");
  if (mix_logits && member_logits.size() != member_probs.size())
    throw InputError("ensemble teacher: logits required for every member when mixing logits");
  const std::size_t n = member_probs[0].rows();
  const std::size_t c = member_probs[0].cols();
  if (scorer.s.size() != c) throw InputError("ensemble teacher: scorer length must equal class count");
  for (const Matrix& m : member_probs)
    if (m.rows() != n || m.cols() != c) throw InputError("ensemble teacher: member shapes differ");

  const std::size_t r = member_probs.size();
  EnsembleOutput out;
  out.weights = Matrix(n, r);
  out.mixed_logits = Matrix(n, c);
  out.teacher_probs = Matrix(n, c);

  for (std::size_t i = 0; i < n; ++i) {
    // attention scores, softmax-normalized across members
    double mx = -1e300;
    std::vector<double> scores(r);
    for (std::size_t l = 0; l < r; ++l) {
      double dot = 0.0;
      auto row = member_probs[l].row(i);
      for (std::size_t j = 0; j < c; ++j) dot += row[j] * scorer.s[j];
      scores[l] = apply_activation(scorer.activation, dot);
      mx = std::max(mx, scores[l]);
    }
    double sum = 0.0;
    for (std::size_t l = 0; l < r; ++l) {
      scores[l] = std::exp(scores[l] - mx);
      sum += scores[l];
    }
    auto w = out.weights.row(i);
    for (std::size_t l = 0; l < r; ++l) w[l] = scores[l] / sum;

    auto mix = out.mixed_logits.row(i);
    for (std::size_t l = 0; l < r; ++l) {
      auto src = mix_logits ? member_logits[l].row(i) : member_probs[l].row(i);
      for (std::size_t j = 0; j < c; ++j) mix[j] += w[l] * src[j];
    }
    if (!mix_logits) {
      // renormalize the mixed probabilities into ensemble logits
      std::vector<double> z(c);
      tempered_softmax_row(mix, 1.0, z);
      for (std::size_t j = 0; j < c; ++j) mix[j] = z[j];
    }
    tempered_softmax_row(mix, temperature, out.teacher_probs.row(i));
  }
  return out;
}

std::size_t online_param_count(const ClassifierBank& bank, std::size_t class_count) {
  std::size_t total = class_count; // scorer
  for (int l = 1; l <= bank.order(); ++l) total += bank.classifier(l).param_count();
  return total;
}

void flatten_online(const ClassifierBank& bank, const AttentionScorer& scorer, std::span<double> out) {
  std::size_t pos = 0;
  for (int l = 1; l <= bank.order(); ++l) {
    const Classifier& c = bank.classifier(l);
    c.flatten_into(out.subspan(pos, c.param_count()));
    pos += c.param_count();
  }
  std::copy(scorer.s.begin(), scorer.s.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
}

void load_online(std::span<const double> flat, ClassifierBank& bank, AttentionScorer& scorer) {
  std::size_t pos = 0;
  for (int l = 1; l <= bank.order(); ++l) {
    Classifier c = bank.classifier(l);
    c.load_flat(flat.subspan(pos, c.param_count()));
    pos += c.param_count();
    bank.set_classifier(l, std::move(c), bank.val_acc(l));
  }
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.end(), scorer.s.begin());
}

double online_loss_grad(const OnlineLossSpec& spec, std::span<const double> flat,
                        std::span<double> grad_out) {
  const ClassifierBank& bank = *spec.bank;
  const int k = bank.order();
  const int first_member = k - spec.r_ens + 1;
  std::fill(grad_out.begin(), grad_out.end(), 0.0);

  ad::Tape tape;

  // Parameter leaves for orders 1..k in flat order, then the scorer.
  std::vector<std::size_t> block_offset(static_cast<std::size_t>(k) + 1, 0);
  std::vector<std::vector<ad::Var>> layer_vars(static_cast<std::size_t>(k));
  std::size_t pos = 0;
  for (int l = 1; l <= k; ++l) {
    block_offset[static_cast<std::size_t>(l) - 1] = pos;
    const Classifier& shape = bank.classifier(l);
    for (const auto& layer : shape.layers()) {
      Matrix w(layer.weight.rows(), layer.weight.cols());
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), w.flat().size(), w.flat().begin());
      pos += w.flat().size();
      Matrix b(1, layer.bias.cols());
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), b.flat().size(), b.flat().begin());
      pos += b.flat().size();
      layer_vars[static_cast<std::size_t>(l) - 1].push_back(tape.leaf(std::move(w)));
      layer_vars[static_cast<std::size_t>(l) - 1].push_back(tape.leaf(std::move(b)));
    }
  }
  block_offset[static_cast<std::size_t>(k)] = pos;
  Matrix svec(static_cast<std::size_t>(spec.class_count), 1);
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), svec.flat().size(), svec.flat().begin());
  ad::Var s_var = tape.leaf(std::move(svec));

  auto forward_order = [&](int l, const std::vector<Matrix>* masks) -> ad::Var {
    const Classifier& shape = bank.classifier(l);
    ad::Var x = tape.constant(*spec.inputs_by_order[static_cast<std::size_t>(l) - 1]);
    if (masks != nullptr && !masks->empty()) x = tape.mask(x, (*masks)[0]);
    ad::Var cur = x;
    const auto& vars = layer_vars[static_cast<std::size_t>(l) - 1];
    for (std::size_t t = 0; t * 2 < vars.size(); ++t) {
      cur = tape.add_row_broadcast(tape.matmul(cur, vars[2 * t]), vars[2 * t + 1]);
      if ((t + 1) * 2 < vars.size()) {
        switch (shape.activation()) {
          case Activation::Relu: cur = tape.relu(cur); break;
          case Activation::Tanh: cur = tape.tanh_act(cur); break;
          case Activation::Sigmoid: cur = tape.sigmoid(cur); break;
        }
        if (masks != nullptr && t + 1 < masks->size()) cur = tape.mask(cur, (*masks)[t + 1]);
      }
    }
    return cur;
  };

  const std::size_t n_rows = spec.inputs_by_order[0]->rows();
  std::vector<int> all_pos(n_rows);
  std::iota(all_pos.begin(), all_pos.end(), 0);

  // Ensemble teacher on the tape (members in ascending order).
  ad::Var teacher_probs_var;
  if (spec.lambda > 0.0) {
    std::vector<ad::Var> member_probs, member_logits, member_scores;
    for (int l = first_member; l <= k; ++l) {
      ad::Var z;
      if (spec.stop_teacher_grad) {
        Classifier frozen = bank.classifier(l);
        std::vector<double> block(frozen.param_count());
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(block_offset[static_cast<std::size_t>(l) - 1]),
                    block.size(), block.begin());
        frozen.load_flat(block);
        z = tape.constant(forward_logits(frozen, *spec.inputs_by_order[static_cast<std::size_t>(l) - 1]));
      } else {
        z = forward_order(l, nullptr);
      }
      ad::Var probs = tape.softmax_rows(z, 1.0);
      member_probs.push_back(probs);
      member_logits.push_back(z);
      ad::Var score = tape.matmul(probs, s_var); // n x 1
      switch (spec.scorer == nullptr ? Activation::Tanh : spec.scorer->activation) {
        case Activation::Relu: score = tape.relu(score); break;
        case Activation::Tanh: score = tape.tanh_act(score); break;
        case Activation::Sigmoid: score = tape.sigmoid(score); break;
      }
      member_scores.push_back(score);
    }
    ad::Var w = tape.softmax_rows(tape.concat_cols(member_scores), 1.0);
    ad::Var mixed = tape.weighted_mix(w, spec.mix_logits ? std::span<const ad::Var>(member_logits)
                                                         : std::span<const ad::Var>(member_probs));
    ad::Var ensemble_logits = spec.mix_logits ? mixed : tape.softmax_rows(mixed, 1.0);
    teacher_probs_var = tape.softmax_rows(ensemble_logits, spec.temperature);
  }

  // Student losses.
  std::vector<std::pair<double, ad::Var>> terms;
  for (int l = 1; l < k; ++l) {
    const std::vector<Matrix>* masks = nullptr;
    if (spec.dropout_masks != nullptr && static_cast<std::size_t>(l) - 1 < spec.dropout_masks->size() &&
        !(*spec.dropout_masks)[static_cast<std::size_t>(l) - 1].empty())
      masks = &(*spec.dropout_masks)[static_cast<std::size_t>(l) - 1];
    ad::Var z = forward_order(l, masks);

    if (spec.lambda < 1.0 && !spec.hard_rows.empty()) {
      ad::CeTarget t;
      t.labels = spec.labels;
      ad::Var lc = tape.cross_entropy(z, 1.0, t, spec.hard_rows,
                                      1.0 / static_cast<double>(spec.hard_rows.size()));
      terms.emplace_back(1.0 - spec.lambda, lc);
    }
    if (spec.lambda > 0.0) {
      ad::CeTarget t;
      t.probs_var = teacher_probs_var;
      ad::Var le = tape.cross_entropy(z, spec.temperature, t, all_pos,
                                      1.0 / static_cast<double>(all_pos.size()));
      terms.emplace_back(spec.lambda * spec.temperature * spec.temperature, le);
    }
  }
  if (terms.empty()) throw InputError("online loss: no loss terms (k < 2?)");

  ad::Var loss = tape.add_scaled(terms);
  tape.backward(loss);

  // Collect gradients in flat order.
  pos = 0;
  for (int l = 1; l <= k; ++l) {
    for (ad::Var v : layer_vars[static_cast<std::size_t>(l) - 1]) {
      const Matrix& g = tape.grad(v);
      for (double gv : g.flat()) grad_out[pos++] += gv;
    }
  }
  {
    const Matrix& g = tape.grad(s_var);
    for (double gv : g.flat()) grad_out[pos++] += gv;
  }
  return tape.value(loss).at(0, 0);
}

namespace {

// Positions of split.labeled_train inside the sorted train-node universe.
struct TrainRows {
  std::vector<int> universe;   // sorted train node ids
  std::vector<int> hard_pos;   // positions of labeled nodes
  std::vector<int> row_labels; // labels aligned with universe rows
};

TrainRows collect_train_rows(const InductiveSplit& split, std::span<const int> labels) {
  TrainRows t;
  const std::vector<NodeId> train = split.train_nodes();
  t.universe.assign(train.begin(), train.end());
  std::vector<char> labeled(labels.size(), 0);
  for (NodeId v : split.labeled_train) labeled[static_cast<std::size_t>(v)] = 1;
  t.row_labels.resize(t.universe.size());
  for (std::size_t i = 0; i < t.universe.size(); ++i) {
    t.row_labels[i] = labels[static_cast<std::size_t>(t.universe[i])];
    if (labeled[static_cast<std::size_t>(t.universe[i])]) t.hard_pos.push_back(static_cast<int>(i));
  }
  return t;
}

EvalRows holdout_for_order(const PropagatedStack& stack, int l, std::span<const int> labels,
                           const InductiveSplit& split, const std::vector<EvalRows>* holdout_by_order) {
  if (holdout_by_order != nullptr && static_cast<std::size_t>(l) < holdout_by_order->size() &&
      !(*holdout_by_order)[static_cast<std::size_t>(l)].empty())
    return (*holdout_by_order)[static_cast<std::size_t>(l)];
  EvalRows out;
  if (split.validation.empty()) return out;
  std::vector<int> val_ids(split.validation.begin(), split.validation.end());
  std::sort(val_ids.begin(), val_ids.end());
  out.inputs = stack.order_input_rows(l, val_ids);
  out.labels.resize(val_ids.size());
  for (std::size_t i = 0; i < val_ids.size(); ++i)
    out.labels[i] = labels[static_cast<std::size_t>(val_ids[i])];
  return out;
}

double eval_rows_accuracy(const Classifier& clf, const EvalRows& rows) {
  if (rows.empty()) return -1.0;
  Matrix logits = forward_logits(clf, rows.inputs);
  std::vector<int> idx(rows.labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  return accuracy(logits, rows.labels, idx);
}

} // namespace

ClassifierBank offline_distill(const Classifier& teacher, const PropagatedStack& stack,
                               std::span<const int> labels, const InductiveSplit& split,
                               const DistillConfig& cfg, int class_count,
                               const std::vector<EvalRows>* holdout_by_order) {
  const int k = stack.order();
  cfg.validate(k);
  if (teacher.trained_order != k)
    throw InputError("offline distill: teacher order " + std::to_string(teacher.trained_order) +
                     " != stack order " + std::to_string(k));
  split.validate(stack.hop(0).rows());

  ClassifierBank bank(stack.backend(), k);
  {
    EvalRows hv = holdout_for_order(stack, k, labels, split, holdout_by_order);
    bank.set_classifier(k, teacher, eval_rows_accuracy(teacher, hv));
  }

  const TrainRows t = collect_train_rows(split, labels);

  // Frozen tempered teacher outputs over the train universe.
  Matrix teacher_probs;
  if (cfg.lambda > 0.0) {
    Matrix z = forward_logits(teacher, stack.order_input_rows(k, t.universe));
    teacher_probs = tempered_softmax(z, cfg.temperature);
  }

  for (int l = 1; l < k; ++l) {
    TrainConfig student_cfg = cfg.offline;
    student_cfg.seed = student_seed(cfg.offline.seed, l);
    EvalRows hv = holdout_for_order(stack, l, labels, split, holdout_by_order);

    TrainResult r;
    if (cfg.lambda == 0.0) {
      // Degenerate case: identical to independent hard-CE training.
      r = train_order(stack, l, labels, split, student_cfg, class_count, hv.empty() ? nullptr : &hv);
    } else {
      Matrix inputs = stack.order_input_rows(l, t.universe);
      SupervisedTask task;
      task.inputs = &inputs;
      task.labels = t.row_labels;
      task.hard_rows = t.hard_pos;
      task.teacher_probs = &teacher_probs;
      task.lambda = cfg.lambda;
      task.temperature = cfg.temperature;
      task.class_count = class_count;
      r = train_supervised(task, student_cfg, hv.empty() ? nullptr : &hv);
      r.classifier.trained_order = l;
      r.classifier.trained_backend = stack.backend();
    }
    bank.set_classifier(l, std::move(r.classifier), r.best_val);
  }
  return bank;
}

OnlineResult online_distill(const ClassifierBank& bank_in, const AttentionScorer& scorer_in,
                            const PropagatedStack& stack, std::span<const int> labels,
                            const InductiveSplit& split, const DistillConfig& cfg, int class_count,
                            const std::vector<EvalRows>* holdout_by_order) {
  const int k = stack.order();
  cfg.validate(k);
  if (bank_in.order() != k) throw InputError("online distill: bank order != stack order");
  if (!bank_in.complete()) throw InputError("online distill: bank must hold every order 1..k");
  split.validate(stack.hop(0).rows());

  OnlineResult out;
  out.bank = bank_in;
  out.scorer = scorer_in.s.empty()
                   ? AttentionScorer::zeros(static_cast<std::size_t>(class_count), cfg.scorer_activation)
                   : scorer_in;
  if (out.scorer.s.size() != static_cast<std::size_t>(class_count))
    throw InputError("online distill: scorer length must equal class count");
  if (cfg.online.epochs == 0) return out;

  const TrainRows t = collect_train_rows(split, labels);
  std::vector<Matrix> inputs(static_cast<std::size_t>(k));
  for (int l = 1; l <= k; ++l)
    inputs[static_cast<std::size_t>(l) - 1] = stack.order_input_rows(l, t.universe);

  OnlineLossSpec spec;
  spec.bank = &out.bank;
  spec.scorer = &out.scorer;
  for (int l = 1; l <= k; ++l) spec.inputs_by_order.push_back(&inputs[static_cast<std::size_t>(l) - 1]);
  spec.labels = t.row_labels;
  spec.hard_rows = t.hard_pos;
  spec.class_count = class_count;
  spec.lambda = cfg.lambda;
  spec.temperature = cfg.temperature;
  spec.r_ens = cfg.r_ens;
  spec.mix_logits = cfg.mix_logits;
  spec.stop_teacher_grad = cfg.stop_teacher_grad;

  std::vector<double> flat(online_param_count(out.bank, static_cast<std::size_t>(class_count)));
  flatten_online(out.bank, out.scorer, flat);
  std::vector<double> grad(flat.size(), 0.0);
  Adam adam(flat.size());
  Rng rng(cfg.online.seed);

  // Per-block decay flags: decay applies only to blocks that receive
  // gradients (students always; the top member when it is trained; never
  // the scorer), so untouched blocks keep their exact bytes.
  std::vector<std::size_t> block_offsets;
  std::vector<std::size_t> block_sizes;
  {
    std::size_t pos = 0;
    for (int l = 1; l <= k; ++l) {
      block_offsets.push_back(pos);
      block_sizes.push_back(out.bank.classifier(l).param_count());
      pos += block_sizes.back();
    }
    block_offsets.push_back(pos); // scorer
    block_sizes.push_back(static_cast<std::size_t>(class_count));
  }
  auto block_trained = [&](int l) {
    if (l < k) return true; // students
    return cfg.lambda > 0.0 && !cfg.stop_teacher_grad;
  };

  // Best-epoch snapshot per order; the incoming state is epoch zero.
  std::vector<EvalRows> holdouts(static_cast<std::size_t>(k) + 1);
  std::vector<double> best_acc(static_cast<std::size_t>(k) + 1, -1.0);
  std::vector<std::vector<double>> best_block(static_cast<std::size_t>(k) + 1);
  auto snapshot = [&]() {
    for (int l = 1; l <= k; ++l) {
      Classifier c = out.bank.classifier(l);
      c.load_flat(std::span<const double>(flat).subspan(block_offsets[static_cast<std::size_t>(l) - 1],
                                                        block_sizes[static_cast<std::size_t>(l) - 1]));
      const double acc = eval_rows_accuracy(c, holdouts[static_cast<std::size_t>(l)]);
      if (acc > best_acc[static_cast<std::size_t>(l)]) {
        best_acc[static_cast<std::size_t>(l)] = acc;
        best_block[static_cast<std::size_t>(l)].assign(
            flat.begin() + static_cast<std::ptrdiff_t>(block_offsets[static_cast<std::size_t>(l) - 1]),
            flat.begin() + static_cast<std::ptrdiff_t>(block_offsets[static_cast<std::size_t>(l) - 1] +
                                                       block_sizes[static_cast<std::size_t>(l) - 1]));
      }
    }
  };
  for (int l = 1; l <= k; ++l)
    holdouts[static_cast<std::size_t>(l)] = holdout_for_order(stack, l, labels, split, holdout_by_order);
  snapshot();

  std::vector<std::vector<Matrix>> masks;
  for (int epoch = 0; epoch < cfg.online.epochs; ++epoch) {
    const std::vector<std::vector<Matrix>>* masks_ptr = nullptr;
    if (cfg.online.dropout > 0.0) {
      masks.assign(static_cast<std::size_t>(k) - 1, {});
      for (int l = 1; l < k; ++l) {
        auto& m = masks[static_cast<std::size_t>(l) - 1];
        const Classifier& shape = out.bank.classifier(l);
        const double keep = 1.0 - cfg.online.dropout;
        auto draw = [&](std::size_t rows, std::size_t cols) {
          Matrix mm(rows, cols);
          for (double& v : mm.flat()) v = rng.uniform01() < keep ? 1.0 / keep : 0.0;
          return mm;
        };
        m.push_back(draw(t.universe.size(), shape.input_width()));
        for (std::size_t tl = 0; tl + 1 < shape.layers().size(); ++tl)
          m.push_back(draw(t.universe.size(), shape.layers()[tl].weight.cols()));
      }
      spec.dropout_masks = &masks;
      masks_ptr = &masks;
    }
    (void)masks_ptr;

    const double loss = online_loss_grad(spec, flat, grad);
    if (!std::isfinite(loss)) throw NumericError("online distill: non-finite loss");
    if (cfg.online.weight_decay > 0.0) {
      for (int l = 1; l <= k; ++l) {
        if (!block_trained(l)) continue;
        const std::size_t off = block_offsets[static_cast<std::size_t>(l) - 1];
        for (std::size_t i = 0; i < block_sizes[static_cast<std::size_t>(l) - 1]; ++i)
          grad[off + i] += cfg.online.weight_decay * flat[off + i];
      }
    }
    adam.step(flat, grad, cfg.online.lr);
    snapshot();
  }

  // Install the best per-order parameters; the scorer keeps its final state.
  for (int l = 1; l <= k; ++l) {
    Classifier c = out.bank.classifier(l);
    if (!best_block[static_cast<std::size_t>(l)].empty() && best_acc[static_cast<std::size_t>(l)] >= 0.0) {
      c.load_flat(best_block[static_cast<std::size_t>(l)]);
    } else {
      c.load_flat(std::span<const double>(flat).subspan(block_offsets[static_cast<std::size_t>(l) - 1],
                                                        block_sizes[static_cast<std::size_t>(l) - 1]));
    }
    out.bank.set_classifier(l, std::move(c), best_acc[static_cast<std::size_t>(l)]);
  }
  std::copy(flat.end() - static_cast<std::ptrdiff_t>(class_count), flat.end(), out.scorer.s.begin());
  return out;
}

} // namespace nai

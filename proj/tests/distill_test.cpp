#include <cmath>
#include <doctest.h>
#include <numeric>

#include "nai/distill.hpp"
#include "nai/errors.hpp"
#include "testutil.hpp"

using namespace nai;

TEST_CASE("soft_ce") {
  SUBCASE("teacher equal to student costs the teacher's entropy") {
    Matrix p = Matrix::from_rows({{0.7, 0.2, 0.1}});
    const std::vector<int> subset{0};
    double entropy = 0.0;
    for (std::size_t j = 0; j < 3; ++j) entropy -= p.at(0, j) * std::log(p.at(0, j));
    CHECK(soft_ce(p, p, subset) == doctest::Approx(entropy).epsilon(1e-12));
  }
  SUBCASE("confident agreement costs nothing") {
    Matrix teacher = Matrix::from_rows({{1.0, 0.0}});
    Matrix student = Matrix::from_rows({{1.0, 0.0}});
    const std::vector<int> subset{0};
    CHECK(soft_ce(student, teacher, subset) == doctest::Approx(0.0).epsilon(1e-10));
  }
  SUBCASE("uniform teacher against uniform student costs ln c") {
    Matrix teacher = Matrix::from_rows({{0.25, 0.25, 0.25, 0.25}});
    Matrix student = teacher;
    const std::vector<int> subset{0};
    CHECK(soft_ce(student, teacher, subset) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("empty subset rejected") {
    Matrix p = Matrix::from_rows({{0.5, 0.5}});
    CHECK_THROWS_AS(soft_ce(p, p, {}), InputError);
  }
}

TEST_CASE("ensemble_teacher") {
  SUBCASE("identical members make the weights irrelevant") {
    Matrix probs = Matrix::from_rows({{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}});
    AttentionScorer scorer;
    scorer.s = {0.4, -0.2, 0.9};
    const std::vector<Matrix> members{probs, probs, probs};
    EnsembleOutput out = ensemble_teacher(members, scorer, 1.3);
    Matrix expected_logits = tempered_softmax(probs, 1.0);
    Matrix expected = tempered_softmax(expected_logits, 1.3);
    CHECK(test::max_abs_diff(out.mixed_logits, expected_logits) <= 1e-12);
    CHECK(test::max_abs_diff(out.teacher_probs, expected) <= 1e-12);
  }
  SUBCASE("zero scorer yields exactly uniform attention") {
    Rng rng(3);
    Matrix a = tempered_softmax(test::random_features(rng, 4, 3, -2.0, 2.0), 1.0);
    Matrix b = tempered_softmax(test::random_features(rng, 4, 3, -2.0, 2.0), 1.0);
    AttentionScorer scorer = AttentionScorer::zeros(3);
    const std::vector<Matrix> members{a, b};
    EnsembleOutput out = ensemble_teacher(members, scorer, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(out.weights.at(i, 0) == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(out.weights.at(i, 1) == doctest::Approx(0.5).epsilon(1e-14));
    }
  }
  SUBCASE("two-member scalar chain matches hand arithmetic") {
    // one node, two classes, hand-set scorer
    Matrix ya = Matrix::from_rows({{0.8, 0.2}});
    Matrix yb = Matrix::from_rows({{0.4, 0.6}});
    AttentionScorer scorer;
    scorer.s = {1.0, -1.0};
    const double temp = 1.5;

    const double ma = std::tanh(0.8 * 1.0 + 0.2 * -1.0);
    const double mb = std::tanh(0.4 * 1.0 + 0.6 * -1.0);
    const double wa = std::exp(ma) / (std::exp(ma) + std::exp(mb));
    const double wb = 1.0 - wa;
    const double mix0 = wa * 0.8 + wb * 0.4;
    const double mix1 = wa * 0.2 + wb * 0.6;
    const double z0 = std::exp(mix0) / (std::exp(mix0) + std::exp(mix1));
    const double z1 = 1.0 - z0;
    const double p0 = std::exp(z0 / temp) / (std::exp(z0 / temp) + std::exp(z1 / temp));

    const std::vector<Matrix> members{ya, yb};
    EnsembleOutput out = ensemble_teacher(members, scorer, temp);
    CHECK(out.weights.at(0, 0) == doctest::Approx(wa).epsilon(1e-12));
    CHECK(out.mixed_logits.at(0, 0) == doctest::Approx(z0).epsilon(1e-12));
    CHECK(out.teacher_probs.at(0, 0) == doctest::Approx(p0).epsilon(1e-12));
  }
  SUBCASE("weights are positive and sum to one") {
    Rng rng(4);
    std::vector<Matrix> members;
    for (int l = 0; l < 3; ++l)
      members.push_back(tempered_softmax(test::random_features(rng, 6, 4, -3.0, 3.0), 1.0));
    AttentionScorer scorer;
    scorer.s = {0.3, -0.7, 0.2, 1.1};
    EnsembleOutput out = ensemble_teacher(members, scorer, 1.2);
    for (std::size_t i = 0; i < 6; ++i) {
      double wsum = 0.0, psum = 0.0;
      for (std::size_t l = 0; l < 3; ++l) {
        CHECK(out.weights.at(i, l) > 0.0);
        wsum += out.weights.at(i, l);
      }
      for (std::size_t j = 0; j < 4; ++j) psum += out.teacher_probs.at(i, j);
      CHECK(std::abs(wsum - 1.0) <= 1e-12);
      CHECK(std::abs(psum - 1.0) <= 1e-12);
    }
  }
  SUBCASE("single member rejected") {
    Matrix y = Matrix::from_rows({{0.5, 0.5}});
    AttentionScorer scorer = AttentionScorer::zeros(2);
    const std::vector<Matrix> members{y};
    CHECK_THROWS_AS(ensemble_teacher(members, scorer, 1.0), InputError);
  }
}

namespace {

struct DistillFixture {
  Graph graph;
  Matrix features;
  std::vector<int> labels;
  InductiveSplit split;
  PropagatedStack stack;
  int class_count = 2;
};

DistillFixture make_fixture(int k = 3) {
  DistillFixture fx;
  Rng rng(55);
  fx.graph = test::random_connected_graph(rng, 14, 0.2);
  fx.features = test::random_features(rng, 14, 4);
  fx.labels.resize(14);
  for (std::size_t i = 0; i < 14; ++i) {
    fx.labels[i] = static_cast<int>(i % 2);
    fx.features.at(i, 0) += fx.labels[i] == 0 ? 0.8 : -0.8;
  }
  fx.split.labeled_train = {0, 1, 2, 3, 4, 5};
  fx.split.unlabeled_train = {6, 7, 8, 9};
  fx.split.validation = {10, 11, 12, 13};
  fx.stack = PropagatedStack::compute(fx.graph, NormKind::symmetric(), fx.features, k, Backend::Sgc);
  return fx;
}

Classifier trained_teacher(const DistillFixture& fx, std::uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 0.2;
  cfg.seed = seed;
  return train_base(fx.stack, fx.labels, fx.split, cfg, fx.class_count).classifier;
}

} // namespace

TEST_CASE("offline_distill") {
  DistillFixture fx = make_fixture();
  Classifier teacher = trained_teacher(fx);

  SUBCASE("lambda 0 reproduces independent training bit for bit") {
    DistillConfig cfg;
    cfg.lambda = 0.0;
    cfg.offline.epochs = 20;
    cfg.offline.lr = 0.2;
    cfg.offline.seed = 9;
    ClassifierBank bank = offline_distill(teacher, fx.stack, fx.labels, fx.split, cfg, 2);

    for (int l = 1; l < fx.stack.order(); ++l) {
      TrainConfig plain = cfg.offline;
      plain.seed = student_seed(cfg.offline.seed, l);
      TrainResult ref = train_order(fx.stack, l, fx.labels, fx.split, plain, 2);
      CHECK(bank.classifier(l).flatten() == ref.classifier.flatten());
    }
  }
  SUBCASE("lambda 1 with a uniform teacher pushes students toward uniform outputs") {
    Classifier uniform_teacher = teacher;
    for (auto& layer : uniform_teacher.layers_mut()) {
      layer.weight.fill(0.0);
      layer.bias.fill(0.0);
    }
    DistillConfig cfg;
    cfg.lambda = 1.0;
    cfg.temperature = 1.0;
    cfg.offline.epochs = 400;
    cfg.offline.lr = 0.3;
    ClassifierBank bank = offline_distill(uniform_teacher, fx.stack, fx.labels, fx.split, cfg, 2);

    const std::vector<NodeId> train = fx.split.train_nodes();
    std::vector<int> rows(train.begin(), train.end());
    Matrix probs =
        tempered_softmax(forward_logits(bank.classifier(1), fx.stack.order_input_rows(1, rows)), 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i)
      worst = std::max(worst, std::abs(probs.at(i, 0) - 0.5));
    CHECK(worst <= 0.05);
  }
  SUBCASE("every order is present and tagged") {
    DistillConfig cfg;
    cfg.offline.epochs = 5;
    ClassifierBank bank = offline_distill(teacher, fx.stack, fx.labels, fx.split, cfg, 2);
    CHECK(bank.complete());
    for (int l = 1; l <= 3; ++l) {
      CHECK(bank.classifier(l).trained_order == l);
      CHECK(bank.classifier(l).trained_backend == Backend::Sgc);
    }
  }
}

TEST_CASE("online_distill") {
  DistillFixture fx = make_fixture();
  Classifier teacher = trained_teacher(fx);
  DistillConfig cfg;
  cfg.offline.epochs = 15;
  cfg.offline.lr = 0.2;
  cfg.online.epochs = 10;
  cfg.online.lr = 0.05;
  ClassifierBank offline = offline_distill(teacher, fx.stack, fx.labels, fx.split, cfg, 2);

  SUBCASE("zero epochs is the identity") {
    DistillConfig frozen = cfg;
    frozen.online.epochs = 0;
    AttentionScorer scorer = AttentionScorer::zeros(2);
    scorer.s = {0.25, -0.5};
    OnlineResult out = online_distill(offline, scorer, fx.stack, fx.labels, fx.split, frozen, 2);
    CHECK(out.scorer.s == scorer.s);
    for (int l = 1; l <= 3; ++l)
      CHECK(out.bank.classifier(l).flatten() == offline.classifier(l).flatten());
  }
  SUBCASE("lambda 0 never touches the scorer") {
    DistillConfig hard_only = cfg;
    hard_only.lambda = 0.0;
    AttentionScorer scorer = AttentionScorer::zeros(2);
    OnlineResult out = online_distill(offline, scorer, fx.stack, fx.labels, fx.split, hard_only, 2);
    CHECK(out.scorer.s == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("incomplete bank rejected") {
    ClassifierBank partial(Backend::Sgc, 3);
    partial.set_classifier(3, teacher);
    CHECK_THROWS_AS(
        online_distill(partial, AttentionScorer::zeros(2), fx.stack, fx.labels, fx.split, cfg, 2),
        InputError);
  }
  SUBCASE("deterministic across repeated runs") {
    OnlineResult a = online_distill(offline, AttentionScorer::zeros(2), fx.stack, fx.labels,
                                    fx.split, cfg, 2);
    OnlineResult b = online_distill(offline, AttentionScorer::zeros(2), fx.stack, fx.labels,
                                    fx.split, cfg, 2);
    CHECK(a.scorer.s == b.scorer.s);
    for (int l = 1; l <= 3; ++l)
      CHECK(a.bank.classifier(l).flatten() == b.bank.classifier(l).flatten());
  }
}

namespace {

// Random small online-loss instance for the gradient contract.
OnlineLossSpec make_online_spec(const ClassifierBank& bank, const AttentionScorer& scorer,
                                const std::vector<Matrix>& inputs, const std::vector<int>& labels,
                                const std::vector<int>& hard_rows, double lambda, double temp,
                                bool mix_logits, bool stop_teacher) {
  OnlineLossSpec spec;
  spec.bank = &bank;
  spec.scorer = &scorer;
  for (const Matrix& m : inputs) spec.inputs_by_order.push_back(&m);
  spec.labels = labels;
  spec.hard_rows = hard_rows;
  spec.class_count = static_cast<int>(scorer.s.size());
  spec.lambda = lambda;
  spec.temperature = temp;
  spec.r_ens = 2;
  spec.mix_logits = mix_logits;
  spec.stop_teacher_grad = stop_teacher;
  return spec;
}

} // namespace

TEST_CASE("distillation losses pass the gradient contract") {
  Rng rng(31);
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t n = 2 + rng.bounded(4);
    const std::size_t f = 2 + rng.bounded(5);
    const int c = 2 + static_cast<int>(rng.bounded(3));
    const int k = 3;

    // teacher probabilities for the offline losses
    Matrix teacher_logits(n, static_cast<std::size_t>(c));
    for (double& v : teacher_logits.flat()) v = rng.uniform(-1.0, 1.0);
    const double temp = 1.0 + rng.uniform01();
    Matrix teacher_probs = tempered_softmax(teacher_logits, temp);

    Matrix inputs(n, f);
    for (double& v : inputs.flat()) v = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(n);
    for (int& y : labels) y = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(c)));

    SupervisedTask task;
    task.inputs = &inputs;
    task.labels = labels;
    task.hard_rows = {0};
    task.teacher_probs = &teacher_probs;
    task.temperature = temp;
    task.class_count = c;

    Rng init_rng(900 + instance);
    Classifier shape = Classifier::init(f, static_cast<std::size_t>(c), ClassifierSpec{}, init_rng);
    std::vector<int> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    // soft distillation term alone (lambda = 1), then the joint objective
    for (double lambda : {1.0, 0.35}) {
      task.lambda = lambda;
      GradProblem p;
      p.loss = [&](std::span<const double> flat) {
        std::vector<double> g(flat.size());
        return supervised_loss_grad(shape, flat, task, all_rows, nullptr, g);
      };
      p.grad = [&](std::span<const double> flat, std::span<double> g) {
        supervised_loss_grad(shape, flat, task, all_rows, nullptr, g);
      };
      CHECK(gradient_check(p, shape.flatten(), 15, 2000 + instance) <= 1e-4);
    }

    // online objective including the attention chain
    std::vector<Matrix> order_inputs;
    ClassifierBank bank(Backend::Sgc, k);
    for (int l = 1; l <= k; ++l) {
      Matrix m(n, f);
      for (double& v : m.flat()) v = rng.uniform(-1.0, 1.0);
      order_inputs.push_back(std::move(m));
      Rng lr(1000 + instance * 10 + l);
      Classifier clf = Classifier::init(f, static_cast<std::size_t>(c), ClassifierSpec{}, lr);
      clf.trained_order = l;
      bank.set_classifier(l, std::move(clf));
    }
    AttentionScorer scorer = AttentionScorer::zeros(static_cast<std::size_t>(c));
    for (double& v : scorer.s) v = rng.uniform(-0.5, 0.5);

    const bool mix_logits = instance % 4 == 0;
    OnlineLossSpec spec = make_online_spec(bank, scorer, order_inputs, labels, {0}, 0.7, temp,
                                           mix_logits, false);
    std::vector<double> flat(online_param_count(bank, static_cast<std::size_t>(c)));
    flatten_online(bank, scorer, flat);

    GradProblem p;
    p.loss = [&](std::span<const double> fp) {
      std::vector<double> g(fp.size());
      return online_loss_grad(spec, fp, g);
    };
    p.grad = [&](std::span<const double> fp, std::span<double> g) { online_loss_grad(spec, fp, g); };
    CHECK(gradient_check(p, flat, 25, 3000 + instance) <= 1e-4);
  }
}

TEST_CASE("stop_teacher_grad freezes member-only parameters") {
  Rng rng(41);
  const std::size_t n = 4, f = 3;
  const int c = 3, k = 3;
  std::vector<Matrix> order_inputs;
  ClassifierBank bank(Backend::Sgc, k);
  for (int l = 1; l <= k; ++l) {
    order_inputs.push_back(test::random_features(rng, n, f));
    Rng lr(50 + l);
    Classifier clf = Classifier::init(f, c, ClassifierSpec{}, lr);
    clf.trained_order = l;
    bank.set_classifier(l, std::move(clf));
  }
  AttentionScorer scorer = AttentionScorer::zeros(c);
  std::vector<int> labels{0, 1, 2, 1};

  // lambda = 1 removes the students' own hard loss; with frozen members the
  // top-order block must receive exactly zero gradient.
  OnlineLossSpec spec = make_online_spec(bank, scorer, order_inputs, labels, {0, 1}, 1.0, 1.3,
                                         false, true);
  std::vector<double> flat(online_param_count(bank, c));
  flatten_online(bank, scorer, flat);
  std::vector<double> grad(flat.size());
  online_loss_grad(spec, flat, grad);

  std::size_t top_offset = 0;
  for (int l = 1; l < k; ++l) top_offset += bank.classifier(l).param_count();
  const std::size_t top_size = bank.classifier(k).param_count();
  for (std::size_t i = top_offset; i < top_offset + top_size; ++i) CHECK(grad[i] == 0.0);

  // the scorer still learns through the attention weights
  double scorer_grad_norm = 0.0;
  for (std::size_t i = flat.size() - c; i < flat.size(); ++i)
    scorer_grad_norm += std::abs(grad[i]);
  CHECK(scorer_grad_norm > 0.0);
}

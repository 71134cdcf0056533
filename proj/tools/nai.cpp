// Command-line surface for the node-adaptive inference pipeline:
//   gen | train | distill | infer | bench | sweep
// Exit codes: 0 success, 2 config/validation error, 3 I/O error,
// 4 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nai/checkpoint.hpp"
#include "nai/dataset.hpp"
#include "nai/engine.hpp"
#include "nai/errors.hpp"
#include "nai/metering.hpp"
#include "nai/parallel.hpp"
#include "nai/pipeline.hpp"

namespace {

using namespace nai;

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << body;
  if (!out) throw IoError("failed while writing " + path);
}

SbmConfig preset_config(const std::string& name) {
  SbmConfig cfg;
  if (name == "sbm-small") {
    // Calibrated desk-scale bundle; see tests/fixtures/sbm_calibration.txt.
    cfg.n = 4000;
    cfg.blocks = 4;
    cfg.p_in = 0.02;
    cfg.p_out = 0.002;
    cfg.feature_dim = 32;
    cfg.mu = 1.0;
    cfg.sigma = 3.0;
    cfg.frac_labeled = 0.05;
    cfg.frac_unlabeled = 0.50;
    cfg.frac_validation = 0.20;
  } else if (name == "sbm-tiny") {
    cfg.n = 400;
    cfg.blocks = 4;
    cfg.p_in = 0.08;
    cfg.p_out = 0.008;
    cfg.feature_dim = 16;
    cfg.mu = 1.0;
    cfg.sigma = 2.0;
    cfg.frac_labeled = 0.10;
    cfg.frac_unlabeled = 0.40;
    cfg.frac_validation = 0.25;
  } else if (!name.empty()) {
    throw ConfigError("unknown preset '" + name + "' (expected sbm-small|sbm-tiny)");
  }
  return cfg;
}

EvalSection section_from_string(const std::string& s) {
  if (s == "test") return EvalSection::Test;
  if (s == "validation") return EvalSection::Validation;
  throw ConfigError("unknown eval set '" + s + "' (expected test|validation)");
}

struct NaiPointArg {
  double ts = 0.0;
  int t_min = 1;
  int t_max = 1;
};

NaiPointArg parse_point(const std::string& s) {
  NaiPointArg p;
  if (std::sscanf(s.c_str(), "%lf,%d,%d", &p.ts, &p.t_min, &p.t_max) != 3)
    throw ConfigError("expected ts,tmin,tmax triple, got '" + s + "'");
  return p;
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"node-adaptive inference for linear-propagation GNNs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read key = value defaults from a file");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  int threads = 1;
  app.add_option("--threads", threads, "worker threads for row-parallel kernels");

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic planted-partition dataset");
  std::string gen_out, gen_preset = "sbm-small";
  std::uint64_t gen_seed = 1;
  SbmConfig gen_cfg; // preset values applied before overrides at run time
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--preset", gen_preset, "sbm-small|sbm-tiny");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n", gen_cfg.n, "node count");
  gen->add_option("--blocks", gen_cfg.blocks, "planted blocks / classes");
  gen->add_option("--p-in", gen_cfg.p_in, "intra-block edge probability");
  gen->add_option("--p-out", gen_cfg.p_out, "inter-block edge probability");
  gen->add_option("--f", gen_cfg.feature_dim, "feature dimension");
  gen->add_option("--mu", gen_cfg.mu, "class-mean separation");
  gen->add_option("--sigma", gen_cfg.sigma, "feature noise");
  gen->add_option("--frac-labeled", gen_cfg.frac_labeled, "labeled train fraction");
  gen->add_option("--frac-unlabeled", gen_cfg.frac_unlabeled, "unlabeled train fraction");
  gen->add_option("--frac-val", gen_cfg.frac_validation, "validation fraction");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train the top-order base classifier");
  std::string train_data, train_out, train_backend = "sgc", train_hidden;
  PipelineConfig train_cfg;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "bank output directory")->required();
  train->add_option("--backend", train_backend, "sgc|s2gc|sign");
  train->add_option("--k", train_cfg.k, "propagation order");
  train->add_option("--r-coef", train_cfg.r_coef, "convolution coefficient in [0,1]");
  train->add_option("--epochs", train_cfg.train.epochs, "training epochs");
  train->add_option("--lr", train_cfg.train.lr, "learning rate");
  train->add_option("--weight-decay", train_cfg.train.weight_decay, "L2 weight decay");
  train->add_option("--dropout", train_cfg.train.dropout, "dropout in [0, 0.7]");
  train->add_option("--batch-size", train_cfg.train.batch_size, "minibatch size (0 = full batch)");
  train->add_option("--seed", train_cfg.train.seed, "training seed");
  train->add_option("--hidden", train_hidden, "comma-separated MLP hidden widths (empty = linear)");

  // ---- distill ----
  auto* distill = app.add_subcommand("distill", "offline + online distillation into orders 1..k-1");
  std::string distill_data, distill_bank, distill_out;
  DistillConfig distill_cfg;
  double distill_lr = -1.0;
  int distill_epochs = -1;
  distill->add_option("--data", distill_data, "dataset directory")->required();
  distill->add_option("--bank", distill_bank, "bank directory holding the base classifier")->required();
  distill->add_option("--out", distill_out, "output bank directory (defaults to --bank)");
  distill->add_option("--temp", distill_cfg.temperature, "distillation temperature");
  distill->add_option("--lambda", distill_cfg.lambda, "loss balance in [0,1]");
  distill->add_option("--r-ens", distill_cfg.r_ens, "ensemble size in [2,k]");
  distill->add_option("--epochs", distill_epochs, "epochs for both phases");
  distill->add_option("--offline-epochs", distill_cfg.offline.epochs, "offline phase epochs");
  distill->add_option("--online-epochs", distill_cfg.online.epochs, "online phase epochs");
  distill->add_option("--lr", distill_lr, "learning rate for both phases");
  distill->add_option("--dropout", distill_cfg.offline.dropout, "student dropout");
  distill->add_option("--weight-decay", distill_cfg.offline.weight_decay, "student weight decay");
  distill->add_option("--seed", distill_cfg.offline.seed, "distillation seed");
  std::string scorer_act = "tanh";
  distill->add_option("--scorer-act", scorer_act, "attention activation: tanh|sigmoid|relu");
  distill->add_flag("--mix-logits", distill_cfg.mix_logits, "mix pre-softmax logits in the ensemble");
  distill->add_flag("--stop-teacher-grad", distill_cfg.stop_teacher_grad,
                    "freeze ensemble members in the online phase");

  // ---- infer ----
  auto* infer_cmd = app.add_subcommand("infer", "adaptive inference over an arrival set");
  std::string infer_data, infer_bank, infer_out, infer_section = "test";
  NapConfig infer_cfg;
  infer_cmd->add_option("--data", infer_data, "dataset directory")->required();
  infer_cmd->add_option("--bank", infer_bank, "bank directory")->required();
  infer_cmd->add_option("--out", infer_out, "report output directory")->required();
  infer_cmd->add_option("--ts", infer_cfg.ts, "smoothness threshold");
  infer_cmd->add_option("--tmin", infer_cfg.t_min, "minimum propagation order");
  infer_cmd->add_option("--tmax", infer_cfg.t_max, "maximum propagation order");
  infer_cmd->add_option("--batch-size", infer_cfg.batch_size, "inference batch size");
  infer_cmd->add_flag("--normalized-distance", infer_cfg.normalized_distance,
                      "l2-normalize rows before the distance");
  infer_cmd->add_option("--eval-set", infer_section, "test|validation");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "vanilla vs adaptive comparison table");
  std::string bench_data, bench_bank, bench_out, bench_section = "test";
  std::vector<std::string> bench_points;
  int bench_reps = 3, bench_warmup = 1, bench_batch = 500;
  bench->add_option("--data", bench_data, "dataset directory")->required();
  bench->add_option("--bank", bench_bank, "bank directory")->required();
  bench->add_option("--out", bench_out, "report output directory")->required();
  bench->add_option("--nai", bench_points, "adaptive config as ts,tmin,tmax (repeatable)");
  bench->add_option("--reps", bench_reps, "timing repetitions");
  bench->add_option("--warmup", bench_warmup, "discarded warmup runs");
  bench->add_option("--batch-size", bench_batch, "inference batch size");
  bench->add_option("--eval-set", bench_section, "test|validation");

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "grid search over (ts, tmin, tmax) on validation");
  std::string sweep_data, sweep_bank, sweep_out;
  std::string ts_grid_arg = "auto", tmin_grid_arg, tmax_grid_arg;
  int sweep_batch = 500, ts_auto_count = 7;
  double budget_fp_rel = -1.0;
  double budget_fp_macs = -1.0;
  sweep_cmd->add_option("--data", sweep_data, "dataset directory")->required();
  sweep_cmd->add_option("--bank", sweep_bank, "bank directory")->required();
  sweep_cmd->add_option("--out", sweep_out, "report output directory")->required();
  sweep_cmd->add_option("--ts-grid", ts_grid_arg, "comma-separated thresholds, or 'auto'");
  sweep_cmd->add_option("--ts-auto-count", ts_auto_count, "quantile count for the auto grid");
  sweep_cmd->add_option("--tmin-grid", tmin_grid_arg, "comma-separated t_min values");
  sweep_cmd->add_option("--tmax-grid", tmax_grid_arg, "comma-separated t_max values");
  sweep_cmd->add_option("--budget-fp-rel", budget_fp_rel,
                        "keep candidates with FP MACs <= rel * vanilla FP MACs");
  sweep_cmd->add_option("--budget-fp-macs", budget_fp_macs, "absolute FP MACs budget");
  sweep_cmd->add_option("--batch-size", sweep_batch, "inference batch size");

  try {
    app.parse(argc, argv);
    set_thread_count(threads);

    if (gen->parsed()) {
      // Start from the preset, then apply explicitly supplied dimensions.
      SbmConfig cfg = preset_config(gen_preset);
      auto override_if = [&](const char* flag, auto member) {
        if (gen->count(flag) > 0) cfg.*member = gen_cfg.*member;
      };
      override_if("--n", &SbmConfig::n);
      override_if("--blocks", &SbmConfig::blocks);
      override_if("--p-in", &SbmConfig::p_in);
      override_if("--p-out", &SbmConfig::p_out);
      override_if("--f", &SbmConfig::feature_dim);
      override_if("--mu", &SbmConfig::mu);
      override_if("--sigma", &SbmConfig::sigma);
      override_if("--frac-labeled", &SbmConfig::frac_labeled);
      override_if("--frac-unlabeled", &SbmConfig::frac_unlabeled);
      override_if("--frac-val", &SbmConfig::frac_validation);
      cfg.seed = gen_seed;
      DatasetBundle ds = generate_sbm(cfg, gen_seed);
      write_dataset(ds, gen_out);
      std::cout << "wrote " << gen_out << ": n=" << ds.graph.node_count()
                << " m=" << ds.graph.edge_count() << " f=" << ds.features.cols()
                << " c=" << ds.class_count << "\n";
      return 0;
    }

    if (train->parsed()) {
      DatasetBundle ds = load_dataset_dir(train_data);
      train_cfg.backend = backend_from_string(train_backend);
      if (!train_hidden.empty()) {
        train_cfg.train.classifier.kind = ClassifierKind::Mlp;
        for (int h : parse_ints(train_hidden))
          train_cfg.train.classifier.hidden.push_back(static_cast<std::size_t>(h));
      } else if (train_cfg.backend == Backend::Sign) {
        train_cfg.train.classifier.kind = ClassifierKind::Mlp;
        train_cfg.train.classifier.hidden = {256};
      }
      train_cfg.train.validate();

      TrainingContext ctx = prepare_training(ds, NormKind{train_cfg.r_coef}, train_cfg.backend,
                                             train_cfg.k);
      TrainResult base = train_base(ctx.stack, ctx.train_labels, ctx.train_split, train_cfg.train,
                                    ds.class_count, ctx.holdout_for(train_cfg.k));

      ClassifierBank bank(train_cfg.backend, train_cfg.k);
      bank.set_classifier(train_cfg.k, base.classifier, base.best_val);
      BankManifest meta;
      meta.backend = train_cfg.backend;
      meta.k = train_cfg.k;
      meta.seed = train_cfg.train.seed;
      meta.r_coef = train_cfg.r_coef;
      meta.scorer = AttentionScorer::zeros(static_cast<std::size_t>(ds.class_count));
      if (base.best_val >= 0.0) meta.val_acc[train_cfg.k] = base.best_val;
      save_bank(bank, meta, train_out);
      std::cout << "base classifier order " << train_cfg.k << " val_acc="
                << (base.best_val >= 0.0 ? std::to_string(base.best_val) : "n/a") << "\n";
      return 0;
    }

    if (distill->parsed()) {
      DatasetBundle ds = load_dataset_dir(distill_data);
      LoadedBank loaded = load_bank(distill_bank);
      const int k = loaded.meta.k;
      if (!loaded.bank.has_order(k))
        throw ConfigError("bank in " + distill_bank + " lacks the order-" + std::to_string(k) +
                          " base classifier");
      if (distill_epochs >= 0) {
        distill_cfg.offline.epochs = distill_epochs;
        distill_cfg.online.epochs = distill_epochs;
      }
      if (distill_lr > 0.0) {
        distill_cfg.offline.lr = distill_lr;
        distill_cfg.online.lr = distill_lr;
      }
      distill_cfg.online.seed = Rng::mix(distill_cfg.offline.seed, 0x0a11e);
      distill_cfg.online.dropout = distill_cfg.offline.dropout;
      distill_cfg.online.weight_decay = distill_cfg.offline.weight_decay;
      distill_cfg.scorer_activation = activation_from_string(scorer_act);
      distill_cfg.offline.classifier = loaded.bank.classifier(k).kind() == ClassifierKind::Mlp
                                           ? ClassifierSpec{ClassifierKind::Mlp, {256},
                                                            loaded.bank.classifier(k).activation()}
                                           : ClassifierSpec{};
      distill_cfg.online.classifier = distill_cfg.offline.classifier;
      distill_cfg.validate(k);

      TrainingContext ctx =
          prepare_training(ds, NormKind{loaded.meta.r_coef}, loaded.meta.backend, k);
      ClassifierBank offline =
          offline_distill(loaded.bank.classifier(k), ctx.stack, ctx.train_labels, ctx.train_split,
                          distill_cfg, ds.class_count, ctx.holdouts.empty() ? nullptr : &ctx.holdouts);
      OnlineResult online = online_distill(
          offline,
          AttentionScorer::zeros(static_cast<std::size_t>(ds.class_count),
                                 distill_cfg.scorer_activation),
          ctx.stack, ctx.train_labels, ctx.train_split, distill_cfg, ds.class_count,
          ctx.holdouts.empty() ? nullptr : &ctx.holdouts);

      BankManifest meta = loaded.meta;
      meta.r_ens = distill_cfg.r_ens;
      meta.temperature = distill_cfg.temperature;
      meta.lambda = distill_cfg.lambda;
      meta.scorer = online.scorer;
      meta.val_acc.clear();
      std::cout << "per-order validation accuracy:\n";
      for (int l = 1; l <= k; ++l) {
        if (online.bank.val_acc(l) >= 0.0) meta.val_acc[l] = online.bank.val_acc(l);
        std::cout << "  f^(" << l << "): "
                  << (online.bank.val_acc(l) >= 0.0 ? std::to_string(online.bank.val_acc(l)) : "n/a")
                  << "\n";
      }
      save_bank(online.bank, meta, distill_out.empty() ? distill_bank : distill_out);
      return 0;
    }

    if (infer_cmd->parsed()) {
      DatasetBundle ds = load_dataset_dir(infer_data);
      LoadedBank loaded = load_bank(infer_bank);
      TrainedModel model{loaded.bank, loaded.meta.scorer, loaded.meta.r_coef};
      ArrivalSet arrivals =
          build_arrivals(ds, model.norm(), section_from_string(infer_section));
      EvalRun run = evaluate(arrivals, model, infer_cfg);

      std::filesystem::create_directories(infer_out);
      write_inference_csv(run.outcome, infer_out + "/per_node.csv");
      write_text(infer_out + "/summary.json", inference_summary_json(run.outcome, run.accuracy));
      const std::string text = inference_report_text(run.outcome, run.accuracy);
      write_text(infer_out + "/report.txt", text);
      std::cout << text;
      return 0;
    }

    if (bench->parsed()) {
      DatasetBundle ds = load_dataset_dir(bench_data);
      LoadedBank loaded = load_bank(bench_bank);
      TrainedModel model{loaded.bank, loaded.meta.scorer, loaded.meta.r_coef};
      ArrivalSet arrivals = build_arrivals(ds, model.norm(), section_from_string(bench_section));

      std::vector<MethodResult> results;
      auto run_method = [&](const std::string& name, const NapConfig& cfg) {
        EvalRun last;
        TimingReport timing = benchmark(
            [&]() {
              last = evaluate(arrivals, model, cfg);
              return last.outcome.fp_seconds;
            },
            bench_reps, bench_warmup);
        MethodResult r;
        r.name = name;
        r.accuracy = last.accuracy;
        r.macs = last.outcome.macs;
        r.total_seconds = timing.total_mean_s;
        r.fp_seconds = timing.fp_mean_s;
        r.nodes = arrivals.targets.size();
        results.push_back(std::move(r));
      };

      NapConfig vanilla;
      vanilla.ts = 0.0;
      vanilla.t_min = loaded.meta.k;
      vanilla.t_max = loaded.meta.k;
      vanilla.batch_size = bench_batch;
      run_method("vanilla", vanilla);
      int idx = 1;
      for (const std::string& spec_str : bench_points) {
        const NaiPointArg p = parse_point(spec_str);
        NapConfig cfg;
        cfg.ts = p.ts;
        cfg.t_min = p.t_min;
        cfg.t_max = p.t_max;
        cfg.batch_size = bench_batch;
        run_method("nai_" + std::to_string(idx++), cfg);
      }

      ComparisonTable table = ComparisonTable::build(results, "vanilla");
      std::filesystem::create_directories(bench_out);
      write_text(bench_out + "/comparison.csv", table.to_csv());
      write_text(bench_out + "/comparison.txt", table.to_text());
      std::cout << table.to_text();
      return 0;
    }

    if (sweep_cmd->parsed()) {
      DatasetBundle ds = load_dataset_dir(sweep_data);
      LoadedBank loaded = load_bank(sweep_bank);
      TrainedModel model{loaded.bank, loaded.meta.scorer, loaded.meta.r_coef};
      ArrivalSet arrivals = build_arrivals(ds, model.norm(), EvalSection::Validation);

      std::vector<double> ts_values;
      if (ts_grid_arg == "auto") {
        ts_values = distance_quantile_grid(arrivals, model, ts_auto_count);
        ts_values.push_back(0.0);
      } else {
        ts_values = parse_doubles(ts_grid_arg);
      }
      std::vector<int> tmin_values =
          tmin_grid_arg.empty() ? std::vector<int>{1} : parse_ints(tmin_grid_arg);
      std::vector<int> tmax_values = tmax_grid_arg.empty()
                                         ? std::vector<int>{loaded.meta.k}
                                         : parse_ints(tmax_grid_arg);

      std::vector<SweepPoint> grid;
      for (double ts : ts_values)
        for (int tmin : tmin_values)
          for (int tmax : tmax_values)
            if (tmin <= tmax && tmax <= loaded.meta.k) grid.push_back({ts, tmin, tmax});

      SweepBudget budget;
      if (budget_fp_macs >= 0.0) budget.max_fp_macs = static_cast<std::uint64_t>(budget_fp_macs);
      if (budget_fp_rel >= 0.0) {
        NapConfig vanilla;
        vanilla.t_min = loaded.meta.k;
        vanilla.t_max = loaded.meta.k;
        vanilla.batch_size = sweep_batch;
        EvalRun v = evaluate(arrivals, model, vanilla);
        budget.max_fp_macs = static_cast<std::uint64_t>(
            budget_fp_rel * static_cast<double>(v.outcome.macs.fp()));
      }

      SweepResult result = sweep_arrivals(arrivals, model, grid, sweep_batch, budget);
      std::filesystem::create_directories(sweep_out);
      write_text(sweep_out + "/candidates.csv", sweep_candidates_csv(result));
      write_text(sweep_out + "/pareto.csv", sweep_pareto_csv(result));
      if (result.ranked.empty()) {
        std::cout << "no candidate satisfied the budget\n";
      } else {
        const SweepCandidate& best = result.ranked.front();
        std::cout << "best: ts=" << best.point.ts << " tmin=" << best.point.t_min
                  << " tmax=" << best.point.t_max << " val_acc=" << best.accuracy
                  << " fp_macs=" << best.macs.fp() << "\n";
      }
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

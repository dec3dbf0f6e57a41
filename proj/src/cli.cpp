// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cli.cpp
 * @brief  `slbl` subcommands: gen, relabel, inspect, train, metrics, synth,
 *         pareto.
 */
#include <slbl/cli.hpp>

#include <slbl/diversity.hpp>
#include <slbl/errors.hpp>
#include <slbl/label_store.hpp>
#include <slbl/report_json.hpp>
#include <slbl/trainer.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace slbl::cli {

namespace {

using nlohmann::json;

// Bad parameter values, reported with exit code 1.
class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class Fn> void check_usage(Fn fn) {
  try {
    fn();
  } catch (const std::invalid_argument &e) {
    throw UsageError(e.what());
  }
}

struct Common {
  std::uint64_t seed = 0;
  bool json_only = false;
};

void add_common(CLI::App &sub, Common &c) {
  sub.add_option("--seed", c.seed, "RNG seed")->envname("SLBL_SEED");
  sub.add_flag("--json", c.json_only, "Suppress the human-readable table on stderr");
}

void add_task_options(CLI::App &sub, TaskSpec &s) {
  static const std::map<std::string, DistilledSource> sources = {
      {"class_means", DistilledSource::NoisyClassMeans},
      {"synth", DistilledSource::ClassWiseSynthesis}};
  static const std::map<std::string, SynthOptimizer> optimizers = {
      {"gd", SynthOptimizer::GradientDescent}, {"adam", SynthOptimizer::Adam}};
  sub.add_option("--classes", s.num_classes, "Class count C");
  sub.add_option("--dim", s.dim, "Feature dimension d");
  sub.add_option("--train-per-class", s.train_per_class);
  sub.add_option("--test-per-class", s.test_per_class);
  sub.add_option("--separation", s.separation,
                 "Distance of each class mean from the origin, in noise units");
  sub.add_option("--noise", s.noise, "Blob noise std");
  sub.add_option("--ipc", s.ipc, "Distilled images per class");
  sub.add_option("--distilled-noise", s.distilled_noise);
  sub.add_option("--distilled-source", s.distilled_source)
      ->transform(CLI::CheckedTransformer(sources, CLI::ignore_case));
  sub.add_option("--teacher-l2", s.teacher_l2);
  sub.add_option("--teacher-iterations", s.teacher_iterations);
  sub.add_option("--synth-alpha", s.synth.alpha);
  sub.add_option("--synth-iterations", s.synth.iterations);
  sub.add_option("--synth-step", s.synth.step_size);
  sub.add_option("--synth-optimizer", s.synth.optimizer)
      ->transform(CLI::CheckedTransformer(optimizers, CLI::ignore_case));
}

void add_train_options(CLI::App &sub, TrainConfig &c, std::vector<double> &grid,
                       bool store_shape) {
  if (store_shape) {
    sub.add_option("--epochs", c.epochs, "Training epochs T");
    sub.add_option("--batch-size", c.batch_size, "Batch size B");
    sub.add_option("--pruning-rate", c.pruning_rate, "Label pruning rate p");
    sub.add_option("--k", c.k, "Top-k logits kept (0 = all)");
  }
  sub.add_option("--lr", c.learning_rate, "Peak learning rate");
  sub.add_flag("--dkr,!--no-dkr", c.dkr, "Annealed teacher temperature");
  sub.add_flag("--ca,!--no-ca", c.ca, "Calibrated student temperature");
  sub.add_option("--fixed-tau", c.fixed_tau, "Teacher temperature with --no-dkr");
  sub.add_option("--tau-initial", c.schedule.initial_tau);
  sub.add_option("--tau-decay", c.schedule.decay_factor);
  sub.add_option("--tau-step", c.schedule.step_epochs);
  sub.add_option("--tau-floor", c.schedule.floor_tau);
  sub.add_option("--grid", grid, "Student temperature grid");
  sub.add_flag("--kd-tau-squared", c.scale_kd_by_tau_squared);
  sub.add_option("--label-smoothing", c.label_smoothing);
  sub.add_flag("--shuffle-reuse", c.shuffle_reuse);
}

void apply_grid(TrainConfig &c, const std::vector<double> &grid) {
  if (!grid.empty())
    c.grid = TemperatureGrid(grid);
}

LinearClassifier read_classifier(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception &e) {
    throw FormatError(path + ": " + e.what());
  }
  return classifier_from_json(doc);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f || !(f << text))
    throw std::runtime_error("cannot write " + path.string());
}

void emit(std::ostream &out, const json &doc) { out << doc.dump(2) << '\n'; }

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

void breakdown_table(std::ostream &err, const StorageBreakdown &b,
                     const CompressionReport &r) {
  err << std::left << std::setw(18) << "component" << std::right
      << std::setw(14) << "bytes" << std::setw(10) << "fraction" << '\n';
  for (std::size_t i = 0; i < kStorageComponentCount; ++i) {
    const auto c = static_cast<StorageComponent>(i);
    err << std::left << std::setw(18) << component_name(c) << std::right
        << std::setw(14) << b.of(c) << std::setw(10) << fixed(b.fraction(c))
        << '\n';
  }
  err << std::left << std::setw(18) << "total" << std::right << std::setw(14)
      << b.total_bytes << '\n'
      << "theoretical ratio " << fixed(r.theoretical_z_ratio, 3)
      << "  actual ratio " << fixed(r.actual_ratio, 3) << '\n';
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  CLI::App app("Soft-label storage, relabeling and student training toolkit",
               "slbl");
  app.set_config("--config", "", "TOML/INI file; sections name subcommands");
  app.fallthrough();
  app.require_subcommand(1);

  std::function<void()> action;

  // gen
  Common gen_c;
  TaskSpec gen_spec;
  std::string gen_dir;
  auto *gen = app.add_subcommand("gen", "Generate a task: train/test/distilled sets and teacher");
  add_common(*gen, gen_c);
  add_task_options(*gen, gen_spec);
  gen->add_option("--out-dir", gen_dir, "Output directory")->required();
  gen->callback([&] {
    action = [&] {
      gen_spec.seed = gen_c.seed;
      check_usage([&] { gen_spec.validate(); });
      const Task task = generate_task(gen_spec);
      const std::filesystem::path dir(gen_dir);
      std::filesystem::create_directories(dir);
      write_features((dir / "train.sfmx").string(), task.train);
      write_features((dir / "test.sfmx").string(), task.test);
      write_features((dir / "distilled.sfmx").string(), task.distilled);
      write_text(dir / "teacher.json", to_json(task.teacher).dump() + "\n");
      if (!gen_c.json_only)
        err << "teacher train accuracy " << fixed(task.teacher_train_accuracy)
            << (task.degenerate ? "  (degenerate task)" : "") << '\n';
      emit(out, {{"task", to_json(gen_spec)},
                 {"teacher_train_accuracy", task.teacher_train_accuracy},
                 {"teacher_test_accuracy", accuracy(task.teacher, task.test)},
                 {"degenerate", task.degenerate},
                 {"rows", {{"train", task.train.rows()},
                           {"test", task.test.rows()},
                           {"distilled", task.distilled.rows()}}}});
    };
  });

  // relabel
  Common rel_c;
  std::string rel_distilled, rel_teacher, rel_out;
  std::uint32_t rel_epochs = 300, rel_batch = 10, rel_k = 0;
  double rel_p = 0.0;
  auto *rel = app.add_subcommand("relabel", "Relabel the distilled set into a label store");
  add_common(*rel, rel_c);
  rel->add_option("--distilled", rel_distilled)->required()->check(CLI::ExistingFile);
  rel->add_option("--teacher", rel_teacher)->required()->check(CLI::ExistingFile);
  rel->add_option("--out", rel_out, "Label store path")->required();
  rel->add_option("--epochs", rel_epochs, "Training epochs T");
  rel->add_option("--batch-size", rel_batch, "Batch size B");
  rel->add_option("--pruning-rate", rel_p, "Label pruning rate p");
  rel->add_option("--k", rel_k, "Top-k logits kept (0 = all)");
  rel->callback([&] {
    action = [&] {
      const FeatureMatrix distilled = read_features(rel_distilled);
      const LinearClassifier teacher = read_classifier(rel_teacher);
      const std::uint32_t bpe = full_batches_per_epoch(distilled.rows(), rel_batch);
      PrunePlan plan;
      check_usage([&] {
        if (rel_k > teacher.num_classes)
          throw std::invalid_argument("--k exceeds the class count");
        if (bpe < 1)
          throw std::invalid_argument("distilled set is smaller than one batch");
        plan = prune_plan(rel_epochs, rel_p, bpe);
      });
      const LabelStore store =
          relabel(distilled, teacher, plan, rel_batch, rel_k, rel_c.seed);
      write_store(rel_out, store);
      const json report = inspect_report(store.header);
      if (!rel_c.json_only) {
        const StorageBreakdown b = storage_breakdown(store);
        breakdown_table(err, b, compression_report(b, BaselineShape::of(store.header)));
      }
      emit(out, report);
    };
  });

  // inspect
  Common ins_c;
  std::string ins_store;
  auto *ins = app.add_subcommand("inspect", "Storage breakdown and compression of a label store");
  add_common(*ins, ins_c);
  ins->add_option("--store", ins_store)->required()->check(CLI::ExistingFile);
  ins->callback([&] {
    action = [&] {
      const LabelStore store = read_store(ins_store);
      if (!ins_c.json_only) {
        const StorageBreakdown b = storage_breakdown(store);
        breakdown_table(err, b, compression_report(b, BaselineShape::of(store.header)));
      }
      emit(out, inspect_report(store.header));
    };
  });

  // train
  Common tr_c;
  TrainConfig tr_cfg;
  std::vector<double> tr_grid;
  std::string tr_store, tr_distilled, tr_test, tr_report;
  auto *tr = app.add_subcommand("train", "Train a student from a label store");
  add_common(*tr, tr_c);
  add_train_options(*tr, tr_cfg, tr_grid, false);
  tr->add_option("--store", tr_store)->required()->check(CLI::ExistingFile);
  tr->add_option("--distilled", tr_distilled)->required()->check(CLI::ExistingFile);
  tr->add_option("--test", tr_test)->required()->check(CLI::ExistingFile);
  tr->add_option("--report", tr_report, "Also write the JSON report to this file");
  tr->callback([&] {
    action = [&] {
      const LabelStore store = read_store(tr_store);
      tr_cfg.seed = tr_c.seed;
      // The store fixes T, B and k; p is implied by the retained epochs.
      tr_cfg.epochs = store.header.total_epochs;
      tr_cfg.batch_size = store.header.batch_size;
      tr_cfg.k = store.header.k;
      tr_cfg.pruning_rate =
          1.0 - static_cast<double>(store.header.retained_epochs) /
                    static_cast<double>(store.header.total_epochs);
      check_usage([&] {
        apply_grid(tr_cfg, tr_grid);
        tr_cfg.validate();
      });
      const FeatureMatrix distilled = read_features(tr_distilled);
      const FeatureMatrix test = read_features(tr_test);
      const TrainResult result = train_student(store, distilled, test, tr_cfg);
      const json report = {{"config", to_json(tr_cfg)}, {"result", to_json(result)}};
      if (!tr_report.empty())
        write_text(tr_report, report.dump(2) + "\n");
      if (!tr_c.json_only)
        err << "test accuracy " << fixed(result.test_accuracy) << "  storage "
            << result.storage_bytes << " bytes  final loss "
            << fixed(result.epoch_loss.back(), 6) << '\n';
      emit(out, report);
    };
  });

  // metrics
  Common met_c;
  std::string met_features, met_reference;
  std::optional<double> met_bandwidth;
  auto *met = app.add_subcommand("metrics", "Within-class cosine and MMD of feature files");
  add_common(*met, met_c);
  met->add_option("--features", met_features)->required()->check(CLI::ExistingFile);
  met->add_option("--reference", met_reference, "Real set for MMD")
      ->check(CLI::ExistingFile);
  met->add_option("--bandwidth", met_bandwidth, "Kernel sigma (default: median distance)");
  met->callback([&] {
    action = [&] {
      const FeatureMatrix features = read_features(met_features);
      if (!features.has_labels())
        throw std::invalid_argument("metrics needs a labelled feature file");
      DiversityReport report = within_class_cosine(features);
      if (!met_reference.empty()) {
        const FeatureMatrix reference = read_features(met_reference);
        const double sigma = met_bandwidth.value_or(median_bandwidth(features, reference));
        report.bandwidth = sigma;
        report.mmd_squared = mmd_squared(features, reference, sigma);
      }
      if (!met_c.json_only) {
        err << "mean within-class cosine " << fixed(report.overall_mean)
            << " (std " << fixed(report.overall_std) << ")";
        if (report.mmd_squared)
          err << "  mmd^2 " << fixed(*report.mmd_squared, 6);
        err << '\n';
      }
      emit(out, to_json(report));
    };
  });

  // synth
  Common syn_c;
  SynthConfig syn_cfg;
  std::string syn_train, syn_teacher, syn_out;
  std::vector<std::uint32_t> syn_classes;
  bool syn_independent = false;
  static const std::map<std::string, SynthOptimizer> optimizers = {
      {"gd", SynthOptimizer::GradientDescent}, {"adam", SynthOptimizer::Adam}};
  auto *syn = app.add_subcommand("synth", "Class-wise statistic-matching synthesis");
  add_common(*syn, syn_c);
  syn->add_option("--train", syn_train, "Real labelled set the statistics come from")
      ->required()->check(CLI::ExistingFile);
  syn->add_option("--teacher", syn_teacher, "Teacher on raw inputs")
      ->required()->check(CLI::ExistingFile);
  syn->add_option("--out", syn_out, "Output feature file")->required();
  syn->add_option("--class", syn_classes, "Classes to synthesize (default: all)");
  syn->add_option("--ipc", syn_cfg.batch_size, "Samples per class");
  syn->add_option("--alpha", syn_cfg.alpha);
  syn->add_option("--iterations", syn_cfg.iterations);
  syn->add_option("--step", syn_cfg.step_size);
  syn->add_option("--optimizer", syn_cfg.optimizer)
      ->transform(CLI::CheckedTransformer(optimizers, CLI::ignore_case));
  syn->add_flag("--independent", syn_independent,
                "Optimize each sample alone against global statistics");
  syn->callback([&] {
    action = [&] {
      check_usage([&] { syn_cfg.validate(); });
      const FeatureMatrix train = read_features(syn_train);
      const LinearClassifier teacher = read_classifier(syn_teacher);
      const ClassStats stats = compute_class_stats(train, teacher.num_classes);
      const LinearClassifier normalized = fold_input_normalization(teacher, stats);
      if (syn_classes.empty())
        for (std::uint32_t c = 0; c < teacher.num_classes; ++c)
          syn_classes.push_back(c);
      check_usage([&] {
        for (auto c : syn_classes)
          if (c >= teacher.num_classes)
            throw std::invalid_argument("--class beyond the teacher's classes");
      });
      FeatureMatrix batch;
      json per_class = json::array();
      for (std::uint32_t c : syn_classes) {
        SynthConfig cfg = syn_cfg;
        cfg.seed = syn_c.seed * 1000003ULL + c;
        const SynthResult r = syn_independent
                                  ? synthesize_independent(normalized, stats, c, cfg)
                                  : synthesize_class_batch(normalized, stats, c, cfg);
        batch.append(r.batch);
        per_class.push_back({{"class_id", c},
                             {"initial_loss", r.initial_loss},
                             {"final_loss", r.final_loss}});
        if (!syn_c.json_only)
          err << "class " << c << "  loss " << fixed(r.initial_loss) << " -> "
              << fixed(r.final_loss) << '\n';
      }
      write_features(syn_out, batch);
      emit(out, {{"mode", syn_independent ? "independent" : "class_wise"},
                 {"rows", batch.rows()},
                 {"classes", per_class}});
    };
  });

  // pareto
  Common par_c;
  TaskSpec par_spec;
  TrainConfig par_cfg;
  std::vector<double> par_grid_tau, par_rates{0.0, 0.5, 0.8, 0.9};
  std::vector<std::uint32_t> par_ks{0, 5, 3, 2};
  std::vector<std::uint64_t> par_seeds{0, 1, 2, 3, 4};
  unsigned par_jobs = 1;
  auto *par = app.add_subcommand("pareto", "Accuracy-vs-storage sweep over pruning rate x top-k");
  add_common(*par, par_c);
  add_task_options(*par, par_spec);
  add_train_options(*par, par_cfg, par_grid_tau, false);
  par->add_option("--epochs", par_cfg.epochs, "Training epochs T");
  par->add_option("--batch-size", par_cfg.batch_size, "Batch size B");
  par->add_option("--pruning-rates", par_rates, "Pruning rates to sweep");
  par->add_option("--ks", par_ks, "Top-k values to sweep (0 = all)");
  par->add_option("--seeds", par_seeds, "Seeds averaged per config");
  par->add_option("--jobs", par_jobs, "Parallel runs")->check(CLI::PositiveNumber);
  par->callback([&] {
    action = [&] {
      SweepConfig sweep;
      sweep.seeds = par_seeds;
      // --seed offsets the seed list so sweeps with another --seed differ.
      for (auto &s : sweep.seeds)
        s += par_c.seed;
      sweep.jobs = par_jobs;
      for (double p : par_rates)
        for (std::uint32_t k : par_ks)
          sweep.grid.emplace_back(p, k);
      check_usage([&] {
        apply_grid(par_cfg, par_grid_tau);
        par_spec.validate();
      });
      sweep.base = par_cfg;
      ParetoTable table;
      check_usage([&] { table = pareto_sweep(par_spec, sweep); });
      if (!par_c.json_only) {
        err << std::right << std::setw(6) << "p" << std::setw(5) << "k"
            << std::setw(14) << "bytes" << std::setw(10) << "accuracy"
            << "  front\n";
        for (const auto &pt : table.points)
          err << std::setw(6) << fixed(pt.pruning_rate, 2) << std::setw(5) << pt.k
              << std::setw(14) << pt.storage_bytes << std::setw(10)
              << fixed(pt.mean_accuracy) << (pt.non_dominated ? "  *" : "")
              << '\n';
      }
      emit(out, {{"task", to_json(par_spec)},
                 {"config", to_json(sweep.base)},
                 {"seeds", sweep.seeds},
                 {"table", to_json(table)}});
    };
  });

  for (auto *sub : {gen, rel, ins, tr, met, syn, par})
    sub->configurable();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success &e) {
    // --help and friends; prints the help of the subcommand that asked.
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n'
        << "run 'slbl --help' for usage\n";
    return kExitUsage;
  }

  try {
    action();
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int run(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace slbl::cli

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   train.cpp
 * @brief  Student training from a label store with annealed teacher
 *         temperature and per-epoch student temperature calibration.
 */
#include <slbl/trainer.hpp>

#include "seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace slbl {

namespace {

SparseProbs smooth(const SparseProbs &p, double eps) {
  if (eps == 0.0)
    return p;
  std::vector<double> dense = p.dense();
  const double uniform = eps / static_cast<double>(dense.size());
  std::vector<ClassId> support(dense.size());
  std::iota(support.begin(), support.end(), ClassId{0});
  for (double &v : dense)
    v = (1.0 - eps) * v + uniform;
  return SparseProbs(p.num_classes(), std::move(support), std::move(dense));
}

class ReuseOrder {
public:
  ReuseOrder(const PrunePlan &plan, bool shuffle, std::uint64_t seed)
      : plan_(plan), shuffle_(shuffle), seed_(seed) {}

  std::uint32_t stored_epoch(std::size_t epoch) {
    if (!shuffle_)
      return plan_.stored_epoch_for(epoch);
    const std::size_t pass = epoch / plan_.retained_epochs;
    if (pass != pass_ || perm_.empty()) {
      perm_.resize(plan_.retained_epochs);
      std::iota(perm_.begin(), perm_.end(), 0u);
      std::mt19937_64 rng(detail::derive_seed({seed_, detail::kReuseShuffle, pass}));
      std::shuffle(perm_.begin(), perm_.end(), rng);
      pass_ = pass;
    }
    return perm_[epoch % plan_.retained_epochs];
  }

private:
  PrunePlan plan_;
  bool shuffle_;
  std::uint64_t seed_;
  std::size_t pass_ = 0;
  std::vector<std::uint32_t> perm_;
};

} // namespace

void TrainConfig::validate() const {
  if (epochs < 1)
    throw std::invalid_argument("train epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("train batch size must be >= 1");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be > 0");
  if (!(pruning_rate >= 0.0 && pruning_rate < 1.0))
    throw std::invalid_argument("pruning rate must be in [0, 1)");
  if (!(fixed_tau > 0.0))
    throw std::invalid_argument("fixed teacher temperature must be > 0");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw std::invalid_argument("label smoothing must be in [0, 1)");
  schedule.validate();
}

TrainResult train_student(const LabelStore &store, const FeatureMatrix &distilled,
                          const FeatureMatrix &test, const TrainConfig &cfg,
                          const SampleObserver &observer) {
  cfg.validate();
  if (auto v = store.find_violation())
    throw std::invalid_argument("invalid label store: " + *v);
  const StoreHeader &h = store.header;
  if (distilled.has_labels() && distilled.num_classes() != h.num_classes)
    throw std::invalid_argument("store and task disagree on the class count");
  if (test.num_classes() != h.num_classes)
    throw std::invalid_argument("store and test set disagree on the class count");
  if (test.dim() != distilled.dim())
    throw std::invalid_argument("test set and distilled set disagree on d");
  for (const auto &r : store.batches) {
    for (auto i : r.image_indices)
      if (i >= distilled.rows())
        throw std::invalid_argument("store references images beyond the distilled set");
    for (const auto &a : r.aug)
      if (a.cutmix_partner >= distilled.rows())
        throw std::invalid_argument("store references partners beyond the distilled set");
  }

  const std::size_t c_count = h.num_classes;
  const std::size_t d = distilled.dim();
  PrunePlan plan;
  plan.total_epochs = h.total_epochs;
  plan.batches_per_epoch = h.batches_per_epoch;
  plan.retained_epochs = h.retained_epochs;
  ReuseOrder reuse(plan, cfg.shuffle_reuse, cfg.seed);

  LinearClassifier student;
  student.num_classes = h.num_classes;
  student.dim = d;
  student.weights.assign(c_count * d, 0.0);
  student.bias.assign(c_count, 0.0);
  {
    std::mt19937_64 rng(detail::derive_seed({cfg.seed, detail::kStudentInit}));
    std::normal_distribution<double> normal(0.0, 0.01);
    for (double &w : student.weights)
      w = normal(rng);
  }

  TrainResult result;
  const KdLossOptions kd_opts{cfg.scale_kd_by_tau_squared};
  const double total_steps =
      static_cast<double>(cfg.epochs) * static_cast<double>(h.batches_per_epoch);
  std::size_t step = 0;
  double tau_hat = 1.0;
  std::vector<double> grad_w(c_count * d), grad_b(c_count);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::uint32_t stored = reuse.stored_epoch(epoch);
    const double tau_t =
        cfg.dkr ? teacher_temperature(cfg.schedule, epoch) : cfg.fixed_tau;
    const double student_tau = cfg.ca ? tau_hat : 1.0;
    result.stored_epoch.push_back(stored);
    result.teacher_tau.push_back(tau_t);
    result.student_tau.push_back(student_tau);

    double epoch_loss = 0.0;
    std::size_t samples = 0;
    std::vector<std::vector<double>> last_batch_inputs;
    std::vector<SparseProbs> batch_teacher;
    for (std::uint32_t b = 0; b < h.batches_per_epoch; ++b) {
      const std::size_t batch_index = std::size_t{stored} * h.batches_per_epoch + b;
      const BatchRecord &record = store.batches[batch_index];
      const bool last = b + 1 == h.batches_per_epoch;
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      if (last) {
        last_batch_inputs.clear();
        batch_teacher.clear();
      }
      for (std::uint32_t row = 0; row < h.batch_size; ++row) {
        std::vector<double> x = reconstruct_input(distilled, record, row);
        SparseProbs teacher =
            smooth(store.teacher_probs(batch_index, row, tau_t), cfg.label_smoothing);
        if (observer)
          observer(epoch, batch_index, row, x, teacher);
        const LogitVector z(student.logits(x));
        const KdLoss kd = kd_loss(teacher, z, student_tau, kd_opts);
        epoch_loss += kd.loss;
        ++samples;
        for (std::size_t c = 0; c < c_count; ++c) {
          const double g = kd.grad[c];
          grad_b[c] += g;
          double *gw = grad_w.data() + c * d;
          for (std::size_t j = 0; j < d; ++j)
            gw[j] += g * x[j];
        }
        if (last) {
          last_batch_inputs.push_back(std::move(x));
          batch_teacher.push_back(std::move(teacher));
        }
      }
      const double lr = cfg.learning_rate * 0.5 *
                        (1.0 + std::cos(std::numbers::pi *
                                        static_cast<double>(step) / total_steps));
      const double scale = lr / static_cast<double>(h.batch_size);
      for (std::size_t i = 0; i < grad_w.size(); ++i)
        student.weights[i] -= scale * grad_w[i];
      for (std::size_t c = 0; c < c_count; ++c)
        student.bias[c] -= scale * grad_b[c];
      ++step;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(samples));

    if (cfg.ca) {
      // Last batch of this epoch, scored with the updated student.
      std::vector<LogitVector> logits;
      logits.reserve(last_batch_inputs.size());
      for (const auto &x : last_batch_inputs)
        logits.emplace_back(student.logits(x));
      const CalibrationResult cal =
          calibrate_student_temperature(batch_teacher, logits, cfg.grid);
      tau_hat = cal.tau_star;
      result.calibrated_tau.push_back(cal.tau_star);
    }
  }

  result.test_accuracy = accuracy(student, test);
  const StorageBreakdown breakdown = storage_breakdown(store);
  result.storage_bytes = breakdown.total_bytes;
  result.compression = compression_report(breakdown, BaselineShape::of(h));
  result.student = std::move(student);
  return result;
}

TrainResult run_pipeline(const Task &task, const TrainConfig &cfg) {
  cfg.validate();
  const std::uint32_t bpe =
      full_batches_per_epoch(task.distilled.rows(), cfg.batch_size);
  if (bpe < 1)
    throw std::invalid_argument("distilled set smaller than one batch");
  const PrunePlan plan = prune_plan(cfg.epochs, cfg.pruning_rate, bpe);
  const LabelStore store = relabel(task.distilled, task.teacher, plan,
                                   cfg.batch_size, cfg.k, cfg.seed);
  return train_student(store, task.distilled, task.test, cfg);
}

} // namespace slbl

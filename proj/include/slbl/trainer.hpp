// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Desk-scale distillation harness: synthetic task, relabeling into a
 *         label store, student training from the store, and Pareto sweeps.
 */
#ifndef SLBL_TRAINER_HPP_
#define SLBL_TRAINER_HPP_

#include <slbl/calibration.hpp>
#include <slbl/features.hpp>
#include <slbl/label_store.hpp>
#include <slbl/synth.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace slbl {

enum class DistilledSource { NoisyClassMeans, ClassWiseSynthesis };

struct TaskSpec {
  std::uint32_t num_classes = 10;
  std::size_t dim = 16;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 300;
  /// Distance of each class mean from the origin, in units of the noise std.
  double separation = 3.0;
  double noise = 1.0;
  std::size_t ipc = 10;
  /// Std of the seeded noise added to class means for the distilled set.
  double distilled_noise = 1.0;
  DistilledSource distilled_source = DistilledSource::NoisyClassMeans;
  SynthConfig synth; ///< used with ClassWiseSynthesis; batch_size is ipc
  double teacher_l2 = 1e-3;
  std::size_t teacher_iterations = 3000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Task {
  FeatureMatrix train;
  FeatureMatrix test;
  FeatureMatrix distilled;
  LinearTeacher teacher;
  double teacher_train_accuracy = 0.0;
  /// Zero separation with more than one class: labels carry no signal.
  bool degenerate = false;
};

Task generate_task(const TaskSpec &spec);

/// L2-regularized multinomial logistic regression, full-batch.
LinearTeacher fit_logistic_teacher(const FeatureMatrix &data, double l2,
                                   std::size_t max_iterations,
                                   double grad_tolerance = 1e-7);

double accuracy(const LinearClassifier &model, const FeatureMatrix &data);

/// Ranges the augmentation parameters are drawn from.
struct AugmentationRanges {
  double scale_min = 0.75;
  double scale_max = 1.25;
  double shift_max = 0.5;
  double flip_probability = 0.5;
};

/// Input seen by the teacher for one stored sample:
/// mix = lambda * x + (1 - lambda) * partner; y_j = scale_{j%2} * mix_j +
/// shift_{j%2} with crop = (scale_0, shift_0, scale_1, shift_1); y = -y when
/// flipped.
std::vector<double> apply_augmentation(std::span<const double> x,
                                       std::span<const double> partner,
                                       const AugmentationRecord &aug,
                                       float lambda);

/// Augmented input for row `row` of `record`, looked up in `distilled`.
std::vector<double> reconstruct_input(const FeatureMatrix &distilled,
                                      const BatchRecord &record,
                                      std::size_t row);

/// Builds the store for the retained epochs of `plan`. Epoch e's
/// augmentations depend only on (seed, e), so a pruned store is a prefix of
/// the unpruned one. k == 0 stores full logits.
LabelStore relabel(const FeatureMatrix &distilled, const LinearTeacher &teacher,
                   const PrunePlan &plan, std::uint32_t batch_size,
                   std::uint32_t k, std::uint64_t seed,
                   const AugmentationRanges &ranges = {});

struct TrainConfig {
  std::uint32_t epochs = 300;
  std::uint32_t batch_size = 10;
  double learning_rate = 0.05;
  double pruning_rate = 0.0;
  std::uint32_t k = 0; ///< 0 = full logits
  bool dkr = true;     ///< annealed teacher temperature
  bool ca = true;      ///< calibrated student temperature
  /// Teacher temperature when dkr is off.
  double fixed_tau = 2.0;
  TemperatureSchedule schedule;
  TemperatureGrid grid;
  bool scale_kd_by_tau_squared = false;
  /// Mixes the teacher distribution with uniform: (1 - e) p + e / C.
  double label_smoothing = 0.0;
  /// Reshuffle the stored-epoch order on every pass instead of cycling.
  bool shuffle_reuse = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  std::vector<double> teacher_tau;    ///< tau_t used in each epoch
  std::vector<double> student_tau;    ///< tau_hat used in each epoch
  std::vector<double> calibrated_tau; ///< tau_hat* found at each epoch's end (ca only)
  std::vector<std::uint32_t> stored_epoch; ///< stored epoch reused at each epoch
  double test_accuracy = 0.0;
  std::uint64_t storage_bytes = 0;
  CompressionReport compression;
  LinearClassifier student;
};

/// Called for every training sample with the augmented input it was built
/// from and the stored teacher distribution at the epoch's temperature.
using SampleObserver = std::function<void(
    std::size_t epoch, std::size_t stored_batch, std::size_t row,
    std::span<const double> input, const SparseProbs &teacher)>;

TrainResult train_student(const LabelStore &store, const FeatureMatrix &distilled,
                          const FeatureMatrix &test, const TrainConfig &cfg,
                          const SampleObserver &observer = {});

/// Prune plan and store for cfg on task, trained end to end.
TrainResult run_pipeline(const Task &task, const TrainConfig &cfg);

struct SweepPoint {
  double pruning_rate = 0.0;
  std::uint32_t k = 0;
  std::uint64_t storage_bytes = 0;
  double theoretical_ratio = 0.0;
  double actual_ratio = 0.0;
  std::vector<double> accuracies; ///< one per seed
  double mean_accuracy = 0.0;
  bool non_dominated = false;
};

struct ParetoTable {
  std::vector<SweepPoint> points; ///< sorted by storage ascending
};

struct SweepConfig {
  TrainConfig base;
  std::vector<std::pair<double, std::uint32_t>> grid; ///< (p, k)
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  unsigned jobs = 1;
};

/// Each seed generates its own task (spec.seed = seed) shared by all configs.
ParetoTable pareto_sweep(const TaskSpec &spec, const SweepConfig &sweep);

/// True where no other point has storage <= and accuracy >= with one strict.
std::vector<bool> non_dominated(std::span<const std::uint64_t> storage,
                                std::span<const double> accuracy);

} // namespace slbl

#endif // SLBL_TRAINER_HPP_

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   synth.hpp
 * @brief  Synthetic per-class feature batches by class-wise statistic
 *         matching under a globally normalized classification loss.
 *
 * Objective for a batch X of one class c:
 *
 *   sum_i CE(teacher((x_i - mu_global) / sqrt(var_global + eps)), c)
 *     + alpha * (|mean(X) - mu_c|_2 + |var(X) - var_c|_2)
 *
 * Norms are unsquared. Batch statistics use the population variance.
 */
#ifndef SLBL_SYNTH_HPP_
#define SLBL_SYNTH_HPP_

#include <slbl/features.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace slbl {

struct ClassStats {
  std::size_t dim = 0;
  std::vector<std::vector<double>> class_mean; ///< [C][d]
  std::vector<std::vector<double>> class_var;  ///< [C][d], population
  std::vector<double> global_mean;
  std::vector<double> global_var;
  double epsilon = 1e-5;

  std::uint32_t num_classes() const {
    return static_cast<std::uint32_t>(class_mean.size());
  }
};

/// Per-class and global mean / population variance. Every class in
/// [0, num_classes) must have at least one row; num_classes == 0 uses the
/// matrix's own class count.
ClassStats compute_class_stats(const FeatureMatrix &data,
                               std::uint32_t num_classes = 0);

/// Affine multinomial classifier: logits = W x + b. Used for both the
/// teacher and the distilled student.
struct LinearClassifier {
  std::uint32_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<double> weights; ///< [C][d] row-major
  std::vector<double> bias;    ///< [C]

  std::vector<double> logits(std::span<const double> x) const;
  ClassId predict(std::span<const double> x) const;
  void validate() const;
};

using LinearTeacher = LinearClassifier;

/// Teacher acting on globally normalized inputs that computes the same
/// logits as `raw` does on unnormalized ones.
LinearTeacher fold_input_normalization(const LinearTeacher &raw,
                                       const ClassStats &stats);

enum class SynthOptimizer { GradientDescent, Adam };

struct SynthConfig {
  double alpha = 0.01;
  std::size_t iterations = 1000;
  double step_size = 0.05;
  std::size_t batch_size = 10; ///< images per class
  std::uint64_t seed = 0;
  SynthOptimizer optimizer = SynthOptimizer::GradientDescent;

  void validate() const;
};

struct ObjectiveValue {
  double loss = 0.0;
  double cross_entropy = 0.0;
  double stat_loss = 0.0;     ///< unweighted statistic term
  std::vector<double> grad;   ///< d loss / d batch, row-major
};

/// Objective and exact gradient for `batch` (rows of dimension stats.dim)
/// against the statistics of `class_id`. `teacher` acts on normalized input.
ObjectiveValue class_matching_objective(const LinearTeacher &teacher,
                                        const ClassStats &stats,
                                        ClassId class_id, double alpha,
                                        std::span<const double> batch);

struct SynthResult {
  FeatureMatrix batch;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Gradient descent (step cosine-decayed to 0) from a seeded N(0, 1)
/// initialization. Throws OptimizationError on a non-finite loss.
SynthResult synthesize_class_batch(const LinearTeacher &teacher,
                                   const ClassStats &stats, ClassId class_id,
                                   const SynthConfig &cfg);

/// Baseline: each of cfg.batch_size samples optimized alone against the
/// global statistics, with the same classification term.
SynthResult synthesize_independent(const LinearTeacher &teacher,
                                   const ClassStats &stats, ClassId class_id,
                                   const SynthConfig &cfg);

} // namespace slbl

#endif // SLBL_SYNTH_HPP_

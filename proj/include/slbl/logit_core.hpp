// SPDX-License-Identifier: Apache-2.0
/**
 * @file   logit_core.hpp
 * @brief  Temperature softmax, top-k logit quantization and KL kernels.
 *
 * Every kernel works in double precision, including when the inputs were
 * loaded from 32-bit storage. All functions are pure.
 */
#ifndef SLBL_LOGIT_CORE_HPP_
#define SLBL_LOGIT_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace slbl {

using ClassId = std::uint32_t;

/// Pre-softmax outputs over C >= 2 classes. All entries finite.
class LogitVector {
public:
  explicit LogitVector(std::vector<double> values);

  std::size_t num_classes() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const LogitVector &) const = default;

private:
  std::vector<double> values_;
};

/// Top-k compressed logits. Entries are ordered by (value desc, index asc).
class QuantizedLogits {
public:
  QuantizedLogits(std::uint32_t num_classes, std::vector<ClassId> indices,
                  std::vector<double> values);

  std::uint32_t num_classes() const noexcept { return num_classes_; }
  std::size_t k() const noexcept { return indices_.size(); }
  std::span<const ClassId> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  bool operator==(const QuantizedLogits &) const = default;

private:
  std::uint32_t num_classes_;
  std::vector<ClassId> indices_;
  std::vector<double> values_;
};

/// Distribution with an explicit support; probability is exactly 0 elsewhere.
class SparseProbs {
public:
  SparseProbs(std::uint32_t num_classes, std::vector<ClassId> support,
              std::vector<double> probs);

  std::uint32_t num_classes() const noexcept { return num_classes_; }
  std::span<const ClassId> support() const noexcept { return support_; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Full-length vector with zeros off the support.
  std::vector<double> dense() const;

private:
  std::uint32_t num_classes_;
  std::vector<ClassId> support_;
  std::vector<double> probs_;
};

/// Distribution over all C classes.
///
/// Entries may underflow to exactly 0 for extreme logit spreads; kl_div
/// reports +inf when such an entry lies on the reference support.
class DenseProbs {
public:
  explicit DenseProbs(std::vector<double> probs);

  std::size_t num_classes() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  /// Support = every class with nonzero probability.
  SparseProbs to_sparse() const;

private:
  std::vector<double> probs_;
};

DenseProbs softmax_t(const LogitVector &z, double tau);

/// log softmax(z / tau), max-stabilized. Finite wherever z is finite.
std::vector<double> log_softmax_t(std::span<const double> z, double tau);

/// k largest logits; ties go to the lower class index.
QuantizedLogits topk_quantize(const LogitVector &z, std::size_t k);

/// Zero-filled storage-layout reconstruction. Not a teacher distribution:
/// use quantized_probs for that.
LogitVector dequantize(const QuantizedLogits &q);

/// Softmax restricted to the stored classes.
SparseProbs quantized_probs(const QuantizedLogits &q, double tau);

/// KL(p || q) summed over support(p).
double kl_div(const SparseProbs &p, const DenseProbs &q);

/// KL(p || softmax(student / tau_hat)) evaluated in the log domain, so it
/// stays finite where the explicit probabilities would underflow.
double kl_div_logits(const SparseProbs &p, const LogitVector &student,
                     double tau_hat);

double entropy(const SparseProbs &p);
double entropy(const DenseProbs &p);

/// Student logit gap z_i - z_j that reproduces the teacher ratio p_i / p_j
/// at student temperature tau_hat.
double optimal_logit_gap(double p_i, double p_j, double tau_hat);

/// Largest student temperature that can reproduce probability ratio r when
/// logit gaps are capped at delta_z_max.
double temperature_upper_bound(double delta_z_max, double r);

/// Student logits whose softmax at tau_hat matches p on its support: gaps
/// follow optimal_logit_gap and off-support classes sit off_support_margin
/// * tau_hat below the smallest support logit.
LogitVector matching_student_logits(const SparseProbs &p, double tau_hat,
                                    double off_support_margin = 50.0);

} // namespace slbl

#endif // SLBL_LOGIT_CORE_HPP_

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   calibration.hpp
 * @brief  Teacher temperature annealing, student temperature grid search and
 *         the distillation loss.
 */
#ifndef SLBL_CALIBRATION_HPP_
#define SLBL_CALIBRATION_HPP_

#include <slbl/logit_core.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace slbl {

/// Step-decayed teacher temperature with a floor.
struct TemperatureSchedule {
  double initial_tau = 20.0;
  double decay_factor = 0.7;
  std::size_t step_epochs = 30;
  double floor_tau = 2.0;

  /// Throws std::invalid_argument when the fields break the invariants.
  void validate() const;
};

/// max(floor, initial * decay^floor(epoch / step)).
double teacher_temperature(const TemperatureSchedule &sched, std::size_t epoch);

/// Candidate student temperatures, strictly increasing in (0, 1].
class TemperatureGrid {
public:
  /// {0.01, 0.02, ..., 1.00}
  TemperatureGrid();
  explicit TemperatureGrid(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool contains(double tau) const;

private:
  std::vector<double> values_;
};

struct CalibrationResult {
  double tau_star = 1.0;
  double min_kl = 0.0;
  std::vector<double> per_tau_kl;
};

/// Mean batch KL for every grid temperature; returns the smallest minimizer.
CalibrationResult
calibrate_student_temperature(std::span<const SparseProbs> teacher,
                              std::span<const LogitVector> student_logits,
                              const TemperatureGrid &grid = TemperatureGrid());

struct KdLossOptions {
  /// Multiply loss and gradient by tau_hat^2. Off by default.
  bool scale_by_tau_squared = false;
};

struct KdLoss {
  double loss = 0.0;
  std::vector<double> grad; ///< d loss / d student_logits
};

/// KL(teacher || softmax(student / tau_hat)) and its exact logit gradient.
KdLoss kd_loss(const SparseProbs &teacher, const LogitVector &student_logits,
               double tau_hat, const KdLossOptions &opts = {});

} // namespace slbl

#endif // SLBL_CALIBRATION_HPP_

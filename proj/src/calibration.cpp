// SPDX-License-Identifier: Apache-2.0
/**
 * @file   calibration.cpp
 * @brief  Teacher temperature annealing, student temperature grid search and
 *         the distillation loss.
 */
#include <slbl/calibration.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace slbl {

void TemperatureSchedule::validate() const {
  if (!(floor_tau > 0.0))
    throw std::invalid_argument("schedule floor_tau must be > 0");
  if (!(initial_tau >= floor_tau))
    throw std::invalid_argument("schedule initial_tau must be >= floor_tau");
  if (!(decay_factor > 0.0 && decay_factor < 1.0))
    throw std::invalid_argument("schedule decay_factor must be in (0, 1)");
  if (step_epochs < 1)
    throw std::invalid_argument("schedule step_epochs must be >= 1");
}

double teacher_temperature(const TemperatureSchedule &sched,
                           std::size_t epoch) {
  const auto steps = static_cast<double>(epoch / sched.step_epochs);
  return std::max(sched.floor_tau,
                  sched.initial_tau * std::pow(sched.decay_factor, steps));
}

TemperatureGrid::TemperatureGrid() {
  values_.reserve(100);
  for (int i = 1; i <= 100; ++i)
    values_.push_back(i / 100.0);
}

TemperatureGrid::TemperatureGrid(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty())
    throw std::invalid_argument("temperature grid is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] > 0.0 && values_[i] <= 1.0))
      throw std::invalid_argument("temperature grid values must be in (0, 1]");
    if (i > 0 && !(values_[i] > values_[i - 1]))
      throw std::invalid_argument("temperature grid must be strictly increasing");
  }
}

bool TemperatureGrid::contains(double tau) const {
  return std::find(values_.begin(), values_.end(), tau) != values_.end();
}

CalibrationResult
calibrate_student_temperature(std::span<const SparseProbs> teacher,
                              std::span<const LogitVector> student_logits,
                              const TemperatureGrid &grid) {
  if (teacher.empty())
    throw std::invalid_argument("calibration batch is empty");
  if (teacher.size() != student_logits.size())
    throw std::invalid_argument("calibration batch size mismatch");
  const auto c = teacher.front().num_classes();
  for (std::size_t b = 0; b < teacher.size(); ++b)
    if (teacher[b].num_classes() != c || student_logits[b].num_classes() != c)
      throw std::invalid_argument("calibration records must share C");

  CalibrationResult result;
  result.per_tau_kl.reserve(grid.size());
  result.min_kl = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<double>(teacher.size());
  for (double tau : grid.values()) {
    double sum = 0.0;
    for (std::size_t b = 0; b < teacher.size(); ++b)
      sum += kl_div_logits(teacher[b], student_logits[b], tau);
    const double mean = sum / batch;
    result.per_tau_kl.push_back(mean);
    // Strict comparison keeps the smallest temperature on ties.
    if (mean < result.min_kl) {
      result.min_kl = mean;
      result.tau_star = tau;
    }
  }
  return result;
}

KdLoss kd_loss(const SparseProbs &teacher, const LogitVector &student_logits,
               double tau_hat, const KdLossOptions &opts) {
  if (!(tau_hat > 0.0))
    throw std::invalid_argument("kd_loss: tau_hat must be > 0");
  if (teacher.num_classes() != student_logits.num_classes())
    throw std::invalid_argument("kd_loss: class count mismatch");

  const std::vector<double> log_q =
      log_softmax_t(student_logits.values(), tau_hat);
  KdLoss out;
  out.grad.resize(log_q.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < teacher.support().size(); ++i) {
    const double p = teacher.probs()[i];
    out.loss += p * (std::log(p) - log_q[teacher.support()[i]]);
    mass += p;
  }
  out.loss = std::max(out.loss, 0.0);
  for (std::size_t i = 0; i < log_q.size(); ++i)
    out.grad[i] = std::exp(log_q[i]) * mass / tau_hat;
  for (std::size_t i = 0; i < teacher.support().size(); ++i)
    out.grad[teacher.support()[i]] -= teacher.probs()[i] / tau_hat;

  if (opts.scale_by_tau_squared) {
    const double s = tau_hat * tau_hat;
    out.loss *= s;
    for (double &g : out.grad)
      g *= s;
  }
  return out;
}

} // namespace slbl

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   logit_core.cpp
 * @brief  Temperature softmax, top-k logit quantization and KL kernels.
 */
#include <slbl/logit_core.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace slbl {

namespace {

constexpr double kProbSumTolerance = 1e-9;

void require_positive_tau(double tau, const char *name) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw std::invalid_argument(std::string(name) +
                                " must be finite and > 0");
}

void require_unique_in_range(std::span<const ClassId> ids,
                             std::uint32_t num_classes) {
  std::vector<bool> seen(num_classes, false);
  for (ClassId id : ids) {
    if (id >= num_classes)
      throw std::invalid_argument("class index " + std::to_string(id) +
                                  " out of range");
    if (seen[id])
      throw std::invalid_argument("duplicate class index " +
                                  std::to_string(id));
    seen[id] = true;
  }
}

// Probabilities from already-scaled logits over a subset.
std::vector<double> stable_softmax(std::span<const double> scaled) {
  const double m = *std::max_element(scaled.begin(), scaled.end());
  std::vector<double> out(scaled.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    out[i] = std::exp(scaled[i] - m);
    sum += out[i];
  }
  for (double &v : out)
    v /= sum;
  return out;
}

} // namespace

LogitVector::LogitVector(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() < 2)
    throw std::invalid_argument("LogitVector needs at least 2 classes");
  for (double v : values_)
    if (!std::isfinite(v))
      throw std::invalid_argument("LogitVector entries must be finite");
}

QuantizedLogits::QuantizedLogits(std::uint32_t num_classes,
                                 std::vector<ClassId> indices,
                                 std::vector<double> values)
    : num_classes_(num_classes), indices_(std::move(indices)),
      values_(std::move(values)) {
  if (num_classes_ < 2)
    throw std::invalid_argument("QuantizedLogits needs at least 2 classes");
  if (indices_.size() != values_.size())
    throw std::invalid_argument("QuantizedLogits index/value length mismatch");
  if (indices_.empty() || indices_.size() > num_classes_)
    throw std::invalid_argument("QuantizedLogits k must be in [1, C]");
  require_unique_in_range(indices_, num_classes_);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw std::invalid_argument("QuantizedLogits values must be finite");
    if (i == 0)
      continue;
    const bool ordered =
        values_[i - 1] > values_[i] ||
        (values_[i - 1] == values_[i] && indices_[i - 1] < indices_[i]);
    if (!ordered)
      throw std::invalid_argument(
          "QuantizedLogits entries must be ordered by (value desc, index asc)");
  }
}

SparseProbs::SparseProbs(std::uint32_t num_classes, std::vector<ClassId> support,
                         std::vector<double> probs)
    : num_classes_(num_classes), support_(std::move(support)),
      probs_(std::move(probs)) {
  if (support_.size() != probs_.size())
    throw std::invalid_argument("SparseProbs support/prob length mismatch");
  if (support_.empty())
    throw std::invalid_argument("SparseProbs support is empty");
  require_unique_in_range(support_, num_classes_);
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw std::invalid_argument("SparseProbs probabilities must be > 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance)
    throw std::invalid_argument("SparseProbs probabilities must sum to 1");
}

std::vector<double> SparseProbs::dense() const {
  std::vector<double> out(num_classes_, 0.0);
  for (std::size_t i = 0; i < support_.size(); ++i)
    out[support_[i]] = probs_[i];
  return out;
}

DenseProbs::DenseProbs(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty())
    throw std::invalid_argument("DenseProbs is empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("DenseProbs probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTolerance)
    throw std::invalid_argument("DenseProbs probabilities must sum to 1");
}

SparseProbs DenseProbs::to_sparse() const {
  std::vector<ClassId> support;
  std::vector<double> probs;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) {
      support.push_back(static_cast<ClassId>(i));
      probs.push_back(probs_[i]);
    }
  }
  return SparseProbs(static_cast<std::uint32_t>(probs_.size()),
                     std::move(support), std::move(probs));
}

std::vector<double> log_softmax_t(std::span<const double> z, double tau) {
  require_positive_tau(tau, "tau");
  if (z.empty())
    throw std::invalid_argument("log_softmax_t on empty input");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z)
    sum += std::exp((v - m) / tau);
  const double log_norm = std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = (z[i] - m) / tau - log_norm;
  return out;
}

DenseProbs softmax_t(const LogitVector &z, double tau) {
  require_positive_tau(tau, "tau");
  std::vector<double> scaled(z.values().begin(), z.values().end());
  for (double &v : scaled)
    v /= tau;
  return DenseProbs(stable_softmax(scaled));
}

QuantizedLogits topk_quantize(const LogitVector &z, std::size_t k) {
  const std::size_t c = z.num_classes();
  if (k < 1 || k > c)
    throw std::invalid_argument("top-k: k must be in [1, C], got " +
                                std::to_string(k));
  std::vector<ClassId> order(c);
  std::iota(order.begin(), order.end(), ClassId{0});
  auto before = [&](ClassId a, ClassId b) {
    return z[a] > z[b] || (z[a] == z[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end(), before);
  order.resize(k);
  std::vector<double> values(k);
  for (std::size_t i = 0; i < k; ++i)
    values[i] = z[order[i]];
  return QuantizedLogits(static_cast<std::uint32_t>(c), std::move(order),
                         std::move(values));
}

LogitVector dequantize(const QuantizedLogits &q) {
  std::vector<double> full(q.num_classes(), 0.0);
  for (std::size_t i = 0; i < q.k(); ++i)
    full[q.indices()[i]] = q.values()[i];
  return LogitVector(std::move(full));
}

SparseProbs quantized_probs(const QuantizedLogits &q, double tau) {
  require_positive_tau(tau, "tau");
  std::vector<double> scaled(q.values().begin(), q.values().end());
  for (double &v : scaled)
    v /= tau;
  std::vector<double> probs = stable_softmax(scaled);
  // Underflowed entries leave the support; the remaining mass is unchanged.
  std::vector<ClassId> support;
  std::vector<double> kept;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      support.push_back(q.indices()[i]);
      kept.push_back(probs[i]);
    }
  }
  return SparseProbs(q.num_classes(), std::move(support), std::move(kept));
}

double kl_div(const SparseProbs &p, const DenseProbs &q) {
  if (p.num_classes() != q.num_classes())
    throw std::invalid_argument("kl_div: class count mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.support().size(); ++i) {
    const double pi = p.probs()[i];
    const double qi = q[p.support()[i]];
    if (qi <= 0.0)
      return std::numeric_limits<double>::infinity();
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

double kl_div_logits(const SparseProbs &p, const LogitVector &student,
                     double tau_hat) {
  if (p.num_classes() != student.num_classes())
    throw std::invalid_argument("kl_div: class count mismatch");
  const std::vector<double> log_q = log_softmax_t(student.values(), tau_hat);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.support().size(); ++i) {
    const double pi = p.probs()[i];
    kl += pi * (std::log(pi) - log_q[p.support()[i]]);
  }
  return std::max(kl, 0.0);
}

double entropy(const SparseProbs &p) {
  double h = 0.0;
  for (double v : p.probs())
    h -= v * std::log(v);
  return h;
}

double entropy(const DenseProbs &p) {
  double h = 0.0;
  for (double v : p.probs())
    if (v > 0.0)
      h -= v * std::log(v);
  return h;
}

double optimal_logit_gap(double p_i, double p_j, double tau_hat) {
  if (!(p_i > 0.0) || !(p_j > 0.0) || !(tau_hat > 0.0))
    throw std::invalid_argument("optimal_logit_gap: inputs must be > 0");
  return tau_hat * std::log(p_i / p_j);
}

double temperature_upper_bound(double delta_z_max, double r) {
  if (!(delta_z_max > 0.0))
    throw std::invalid_argument("temperature_upper_bound: delta_z_max <= 0");
  if (!(r > 1.0))
    throw std::invalid_argument(
        "temperature_upper_bound: ratio must be > 1 (bound is unbounded)");
  return delta_z_max / std::log(r);
}

LogitVector matching_student_logits(const SparseProbs &p, double tau_hat,
                                    double off_support_margin) {
  require_positive_tau(tau_hat, "tau_hat");
  // Anchor on the first support class; every other logit is its gap to it.
  const double p0 = p.probs()[0];
  std::vector<double> z(p.num_classes(), 0.0);
  double min_support = 0.0;
  for (std::size_t i = 0; i < p.support().size(); ++i) {
    const double zi = optimal_logit_gap(p.probs()[i], p0, tau_hat);
    z[p.support()[i]] = zi;
    min_support = std::min(min_support, zi);
  }
  const double off = min_support - off_support_margin * tau_hat;
  std::vector<bool> on(p.num_classes(), false);
  for (ClassId id : p.support())
    on[id] = true;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!on[i])
      z[i] = off;
  return LogitVector(std::move(z));
}

} // namespace slbl

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   synth.cpp
 * @brief  Synthetic per-class feature batches by class-wise statistic
 *         matching.
 */
#include <slbl/synth.hpp>

#include <slbl/errors.hpp>
#include <slbl/logit_core.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace slbl {

namespace {

ObjectiveValue objective(const LinearTeacher &teacher, const ClassStats &stats,
                         ClassId class_id, double alpha,
                         std::span<const double> batch,
                         std::span<const double> target_mean,
                         std::span<const double> target_var) {
  const std::size_t d = stats.dim;
  const std::size_t n = batch.size() / d;
  const auto nn = static_cast<double>(n);

  ObjectiveValue out;
  out.grad.assign(batch.size(), 0.0);

  std::vector<double> inv_scale(d);
  for (std::size_t j = 0; j < d; ++j)
    inv_scale[j] = 1.0 / std::sqrt(stats.global_var[j] + stats.epsilon);

  std::vector<double> u(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = batch.subspan(i * d, d);
    for (std::size_t j = 0; j < d; ++j)
      u[j] = (x[j] - stats.global_mean[j]) * inv_scale[j];
    const std::vector<double> z = teacher.logits(u);
    const std::vector<double> log_p = log_softmax_t(z, 1.0);
    out.cross_entropy -= log_p[class_id];
    for (std::size_t c = 0; c < teacher.num_classes; ++c) {
      const double coeff = std::exp(log_p[c]) - (c == class_id ? 1.0 : 0.0);
      const double *w = teacher.weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j)
        out.grad[i * d + j] += coeff * w[j] * inv_scale[j];
    }
  }

  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      mean[j] += batch[i * d + j];
  for (double &m : mean)
    m /= nn;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = batch[i * d + j] - mean[j];
      var[j] += c * c;
    }
  for (double &v : var)
    v /= nn;

  std::vector<double> mean_gap(d), var_gap(d);
  double mean_norm = 0.0, var_norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    mean_gap[j] = mean[j] - target_mean[j];
    var_gap[j] = var[j] - target_var[j];
    mean_norm += mean_gap[j] * mean_gap[j];
    var_norm += var_gap[j] * var_gap[j];
  }
  mean_norm = std::sqrt(mean_norm);
  var_norm = std::sqrt(var_norm);
  out.stat_loss = mean_norm + var_norm;
  out.loss = out.cross_entropy + alpha * out.stat_loss;

  // Subgradient 0 where a norm is exactly 0.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double g = 0.0;
      if (mean_norm > 0.0)
        g += mean_gap[j] / (mean_norm * nn);
      if (var_norm > 0.0)
        g += var_gap[j] / var_norm * 2.0 * (batch[i * d + j] - mean[j]) / nn;
      out.grad[i * d + j] += alpha * g;
    }
  return out;
}

struct OptimizeOutcome {
  std::vector<double> batch;
  double initial_loss;
  double final_loss;
};

OptimizeOutcome optimize(const LinearTeacher &teacher, const ClassStats &stats,
                         ClassId class_id, const SynthConfig &cfg,
                         std::vector<double> batch,
                         std::span<const double> target_mean,
                         std::span<const double> target_var) {
  constexpr double kBeta1 = 0.5, kBeta2 = 0.9, kAdamEps = 1e-8;
  std::vector<double> m(batch.size(), 0.0), v(batch.size(), 0.0);
  OptimizeOutcome out{};
  const auto iters = static_cast<double>(cfg.iterations);
  for (std::size_t it = 0; it <= cfg.iterations; ++it) {
    ObjectiveValue f = objective(teacher, stats, class_id, cfg.alpha, batch,
                                 target_mean, target_var);
    if (!std::isfinite(f.loss))
      throw OptimizationError("synthesis diverged: non-finite loss", it);
    if (it == 0)
      out.initial_loss = f.loss;
    out.final_loss = f.loss;
    if (it == cfg.iterations)
      break;
    const double lr = cfg.step_size * 0.5 *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(it) / iters));
    if (cfg.optimizer == SynthOptimizer::GradientDescent) {
      for (std::size_t i = 0; i < batch.size(); ++i)
        batch[i] -= lr * f.grad[i];
      continue;
    }
    const double t = static_cast<double>(it + 1);
    const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * f.grad[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * f.grad[i] * f.grad[i];
      batch[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    }
  }
  out.batch = std::move(batch);
  return out;
}

std::vector<double> random_init(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(count);
  for (double &v : out)
    v = normal(rng);
  return out;
}

void require_class(const ClassStats &stats, ClassId class_id) {
  if (class_id >= stats.num_classes())
    throw std::invalid_argument("class id beyond the statistics' classes");
}

void require_compatible(const LinearTeacher &teacher, const ClassStats &stats) {
  teacher.validate();
  if (teacher.dim != stats.dim || teacher.num_classes != stats.num_classes())
    throw std::invalid_argument("teacher and class statistics disagree on shape");
}

} // namespace

ClassStats compute_class_stats(const FeatureMatrix &data,
                               std::uint32_t num_classes) {
  if (!data.has_labels())
    throw std::invalid_argument("class statistics need labelled features");
  const std::uint32_t c_count = num_classes ? num_classes : data.num_classes();
  const std::size_t d = data.dim();
  ClassStats s;
  s.dim = d;
  s.class_mean.assign(c_count, std::vector<double>(d, 0.0));
  s.class_var.assign(c_count, std::vector<double>(d, 0.0));
  s.global_mean.assign(d, 0.0);
  s.global_var.assign(d, 0.0);
  std::vector<std::size_t> counts(c_count, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const ClassId c = data.label(i);
    if (c >= c_count)
      throw std::invalid_argument("label beyond the requested class count");
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) {
      s.class_mean[c][j] += data.row(i)[j];
      s.global_mean[j] += data.row(i)[j];
    }
  }
  for (std::uint32_t c = 0; c < c_count; ++c) {
    if (counts[c] == 0)
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " has no samples");
    for (double &m : s.class_mean[c])
      m /= static_cast<double>(counts[c]);
  }
  for (double &m : s.global_mean)
    m /= static_cast<double>(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const ClassId c = data.label(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dc = data.row(i)[j] - s.class_mean[c][j];
      const double dg = data.row(i)[j] - s.global_mean[j];
      s.class_var[c][j] += dc * dc;
      s.global_var[j] += dg * dg;
    }
  }
  for (std::uint32_t c = 0; c < c_count; ++c)
    for (double &v : s.class_var[c])
      v /= static_cast<double>(counts[c]);
  for (double &v : s.global_var)
    v /= static_cast<double>(data.rows());
  return s;
}

std::vector<double> LinearClassifier::logits(std::span<const double> x) const {
  if (x.size() != dim)
    throw std::invalid_argument("teacher input has the wrong dimension");
  std::vector<double> z(bias);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double *w = weights.data() + c * dim;
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j)
      s += w[j] * x[j];
    z[c] += s;
  }
  return z;
}

ClassId LinearClassifier::predict(std::span<const double> x) const {
  const std::vector<double> z = logits(x);
  ClassId best = 0;
  for (std::size_t c = 1; c < z.size(); ++c)
    if (z[c] > z[best])
      best = static_cast<ClassId>(c);
  return best;
}

void LinearClassifier::validate() const {
  if (num_classes < 2 || dim < 1)
    throw std::invalid_argument("teacher needs C >= 2 and d >= 1");
  if (weights.size() != std::size_t{num_classes} * dim ||
      bias.size() != num_classes)
    throw std::invalid_argument("teacher parameter shapes are inconsistent");
  for (double w : weights)
    if (!std::isfinite(w))
      throw std::invalid_argument("teacher weights must be finite");
  for (double b : bias)
    if (!std::isfinite(b))
      throw std::invalid_argument("teacher bias must be finite");
}

LinearTeacher fold_input_normalization(const LinearTeacher &raw,
                                       const ClassStats &stats) {
  require_compatible(raw, stats);
  // W x + b with x = mu + s * u  ==  (W diag(s)) u + (W mu + b)
  LinearTeacher out = raw;
  for (std::size_t c = 0; c < raw.num_classes; ++c) {
    double shift = 0.0;
    for (std::size_t j = 0; j < raw.dim; ++j) {
      const double s = std::sqrt(stats.global_var[j] + stats.epsilon);
      out.weights[c * raw.dim + j] = raw.weights[c * raw.dim + j] * s;
      shift += raw.weights[c * raw.dim + j] * stats.global_mean[j];
    }
    out.bias[c] = raw.bias[c] + shift;
  }
  return out;
}

void SynthConfig::validate() const {
  if (!(alpha >= 0.0))
    throw std::invalid_argument("synth alpha must be >= 0");
  if (iterations < 1)
    throw std::invalid_argument("synth iterations must be >= 1");
  if (!(step_size > 0.0))
    throw std::invalid_argument("synth step size must be > 0");
  if (batch_size < 2)
    throw std::invalid_argument("synth batch size must be >= 2");
}

ObjectiveValue class_matching_objective(const LinearTeacher &teacher,
                                        const ClassStats &stats,
                                        ClassId class_id, double alpha,
                                        std::span<const double> batch) {
  require_compatible(teacher, stats);
  require_class(stats, class_id);
  if (batch.empty() || batch.size() % stats.dim != 0)
    throw std::invalid_argument("batch is not a whole number of rows");
  return objective(teacher, stats, class_id, alpha, batch,
                   stats.class_mean[class_id], stats.class_var[class_id]);
}

SynthResult synthesize_class_batch(const LinearTeacher &teacher,
                                   const ClassStats &stats, ClassId class_id,
                                   const SynthConfig &cfg) {
  cfg.validate();
  require_compatible(teacher, stats);
  require_class(stats, class_id);
  auto init = random_init(cfg.batch_size * stats.dim, cfg.seed);
  auto res = optimize(teacher, stats, class_id, cfg, std::move(init),
                      stats.class_mean[class_id], stats.class_var[class_id]);
  return {FeatureMatrix(stats.dim, std::move(res.batch),
                        std::vector<ClassId>(cfg.batch_size, class_id),
                        stats.num_classes()),
          res.initial_loss, res.final_loss};
}

SynthResult synthesize_independent(const LinearTeacher &teacher,
                                   const ClassStats &stats, ClassId class_id,
                                   const SynthConfig &cfg) {
  cfg.validate();
  require_compatible(teacher, stats);
  require_class(stats, class_id);
  // Same initial draws as the class-wise batch, one row at a time.
  const auto init = random_init(cfg.batch_size * stats.dim, cfg.seed);
  const std::size_t d = stats.dim;
  std::vector<double> rows;
  rows.reserve(init.size());
  SynthResult out;
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    std::vector<double> x(init.begin() + static_cast<long>(i * d),
                          init.begin() + static_cast<long>((i + 1) * d));
    auto res = optimize(teacher, stats, class_id, cfg, std::move(x),
                        stats.global_mean, stats.global_var);
    rows.insert(rows.end(), res.batch.begin(), res.batch.end());
    out.initial_loss += res.initial_loss;
    out.final_loss += res.final_loss;
  }
  out.batch = FeatureMatrix(d, std::move(rows),
                            std::vector<ClassId>(cfg.batch_size, class_id),
                            stats.num_classes());
  return out;
}

} // namespace slbl

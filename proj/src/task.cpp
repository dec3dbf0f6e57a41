// SPDX-License-Identifier: Apache-2.0
/**
 * @file   task.cpp
 * @brief  Gaussian-blob classification task and its logistic teacher.
 */
#include <slbl/trainer.hpp>

#include "seeding.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace slbl {

namespace {

std::vector<std::vector<double>> class_centers(const TaskSpec &spec) {
  std::vector<std::vector<double>> centers(
      spec.num_classes, std::vector<double>(spec.dim, 0.0));
  if (spec.num_classes <= spec.dim) {
    for (std::uint32_t c = 0; c < spec.num_classes; ++c)
      centers[c][c] = spec.separation;
    return centers;
  }
  std::mt19937_64 rng(detail::derive_seed({spec.seed, detail::kTaskMeans}));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto &mu : centers) {
    double norm = 0.0;
    for (double &v : mu) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double &v : mu)
      v *= spec.separation / norm;
  }
  return centers;
}

FeatureMatrix sample_blobs(const TaskSpec &spec,
                           const std::vector<std::vector<double>> &centers,
                           std::size_t per_class, double noise,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> data;
  std::vector<ClassId> labels;
  data.reserve(spec.num_classes * per_class * spec.dim);
  labels.reserve(spec.num_classes * per_class);
  for (std::uint32_t c = 0; c < spec.num_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t j = 0; j < spec.dim; ++j)
        data.push_back(centers[c][j] + noise * normal(rng));
      labels.push_back(c);
    }
  return FeatureMatrix(spec.dim, std::move(data), std::move(labels),
                       spec.num_classes);
}

} // namespace

void TaskSpec::validate() const {
  if (num_classes < 2)
    throw std::invalid_argument("task needs at least 2 classes");
  if (dim < 1)
    throw std::invalid_argument("task feature dimension must be >= 1");
  if (train_per_class < 1 || test_per_class < 1 || ipc < 1)
    throw std::invalid_argument("task sample counts must be >= 1");
  if (!(separation >= 0.0) || !(noise > 0.0) || !(distilled_noise >= 0.0))
    throw std::invalid_argument("task separation/noise out of range");
  if (distilled_source == DistilledSource::ClassWiseSynthesis && ipc < 2)
    throw std::invalid_argument("class-wise synthesis needs ipc >= 2");
}

LinearTeacher fit_logistic_teacher(const FeatureMatrix &data, double l2,
                                   std::size_t max_iterations,
                                   double grad_tolerance) {
  if (!data.has_labels() || data.rows() == 0)
    throw std::invalid_argument("teacher fit needs labelled data");
  const std::size_t c_count = data.num_classes();
  const std::size_t d = data.dim();
  const std::size_t n = data.rows();
  const std::size_t width = d + 1; // bias folded in as the last column
  const auto nn = static_cast<double>(n);

  double max_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (double v : data.row(i))
      s += v * v;
    max_sq = std::max(max_sq, s);
  }
  const double step = 1.0 / (0.5 * max_sq + l2);

  std::vector<double> theta(c_count * width, 0.0), prev = theta, look = theta;
  std::vector<double> grad(theta.size());
  std::vector<double> z(c_count);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    // Nesterov look-ahead point.
    const double momentum = static_cast<double>(it) / (static_cast<double>(it) + 3.0);
    for (std::size_t i = 0; i < theta.size(); ++i)
      look[i] = theta[i] + momentum * (theta[i] - prev[i]);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.row(i);
      for (std::size_t c = 0; c < c_count; ++c) {
        const double *w = look.data() + c * width;
        double s = w[d];
        for (std::size_t j = 0; j < d; ++j)
          s += w[j] * x[j];
        z[c] = s;
      }
      const auto log_p = log_softmax_t(z, 1.0);
      for (std::size_t c = 0; c < c_count; ++c) {
        const double r =
            (std::exp(log_p[c]) - (c == data.label(i) ? 1.0 : 0.0)) / nn;
        double *g = grad.data() + c * width;
        for (std::size_t j = 0; j < d; ++j)
          g[j] += r * x[j];
        g[d] += r;
      }
    }
    double gnorm = 0.0;
    for (std::size_t c = 0; c < c_count; ++c)
      for (std::size_t j = 0; j < width; ++j) {
        double &g = grad[c * width + j];
        if (j < d)
          g += l2 * look[c * width + j];
        gnorm += g * g;
      }
    prev = theta;
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta[i] = look[i] - step * grad[i];
    if (std::sqrt(gnorm) < grad_tolerance)
      break;
  }

  LinearTeacher t;
  t.num_classes = static_cast<std::uint32_t>(c_count);
  t.dim = d;
  t.weights.resize(c_count * d);
  t.bias.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) {
    std::copy_n(theta.begin() + static_cast<long>(c * width), d,
                t.weights.begin() + static_cast<long>(c * d));
    t.bias[c] = theta[c * width + d];
  }
  t.validate();
  return t;
}

double accuracy(const LinearClassifier &model, const FeatureMatrix &data) {
  if (data.rows() == 0)
    return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.rows(); ++i)
    hits += model.predict(data.row(i)) == data.label(i) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.rows());
}

Task generate_task(const TaskSpec &spec) {
  spec.validate();
  const auto centers = class_centers(spec);
  Task task;
  task.degenerate = spec.separation == 0.0 && spec.num_classes > 1;
  task.train = sample_blobs(spec, centers, spec.train_per_class, spec.noise,
                            detail::derive_seed({spec.seed, detail::kTaskTrain}));
  task.test = sample_blobs(spec, centers, spec.test_per_class, spec.noise,
                           detail::derive_seed({spec.seed, detail::kTaskTest}));
  task.teacher = fit_logistic_teacher(task.train, spec.teacher_l2,
                                      spec.teacher_iterations);
  task.teacher_train_accuracy = accuracy(task.teacher, task.train);

  const ClassStats stats = compute_class_stats(task.train, spec.num_classes);
  if (spec.distilled_source == DistilledSource::NoisyClassMeans) {
    std::vector<std::vector<double>> means = stats.class_mean;
    task.distilled = sample_blobs(
        spec, means, spec.ipc, spec.distilled_noise,
        detail::derive_seed({spec.seed, detail::kTaskDistilled}));
    return task;
  }
  const LinearTeacher normalized = fold_input_normalization(task.teacher, stats);
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    SynthConfig cfg = spec.synth;
    cfg.batch_size = spec.ipc;
    cfg.seed = detail::derive_seed({spec.seed, detail::kTaskSynth, c});
    task.distilled.append(synthesize_class_batch(normalized, stats, c, cfg).batch);
  }
  return task;
}

} // namespace slbl

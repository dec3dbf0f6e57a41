// SPDX-License-Identifier: Apache-2.0
/**
 * @file   diversity.cpp
 * @brief  Within-class cosine similarity and Gaussian-kernel MMD.
 */
#include <slbl/diversity.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slbl {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Mean kernel value over all (i, j) pairs, self-pairs included.
double mean_kernel(const FeatureMatrix &a, const FeatureMatrix &b,
                   double inv_two_sigma_sq) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j)
      row_sum += std::exp(-squared_distance(a.row(i), b.row(j)) *
                          inv_two_sigma_sq);
    sum += row_sum;
  }
  return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

} // namespace

DiversityReport within_class_cosine(const FeatureMatrix &features) {
  if (!features.has_labels())
    throw std::invalid_argument("within-class cosine needs labelled features");
  std::vector<double> norms(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    norms[i] = std::sqrt(dot(features.row(i), features.row(i)));
    if (!(norms[i] > 0.0))
      throw std::invalid_argument("zero-norm feature row " + std::to_string(i));
  }

  DiversityReport report;
  for (ClassId c = 0; c < features.num_classes(); ++c) {
    const auto rows = features.rows_of_class(c);
    if (rows.empty())
      continue;
    if (rows.size() < 2) {
      report.skipped_classes.push_back(c);
      continue;
    }
    std::vector<double> sims;
    sims.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        const double cs = dot(features.row(rows[a]), features.row(rows[b])) /
                          (norms[rows[a]] * norms[rows[b]]);
        sims.push_back(std::clamp(cs, -1.0, 1.0));
      }
    double mean = 0.0;
    for (double s : sims)
      mean += s;
    mean /= static_cast<double>(sims.size());
    double var = 0.0;
    for (double s : sims)
      var += (s - mean) * (s - mean);
    var /= static_cast<double>(sims.size());
    report.per_class.push_back({c, mean, std::sqrt(var), sims.size()});
  }
  if (report.per_class.empty())
    return report;

  const auto n = static_cast<double>(report.per_class.size());
  for (const auto &pc : report.per_class)
    report.overall_mean += pc.mean;
  report.overall_mean /= n;
  double var = 0.0;
  for (const auto &pc : report.per_class)
    var += (pc.mean - report.overall_mean) * (pc.mean - report.overall_mean);
  report.overall_std = std::sqrt(var / n);
  return report;
}

double median_bandwidth(const FeatureMatrix &x, const FeatureMatrix &y) {
  std::vector<std::span<const double>> pooled;
  pooled.reserve(x.rows() + y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    pooled.push_back(x.row(i));
  for (std::size_t i = 0; i < y.rows(); ++i)
    pooled.push_back(y.row(i));
  std::vector<double> dists;
  dists.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i)
    for (std::size_t j = i + 1; j < pooled.size(); ++j)
      dists.push_back(std::sqrt(squared_distance(pooled[i], pooled[j])));
  if (dists.empty())
    return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<long>(mid),
                   dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    const double lower =
        *std::max_element(dists.begin(), dists.begin() + static_cast<long>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

double mmd_squared(const FeatureMatrix &x, const FeatureMatrix &y,
                   std::optional<double> bandwidth) {
  if (x.rows() == 0 || y.rows() == 0)
    throw std::invalid_argument("MMD needs at least one sample on each side");
  if (x.dim() != y.dim())
    throw std::invalid_argument("MMD feature dimensions differ");
  const double sigma = bandwidth ? *bandwidth : median_bandwidth(x, y);
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("MMD bandwidth must be > 0");
  const double g = 1.0 / (2.0 * sigma * sigma);
  const double v = mean_kernel(x, x, g) + mean_kernel(y, y, g) -
                   2.0 * mean_kernel(x, y, g);
  return std::max(v, 0.0);
}

} // namespace slbl

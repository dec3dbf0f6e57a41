// SPDX-License-Identifier: Apache-2.0
/**
 * @file   diversity.hpp
 * @brief  Within-class cosine similarity and Gaussian-kernel MMD.
 */
#ifndef SLBL_DIVERSITY_HPP_
#define SLBL_DIVERSITY_HPP_

#include <slbl/features.hpp>

#include <optional>
#include <vector>

namespace slbl {

struct ClassCosine {
  ClassId class_id = 0;
  double mean = 0.0;
  double std = 0.0; ///< population std over the class's pair values
  std::size_t pairs = 0;
};

struct DiversityReport {
  std::vector<ClassCosine> per_class;
  /// Classes present with fewer than two samples.
  std::vector<ClassId> skipped_classes;
  double overall_mean = 0.0; ///< mean of per-class means
  double overall_std = 0.0;  ///< population std of per-class means
  std::optional<double> mmd_squared;
  std::optional<double> bandwidth;
};

/// Cosine similarity over all unordered within-class pairs. Requires labels;
/// throws std::invalid_argument on a zero-norm row.
DiversityReport within_class_cosine(const FeatureMatrix &features);

/// Median pairwise Euclidean distance over X and Y pooled. Falls back to 1
/// when there are no pairs or the median is 0.
double median_bandwidth(const FeatureMatrix &x, const FeatureMatrix &y);

/// Biased all-pairs MMD^2 with kernel exp(-|u - v|^2 / (2 sigma^2)).
/// sigma defaults to median_bandwidth. Clipped at 0.
double mmd_squared(const FeatureMatrix &x, const FeatureMatrix &y,
                   std::optional<double> bandwidth = std::nullopt);

} // namespace slbl

#endif // SLBL_DIVERSITY_HPP_

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   features.hpp
 * @brief  Labelled feature matrix and its binary tensor file.
 *
 * File layout (little-endian): "SFMX" | d u32 | N u32 | C u32
 * | N*d f32 row-major | N u32 labels.
 */
#ifndef SLBL_FEATURES_HPP_
#define SLBL_FEATURES_HPP_

#include <slbl/logit_core.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slbl {

class FeatureMatrix {
public:
  FeatureMatrix() = default;
  /// labels may be empty (unlabelled); otherwise one per row, each < num_classes.
  /// num_classes == 0 means max(label) + 1.
  FeatureMatrix(std::size_t dim, std::vector<double> data,
                std::vector<ClassId> labels = {}, std::uint32_t num_classes = 0);

  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint32_t num_classes() const noexcept { return num_classes_; }
  bool has_labels() const noexcept { return !labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * dim_, dim_);
  }
  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * dim_, dim_);
  }
  ClassId label(std::size_t i) const { return labels_.at(i); }
  std::span<const ClassId> labels() const noexcept { return labels_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Rows with the given label, in order.
  std::vector<std::size_t> rows_of_class(ClassId c) const;

  /// Rows of `other` appended; dims must agree.
  void append(const FeatureMatrix &other);

  bool operator==(const FeatureMatrix &) const = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<ClassId> labels_;
  std::uint32_t num_classes_ = 0;
};

/// Values are narrowed to f32. Unlabelled matrices are written with C = 0
/// and every label 0, and decode back as unlabelled.
std::vector<std::uint8_t> encode_features(const FeatureMatrix &m);
FeatureMatrix decode_features(std::span<const std::uint8_t> bytes);

void write_features(const std::string &path, const FeatureMatrix &m);
FeatureMatrix read_features(const std::string &path);

} // namespace slbl

#endif // SLBL_FEATURES_HPP_

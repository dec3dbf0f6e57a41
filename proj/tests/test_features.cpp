// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_features.cpp
 * @brief  FeatureMatrix and the SFMX file format.
 */
#include <doctest.h>

#include <slbl/errors.hpp>
#include <slbl/features.hpp>

#include <cstring>
#include <filesystem>
#include <random>

using namespace slbl;

TEST_CASE("FeatureMatrix shape and validation") {
  const FeatureMatrix m(2, {1, 2, 3, 4, 5, 6}, {0, 2, 2});
  CHECK(m.rows() == 3);
  CHECK(m.dim() == 2);
  CHECK(m.num_classes() == 3);
  CHECK(m.row(1)[0] == 3);
  CHECK(m.rows_of_class(2) == std::vector<std::size_t>{1, 2});
  CHECK(m.rows_of_class(1).empty());

  CHECK_THROWS_AS(FeatureMatrix(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(FeatureMatrix(2, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(FeatureMatrix(2, {1, 2}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(FeatureMatrix(1, {1, 2}, {0, 3}, 2), std::invalid_argument);
}

TEST_CASE("append concatenates rows") {
  FeatureMatrix a;
  a.append(FeatureMatrix(2, {1, 2}, {0}, 3));
  a.append(FeatureMatrix(2, {3, 4}, {2}, 3));
  CHECK(a.rows() == 2);
  CHECK(a.label(1) == 2);
  CHECK(a.num_classes() == 3);
  CHECK_THROWS_AS(a.append(FeatureMatrix(3, {1, 2, 3}, {0})), std::invalid_argument);
  CHECK_THROWS_AS(a.append(FeatureMatrix(2, {1, 2})), std::invalid_argument);
}

TEST_CASE("SFMX roundtrip with f32 values") {
  std::mt19937_64 rng(51);
  std::normal_distribution<float> n(0.0f, 3.0f);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 9, rows = rng() % 12;
    std::vector<double> data(d * rows);
    for (auto &v : data)
      v = n(rng); // already f32-representable
    std::vector<ClassId> labels;
    const bool labelled = rng() % 2 && rows > 0;
    if (labelled)
      for (std::size_t i = 0; i < rows; ++i)
        labels.push_back(static_cast<ClassId>(rng() % 4));
    const FeatureMatrix m(d, data, labels, labelled ? 4 : 0);
    const auto bytes = encode_features(m);
    CHECK(bytes.size() == 16 + rows * (d * 4 + 4));
    const FeatureMatrix back = decode_features(bytes);
    CHECK(back == m);
  }
}

TEST_CASE("SFMX narrows to f32 and keeps unlabelled files unlabelled") {
  const FeatureMatrix m(1, {0.1, 1e-50});
  const FeatureMatrix back = decode_features(encode_features(m));
  CHECK(back.row(0)[0] == static_cast<double>(0.1f));
  CHECK(back.row(1)[0] == 0.0);
  CHECK_FALSE(back.has_labels());
  CHECK(back.num_classes() == 0);
}

TEST_CASE("SFMX decoding errors") {
  const auto good = encode_features(FeatureMatrix(2, {1, 2, 3, 4}, {0, 1}));
  auto bytes = good;
  bytes[1] = 'x';
  CHECK_THROWS_AS(decode_features(bytes), FormatError);
  bytes = good;
  bytes.pop_back();
  CHECK_THROWS_AS(decode_features(bytes), FormatError);
  bytes = good;
  bytes.push_back(0);
  CHECK_THROWS_AS(decode_features(bytes), FormatError);
  bytes = good;
  bytes[bytes.size() - 4] = 7; // label beyond C = 2
  CHECK_THROWS_AS(decode_features(bytes), FormatError);
  std::vector<std::uint8_t> tiny(good.begin(), good.begin() + 10);
  CHECK_THROWS_AS(decode_features(tiny), FormatError);
}

TEST_CASE("SFMX file roundtrip") {
  const FeatureMatrix m(3, {1, 2, 3, 4, 5, 6}, {1, 0}, 2);
  const auto path = (std::filesystem::temp_directory_path() / "slbl_test.sfmx").string();
  write_features(path, m);
  CHECK(read_features(path) == m);
  std::filesystem::remove(path);
  CHECK_THROWS(read_features(path));
}

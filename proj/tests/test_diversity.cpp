// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_diversity.cpp
 * @brief  Within-class cosine and MMD against brute-force references.
 */
#include <doctest.h>

#include <slbl/diversity.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace slbl;

namespace {

FeatureMatrix random_labelled(std::mt19937_64 &rng, std::size_t rows, std::size_t d,
                              std::uint32_t classes) {
  auto data = oracle::random_vector(rng, rows * d, -2, 2);
  std::vector<ClassId> labels(rows);
  for (auto &l : labels)
    l = static_cast<ClassId>(rng() % classes);
  return FeatureMatrix(d, data, labels, classes);
}

std::vector<double> raw(const FeatureMatrix &m) {
  return {m.data().begin(), m.data().end()};
}

} // namespace

TEST_CASE("identical rows have cosine 1 and spread 0") {
  const FeatureMatrix m(3, {1, 2, 3, 1, 2, 3, 2, 4, 6}, {0, 0, 0});
  const auto r = within_class_cosine(m);
  REQUIRE(r.per_class.size() == 1);
  CHECK(r.per_class[0].mean == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.per_class[0].std < 1e-7);
  CHECK(r.per_class[0].pairs == 3);
}

TEST_CASE("orthogonal rows have cosine 0") {
  const FeatureMatrix m(3, {1, 0, 0, 0, 2, 0, 0, 0, 3}, {0, 0, 0});
  const auto r = within_class_cosine(m);
  CHECK(r.per_class[0].mean == 0.0);
  CHECK(r.overall_mean == 0.0);
}

TEST_CASE("cosine matches the brute-force reference") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 40; ++t) {
    const std::uint32_t classes = 1 + static_cast<std::uint32_t>(rng() % 4);
    const auto m = random_labelled(rng, 2 + rng() % 30, 1 + rng() % 8, classes);
    const auto r = within_class_cosine(m);
    std::vector<double> means;
    std::size_t seen = 0;
    for (ClassId c = 0; c < classes; ++c) {
      const auto ref = oracle::class_pair_cosine(raw(m), m.dim(),
                                                 {m.labels().begin(), m.labels().end()}, c);
      if (ref.pairs == 0)
        continue;
      REQUIRE(seen < r.per_class.size());
      const auto &got = r.per_class[seen++];
      CHECK(got.class_id == c);
      CHECK(got.pairs == ref.pairs);
      CHECK(std::abs(got.mean - ref.mean) < 1e-12);
      CHECK(std::abs(got.std - ref.std) < 1e-12);
      means.push_back(ref.mean);
    }
    CHECK(seen == r.per_class.size());
    if (means.empty())
      continue;
    double mu = 0;
    for (double v : means)
      mu += v;
    mu /= static_cast<double>(means.size());
    double var = 0;
    for (double v : means)
      var += (v - mu) * (v - mu);
    var /= static_cast<double>(means.size());
    CHECK(std::abs(r.overall_mean - mu) < 1e-12);
    CHECK(std::abs(r.overall_std - std::sqrt(var)) < 1e-12);
  }
}

TEST_CASE("cosine is invariant to positive row scaling") {
  std::mt19937_64 rng(62);
  const auto m = random_labelled(rng, 20, 5, 3);
  auto data = raw(m);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j)
      data[i * m.dim() + j] *= 0.1 + static_cast<double>(i);
  const FeatureMatrix scaled(m.dim(), data, {m.labels().begin(), m.labels().end()}, 3);
  const auto a = within_class_cosine(m), b = within_class_cosine(scaled);
  REQUIRE(a.per_class.size() == b.per_class.size());
  for (std::size_t i = 0; i < a.per_class.size(); ++i)
    CHECK(std::abs(a.per_class[i].mean - b.per_class[i].mean) < 1e-12);
}

TEST_CASE("single-sample classes are skipped and zero rows rejected") {
  const FeatureMatrix m(2, {1, 0, 0, 1, 1, 1, 3, 1}, {0, 1, 1, 3}, 4);
  const auto r = within_class_cosine(m);
  REQUIRE(r.per_class.size() == 1);
  CHECK(r.per_class[0].class_id == 1);
  CHECK(r.skipped_classes == std::vector<ClassId>{0, 3});

  CHECK_THROWS_AS(within_class_cosine(FeatureMatrix(2, {1, 0, 0, 0}, {0, 0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(within_class_cosine(FeatureMatrix(2, {1, 0, 0, 1})),
                  std::invalid_argument);
}

TEST_CASE("MMD of a set with itself is 0") {
  std::mt19937_64 rng(63);
  const auto m = random_labelled(rng, 15, 4, 2);
  CHECK(mmd_squared(m, m) < 1e-15);
  CHECK(mmd_squared(m, m, 0.3) < 1e-15);
}

TEST_CASE("MMD of two single points") {
  const FeatureMatrix x(2, {0, 0}), y(2, {3, 4});
  const double sigma = 2.0;
  CHECK(std::abs(mmd_squared(x, y, sigma) - 2.0 * (1.0 - std::exp(-25.0 / 8.0))) < 1e-15);
}

TEST_CASE("MMD at a tiny bandwidth approaches 1/|X| + 1/|Y|") {
  std::mt19937_64 rng(64);
  const auto x = random_labelled(rng, 7, 3, 1), y = random_labelled(rng, 4, 3, 1);
  CHECK(std::abs(mmd_squared(x, y, 1e-6) - (1.0 / 7 + 1.0 / 4)) < 1e-12);
}

TEST_CASE("MMD matches the 50-digit reference, is symmetric and translation invariant") {
  std::mt19937_64 rng(65);
  for (int t = 0; t < 25; ++t) {
    const std::size_t d = 1 + rng() % 6;
    const auto x = random_labelled(rng, 1 + rng() % 20, d, 2);
    const auto y = random_labelled(rng, 1 + rng() % 20, d, 2);
    const double sigma = std::uniform_real_distribution<double>(0.3, 4.0)(rng);
    const double got = mmd_squared(x, y, sigma);
    const double ref = std::max(oracle::mmd2(raw(x), raw(y), d, sigma), 0.0);
    CHECK(std::abs(got - ref) < 1e-12);
    CHECK(std::abs(got - mmd_squared(y, x, sigma)) < 1e-14);

    auto shift = [&](const FeatureMatrix &m) {
      auto v = raw(m);
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] += 10.0 + static_cast<double>(i % d);
      return FeatureMatrix(d, v);
    };
    CHECK(std::abs(got - mmd_squared(shift(x), shift(y), sigma)) < 1e-10);
  }
}

TEST_CASE("median bandwidth") {
  const FeatureMatrix x(1, {0, 1}), y(1, {3});
  // Pairwise distances 1, 3, 2: median 2.
  CHECK(median_bandwidth(x, y) == 2.0);
  const FeatureMatrix z(1, {0, 1, 3, 7});
  // Distances 1, 3, 7, 2, 6, 4 with z paired against an empty set: median 3.5.
  CHECK(median_bandwidth(z, FeatureMatrix(1, {})) == 3.5);
  CHECK(median_bandwidth(FeatureMatrix(1, {2}), FeatureMatrix(1, {2})) == 1.0);
}

TEST_CASE("MMD input validation") {
  const FeatureMatrix x(2, {0, 0}), y(3, {0, 0, 0});
  CHECK_THROWS_AS(mmd_squared(x, y), std::invalid_argument);
  CHECK_THROWS_AS(mmd_squared(x, x, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mmd_squared(x, x, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(mmd_squared(x, FeatureMatrix(2, {})), std::invalid_argument);
}

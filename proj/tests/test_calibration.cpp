// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_calibration.cpp
 * @brief  Teacher schedule, student temperature grid search and KD loss.
 */
#include <doctest.h>

#include <slbl/calibration.hpp>

#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

using namespace slbl;

namespace {

SparseProbs random_sparse(std::mt19937_64 &rng, std::uint32_t c, std::size_t k) {
  std::vector<ClassId> all(c);
  std::iota(all.begin(), all.end(), 0u);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> p(k);
  double s = 0;
  for (auto &v : p)
    s += (v = u(rng));
  for (auto &v : p)
    v /= s;
  return SparseProbs(c, all, p);
}

} // namespace

TEST_CASE("teacher temperature schedule values") {
  const TemperatureSchedule s;
  CHECK(teacher_temperature(s, 0) == 20.0);
  CHECK(teacher_temperature(s, 29) == 20.0);
  CHECK(std::abs(teacher_temperature(s, 30) - 14.0) < 1e-12);
  CHECK(std::abs(teacher_temperature(s, 60) - 9.8) < 1e-12);
  CHECK(std::abs(teacher_temperature(s, 180) - 20 * std::pow(0.7, 6)) < 1e-12);
  CHECK(teacher_temperature(s, 210) == 2.0);
  CHECK(teacher_temperature(s, 100000) == 2.0);
}

TEST_CASE("teacher temperature is non-increasing and floored") {
  const TemperatureSchedule custom{7.5, 0.45, 4, 0.3};
  for (const auto &s : {TemperatureSchedule{}, custom}) {
    double prev = INFINITY;
    for (std::size_t e = 0; e < 500; ++e) {
      const double t = teacher_temperature(s, e);
      CHECK(t <= prev);
      CHECK(t >= s.floor_tau);
      prev = t;
    }
  }
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS((TemperatureSchedule{1.0, 0.7, 30, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TemperatureSchedule{20, 1.0, 30, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TemperatureSchedule{20, 0.0, 30, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TemperatureSchedule{20, 0.7, 0, 2.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((TemperatureSchedule{20, 0.7, 30, 0.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW(TemperatureSchedule{}.validate());
}

TEST_CASE("default grid is 0.01 to 1.00 in steps of 0.01") {
  const TemperatureGrid g;
  REQUIRE(g.size() == 100);
  for (std::size_t i = 0; i < 100; ++i)
    CHECK(std::abs(g.values()[i] - 0.01 * static_cast<double>(i + 1)) < 1e-15);
  CHECK(g.values().back() == 1.0);
  CHECK(g.contains(0.5));
  CHECK_FALSE(g.contains(0.505));
  CHECK_THROWS_AS(TemperatureGrid({0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(TemperatureGrid({0.0, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(TemperatureGrid({0.5, 1.2}), std::invalid_argument);
  CHECK_THROWS_AS(TemperatureGrid(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("grid search recovers the construction temperature") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    std::vector<SparseProbs> teacher;
    std::vector<LogitVector> student;
    for (int b = 0; b < 8; ++b) {
      teacher.push_back(random_sparse(rng, 10, 2 + rng() % 9));
      student.push_back(matching_student_logits(teacher.back(), 0.5));
    }
    const auto r = calibrate_student_temperature(teacher, student);
    CHECK(std::abs(r.tau_star - 0.5) < 1e-12);
    CHECK(r.min_kl <= 1e-6);
  }
}

TEST_CASE("ties resolve to the smallest temperature") {
  std::vector<SparseProbs> teacher{DenseProbs(std::vector<double>(6, 1.0 / 6)).to_sparse()};
  std::vector<LogitVector> student{LogitVector(std::vector<double>(6, 1.25))};
  const auto r = calibrate_student_temperature(teacher, student);
  CHECK(r.tau_star == 0.01);
  for (double v : r.per_tau_kl)
    CHECK(v == r.per_tau_kl.front());
}

TEST_CASE("sharp top-5 teacher against mild student gives tau below 1") {
  std::mt19937_64 rng(32);
  std::vector<SparseProbs> teacher;
  std::vector<LogitVector> student;
  for (int b = 0; b < 16; ++b) {
    auto z = oracle::random_vector(rng, 20, -1, 1);
    z[b % 20] += 6.0;
    teacher.push_back(quantized_probs(topk_quantize(LogitVector(z), 5), 1.0));
    auto zs = z;
    for (auto &v : zs)
      v *= 0.2;
    student.emplace_back(zs);
  }
  const TemperatureGrid grid;
  const auto r = calibrate_student_temperature(teacher, student, grid);
  CHECK(r.tau_star < 1.0);
  // Exhaustive re-evaluation of the grid with the 50-digit oracle.
  double best = INFINITY, best_tau = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double mean = 0;
    for (std::size_t b = 0; b < teacher.size(); ++b)
      mean += oracle::kl_vs_logits(teacher[b].dense(),
                                   {student[b].values().begin(), student[b].values().end()},
                                   grid.values()[g]);
    mean /= static_cast<double>(teacher.size());
    CHECK(std::abs(mean - r.per_tau_kl[g]) < 1e-10);
    if (mean < best - 1e-12) {
      best = mean;
      best_tau = grid.values()[g];
    }
  }
  CHECK(best_tau == r.tau_star);
}

TEST_CASE("calibration result invariants, determinism and shift invariance") {
  std::mt19937_64 rng(33);
  const TemperatureGrid grid;
  for (int t = 0; t < 30; ++t) {
    std::vector<SparseProbs> teacher;
    std::vector<LogitVector> student, shifted;
    const double shift = std::uniform_real_distribution<double>(-50, 50)(rng);
    for (int b = 0; b < 5; ++b) {
      teacher.push_back(random_sparse(rng, 12, 1 + rng() % 12));
      auto z = oracle::random_vector(rng, 12, -3, 3);
      student.emplace_back(z);
      for (auto &v : z)
        v += shift;
      shifted.emplace_back(z);
    }
    const auto a = calibrate_student_temperature(teacher, student, grid);
    const auto b = calibrate_student_temperature(teacher, student, grid);
    const auto c = calibrate_student_temperature(teacher, shifted, grid);
    CHECK(grid.contains(a.tau_star));
    CHECK(a.min_kl >= 0.0);
    CHECK(a.min_kl == *std::min_element(a.per_tau_kl.begin(), a.per_tau_kl.end()));
    for (std::size_t g = 0; g < grid.size() && grid.values()[g] < a.tau_star; ++g)
      CHECK(a.per_tau_kl[g] > a.min_kl);
    CHECK(a.tau_star == b.tau_star);
    CHECK(a.per_tau_kl == b.per_tau_kl);
    CHECK(a.tau_star == c.tau_star);
    for (std::size_t g = 0; g < grid.size(); ++g)
      CHECK(std::abs(a.per_tau_kl[g] - c.per_tau_kl[g]) < 1e-9);
  }
}

TEST_CASE("calibration rejects bad batches") {
  std::vector<SparseProbs> none;
  std::vector<LogitVector> no_logits;
  CHECK_THROWS_AS(calibrate_student_temperature(none, no_logits), std::invalid_argument);
  std::vector<SparseProbs> one{SparseProbs(3, {0}, {1.0})};
  std::vector<LogitVector> wrong_c{LogitVector({0.0, 1.0})};
  CHECK_THROWS_AS(calibrate_student_temperature(one, wrong_c), std::invalid_argument);
  std::vector<LogitVector> two{LogitVector({0.0, 1.0, 2.0}), LogitVector({0.0, 1.0, 2.0})};
  CHECK_THROWS_AS(calibrate_student_temperature(one, two), std::invalid_argument);
}

TEST_CASE("kd_loss analytic cases") {
  const LogitVector z({0.3, -1.0, 2.0, 0.0});
  const auto q = softmax_t(z, 0.7);
  const auto same = kd_loss(q.to_sparse(), z, 0.7);
  CHECK(same.loss < 1e-12);
  for (double g : same.grad)
    CHECK(std::abs(g) < 1e-9);

  const auto half = kd_loss(SparseProbs(2, {0}, {1.0}), LogitVector({0.0, 0.0}), 1.0);
  CHECK(std::abs(half.loss - std::log(2.0)) < 1e-15);
  CHECK(std::abs(half.grad[0] + 0.5) < 1e-15);
  CHECK(std::abs(half.grad[1] - 0.5) < 1e-15);

  CHECK_THROWS_AS(kd_loss(SparseProbs(2, {0}, {1.0}), LogitVector({0.0, 0.0}), 0.0),
                  std::invalid_argument);
}

TEST_CASE("kd_loss gradient matches central differences") {
  std::mt19937_64 rng(34);
  for (int t = 0; t < 300; ++t) {
    const SparseProbs p = random_sparse(rng, 10, 1 + rng() % 10);
    const auto z = oracle::random_vector(rng, 10, -3, 3);
    const double tau = std::uniform_real_distribution<double>(0.2, 3.0)(rng);
    const auto kd = kd_loss(p, LogitVector(z), tau);
    const auto fd = oracle::central_diff(
        [&](const std::vector<double> &x) {
          return oracle::kl_vs_logits(p.dense(), x, tau);
        },
        z, 1e-5);
    CHECK(std::abs(kd.loss - oracle::kl_vs_logits(p.dense(), z, tau)) < 1e-10);
    double scale = 0;
    for (double g : fd)
      scale = std::max(scale, std::abs(g));
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(std::abs(kd.grad[i] - fd[i]) <= 1e-5 * std::max(scale, 1e-3));
  }
}

TEST_CASE("tau squared scaling multiplies loss and gradient") {
  const SparseProbs p(4, {1, 2}, {0.4, 0.6});
  const LogitVector z({0.1, 0.2, -0.4, 1.0});
  const auto plain = kd_loss(p, z, 0.6);
  const auto scaled = kd_loss(p, z, 0.6, KdLossOptions{true});
  CHECK(std::abs(scaled.loss - 0.36 * plain.loss) < 1e-15);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::abs(scaled.grad[i] - 0.36 * plain.grad[i]) < 1e-15);
}

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   pareto.cpp
 * @brief  Accuracy-vs-storage sweep over (pruning rate, top-k) configs.
 */
#include <slbl/trainer.hpp>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace slbl {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class Fn> void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error)
            error = std::current_exception();
        }
      }
    });
  for (auto &t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace

std::vector<bool> non_dominated(std::span<const std::uint64_t> storage,
                                std::span<const double> accuracy) {
  if (storage.size() != accuracy.size())
    throw std::invalid_argument("storage/accuracy length mismatch");
  std::vector<bool> out(storage.size(), true);
  for (std::size_t i = 0; i < storage.size(); ++i)
    for (std::size_t j = 0; j < storage.size(); ++j) {
      if (i == j)
        continue;
      const bool no_worse = storage[j] <= storage[i] && accuracy[j] >= accuracy[i];
      const bool better = storage[j] < storage[i] || accuracy[j] > accuracy[i];
      if (no_worse && better) {
        out[i] = false;
        break;
      }
    }
  return out;
}

ParetoTable pareto_sweep(const TaskSpec &spec, const SweepConfig &sweep) {
  if (sweep.grid.empty())
    throw std::invalid_argument("pareto sweep grid is empty");
  if (sweep.seeds.empty())
    throw std::invalid_argument("pareto sweep needs at least one seed");
  for (const auto &[p, k] : sweep.grid) {
    TrainConfig cfg = sweep.base;
    cfg.pruning_rate = p;
    cfg.k = k;
    cfg.validate();
    if (k > spec.num_classes)
      throw std::invalid_argument("sweep k exceeds the class count");
  }

  std::vector<Task> tasks(sweep.seeds.size());
  parallel_for(tasks.size(), sweep.jobs, [&](std::size_t s) {
    TaskSpec ts = spec;
    ts.seed = sweep.seeds[s];
    tasks[s] = generate_task(ts);
  });

  const std::size_t n_cfg = sweep.grid.size();
  const std::size_t n_seed = sweep.seeds.size();
  std::vector<TrainResult> runs(n_cfg * n_seed);
  parallel_for(runs.size(), sweep.jobs, [&](std::size_t i) {
    const std::size_t c = i / n_seed, s = i % n_seed;
    TrainConfig cfg = sweep.base;
    cfg.pruning_rate = sweep.grid[c].first;
    cfg.k = sweep.grid[c].second;
    cfg.seed = sweep.seeds[s];
    runs[i] = run_pipeline(tasks[s], cfg);
  });

  ParetoTable table;
  for (std::size_t c = 0; c < n_cfg; ++c) {
    SweepPoint pt;
    pt.pruning_rate = sweep.grid[c].first;
    pt.k = sweep.grid[c].second;
    const TrainResult &first = runs[c * n_seed];
    pt.storage_bytes = first.storage_bytes;
    pt.theoretical_ratio = first.compression.theoretical_z_ratio;
    pt.actual_ratio = first.compression.actual_ratio;
    for (std::size_t s = 0; s < n_seed; ++s)
      pt.accuracies.push_back(runs[c * n_seed + s].test_accuracy);
    pt.mean_accuracy =
        std::accumulate(pt.accuracies.begin(), pt.accuracies.end(), 0.0) /
        static_cast<double>(n_seed);
    table.points.push_back(std::move(pt));
  }
  std::stable_sort(table.points.begin(), table.points.end(),
                   [](const SweepPoint &a, const SweepPoint &b) {
                     return a.storage_bytes < b.storage_bytes;
                   });
  std::vector<std::uint64_t> storage;
  std::vector<double> acc;
  for (const auto &pt : table.points) {
    storage.push_back(pt.storage_bytes);
    acc.push_back(pt.mean_accuracy);
  }
  const auto flags = non_dominated(storage, acc);
  for (std::size_t i = 0; i < flags.size(); ++i)
    table.points[i].non_dominated = flags[i];
  return table;
}

} // namespace slbl

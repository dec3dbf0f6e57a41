// SPDX-License-Identifier: Apache-2.0
/**
 * @file   relabel.cpp
 * @brief  Augmentation replay and teacher relabeling into a label store.
 */
#include <slbl/trainer.hpp>

#include "seeding.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace slbl {

std::vector<double> apply_augmentation(std::span<const double> x,
                                       std::span<const double> partner,
                                       const AugmentationRecord &aug,
                                       float lambda) {
  if (x.size() != partner.size())
    throw std::invalid_argument("augmentation partner has another dimension");
  const double lam = lambda;
  std::vector<double> y(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double mixed = lam * x[j] + (1.0 - lam) * partner[j];
    const std::size_t pair = 2 * (j % 2);
    y[j] = static_cast<double>(aug.crop[pair]) * mixed +
           static_cast<double>(aug.crop[pair + 1]);
    if (aug.flip)
      y[j] = -y[j];
  }
  return y;
}

std::vector<double> reconstruct_input(const FeatureMatrix &distilled,
                                      const BatchRecord &record,
                                      std::size_t row) {
  const std::uint32_t image = record.image_indices.at(row);
  const AugmentationRecord &aug = record.aug.at(row);
  if (image >= distilled.rows() || aug.cutmix_partner >= distilled.rows())
    throw std::invalid_argument("stored image index beyond the distilled set");
  return apply_augmentation(distilled.row(image),
                            distilled.row(aug.cutmix_partner), aug,
                            record.cutmix_strength);
}

LabelStore relabel(const FeatureMatrix &distilled, const LinearTeacher &teacher,
                   const PrunePlan &plan, std::uint32_t batch_size,
                   std::uint32_t k, std::uint64_t seed,
                   const AugmentationRanges &ranges) {
  teacher.validate();
  if (teacher.dim != distilled.dim())
    throw std::invalid_argument("teacher and distilled set disagree on d");
  if (k > teacher.num_classes)
    throw std::invalid_argument("k exceeds the class count");
  if (batch_size < 1 ||
      full_batches_per_epoch(distilled.rows(), batch_size) < plan.batches_per_epoch)
    throw std::invalid_argument("plan needs more full batches than the set has");

  LabelStore store;
  store.header.num_classes = teacher.num_classes;
  store.header.batch_size = batch_size;
  store.header.total_epochs = plan.total_epochs;
  store.header.retained_epochs = plan.retained_epochs;
  store.header.batches_per_epoch = plan.batches_per_epoch;
  store.header.k = k;
  store.batches.reserve(static_cast<std::size_t>(plan.retained_batches()));

  const auto n = static_cast<std::uint32_t>(distilled.rows());
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t e = 0; e < plan.retained_epochs; ++e) {
    std::mt19937_64 rng(detail::derive_seed({seed, detail::kRelabelEpoch, e}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    // Remaining order[bpe * B ...] is the trailing batch, never stored.
    for (std::uint32_t b = 0; b < plan.batches_per_epoch; ++b) {
      BatchRecord r;
      r.epoch_id = e;
      r.batch_id = b;
      r.image_indices.assign(order.begin() + b * batch_size,
                             order.begin() + (b + 1) * batch_size);
      r.aug.resize(batch_size);
      for (auto &a : r.aug) {
        for (int p = 0; p < 2; ++p) {
          a.crop[2 * p] = static_cast<float>(
              ranges.scale_min + (ranges.scale_max - ranges.scale_min) * unit(rng));
          a.crop[2 * p + 1] =
              static_cast<float>(ranges.shift_max * (2.0 * unit(rng) - 1.0));
        }
        a.flip = unit(rng) < ranges.flip_probability;
        a.cutmix_partner = static_cast<std::uint32_t>(
            std::min<double>(unit(rng) * n, n - 1));
      }
      // Beta(1, 1)
      r.cutmix_strength = static_cast<float>(unit(rng));
      r.cutmix_bbox = {0, 0, 0, 0};

      const std::uint32_t width = k ? k : teacher.num_classes;
      r.label_values.reserve(std::size_t{batch_size} * width);
      if (k)
        r.label_indices.reserve(std::size_t{batch_size} * width);
      for (std::uint32_t row = 0; row < batch_size; ++row) {
        std::vector<double> z = teacher.logits(reconstruct_input(distilled, r, row));
        // Rank the values as stored so ordering holds for the f32 payload.
        for (double &v : z)
          v = static_cast<double>(static_cast<float>(v));
        if (!k) {
          for (double v : z)
            r.label_values.push_back(static_cast<float>(v));
          continue;
        }
        const QuantizedLogits q = topk_quantize(LogitVector(std::move(z)), k);
        for (std::size_t i = 0; i < q.k(); ++i) {
          r.label_indices.push_back(q.indices()[i]);
          r.label_values.push_back(static_cast<float>(q.values()[i]));
        }
      }
      store.batches.push_back(std::move(r));
    }
  }
  if (auto v = store.find_violation())
    throw std::logic_error("relabel produced an invalid store: " + *v);
  return store;
}

} // namespace slbl

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   label_store.hpp
 * @brief  On-disk soft-label store: augmentation records plus full or top-k
 *         teacher logits, label pruning plan, and byte accounting.
 *
 * Binary layout (little-endian):
 *
 *   "SLBL" | version u16 | flags u16 (bit0: quantized) | C u32 | B u32
 *   | T u32 | retained_epochs u32 | batches_per_epoch u32 | k u32 (0 = full)
 *
 * followed by retained_epochs * batches_per_epoch records, ordered by
 * (epoch, batch):
 *
 *   epoch u32 | batch u32 | image_indices B*u32 | crops B*4*f32
 *   | flips B*u8 | partners B*u32 | strength f32 | bbox 4*u32
 *   | labels (full: B*C*f32; quantized: B*k*u32 then B*k*f32)
 */
#ifndef SLBL_LABEL_STORE_HPP_
#define SLBL_LABEL_STORE_HPP_

#include <slbl/logit_core.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slbl {

inline constexpr std::array<char, 4> kStoreMagic = {'S', 'L', 'B', 'L'};
inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 32;

/// Label pruning: keep the first retained_epochs of generated labels and
/// reuse them cyclically over total_epochs of training.
struct PrunePlan {
  std::uint32_t total_epochs = 0;
  double pruning_rate = 0.0;
  /// Full batches only; the trailing incomplete batch is never stored.
  std::uint32_t batches_per_epoch = 0;
  std::uint32_t retained_epochs = 0;

  std::uint32_t stored_epoch_for(std::size_t training_epoch) const {
    return static_cast<std::uint32_t>(training_epoch % retained_epochs);
  }
  std::uint64_t retained_batches() const {
    return std::uint64_t{retained_epochs} * batches_per_epoch;
  }
};

PrunePlan prune_plan(std::uint32_t total_epochs, double pruning_rate,
                     std::uint32_t batches_per_epoch);

/// Number of complete batches of size batch_size in a pass over n samples.
std::uint32_t full_batches_per_epoch(std::size_t n, std::size_t batch_size);

/// Per-sample augmentation parameters.
struct AugmentationRecord {
  std::array<float, 4> crop{};
  bool flip = false;
  std::uint32_t cutmix_partner = 0;

  bool operator==(const AugmentationRecord &) const = default;
};

struct StoreHeader {
  std::uint32_t num_classes = 0;
  std::uint32_t batch_size = 0;
  std::uint32_t total_epochs = 0;
  std::uint32_t retained_epochs = 0;
  std::uint32_t batches_per_epoch = 0;
  std::uint32_t k = 0; ///< 0 for full logits

  bool quantized() const noexcept { return k != 0; }
  /// Labels stored per record (k or C).
  std::uint32_t label_width() const noexcept { return k != 0 ? k : num_classes; }
  std::uint64_t batch_count() const noexcept {
    return std::uint64_t{retained_epochs} * batches_per_epoch;
  }

  bool operator==(const StoreHeader &) const = default;
};

struct BatchRecord {
  std::uint32_t epoch_id = 0;
  std::uint32_t batch_id = 0;
  std::vector<std::uint32_t> image_indices;
  std::vector<AugmentationRecord> aug;
  float cutmix_strength = 0.0f;
  std::array<std::uint32_t, 4> cutmix_bbox{};
  /// B*k class ids, row-major; empty for full logits.
  std::vector<std::uint32_t> label_indices;
  /// B*C (full) or B*k (quantized) logit values, row-major.
  std::vector<float> label_values;

  bool operator==(const BatchRecord &) const = default;
};

struct LabelStore {
  StoreHeader header;
  std::vector<BatchRecord> batches;

  /// First invariant violation, if any.
  std::optional<std::string> find_violation() const;

  /// Row of a full-logit store.
  LogitVector full_logits(std::size_t batch, std::size_t row) const;
  /// Row of a quantized store.
  QuantizedLogits quantized_logits(std::size_t batch, std::size_t row) const;
  /// Teacher distribution for a row at temperature tau: softmax over all
  /// classes for full stores, masked softmax over the stored top-k otherwise.
  SparseProbs teacher_probs(std::size_t batch, std::size_t row,
                            double tau) const;

  bool operator==(const LabelStore &) const = default;
};

/// Throws EncodingError on an invalid store.
std::vector<std::uint8_t> encode_store(const LabelStore &store);

/// Throws FormatError for bad magic/version/length and CorruptStoreError for
/// invariant violations.
LabelStore decode_store(std::span<const std::uint8_t> bytes);

void write_store(const std::string &path, const LabelStore &store);
LabelStore read_store(const std::string &path);

/// Exact encoded size of a store with this header.
std::uint64_t encoded_size(const StoreHeader &header);

enum class StorageComponent : std::size_t {
  Header,
  RecordIds, ///< epoch/batch ids
  ImageIndices,
  CropCoords,
  FlipStatus,
  CutmixPartner,
  CutmixStrength,
  CutmixBbox,
  Logits,
};
inline constexpr std::size_t kStorageComponentCount = 9;

std::string_view component_name(StorageComponent c);

struct StorageBreakdown {
  std::array<std::uint64_t, kStorageComponentCount> bytes{};
  std::uint64_t total_bytes = 0;

  std::uint64_t of(StorageComponent c) const {
    return bytes[static_cast<std::size_t>(c)];
  }
  /// Share of the whole file.
  double fraction(StorageComponent c) const;
  /// Share among the six per-sample supervision components (crops, flips,
  /// partners, strength, bbox, logits), ignoring header, ids and indices.
  double supervision_share(StorageComponent c) const;
  /// Everything that is not logit payload.
  std::uint64_t auxiliary_bytes() const { return total_bytes - of(StorageComponent::Logits); }
};

StorageBreakdown storage_breakdown(const StoreHeader &header);
StorageBreakdown storage_breakdown(const LabelStore &store);

/// The unpruned, unquantized store a compressed store is measured against.
struct BaselineShape {
  std::uint32_t total_epochs = 0;
  std::uint32_t batches_per_epoch = 0;
  std::uint32_t batch_size = 0;
  std::uint32_t num_classes = 0;

  static BaselineShape of(const StoreHeader &header);
};

struct CompressionReport {
  double theoretical_z_ratio = 0.0; ///< logit payload only
  double actual_ratio = 0.0;        ///< all bytes
  std::uint64_t baseline_bytes = 0;
  std::uint64_t baseline_logit_bytes = 0;
  std::uint64_t store_bytes = 0;
};

CompressionReport compression_report(const StorageBreakdown &breakdown,
                                     const BaselineShape &baseline);

} // namespace slbl

#endif // SLBL_LABEL_STORE_HPP_

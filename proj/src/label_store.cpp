// SPDX-License-Identifier: Apache-2.0
/**
 * @file   label_store.cpp
 * @brief  Soft-label store codec, pruning plan and byte accounting.
 */
#include <slbl/label_store.hpp>

#include <slbl/errors.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace slbl {

namespace {

__extension__ using u128 = unsigned __int128;

constexpr std::uint16_t kFlagQuantized = 0x1;

// Per-record sizes, split by component.
struct RecordLayout {
  u128 ids = 8;
  u128 image_indices;
  u128 crops;
  u128 flips;
  u128 partners;
  u128 strength = 4;
  u128 bbox = 16;
  u128 logits;

  explicit RecordLayout(const StoreHeader &h)
      : image_indices(u128{h.batch_size} * 4), crops(u128{h.batch_size} * 16),
        flips(h.batch_size), partners(u128{h.batch_size} * 4),
        logits(h.quantized() ? u128{h.batch_size} * h.k * 8
                             : u128{h.batch_size} * h.num_classes * 4) {}

  u128 total() const {
    return ids + image_indices + crops + flips + partners + strength + bbox +
           logits;
  }
};

u128 encoded_size_wide(const StoreHeader &h) {
  return kStoreHeaderBytes + u128{h.batch_count()} * RecordLayout(h).total();
}

std::optional<std::string> header_violation(const StoreHeader &h) {
  if (h.num_classes < 2)
    return "num_classes must be >= 2";
  if (h.batch_size < 1)
    return "batch_size must be >= 1";
  if (h.total_epochs < 1)
    return "total_epochs must be >= 1";
  if (h.retained_epochs < 1 || h.retained_epochs > h.total_epochs)
    return "retained_epochs must be in [1, total_epochs]";
  if (h.batches_per_epoch < 1)
    return "batches_per_epoch must be >= 1";
  if (h.k > h.num_classes)
    return "k = " + std::to_string(h.k) + " exceeds C = " +
           std::to_string(h.num_classes);
  return std::nullopt;
}

std::optional<std::string> record_violation(const StoreHeader &h,
                                            const BatchRecord &r,
                                            std::size_t position) {
  const std::string where = "batch " + std::to_string(position) + ": ";
  const std::uint32_t bpe = h.batches_per_epoch;
  if (r.epoch_id != position / bpe || r.batch_id != position % bpe)
    return where + "records must be the first retained batches in order";
  if (r.epoch_id >= h.retained_epochs)
    return where + "epoch_id beyond retained epochs";
  const std::size_t b = h.batch_size;
  if (r.image_indices.size() != b || r.aug.size() != b)
    return where + "per-sample arrays must have length B";
  for (const auto &a : r.aug)
    for (float v : a.crop)
      if (!std::isfinite(v))
        return where + "crop coordinates must be finite";
  if (!std::isfinite(r.cutmix_strength) || r.cutmix_strength < 0.0f ||
      r.cutmix_strength > 1.0f)
    return where + "cutmix strength must be in [0, 1]";
  const std::size_t width = h.label_width();
  if (r.label_values.size() != b * width)
    return where + "label payload has the wrong length";
  for (float v : r.label_values)
    if (!std::isfinite(v))
      return where + "logits must be finite";
  if (!h.quantized()) {
    if (!r.label_indices.empty())
      return where + "full-logit store carries label indices";
    return std::nullopt;
  }
  if (r.label_indices.size() != b * width)
    return where + "label index payload has the wrong length";
  std::vector<bool> seen(h.num_classes);
  for (std::size_t row = 0; row < b; ++row) {
    std::fill(seen.begin(), seen.end(), false);
    for (std::size_t j = 0; j < width; ++j) {
      const std::uint32_t id = r.label_indices[row * width + j];
      if (id >= h.num_classes || seen[id])
        return where + "top-k indices must be unique and < C";
      seen[id] = true;
      if (j == 0)
        continue;
      const float prev = r.label_values[row * width + j - 1];
      const float cur = r.label_values[row * width + j];
      const std::uint32_t prev_id = r.label_indices[row * width + j - 1];
      if (!(prev > cur || (prev == cur && prev_id < id)))
        return where + "top-k entries must be ordered by (value desc, index asc)";
    }
  }
  return std::nullopt;
}

class Writer {
public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  template <class T> void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(std::begin(raw), std::end(raw));
    out_.insert(out_.end(), std::begin(raw), std::end(raw));
  }

  template <class T> void put_all(std::span<const T> vs) {
    for (const T &v : vs)
      put(v);
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T> T get() {
    if (bytes_.size() - pos_ < sizeof(T))
      throw FormatError("label store truncated at byte " +
                        std::to_string(pos_));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(std::begin(raw), std::end(raw));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }

  template <class T> void get_all(std::vector<T> &out, std::size_t n) {
    out.resize(n);
    for (auto &v : out)
      v = get<T>();
  }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

} // namespace

std::uint32_t full_batches_per_epoch(std::size_t n, std::size_t batch_size) {
  if (batch_size == 0)
    throw std::invalid_argument("batch size must be >= 1");
  return static_cast<std::uint32_t>(n / batch_size);
}

PrunePlan prune_plan(std::uint32_t total_epochs, double pruning_rate,
                     std::uint32_t batches_per_epoch) {
  if (total_epochs < 1)
    throw std::invalid_argument("prune plan: total epochs must be >= 1");
  if (!(pruning_rate >= 0.0 && pruning_rate < 1.0))
    throw std::invalid_argument("prune plan: pruning rate must be in [0, 1)");
  if (batches_per_epoch < 1)
    throw std::invalid_argument("prune plan: batches per epoch must be >= 1");
  PrunePlan plan;
  plan.total_epochs = total_epochs;
  plan.pruning_rate = pruning_rate;
  plan.batches_per_epoch = batches_per_epoch;
  const double kept = std::round((1.0 - pruning_rate) * total_epochs);
  plan.retained_epochs = static_cast<std::uint32_t>(
      std::clamp(kept, 1.0, static_cast<double>(total_epochs)));
  return plan;
}

std::optional<std::string> LabelStore::find_violation() const {
  if (auto v = header_violation(header))
    return v;
  if (batches.empty())
    return "store has no batches";
  if (batches.size() != header.batch_count())
    return "store holds " + std::to_string(batches.size()) +
           " batches, header implies " + std::to_string(header.batch_count());
  for (std::size_t i = 0; i < batches.size(); ++i)
    if (auto v = record_violation(header, batches[i], i))
      return v;
  return std::nullopt;
}

LogitVector LabelStore::full_logits(std::size_t batch, std::size_t row) const {
  if (header.quantized())
    throw std::logic_error("full_logits on a quantized store");
  const auto &values = batches.at(batch).label_values;
  const std::size_t c = header.num_classes;
  if (row >= header.batch_size)
    throw std::out_of_range("row beyond batch size");
  return LogitVector(std::vector<double>(values.begin() + row * c,
                                         values.begin() + (row + 1) * c));
}

QuantizedLogits LabelStore::quantized_logits(std::size_t batch,
                                             std::size_t row) const {
  if (!header.quantized())
    throw std::logic_error("quantized_logits on a full-logit store");
  const auto &r = batches.at(batch);
  const std::size_t k = header.k;
  if (row >= header.batch_size)
    throw std::out_of_range("row beyond batch size");
  return QuantizedLogits(
      header.num_classes,
      std::vector<ClassId>(r.label_indices.begin() + row * k,
                           r.label_indices.begin() + (row + 1) * k),
      std::vector<double>(r.label_values.begin() + row * k,
                          r.label_values.begin() + (row + 1) * k));
}

SparseProbs LabelStore::teacher_probs(std::size_t batch, std::size_t row,
                                      double tau) const {
  if (header.quantized())
    return quantized_probs(quantized_logits(batch, row), tau);
  return softmax_t(full_logits(batch, row), tau).to_sparse();
}

std::uint64_t encoded_size(const StoreHeader &header) {
  const u128 wide = encoded_size_wide(header);
  if (wide > u128{UINT64_MAX})
    throw std::overflow_error("encoded store size exceeds 64 bits");
  return static_cast<std::uint64_t>(wide);
}

std::vector<std::uint8_t> encode_store(const LabelStore &store) {
  if (auto v = store.find_violation())
    throw EncodingError("cannot encode label store: " + *v);
  const StoreHeader &h = store.header;
  Writer w(encoded_size(h));
  for (char ch : kStoreMagic)
    w.put(static_cast<std::uint8_t>(ch));
  w.put(kStoreVersion);
  w.put(static_cast<std::uint16_t>(h.quantized() ? kFlagQuantized : 0));
  w.put(h.num_classes);
  w.put(h.batch_size);
  w.put(h.total_epochs);
  w.put(h.retained_epochs);
  w.put(h.batches_per_epoch);
  w.put(h.k);
  for (const BatchRecord &r : store.batches) {
    w.put(r.epoch_id);
    w.put(r.batch_id);
    w.put_all<std::uint32_t>(r.image_indices);
    for (const auto &a : r.aug)
      w.put_all<float>(a.crop);
    for (const auto &a : r.aug)
      w.put(static_cast<std::uint8_t>(a.flip ? 1 : 0));
    for (const auto &a : r.aug)
      w.put(a.cutmix_partner);
    w.put(r.cutmix_strength);
    w.put_all<std::uint32_t>(r.cutmix_bbox);
    w.put_all<std::uint32_t>(r.label_indices);
    w.put_all<float>(r.label_values);
  }
  return w.take();
}

LabelStore decode_store(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kStoreMagic.size() ||
      !std::equal(kStoreMagic.begin(), kStoreMagic.end(), bytes.begin(),
                  [](char m, std::uint8_t b) {
                    return static_cast<std::uint8_t>(m) == b;
                  }))
    throw FormatError("not a label store: bad magic");
  if (bytes.size() < kStoreHeaderBytes)
    throw FormatError("label store truncated inside the header");

  Reader rd(bytes.subspan(kStoreMagic.size()));
  const auto version = rd.get<std::uint16_t>();
  if (version != kStoreVersion)
    throw FormatError("unsupported label store version " +
                      std::to_string(version));
  const auto flags = rd.get<std::uint16_t>();
  if ((flags & ~kFlagQuantized) != 0)
    throw FormatError("unknown label store flags");

  LabelStore store;
  StoreHeader &h = store.header;
  h.num_classes = rd.get<std::uint32_t>();
  h.batch_size = rd.get<std::uint32_t>();
  h.total_epochs = rd.get<std::uint32_t>();
  h.retained_epochs = rd.get<std::uint32_t>();
  h.batches_per_epoch = rd.get<std::uint32_t>();
  h.k = rd.get<std::uint32_t>();
  if (auto v = header_violation(h))
    throw CorruptStoreError("corrupt label store header: " + *v);
  if (((flags & kFlagQuantized) != 0) != h.quantized())
    throw CorruptStoreError(
        "corrupt label store header: quantized flag disagrees with k");

  const u128 expected = encoded_size_wide(h);
  if (u128{bytes.size()} != expected)
    throw FormatError("label store length " + std::to_string(bytes.size()) +
                      " does not match header (" +
                      (u128{bytes.size()} < expected ? "truncated" : "trailing bytes") +
                      ")");

  const std::size_t b = h.batch_size;
  const std::size_t width = h.label_width();
  store.batches.resize(static_cast<std::size_t>(h.batch_count()));
  for (BatchRecord &r : store.batches) {
    r.epoch_id = rd.get<std::uint32_t>();
    r.batch_id = rd.get<std::uint32_t>();
    rd.get_all(r.image_indices, b);
    r.aug.resize(b);
    for (auto &a : r.aug)
      for (float &v : a.crop)
        v = rd.get<float>();
    for (auto &a : r.aug) {
      const auto flip = rd.get<std::uint8_t>();
      if (flip > 1)
        throw CorruptStoreError("corrupt label store: flip byte must be 0 or 1");
      a.flip = flip == 1;
    }
    for (auto &a : r.aug)
      a.cutmix_partner = rd.get<std::uint32_t>();
    r.cutmix_strength = rd.get<float>();
    for (auto &v : r.cutmix_bbox)
      v = rd.get<std::uint32_t>();
    if (h.quantized())
      rd.get_all(r.label_indices, b * width);
    rd.get_all(r.label_values, b * width);
  }
  if (auto v = store.find_violation())
    throw CorruptStoreError("corrupt label store: " + *v);
  return store;
}

void write_store(const std::string &path, const LabelStore &store) {
  const auto bytes = encode_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("failed writing " + path);
}

LabelStore read_store(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_store(bytes);
}

std::string_view component_name(StorageComponent c) {
  switch (c) {
  case StorageComponent::Header:
    return "header";
  case StorageComponent::RecordIds:
    return "record_ids";
  case StorageComponent::ImageIndices:
    return "image_indices";
  case StorageComponent::CropCoords:
    return "crop_coords";
  case StorageComponent::FlipStatus:
    return "flip_status";
  case StorageComponent::CutmixPartner:
    return "cutmix_partner";
  case StorageComponent::CutmixStrength:
    return "cutmix_strength";
  case StorageComponent::CutmixBbox:
    return "cutmix_bbox";
  case StorageComponent::Logits:
    return "logits";
  }
  return "unknown";
}

double StorageBreakdown::fraction(StorageComponent c) const {
  return static_cast<double>(of(c)) / static_cast<double>(total_bytes);
}

double StorageBreakdown::supervision_share(StorageComponent c) const {
  using SC = StorageComponent;
  const std::uint64_t sum = of(SC::CropCoords) + of(SC::FlipStatus) +
                            of(SC::CutmixPartner) + of(SC::CutmixStrength) +
                            of(SC::CutmixBbox) + of(SC::Logits);
  switch (c) {
  case SC::Header:
  case SC::RecordIds:
  case SC::ImageIndices:
    return 0.0;
  default:
    return static_cast<double>(of(c)) / static_cast<double>(sum);
  }
}

StorageBreakdown storage_breakdown(const StoreHeader &header) {
  if (auto v = header_violation(header))
    throw std::invalid_argument("storage breakdown: " + *v);
  const RecordLayout rec(header);
  const u128 n = header.batch_count();
  auto narrow = [](u128 v) {
    if (v > u128{UINT64_MAX})
      throw std::overflow_error("store size exceeds 64 bits");
    return static_cast<std::uint64_t>(v);
  };
  using SC = StorageComponent;
  StorageBreakdown out;
  auto set = [&](SC c, u128 v) { out.bytes[static_cast<std::size_t>(c)] = narrow(v); };
  set(SC::Header, kStoreHeaderBytes);
  set(SC::RecordIds, n * rec.ids);
  set(SC::ImageIndices, n * rec.image_indices);
  set(SC::CropCoords, n * rec.crops);
  set(SC::FlipStatus, n * rec.flips);
  set(SC::CutmixPartner, n * rec.partners);
  set(SC::CutmixStrength, n * rec.strength);
  set(SC::CutmixBbox, n * rec.bbox);
  set(SC::Logits, n * rec.logits);
  u128 total = 0;
  for (auto b : out.bytes)
    total += b;
  out.total_bytes = narrow(total);
  return out;
}

StorageBreakdown storage_breakdown(const LabelStore &store) {
  if (store.batches.empty())
    throw std::invalid_argument("storage breakdown of an empty store");
  return storage_breakdown(store.header);
}

BaselineShape BaselineShape::of(const StoreHeader &header) {
  return {header.total_epochs, header.batches_per_epoch, header.batch_size,
          header.num_classes};
}

CompressionReport compression_report(const StorageBreakdown &breakdown,
                                     const BaselineShape &baseline) {
  if (breakdown.total_bytes == 0 || breakdown.of(StorageComponent::Logits) == 0)
    throw std::invalid_argument("compression report of an empty store");
  StoreHeader full;
  full.num_classes = baseline.num_classes;
  full.batch_size = baseline.batch_size;
  full.total_epochs = baseline.total_epochs;
  full.retained_epochs = baseline.total_epochs;
  full.batches_per_epoch = baseline.batches_per_epoch;
  full.k = 0;
  const StorageBreakdown base = storage_breakdown(full);

  CompressionReport out;
  out.baseline_bytes = base.total_bytes;
  out.baseline_logit_bytes = base.of(StorageComponent::Logits);
  out.store_bytes = breakdown.total_bytes;
  out.theoretical_z_ratio =
      static_cast<double>(out.baseline_logit_bytes) /
      static_cast<double>(breakdown.of(StorageComponent::Logits));
  out.actual_ratio = static_cast<double>(out.baseline_bytes) /
                     static_cast<double>(out.store_bytes);
  return out;
}

} // namespace slbl

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   features.cpp
 * @brief  Labelled feature matrix and its binary tensor file.
 */
#include <slbl/features.hpp>

#include <slbl/errors.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace slbl {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'M', 'X'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t{b[at + i]} << (8 * i);
  return v;
}

} // namespace

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> data,
                             std::vector<ClassId> labels,
                             std::uint32_t num_classes)
    : dim_(dim), data_(std::move(data)), labels_(std::move(labels)),
      num_classes_(num_classes) {
  if (dim_ < 1)
    throw std::invalid_argument("feature dimension must be >= 1");
  if (data_.size() % dim_ != 0)
    throw std::invalid_argument("feature data is not a whole number of rows");
  if (!labels_.empty() && labels_.size() != rows())
    throw std::invalid_argument("feature labels must match the row count");
  if (num_classes_ == 0 && !labels_.empty())
    num_classes_ = *std::max_element(labels_.begin(), labels_.end()) + 1;
  for (ClassId l : labels_)
    if (l >= num_classes_)
      throw std::invalid_argument("feature label exceeds class count");
}

std::vector<std::size_t> FeatureMatrix::rows_of_class(ClassId c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == c)
      out.push_back(i);
  return out;
}

void FeatureMatrix::append(const FeatureMatrix &other) {
  if (rows() == 0 && dim_ == 0) {
    *this = other;
    return;
  }
  if (other.dim_ != dim_)
    throw std::invalid_argument("cannot append features of another dimension");
  if (has_labels() != other.has_labels() && rows() > 0 && other.rows() > 0)
    throw std::invalid_argument("cannot mix labelled and unlabelled features");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  num_classes_ = std::max(num_classes_, other.num_classes_);
}

std::vector<std::uint8_t> encode_features(const FeatureMatrix &m) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + m.rows() * (m.dim() * 4 + 4));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, m.has_labels() ? m.num_classes() : 0);
  for (double v : m.data())
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (std::size_t i = 0; i < m.rows(); ++i)
    put_u32(out, m.has_labels() ? m.label(i) : 0);
  return out;
}

FeatureMatrix decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a feature file: bad magic");
  if (bytes.size() < kHeaderBytes)
    throw FormatError("feature file truncated inside the header");
  const std::uint32_t d = get_u32(bytes, 4);
  const std::uint32_t n = get_u32(bytes, 8);
  const std::uint32_t c = get_u32(bytes, 12);
  const std::uint64_t row_bytes = std::uint64_t{d} * 4 + 4;
  const std::uint64_t body = bytes.size() - kHeaderBytes;
  if (body % row_bytes != 0 || body / row_bytes != n)
    throw FormatError("feature file length does not match its header");
  if (d < 1)
    throw FormatError("feature file declares dimension 0");
  std::vector<double> data(std::size_t{n} * d);
  std::size_t at = kHeaderBytes;
  for (double &v : data) {
    v = std::bit_cast<float>(get_u32(bytes, at));
    at += 4;
  }
  std::vector<ClassId> labels(n);
  for (auto &l : labels) {
    l = get_u32(bytes, at);
    at += 4;
    if (c > 0 && l >= c)
      throw FormatError("feature file label exceeds its class count");
  }
  if (c == 0)
    labels.clear();
  return FeatureMatrix(d, std::move(data), std::move(labels), c);
}

void write_features(const std::string &path, const FeatureMatrix &m) {
  const auto bytes = encode_features(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("failed writing " + path);
}

FeatureMatrix read_features(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_features(bytes);
}

} // namespace slbl

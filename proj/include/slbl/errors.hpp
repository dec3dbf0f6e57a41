// SPDX-License-Identifier: Apache-2.0
/**
 * @file   errors.hpp
 * @brief  Exception types shared by the soft-label library.
 *
 * Precondition violations on the numeric kernels throw std::invalid_argument.
 * The types below cover failures that callers usually want to tell apart.
 */
#ifndef SLBL_ERRORS_HPP_
#define SLBL_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slbl {

/// Malformed byte stream: bad magic, unsupported version, wrong length.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Well-formed stream whose decoded contents violate a store invariant.
class CorruptStoreError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A store that cannot be encoded because it violates an invariant.
class EncodingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss during synthetic-sample optimization.
class OptimizationError : public std::runtime_error {
public:
  OptimizationError(const std::string &what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) +
                           ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t iteration_;
};

} // namespace slbl

#endif // SLBL_ERRORS_HPP_

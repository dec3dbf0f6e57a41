// SPDX-License-Identifier: Apache-2.0
/**
 * @file   seeding.hpp
 * @brief  Derivation of independent RNG streams from (seed, tag...) tuples.
 */
#ifndef SLBL_SRC_SEEDING_HPP_
#define SLBL_SRC_SEEDING_HPP_

#include <cstdint>
#include <initializer_list>

namespace slbl::detail {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (auto p : parts)
    h = mix64(h ^ mix64(p));
  return h;
}

// Stream tags, so that e.g. the task and relabel streams of one seed differ.
enum StreamTag : std::uint64_t {
  kTaskMeans = 1,
  kTaskTrain,
  kTaskTest,
  kTaskDistilled,
  kTaskSynth,
  kRelabelEpoch,
  kStudentInit,
  kReuseShuffle,
};

} // namespace slbl::detail

#endif // SLBL_SRC_SEEDING_HPP_

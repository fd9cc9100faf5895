// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Portable seeded draws. std::uniform_int_distribution and std::shuffle are
// implementation-defined, so selections would differ between standard
// libraries; these helpers only rely on std::mt19937_64 and std::seed_seq,
// whose outputs are fixed by the standard.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxnoise::rng {

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

inline std::mt19937_64 make(uint64_t seed, std::string_view stream = {}) {
  const uint64_t tag = fnv1a(stream);
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(tag),
                    static_cast<uint32_t>(tag >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform integer in [0, bound) by rejection sampling.
inline uint64_t below(std::mt19937_64& gen, uint64_t bound) {
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& gen) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(below(gen, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace ctxnoise::rng

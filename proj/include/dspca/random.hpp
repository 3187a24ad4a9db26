#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dspca {

/// Independent generator stream keyed by a base seed and stream labels, so
/// results do not depend on the order streams are consumed in.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * keys.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : keys) push(k);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace dspca

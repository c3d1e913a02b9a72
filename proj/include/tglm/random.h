//
// Copyright 2026 The Truthful GLM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef TGLM_RANDOM_H_
#define TGLM_RANDOM_H_

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace tglm {

// SplitMix64 finalizer. Used as the stable mixing function for every derived
// seed in the library; its output is identical on every platform.
constexpr uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable hash of (base, tag_1, ..., tag_k):
//   h_0 = SplitMix64(base)
//   h_j = SplitMix64(h_{j-1} ^ SplitMix64(tag_j + j))
// Cells of an experiment derive their seeds as
// DeriveSeed(master_seed, {n, repeat, arm}).
constexpr uint64_t DeriveSeed(uint64_t base,
                              std::initializer_list<uint64_t> tags) {
  uint64_t h = SplitMix64(base);
  uint64_t j = 1;
  for (uint64_t tag : tags) {
    h = SplitMix64(h ^ SplitMix64(tag + j));
    ++j;
  }
  return h;
}

// SplitMix64 counter stream: output k is SplitMix64(seed + k * golden).
// Construction is O(1), so every agent, trial and release can own a stream
// derived from a stable hash without paying for engine warm-up. Satisfies
// UniformRandomBitGenerator so it plugs into the <random> distributions.
class RandomStream {
 public:
  using result_type = uint64_t;

  explicit RandomStream(uint64_t seed) : seed_(seed), state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<uint64_t>::max();
  }
  result_type operator()() {
    const uint64_t out = SplitMix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

  uint64_t seed() const { return seed_; }

  // Independent stream keyed on (seed, tag); does not advance this stream.
  RandomStream Fork(uint64_t tag) const {
    return RandomStream(DeriveSeed(seed_, {tag}));
  }

  friend bool operator==(const RandomStream& a, const RandomStream& b) {
    return a.seed_ == b.seed_ && a.state_ == b.state_;
  }

 private:
  uint64_t seed_;
  uint64_t state_;
};

}  // namespace tglm

#endif  // TGLM_RANDOM_H_

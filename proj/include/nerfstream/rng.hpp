// Copyright 2026 The nerfstream Authors
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

#pragma once

#include <cmath>
#include <cstdint>

namespace nerfstream {

// splitmix64 mixer. Used to derive stream keys from (seed, purpose, index)
// tuples so that every consumer of randomness is keyed independently of
// evaluation order and thread count.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// PCG32 (XSH-RR). Small, fast, and identical on every platform.
class Pcg32 {
 public:
  explicit Pcg32(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbull) {
    state_ = 0;
    inc_ = (stream << 1) | 1;
    next();
    state_ += splitmix64(seed);
    next();
  }

  uint32_t next() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18) ^ old) >> 27);
    uint32_t rot = static_cast<uint32_t>(old >> 59);
    return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31));
  }

  // Uniform in [0,1).
  double uniform() { return next() * (1.0 / 4294967296.0); }

  // Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0,n) by rejection.
  uint32_t below(uint32_t n) {
    uint32_t threshold = (-n) % n;
    for (;;) {
      uint32_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; one draw per call, spare discarded to
  // keep consumption independent of call parity.
  double normal() {
    double u1 = 0;
    while (u1 == 0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
  uint64_t inc_;
};

// Keyed generator for a named purpose. Identical inputs give an identical
// stream regardless of what other streams were drawn before.
inline Pcg32 keyed_rng(uint64_t seed, uint64_t purpose, uint64_t index = 0) {
  return Pcg32(hash_combine(hash_combine(seed, purpose), index));
}

// Stream purposes. Values are part of the reproducibility contract: changing
// them changes every derived random sequence.
enum : uint64_t {
  kStreamScene = 1,
  kStreamTrainRays = 2,
  kStreamInit = 3,
  kStreamNoise = 4,
  kStreamJitter = 5,
};

}  // namespace nerfstream

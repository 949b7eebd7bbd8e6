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

#include <cstdint>

#include "nerfstream/common.hpp"

namespace nerfstream {

// Binary range coder: 32-bit range, 16-bit adaptive probability states,
// byte-wise renormalization with carry propagation. Integer-only, so
// bitstreams are identical on every platform.

// Adaptive probability of the bit being 0, in 1/65536 units. The shift-5
// update keeps the state inside [31, 65505], so neither symbol ever gets
// zero probability.
struct BitProb {
  uint32_t p0 = 0x8000;

  void update(int bit) {
    if (bit)
      p0 -= p0 >> 5;
    else
      p0 += (0x10000 - p0) >> 5;
  }
};

class RangeEncoder {
 public:
  void encode_bit(BitProb* prob, int bit) {
    uint32_t bound = (range_ >> 16) * prob->p0;
    if (bit) {
      low_ += bound;
      range_ -= bound;
    } else {
      range_ = bound;
    }
    prob->update(bit);
    while (range_ < (1u << 24)) {
      shift_low();
      range_ <<= 8;
    }
  }

  // Flushes the final state; the coder cannot be used afterwards.
  ByteBuffer finish() {
    for (int i = 0; i < 5; i++) shift_low();
    return std::move(out_);
  }

 private:
  void shift_low() {
    if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      uint8_t carry = static_cast<uint8_t>(low_ >> 32);
      uint8_t b = cache_;
      do {
        out_.push_back(static_cast<uint8_t>(b + carry));
        b = 0xFF;
      } while (--cache_size_);
      cache_ = static_cast<uint8_t>(low_ >> 24);
    }
    cache_size_++;
    low_ = static_cast<uint32_t>(low_) << 8;
  }

  ByteBuffer out_;
  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint32_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 5; i++) code_ = (code_ << 8) | next_byte();
  }
  explicit RangeDecoder(const ByteBuffer& b)
      : RangeDecoder(b.data(), b.size()) {}

  int decode_bit(BitProb* prob) {
    uint32_t bound = (range_ >> 16) * prob->p0;
    int bit;
    if (code_ < bound) {
      range_ = bound;
      bit = 0;
    } else {
      code_ -= bound;
      range_ -= bound;
      bit = 1;
    }
    prob->update(bit);
    while (range_ < (1u << 24)) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return bit;
  }

  size_t position() const { return pos_; }

 private:
  uint8_t next_byte() {
    if (pos_ >= size_) throw DecodeError("range coder ran past the stream", pos_);
    return data_[pos_++];
  }

  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace nerfstream

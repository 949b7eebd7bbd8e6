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

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nerfstream {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Bad user input: malformed config files, unknown keys, missing paths.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inconsistent internal wiring (dimension mismatches and the like).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Truncated or corrupt bitstreams. Carries the byte offset where decoding
// gave up.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& msg, size_t byte_offset)
      : std::runtime_error(msg + " (byte offset " +
                           std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  size_t offset;
};

// Numerical failure during optimization (non-finite loss).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Small vector/matrix types
// ---------------------------------------------------------------------------

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& v) const { return {x + v.x, y + v.y, z + v.z}; }
  Vec3 operator-(const Vec3& v) const { return {x - v.x, y - v.y, z - v.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& v) {
    x += v.x;
    y += v.y;
    z += v.z;
    return *this;
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
          a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3& v) { return v / norm(v); }

// Row-major 3x3 matrix. Used for camera orientations (world-from-camera).
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  // Column accessors: columns are the camera axes expressed in world space.
  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  static Mat3 from_cols(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// Max deviation from orthonormality: |R^T R - I| entrywise plus |det - 1|.
inline double orthonormality_error(const Mat3& r) {
  double worst = 0;
  for (int i = 0; i < 3; i++) {
    for (int j = 0; j < 3; j++) {
      double d = dot(r.col(i), r.col(j)) - (i == j ? 1.0 : 0.0);
      worst = std::max(worst, std::fabs(d));
    }
  }
  return std::max(worst, std::fabs(r.det() - 1.0));
}

struct RGB {
  double r = 0, g = 0, b = 0;

  RGB() = default;
  RGB(double r_, double g_, double b_) : r(r_), g(g_), b(b_) {}
  double operator[](int i) const { return i == 0 ? r : (i == 1 ? g : b); }
  double& operator[](int i) { return i == 0 ? r : (i == 1 ? g : b); }
  RGB& operator+=(const RGB& o) {
    r += o.r;
    g += o.g;
    b += o.b;
    return *this;
  }
};

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

// W x H x 3 scalar image, values nominally in [0,1], row-major by rows then
// channels. 8-bit conversion happens only at the image-codec boundary.
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // size width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0.0) {}

  double& at(int x, int y, int c) {
    return data[(size_t(y) * width + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data[(size_t(y) * width + x) * 3 + c];
  }
  void set(int x, int y, const RGB& px) {
    at(x, y, 0) = px.r;
    at(x, y, 1) = px.g;
    at(x, y, 2) = px.b;
  }
  RGB get(int x, int y) const {
    return {at(x, y, 0), at(x, y, 1), at(x, y, 2)};
  }
};

inline uint8_t to_byte(double v) {
  double s = std::nearbyint(v * 255.0);
  if (s < 0) s = 0;
  if (s > 255) s = 255;
  return static_cast<uint8_t>(s);
}
inline double from_byte(uint8_t b) { return b / 255.0; }

// ---------------------------------------------------------------------------
// Misc numerics
// ---------------------------------------------------------------------------

// Round to nearest integer, ties to even (relies on the default FP rounding
// mode, which the library never changes).
inline int64_t round_half_even(double v) {
  return static_cast<int64_t>(std::nearbyint(v));
}

inline double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

// ---------------------------------------------------------------------------
// Little-endian byte IO
// ---------------------------------------------------------------------------

using ByteBuffer = std::vector<uint8_t>;

inline void put_u8(ByteBuffer& b, uint8_t v) { b.push_back(v); }
inline void put_u16le(ByteBuffer& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}
inline void put_u32le(ByteBuffer& b, uint32_t v) {
  for (int i = 0; i < 4; i++) b.push_back((v >> (8 * i)) & 0xff);
}
inline void put_u64le(ByteBuffer& b, uint64_t v) {
  for (int i = 0; i < 8; i++) b.push_back((v >> (8 * i)) & 0xff);
}
inline void put_f64le(ByteBuffer& b, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64le(b, bits);
}
inline void put_f32le(ByteBuffer& b, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(b, bits);
}

// Bounds-checked reader over a byte buffer.
class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const ByteBuffer& b) : data_(b.data()), size_(b.size()) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16le() {
    need(2);
    uint16_t v = uint16_t(data_[pos_]) | (uint16_t(data_[pos_ + 1]) << 8);
    pos_ += 2;
    return v;
  }
  uint32_t u32le() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64le() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64le() {
    uint64_t bits = u64le();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  float f32le() {
    uint32_t bits = u32le();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  const uint8_t* raw(size_t n) {
    need(n);
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  void skip(size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(size_t n) {
    if (pos_ + n > size_) throw DecodeError("truncated stream", pos_);
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

inline void write_file(const std::string& path, const ByteBuffer& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("write failed: " + path);
}

inline ByteBuffer read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw UsageError("cannot open: " + path);
  std::streamsize n = f.tellg();
  f.seekg(0);
  ByteBuffer b(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(b.data()), n);
  if (!f) throw UsageError("read failed: " + path);
  return b;
}

}  // namespace nerfstream

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

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nerfstream/common.hpp"
#include "nerfstream/rangecoder.hpp"
#include "nerfstream/scene.hpp"

namespace nerfstream {

// Block-transform video codec for training-image sequences. Frames are
// converted to full-range YCbCr (4:4:4), transformed in 8x8 blocks with an
// orthonormal DCT, quantized with a single step size derived from the QP,
// and entropy coded with the adaptive binary range coder. Intra frames use
// flat (DC) prediction from reconstructed neighbors; inter frames predict
// 16x16 macroblocks from the previous reconstruction with full-search
// motion compensation plus an explicit skip mode. The encoder runs the
// decoder's reconstruction loop, so there is no drift by construction.

// ---------------------------------------------------------------------------
// Planes and frames
// ---------------------------------------------------------------------------

// One image channel holding integer-valued samples in [0,255], stored as
// doubles so transform arithmetic needs no conversions.
struct Plane {
  size_t width = 0, height = 0;
  std::vector<double> samples;

  Plane() = default;
  Plane(size_t w, size_t h) : width(w), height(h), samples(w * h, 0.0) {}

  double at(size_t x, size_t y) const { return samples[y * width + x]; }
  double& at(size_t x, size_t y) { return samples[y * width + x]; }
};

// Y, Cb, Cr at full resolution.
struct Frame {
  size_t width = 0, height = 0;
  std::array<Plane, 3> planes;

  Frame() = default;
  Frame(size_t w, size_t h)
      : width(w), height(h), planes{Plane(w, h), Plane(w, h), Plane(w, h)} {}
};

namespace detail {

inline double clamp255(double v) { return v < 0 ? 0 : (v > 255 ? 255 : v); }

}  // namespace detail

// BT.601 full-range conversion. Input channels are quantized to 8 bits
// first, so a Frame always holds integer sample values.
inline Frame rgb_to_ycbcr(const Image& img) {
  Frame f(size_t(img.width), size_t(img.height));
  for (int y = 0; y < img.height; y++) {
    for (int x = 0; x < img.width; x++) {
      double r = to_byte(img.at(x, y, 0));
      double g = to_byte(img.at(x, y, 1));
      double b = to_byte(img.at(x, y, 2));
      double yv = 0.299 * r + 0.587 * g + 0.114 * b;
      double cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
      double cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
      f.planes[0].at(size_t(x), size_t(y)) =
          detail::clamp255(std::nearbyint(yv));
      f.planes[1].at(size_t(x), size_t(y)) =
          detail::clamp255(std::nearbyint(cb));
      f.planes[2].at(size_t(x), size_t(y)) =
          detail::clamp255(std::nearbyint(cr));
    }
  }
  return f;
}

inline Image ycbcr_to_rgb(const Frame& f) {
  Image img(int(f.width), int(f.height));
  for (size_t y = 0; y < f.height; y++) {
    for (size_t x = 0; x < f.width; x++) {
      double yv = f.planes[0].at(x, y);
      double cb = f.planes[1].at(x, y) - 128.0;
      double cr = f.planes[2].at(x, y) - 128.0;
      double r = yv + 1.402 * cr;
      double g = yv - 0.344136 * cb - 0.714136 * cr;
      double b = yv + 1.772 * cb;
      img.at(int(x), int(y), 0) = detail::clamp255(r) / 255.0;
      img.at(int(x), int(y), 1) = detail::clamp255(g) / 255.0;
      img.at(int(x), int(y), 2) = detail::clamp255(b) / 255.0;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// 8x8 orthonormal DCT
// ---------------------------------------------------------------------------

using Block8 = Eigen::Matrix<double, 8, 8>;

namespace detail {

inline const Block8& dct8_basis() {
  static const Block8 basis = [] {
    Block8 m;
    for (int u = 0; u < 8; u++) {
      double scale = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; x++)
        m(u, x) =
            scale * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return m;
  }();
  return basis;
}

}  // namespace detail

inline Block8 dct8(const Block8& samples) {
  const Block8& m = detail::dct8_basis();
  return m * samples * m.transpose();
}

inline Block8 idct8(const Block8& coef) {
  const Block8& m = detail::dct8_basis();
  return m.transpose() * coef * m;
}

// ---------------------------------------------------------------------------
// Quantization step
// ---------------------------------------------------------------------------

// Step size doubles every 6 QP units; qp = 4 is the unit step.
inline double qp_to_qstep(int qp) {
  if (qp < 0 || qp > 51)
    throw ConfigError("video qp " + std::to_string(qp) +
                      " outside [0, 51]");
  return std::exp2((qp - 4) / 6.0);
}

// ---------------------------------------------------------------------------
// Coefficient scan and entropy coding
// ---------------------------------------------------------------------------

namespace detail {

constexpr size_t kBlockSize = 8;
constexpr size_t kMacroblockSize = 16;
constexpr int kMotionRange = 8;

// Row-major coefficient index of each position along the diagonal zigzag
// scan (low frequencies first).
inline const std::array<uint8_t, 64>& zigzag_order() {
  static const std::array<uint8_t, 64> order = [] {
    std::array<uint8_t, 64> t{};
    size_t n = 0;
    for (int s = 0; s <= 14; s++) {
      int lo = std::max(0, s - 7), hi = std::min(7, s);
      if (s % 2 == 1)
        for (int r = lo; r <= hi; r++) t[n++] = uint8_t(r * 8 + (s - r));
      else
        for (int r = hi; r >= lo; r--) t[n++] = uint8_t(r * 8 + (s - r));
    }
    return t;
  }();
  return order;
}

// Context bucket by scan position: DC, low, mid, high frequencies.
inline int coef_class(size_t pos) {
  if (pos == 0) return 0;
  if (pos < 4) return 1;
  if (pos < 16) return 2;
  return 3;
}

// Adaptive order-0 Exp-Golomb coder with per-position bit contexts.
struct UintCoder {
  static constexpr int kContexts = 12;
  BitProb prefix[kContexts];
  BitProb suffix[kContexts];
};

constexpr int kMaxUintPrefix = 40;

inline void encode_uint(RangeEncoder* enc, UintCoder* c, uint64_t v) {
  uint64_t w = v + 1;
  int len = 0;
  while ((w >> (len + 1)) != 0) len++;
  for (int i = 0; i < len; i++)
    enc->encode_bit(&c->prefix[std::min(i, UintCoder::kContexts - 1)], 0);
  enc->encode_bit(&c->prefix[std::min(len, UintCoder::kContexts - 1)], 1);
  for (int i = len - 1; i >= 0; i--)
    enc->encode_bit(
        &c->suffix[std::min(len - 1 - i, UintCoder::kContexts - 1)],
        int((w >> i) & 1));
}

inline uint64_t decode_uint(RangeDecoder* dec, UintCoder* c) {
  int len = 0;
  while (!dec->decode_bit(&c->prefix[std::min(len, UintCoder::kContexts - 1)])) {
    if (++len > kMaxUintPrefix)
      throw DecodeError("implausible coded integer", dec->position());
  }
  uint64_t w = 1;
  for (int i = 0; i < len; i++)
    w = (w << 1) | uint64_t(dec->decode_bit(
                       &c->suffix[std::min(i, UintCoder::kContexts - 1)]));
  return w - 1;
}

// Static code length of the same binarization, for mode-decision estimates.
inline int eg0_bits(uint64_t v) {
  uint64_t w = v + 1;
  int len = 0;
  while ((w >> (len + 1)) != 0) len++;
  return 2 * len + 1;
}

inline uint64_t signed_to_uint(int v) {
  return v >= 0 ? uint64_t(v) * 2 : uint64_t(-v) * 2 - 1;
}

inline int uint_to_signed(uint64_t u) {
  return u % 2 == 0 ? int(u / 2) : -int((u + 1) / 2);
}

struct CoefContexts {
  BitProb eob[4];
  UintCoder run[4];
  UintCoder level[4];
  BitProb sign;
};

// Quantized coefficients of one block in zigzag order.
using BlockIndices = std::array<int64_t, 64>;

// Syntax per block: repeated (continue flag, zero run, sign, magnitude-1)
// events, terminated by an end-of-block flag unless the last coefficient
// position was coded.
inline void encode_block(RangeEncoder* enc, CoefContexts* ctx,
                         const BlockIndices& k) {
  size_t pos = 0;
  while (pos < 64) {
    size_t nz = pos;
    while (nz < 64 && k[nz] == 0) nz++;
    if (nz == 64) {
      enc->encode_bit(&ctx->eob[coef_class(pos)], 1);
      return;
    }
    enc->encode_bit(&ctx->eob[coef_class(pos)], 0);
    encode_uint(enc, &ctx->run[coef_class(pos)], nz - pos);
    uint64_t mag = k[nz] < 0 ? uint64_t(-k[nz]) : uint64_t(k[nz]);
    enc->encode_bit(&ctx->sign, k[nz] < 0);
    encode_uint(enc, &ctx->level[coef_class(nz)], mag - 1);
    pos = nz + 1;
  }
}

inline BlockIndices decode_block(RangeDecoder* dec, CoefContexts* ctx) {
  BlockIndices k{};
  size_t pos = 0;
  while (pos < 64) {
    if (dec->decode_bit(&ctx->eob[coef_class(pos)])) break;
    uint64_t run = decode_uint(dec, &ctx->run[coef_class(pos)]);
    if (pos + run >= 64)
      throw DecodeError("coefficient run exceeds block", dec->position());
    pos += run;
    int neg = dec->decode_bit(&ctx->sign);
    uint64_t mag = decode_uint(dec, &ctx->level[coef_class(pos)]) + 1;
    if (mag > (uint64_t(1) << 24))
      throw DecodeError("implausible coefficient magnitude",
                        dec->position());
    k[pos] = neg ? -int64_t(mag) : int64_t(mag);
    pos++;
  }
  return k;
}

inline int estimate_block_bits(const BlockIndices& k) {
  int bits = 0;
  size_t pos = 0;
  while (pos < 64) {
    size_t nz = pos;
    while (nz < 64 && k[nz] == 0) nz++;
    bits += 1;
    if (nz == 64) return bits;
    uint64_t mag = k[nz] < 0 ? uint64_t(-k[nz]) : uint64_t(k[nz]);
    bits += eg0_bits(nz - pos) + 1 + eg0_bits(mag - 1);
    pos = nz + 1;
  }
  return bits;
}

inline BlockIndices quantize_block(const Block8& residual, double qstep) {
  Block8 coef = dct8(residual);
  const auto& zz = zigzag_order();
  BlockIndices k{};
  for (size_t t = 0; t < 64; t++)
    k[t] = round_half_even(coef(zz[t] / 8, zz[t] % 8) / qstep);
  return k;
}

inline Block8 dequantize_block(const BlockIndices& k, double qstep) {
  const auto& zz = zigzag_order();
  Block8 coef = Block8::Zero();
  for (size_t t = 0; t < 64; t++)
    coef(zz[t] / 8, zz[t] % 8) = double(k[t]) * qstep;
  return idct8(coef);
}

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

inline Plane pad_plane(const Plane& p, size_t multiple) {
  size_t w = (p.width + multiple - 1) / multiple * multiple;
  size_t h = (p.height + multiple - 1) / multiple * multiple;
  if (w == p.width && h == p.height) return p;
  Plane out(w, h);
  for (size_t y = 0; y < h; y++)
    for (size_t x = 0; x < w; x++)
      out.at(x, y) = p.at(std::min(x, p.width - 1), std::min(y, p.height - 1));
  return out;
}

inline Frame pad_frame(const Frame& f, size_t multiple) {
  Frame out;
  for (int p = 0; p < 3; p++) out.planes[p] = pad_plane(f.planes[p], multiple);
  out.width = out.planes[0].width;
  out.height = out.planes[0].height;
  return out;
}

inline Frame crop_frame(const Frame& f, size_t width, size_t height) {
  if (f.width == width && f.height == height) return f;
  Frame out(width, height);
  for (int p = 0; p < 3; p++)
    for (size_t y = 0; y < height; y++)
      for (size_t x = 0; x < width; x++)
        out.planes[p].at(x, y) = f.planes[p].at(x, y);
  return out;
}

// Mean of the reconstructed samples bordering the block on the left and
// top; 128 when the block touches both frame edges.
inline double flat_prediction(const Plane& recon, size_t x0, size_t y0) {
  double sum = 0;
  size_t n = 0;
  if (x0 > 0) {
    for (size_t d = 0; d < kBlockSize; d++) sum += recon.at(x0 - 1, y0 + d);
    n += kBlockSize;
  }
  if (y0 > 0) {
    for (size_t d = 0; d < kBlockSize; d++) sum += recon.at(x0 + d, y0 - 1);
    n += kBlockSize;
  }
  return n == 0 ? 128.0 : sum / double(n);
}

// Shared by encoder and decoder so both reconstruct identical samples.
inline void reconstruct_block(const Block8& deq, double pred, Plane* recon,
                              size_t x0, size_t y0) {
  for (int r = 0; r < 8; r++)
    for (int c = 0; c < 8; c++)
      recon->at(x0 + size_t(c), y0 + size_t(r)) =
          clamp255(std::nearbyint(deq(r, c) + pred));
}

inline void code_intra_block(RangeEncoder* enc, CoefContexts* ctx,
                             const Plane& src, Plane* recon, size_t x0,
                             size_t y0, double qstep) {
  double pred = flat_prediction(*recon, x0, y0);
  Block8 res;
  for (int r = 0; r < 8; r++)
    for (int c = 0; c < 8; c++)
      res(r, c) = src.at(x0 + size_t(c), y0 + size_t(r)) - pred;
  BlockIndices k = quantize_block(res, qstep);
  encode_block(enc, ctx, k);
  reconstruct_block(dequantize_block(k, qstep), pred, recon, x0, y0);
}

inline void decode_intra_block(RangeDecoder* dec, CoefContexts* ctx,
                               Plane* recon, size_t x0, size_t y0,
                               double qstep) {
  double pred = flat_prediction(*recon, x0, y0);
  BlockIndices k = decode_block(dec, ctx);
  reconstruct_block(dequantize_block(k, qstep), pred, recon, x0, y0);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Intra frames
// ---------------------------------------------------------------------------

enum class MacroblockMode : uint8_t { kSkip = 0, kInter = 1, kIntra = 2 };

struct MacroblockInfo {
  MacroblockMode mode = MacroblockMode::kSkip;
  int dx = 0;
  int dy = 0;
};

// Payload plus the encoder-side reconstruction at coding dimensions (padded
// up to the block grid). `blocks` lists per-macroblock decisions for inter
// frames and is empty for intra frames.
struct EncodedFrame {
  ByteBuffer payload;
  Frame recon;
  std::vector<MacroblockInfo> blocks;
};

inline EncodedFrame encode_intra(const Frame& src, int qp) {
  double qstep = qp_to_qstep(qp);
  Frame padded = detail::pad_frame(src, detail::kBlockSize);
  EncodedFrame out;
  out.recon = Frame(padded.width, padded.height);
  RangeEncoder enc;
  std::array<detail::CoefContexts, 2> ctx{};
  for (int p = 0; p < 3; p++) {
    const Plane& sp = padded.planes[p];
    Plane& rp = out.recon.planes[p];
    detail::CoefContexts& cc = ctx[p == 0 ? 0 : 1];
    for (size_t y0 = 0; y0 < padded.height; y0 += detail::kBlockSize)
      for (size_t x0 = 0; x0 < padded.width; x0 += detail::kBlockSize)
        detail::code_intra_block(&enc, &cc, sp, &rp, x0, y0, qstep);
  }
  out.payload = enc.finish();
  return out;
}

// `width` and `height` may be the original image size; decoding happens on
// the padded grid and the returned frame keeps the padded dimensions so it
// can serve as an inter reference. Crop with detail::crop_frame.
inline Frame decode_intra(const ByteBuffer& payload, size_t width,
                          size_t height, int qp) {
  double qstep = qp_to_qstep(qp);
  size_t pw = (width + detail::kBlockSize - 1) / detail::kBlockSize *
              detail::kBlockSize;
  size_t ph = (height + detail::kBlockSize - 1) / detail::kBlockSize *
              detail::kBlockSize;
  Frame recon(pw, ph);
  RangeDecoder dec(payload.data(), payload.size());
  std::array<detail::CoefContexts, 2> ctx{};
  for (int p = 0; p < 3; p++) {
    Plane& rp = recon.planes[p];
    detail::CoefContexts& cc = ctx[p == 0 ? 0 : 1];
    for (size_t y0 = 0; y0 < ph; y0 += detail::kBlockSize)
      for (size_t x0 = 0; x0 < pw; x0 += detail::kBlockSize)
        detail::decode_intra_block(&dec, &cc, &rp, x0, y0, qstep);
  }
  return recon;
}

// ---------------------------------------------------------------------------
// Motion search
// ---------------------------------------------------------------------------

struct MotionVector {
  int dx = 0;
  int dy = 0;
  double sad = 0;
};

// Full search over displacements within the given range, keeping candidates
// whose reference window lies inside the plane. Ties fall to the smaller
// |dx|+|dy|, then the smaller dy, then the smaller dx.
inline MotionVector motion_search(const Plane& cur, const Plane& ref,
                                  size_t x0, size_t y0,
                                  size_t block = detail::kMacroblockSize,
                                  int range = detail::kMotionRange) {
  if (x0 + block > cur.width || y0 + block > cur.height)
    throw ConfigError("motion search block lies outside the frame");
  bool found = false;
  MotionVector best;
  std::tuple<double, int, int, int> best_key;
  for (int dy = -range; dy <= range; dy++) {
    for (int dx = -range; dx <= range; dx++) {
      long rx = long(x0) + dx, ry = long(y0) + dy;
      if (rx < 0 || ry < 0 || size_t(rx) + block > ref.width ||
          size_t(ry) + block > ref.height)
        continue;
      double sad = 0;
      for (size_t r = 0; r < block; r++)
        for (size_t c = 0; c < block; c++)
          sad += std::abs(cur.at(x0 + c, y0 + r) -
                          ref.at(size_t(rx) + c, size_t(ry) + r));
      auto key = std::make_tuple(sad, std::abs(dx) + std::abs(dy), dy, dx);
      if (!found || key < best_key) {
        found = true;
        best_key = key;
        best = MotionVector{dx, dy, sad};
      }
    }
  }
  if (!found)
    throw ConfigError("reference plane smaller than the search block");
  return best;
}

// ---------------------------------------------------------------------------
// Inter frames
// ---------------------------------------------------------------------------

namespace detail {

struct InterContexts {
  BitProb skip;
  BitProb intra_mode;
  UintCoder mv;
};

// One candidate reconstruction of a 16x16 macroblock across all planes.
struct MbCandidate {
  MacroblockMode mode = MacroblockMode::kSkip;
  MotionVector mv;
  std::array<BlockIndices, 12> sub{};
  std::array<std::array<double, 256>, 3> recon{};
  double dist = 0;
  double bits = 0;
};

inline void copy_region_from_plane(const Plane& p, size_t x0, size_t y0,
                                   std::array<double, 256>* out) {
  for (size_t r = 0; r < kMacroblockSize; r++)
    for (size_t c = 0; c < kMacroblockSize; c++)
      (*out)[r * kMacroblockSize + c] = p.at(x0 + c, y0 + r);
}

inline void copy_region_to_plane(const std::array<double, 256>& in, Plane* p,
                                 size_t x0, size_t y0) {
  for (size_t r = 0; r < kMacroblockSize; r++)
    for (size_t c = 0; c < kMacroblockSize; c++)
      p->at(x0 + c, y0 + r) = in[r * kMacroblockSize + c];
}

inline double region_ssd(const Frame& a, const MbCandidate& cand, size_t x0,
                         size_t y0) {
  double ssd = 0;
  for (int p = 0; p < 3; p++)
    for (size_t r = 0; r < kMacroblockSize; r++)
      for (size_t c = 0; c < kMacroblockSize; c++) {
        double d = a.planes[p].at(x0 + c, y0 + r) -
                   cand.recon[size_t(p)][r * kMacroblockSize + c];
        ssd += d * d;
      }
  return ssd;
}

// Sub-block order within a macroblock: plane-major, then 2x2 raster.
inline std::pair<size_t, size_t> sub_offset(size_t s) {
  return {(s % 2) * kBlockSize, (s / 2 % 2) * kBlockSize};
}

inline MbCandidate evaluate_skip(const Frame& src, const Frame& ref,
                                 size_t x0, size_t y0) {
  MbCandidate cand;
  cand.mode = MacroblockMode::kSkip;
  cand.bits = 1;
  for (int p = 0; p < 3; p++)
    copy_region_from_plane(ref.planes[p], x0, y0, &cand.recon[size_t(p)]);
  cand.dist = region_ssd(src, cand, x0, y0);
  return cand;
}

inline MbCandidate evaluate_inter(const Frame& src, const Frame& ref,
                                  size_t x0, size_t y0, double qstep) {
  MbCandidate cand;
  cand.mode = MacroblockMode::kInter;
  cand.mv = motion_search(src.planes[0], ref.planes[0], x0, y0);
  cand.bits = 2 + eg0_bits(signed_to_uint(cand.mv.dx)) +
              eg0_bits(signed_to_uint(cand.mv.dy));
  size_t rx = size_t(long(x0) + cand.mv.dx);
  size_t ry = size_t(long(y0) + cand.mv.dy);
  for (int p = 0; p < 3; p++) {
    for (size_t s = 0; s < 4; s++) {
      auto [ox, oy] = sub_offset(s);
      size_t sx = x0 + ox, sy = y0 + oy;
      Block8 res;
      for (int r = 0; r < 8; r++)
        for (int c = 0; c < 8; c++)
          res(r, c) =
              src.planes[p].at(sx + size_t(c), sy + size_t(r)) -
              ref.planes[p].at(rx + ox + size_t(c), ry + oy + size_t(r));
      BlockIndices k = quantize_block(res, qstep);
      cand.sub[size_t(p) * 4 + s] = k;
      cand.bits += estimate_block_bits(k);
      Block8 deq = dequantize_block(k, qstep);
      for (int r = 0; r < 8; r++)
        for (int c = 0; c < 8; c++) {
          double pred =
              ref.planes[p].at(rx + ox + size_t(c), ry + oy + size_t(r));
          cand.recon[size_t(p)][(oy + size_t(r)) * kMacroblockSize + ox +
                                size_t(c)] =
              clamp255(std::nearbyint(deq(r, c) + pred));
        }
    }
  }
  cand.dist = region_ssd(src, cand, x0, y0);
  return cand;
}

// Evaluates intra coding of the macroblock by writing into the live
// reconstruction plane (sub-block predictions chain within the block), then
// restores the region.
inline MbCandidate evaluate_intra(const Frame& src, Frame* recon, size_t x0,
                                  size_t y0, double qstep) {
  MbCandidate cand;
  cand.mode = MacroblockMode::kIntra;
  cand.bits = 2;
  std::array<std::array<double, 256>, 3> saved;
  for (int p = 0; p < 3; p++)
    copy_region_from_plane(recon->planes[p], x0, y0, &saved[size_t(p)]);
  for (int p = 0; p < 3; p++) {
    Plane& rp = recon->planes[p];
    for (size_t s = 0; s < 4; s++) {
      auto [ox, oy] = sub_offset(s);
      size_t sx = x0 + ox, sy = y0 + oy;
      double pred = flat_prediction(rp, sx, sy);
      Block8 res;
      for (int r = 0; r < 8; r++)
        for (int c = 0; c < 8; c++)
          res(r, c) = src.planes[p].at(sx + size_t(c), sy + size_t(r)) - pred;
      BlockIndices k = quantize_block(res, qstep);
      cand.sub[size_t(p) * 4 + s] = k;
      cand.bits += estimate_block_bits(k);
      reconstruct_block(dequantize_block(k, qstep), pred, &rp, sx, sy);
    }
    copy_region_from_plane(rp, x0, y0, &cand.recon[size_t(p)]);
  }
  for (int p = 0; p < 3; p++)
    copy_region_to_plane(saved[size_t(p)], &recon->planes[p], x0, y0);
  cand.dist = region_ssd(src, cand, x0, y0);
  return cand;
}

}  // namespace detail

inline EncodedFrame encode_inter(const Frame& src, const Frame& reference,
                                 int qp) {
  double qstep = qp_to_qstep(qp);
  double lambda = 0.85 * qstep * qstep;
  Frame padded = detail::pad_frame(src, detail::kMacroblockSize);
  if (reference.width != padded.width || reference.height != padded.height)
    throw ConfigError("inter reference dimensions do not match the frame");
  EncodedFrame out;
  out.recon = Frame(padded.width, padded.height);
  RangeEncoder enc;
  detail::InterContexts ictx{};
  std::array<detail::CoefContexts, 2> cctx{};
  for (size_t y0 = 0; y0 < padded.height; y0 += detail::kMacroblockSize) {
    for (size_t x0 = 0; x0 < padded.width; x0 += detail::kMacroblockSize) {
      detail::MbCandidate skip = detail::evaluate_skip(padded, reference,
                                                       x0, y0);
      detail::MbCandidate inter =
          detail::evaluate_inter(padded, reference, x0, y0, qstep);
      detail::MbCandidate intra =
          detail::evaluate_intra(padded, &out.recon, x0, y0, qstep);
      const detail::MbCandidate* best = &skip;
      for (const detail::MbCandidate* c : {&inter, &intra})
        if (c->dist + lambda * c->bits < best->dist + lambda * best->bits)
          best = c;

      if (best->mode == MacroblockMode::kSkip) {
        enc.encode_bit(&ictx.skip, 1);
      } else {
        enc.encode_bit(&ictx.skip, 0);
        enc.encode_bit(&ictx.intra_mode,
                       best->mode == MacroblockMode::kIntra);
        if (best->mode == MacroblockMode::kInter) {
          detail::encode_uint(&enc, &ictx.mv,
                              detail::signed_to_uint(best->mv.dx));
          detail::encode_uint(&enc, &ictx.mv,
                              detail::signed_to_uint(best->mv.dy));
        }
        for (int p = 0; p < 3; p++)
          for (size_t s = 0; s < 4; s++)
            detail::encode_block(&enc, &cctx[p == 0 ? 0 : 1],
                                 best->sub[size_t(p) * 4 + s]);
      }
      for (int p = 0; p < 3; p++)
        detail::copy_region_to_plane(best->recon[size_t(p)],
                                     &out.recon.planes[p], x0, y0);
      out.blocks.push_back(
          MacroblockInfo{best->mode, best->mv.dx, best->mv.dy});
    }
  }
  out.payload = enc.finish();
  return out;
}

inline Frame decode_inter(const ByteBuffer& payload, const Frame& reference,
                          int qp) {
  double qstep = qp_to_qstep(qp);
  if (reference.width % detail::kMacroblockSize != 0 ||
      reference.height % detail::kMacroblockSize != 0)
    throw ConfigError("inter reference is not on the macroblock grid");
  Frame recon(reference.width, reference.height);
  RangeDecoder dec(payload.data(), payload.size());
  detail::InterContexts ictx{};
  std::array<detail::CoefContexts, 2> cctx{};
  for (size_t y0 = 0; y0 < recon.height; y0 += detail::kMacroblockSize) {
    for (size_t x0 = 0; x0 < recon.width; x0 += detail::kMacroblockSize) {
      if (dec.decode_bit(&ictx.skip)) {
        for (int p = 0; p < 3; p++)
          for (size_t r = 0; r < detail::kMacroblockSize; r++)
            for (size_t c = 0; c < detail::kMacroblockSize; c++)
              recon.planes[p].at(x0 + c, y0 + r) =
                  reference.planes[p].at(x0 + c, y0 + r);
        continue;
      }
      bool is_intra = dec.decode_bit(&ictx.intra_mode) != 0;
      if (is_intra) {
        for (int p = 0; p < 3; p++)
          for (size_t s = 0; s < 4; s++) {
            auto [ox, oy] = detail::sub_offset(s);
            detail::decode_intra_block(&dec, &cctx[p == 0 ? 0 : 1],
                                       &recon.planes[p], x0 + ox, y0 + oy,
                                       qstep);
          }
        continue;
      }
      int dx = detail::uint_to_signed(detail::decode_uint(&dec, &ictx.mv));
      int dy = detail::uint_to_signed(detail::decode_uint(&dec, &ictx.mv));
      long rx = long(x0) + dx, ry = long(y0) + dy;
      if (std::abs(dx) > detail::kMotionRange ||
          std::abs(dy) > detail::kMotionRange || rx < 0 || ry < 0 ||
          size_t(rx) + detail::kMacroblockSize > reference.width ||
          size_t(ry) + detail::kMacroblockSize > reference.height)
        throw DecodeError("motion vector outside the reference frame",
                          dec.position());
      for (int p = 0; p < 3; p++)
        for (size_t s = 0; s < 4; s++) {
          auto [ox, oy] = detail::sub_offset(s);
          detail::BlockIndices k =
              detail::decode_block(&dec, &cctx[p == 0 ? 0 : 1]);
          Block8 deq = detail::dequantize_block(k, qstep);
          for (int r = 0; r < 8; r++)
            for (int c = 0; c < 8; c++) {
              double pred = reference.planes[p].at(
                  size_t(rx) + ox + size_t(c), size_t(ry) + oy + size_t(r));
              recon.planes[p].at(x0 + ox + size_t(c), y0 + oy + size_t(r)) =
                  detail::clamp255(std::nearbyint(deq(r, c) + pred));
            }
        }
    }
  }
  return recon;
}

// ---------------------------------------------------------------------------
// Sequence container
// ---------------------------------------------------------------------------

enum class CodingMode : uint8_t { kIntra = 0, kInter = 1 };

// Serialized sequence: magic, version, mode, qp, frame count, dimensions,
// pose metadata, then per-frame payloads with bit-count prefixes.
// bit_length is the exact file size in bits, poses included.
struct ImageBitstream {
  ByteBuffer bytes;
  size_t bit_length = 0;
};

struct DecodedSequence {
  std::vector<Image> frames;
  std::vector<CameraPose> poses;
  CodingMode mode = CodingMode::kIntra;
  int qp = 0;
  size_t width = 0, height = 0;
};

namespace detail {

constexpr char kImageMagic[4] = {'I', 'V', 'S', 'b'};
constexpr uint8_t kImageFormatVersion = 1;
constexpr size_t kMaxFrameCount = 100000;
constexpr size_t kMaxFrameDim = 16384;

}  // namespace detail

// Intra mode codes every frame independently; inter mode codes frame 0
// intra and every later frame against the previous reconstruction. When
// `recon_out` is given it receives the encoder-side reconstruction of every
// frame, converted back to RGB exactly as the decoder would produce it.
inline ImageBitstream encode_sequence(const std::vector<Image>& frames,
                                      const std::vector<CameraPose>& poses,
                                      CodingMode mode, int qp,
                                      std::vector<Image>* recon_out = nullptr) {
  if (frames.empty()) throw ConfigError("image sequence is empty");
  if (poses.size() != frames.size())
    throw ConfigError("pose count " + std::to_string(poses.size()) +
                      " does not match frame count " +
                      std::to_string(frames.size()));
  int w = frames[0].width, h = frames[0].height;
  if (w < 1 || h < 1) throw ConfigError("empty frame");
  if (size_t(w) > detail::kMaxFrameDim || size_t(h) > detail::kMaxFrameDim)
    throw ConfigError("frame dimensions too large");
  for (const Image& f : frames)
    if (f.width != w || f.height != h)
      throw ConfigError("frames in a sequence must share dimensions");
  qp_to_qstep(qp);

  size_t grid = mode == CodingMode::kInter ? detail::kMacroblockSize
                                           : detail::kBlockSize;
  ByteBuffer bytes;
  for (char c : detail::kImageMagic) put_u8(bytes, uint8_t(c));
  put_u8(bytes, detail::kImageFormatVersion);
  put_u8(bytes, uint8_t(mode));
  put_u8(bytes, uint8_t(qp));
  put_u32le(bytes, uint32_t(frames.size()));
  put_u32le(bytes, uint32_t(w));
  put_u32le(bytes, uint32_t(h));
  put_u32le(bytes, uint32_t(poses.size()));
  ByteBuffer pose_block = serialize_poses(poses);
  bytes.insert(bytes.end(), pose_block.begin(), pose_block.end());

  Frame prev;
  for (size_t i = 0; i < frames.size(); i++) {
    Frame f = detail::pad_frame(rgb_to_ycbcr(frames[i]), grid);
    EncodedFrame ef = (mode == CodingMode::kInter && i > 0)
                          ? encode_inter(f, prev, qp)
                          : encode_intra(f, qp);
    put_u32le(bytes, uint32_t(ef.payload.size() * 8));
    bytes.insert(bytes.end(), ef.payload.begin(), ef.payload.end());
    if (recon_out)
      recon_out->push_back(ycbcr_to_rgb(
          detail::crop_frame(ef.recon, size_t(w), size_t(h))));
    prev = std::move(ef.recon);
  }
  ImageBitstream bs;
  bs.bytes = std::move(bytes);
  bs.bit_length = bs.bytes.size() * 8;
  return bs;
}

inline DecodedSequence decode_sequence(const ByteBuffer& bytes) {
  ByteReader r(bytes);
  for (char c : detail::kImageMagic)
    if (r.u8() != uint8_t(c))
      throw DecodeError("not an image bitstream", 0);
  uint8_t version = r.u8();
  if (version != detail::kImageFormatVersion)
    throw DecodeError("unsupported image bitstream version " +
                          std::to_string(version),
                      r.pos());
  uint8_t mode_byte = r.u8();
  if (mode_byte > 1)
    throw DecodeError("invalid coding mode " + std::to_string(mode_byte),
                      r.pos());
  uint8_t qp = r.u8();
  if (qp > 51)
    throw DecodeError("invalid qp " + std::to_string(qp), r.pos());
  uint32_t count = r.u32le();
  if (count == 0 || count > detail::kMaxFrameCount)
    throw DecodeError("implausible frame count " + std::to_string(count),
                      r.pos());
  uint32_t w = r.u32le(), h = r.u32le();
  if (w == 0 || h == 0 || w > detail::kMaxFrameDim || h > detail::kMaxFrameDim)
    throw DecodeError("implausible frame dimensions", r.pos());
  uint32_t pose_count = r.u32le();
  if (pose_count != count)
    throw DecodeError("pose count does not match frame count", r.pos());
  const uint8_t* pose_raw = r.raw(size_t(pose_count) * 15 * 8);
  ByteBuffer pose_block(pose_raw, pose_raw + size_t(pose_count) * 15 * 8);

  DecodedSequence out;
  out.mode = CodingMode(mode_byte);
  out.qp = qp;
  out.width = w;
  out.height = h;
  out.poses = deserialize_poses(pose_block);

  size_t grid = out.mode == CodingMode::kInter ? detail::kMacroblockSize
                                               : detail::kBlockSize;
  size_t pw = (w + grid - 1) / grid * grid;
  size_t ph = (h + grid - 1) / grid * grid;
  Frame prev;
  for (size_t i = 0; i < count; i++) {
    uint32_t bits = r.u32le();
    if (bits % 8 != 0)
      throw DecodeError("frame " + std::to_string(i) +
                            ": payload bit count not byte aligned",
                        r.pos());
    size_t nbytes = bits / 8;
    if (nbytes > r.remaining())
      throw DecodeError("frame " + std::to_string(i) + ": payload truncated",
                        r.pos());
    const uint8_t* raw = r.raw(nbytes);
    ByteBuffer payload(raw, raw + nbytes);
    Frame f;
    try {
      f = (out.mode == CodingMode::kInter && i > 0)
              ? decode_inter(payload, prev, qp)
              : decode_intra(payload, pw, ph, qp);
    } catch (const DecodeError& e) {
      throw DecodeError("frame " + std::to_string(i) + ": " + e.what(),
                        e.offset);
    }
    out.frames.push_back(ycbcr_to_rgb(detail::crop_frame(f, w, h)));
    prev = std::move(f);
  }
  if (r.remaining() != 0)
    throw DecodeError("trailing bytes after image bitstream", r.pos());
  return out;
}

}  // namespace nerfstream

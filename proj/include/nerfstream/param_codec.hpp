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
#include <limits>
#include <string>
#include <vector>

#include "nerfstream/common.hpp"
#include "nerfstream/field.hpp"
#include "nerfstream/rangecoder.hpp"

namespace nerfstream {

// Network-parameter codec: per-tensor quantization (uniform or dependent
// scalar) plus context-adaptive binary arithmetic coding of the quantization
// indices. One QP drives every tensor's step size.

struct TensorRecord {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<double> values;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
};

enum class QuantizerKind : uint8_t { kUniform = 0, kDependent = 1 };

struct QuantizedTensor {
  std::string name;
  std::vector<uint32_t> shape;
  double step = 1;
  std::vector<int64_t> indices;
  QuantizerKind kind = QuantizerKind::kUniform;
};

// ---------------------------------------------------------------------------
// QP to step size
// ---------------------------------------------------------------------------

// The QP scale is logarithmic with four steps per octave, anchored at the
// tensor's own dynamic range: step = max_abs * 2^(qp/4). An all-zero tensor
// gets step 1 so the (all-zero) indices stay well defined.
inline double qp_to_stepsize(int qp, const TensorRecord& tensor) {
  if (qp < -64 || qp > 64) throw ConfigError("qp outside [-64, 64]");
  if (tensor.values.empty()) throw ConfigError("empty tensor");
  double max_abs = 0;
  for (double v : tensor.values) max_abs = std::max(max_abs, std::fabs(v));
  if (max_abs == 0) return 1.0;
  return max_abs * std::exp2(qp / 4.0);
}

// ---------------------------------------------------------------------------
// Quantizers
// ---------------------------------------------------------------------------

inline QuantizedTensor quantize_uniform(const TensorRecord& t, double step) {
  if (step <= 0) throw ConfigError("step must be positive");
  QuantizedTensor q;
  q.name = t.name;
  q.shape = t.shape;
  q.step = step;
  q.kind = QuantizerKind::kUniform;
  q.indices.reserve(t.values.size());
  for (double v : t.values) q.indices.push_back(round_half_even(v / step));
  return q;
}

// Dependent scalar quantization. Two reconstruction rules are interleaved by
// a 4-state machine whose transitions are driven by index parity:
//   states 0,1: recon = (k >> 1) * step        (parity is free; both k = 2m
//                                               and k = 2m+1 give m * step)
//   states 2,3: recon = k * step / 2           (parity picks the half-step
//                                               offset: 0 or step/2)
// The redundant parity in states 0 and 1 is what lets the encoder steer the
// state machine without sacrificing reconstruction levels; in particular the
// all-even-parity path reproduces the uniform quantizer exactly, so the
// Viterbi search below can never do worse than quantize_uniform.
namespace dsq {

constexpr int kNextState[4][2] = {{0, 2}, {2, 0}, {1, 3}, {3, 1}};

inline double reconstruct(int64_t k, int state, double step) {
  return state < 2 ? double(k >> 1) * step : double(k) * (step * 0.5);
}

inline std::vector<double> dequantize_indices(
    const std::vector<int64_t>& indices, double step) {
  std::vector<double> out(indices.size());
  int state = 0;
  for (size_t i = 0; i < indices.size(); i++) {
    out[i] = reconstruct(indices[i], state, step);
    state = kNextState[state][indices[i] & 1];
  }
  return out;
}

}  // namespace dsq

inline QuantizedTensor quantize_dependent(const TensorRecord& t, double step) {
  if (step <= 0) throw ConfigError("step must be positive");
  const size_t n = t.values.size();
  QuantizedTensor q;
  q.name = t.name;
  q.shape = t.shape;
  q.step = step;
  q.kind = QuantizerKind::kDependent;
  q.indices.resize(n);
  if (n == 0) return q;

  // Viterbi over the 4 states; each element offers two candidates per state
  // (one per parity), each the nearest reconstruction level of that parity.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  struct Back {
    int prev_state = 0;
    int64_t index = 0;
  };
  std::vector<std::array<Back, 4>> back(n);
  std::array<double, 4> cost{0, kInf, kInf, kInf};

  for (size_t i = 0; i < n; i++) {
    double x = t.values[i];
    std::array<double, 4> ncost{kInf, kInf, kInf, kInf};
    for (int s = 0; s < 4; s++) {
      if (cost[s] == kInf) continue;
      for (int b = 0; b < 2; b++) {
        int64_t k;
        double recon;
        if (s < 2) {
          int64_t m = round_half_even(x / step);
          k = 2 * m + b;
          recon = double(m) * step;
        } else {
          int64_t m = round_half_even((x - b * step * 0.5) / step);
          k = 2 * m + b;
          recon = double(k) * (step * 0.5);
        }
        double e = recon - x;
        double c = cost[s] + e * e;
        int s2 = dsq::kNextState[s][b];
        if (c < ncost[s2]) {
          ncost[s2] = c;
          back[i][s2] = Back{s, k};
        }
      }
    }
    cost = ncost;
  }

  int state = 0;
  for (int s = 1; s < 4; s++)
    if (cost[s] < cost[state]) state = s;
  for (size_t i = n; i-- > 0;) {
    q.indices[i] = back[i][state].index;
    state = back[i][state].prev_state;
  }
  return q;
}

inline QuantizedTensor quantize(const TensorRecord& t, double step,
                                QuantizerKind kind) {
  return kind == QuantizerKind::kUniform ? quantize_uniform(t, step)
                                         : quantize_dependent(t, step);
}

inline TensorRecord dequantize(const QuantizedTensor& q) {
  TensorRecord t;
  t.name = q.name;
  t.shape = q.shape;
  if (q.kind == QuantizerKind::kUniform) {
    t.values.reserve(q.indices.size());
    for (int64_t k : q.indices) t.values.push_back(double(k) * q.step);
  } else {
    t.values = dsq::dequantize_indices(q.indices, q.step);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Entropy coding of index sequences
// ---------------------------------------------------------------------------
//
// Binarization per index: significance flag, sign flag, |k| > 1 flag,
// |k| > 2 flag, then an order-0 Exp-Golomb remainder for |k| - 3. Every bit
// is coded with an adaptive context: the significance context is selected by
// whether the previous index was zero, and the Exp-Golomb prefix/suffix bits
// get one context per bit position.

namespace detail {

constexpr int kEgContexts = 24;
constexpr int kEgMaxPrefix = 63;

struct IndexContexts {
  BitProb sig[2];
  BitProb sign;
  BitProb gt1;
  BitProb gt2;
  BitProb eg_prefix[kEgContexts];
  BitProb eg_suffix[kEgContexts];
};

inline void encode_index(RangeEncoder* enc, IndexContexts* ctx, int64_t k,
                         bool prev_zero) {
  uint64_t m = k < 0 ? uint64_t(-(k + 1)) + 1 : uint64_t(k);
  enc->encode_bit(&ctx->sig[prev_zero ? 0 : 1], m != 0);
  if (m == 0) return;
  enc->encode_bit(&ctx->sign, k < 0);
  enc->encode_bit(&ctx->gt1, m > 1);
  if (m <= 1) return;
  enc->encode_bit(&ctx->gt2, m > 2);
  if (m <= 2) return;

  uint64_t v = m - 3 + 1;  // Exp-Golomb order 0 codes v >= 1
  int len = 0;
  while ((v >> (len + 1)) != 0) len++;
  for (int i = 0; i < len; i++)
    enc->encode_bit(&ctx->eg_prefix[std::min(i, kEgContexts - 1)], 0);
  enc->encode_bit(&ctx->eg_prefix[std::min(len, kEgContexts - 1)], 1);
  for (int i = len - 1; i >= 0; i--)
    enc->encode_bit(&ctx->eg_suffix[std::min(len - 1 - i, kEgContexts - 1)],
                    (v >> i) & 1);
}

inline int64_t decode_index(RangeDecoder* dec, IndexContexts* ctx,
                            bool prev_zero) {
  if (!dec->decode_bit(&ctx->sig[prev_zero ? 0 : 1])) return 0;
  int neg = dec->decode_bit(&ctx->sign);
  uint64_t m = 1;
  if (dec->decode_bit(&ctx->gt1)) {
    m = 2;
    if (dec->decode_bit(&ctx->gt2)) {
      int len = 0;
      while (!dec->decode_bit(
          &ctx->eg_prefix[std::min(len, kEgContexts - 1)])) {
        if (++len > kEgMaxPrefix)
          throw DecodeError("implausible index magnitude", dec->position());
      }
      uint64_t v = 1;
      for (int i = 0; i < len; i++)
        v = (v << 1) |
            uint64_t(dec->decode_bit(
                &ctx->eg_suffix[std::min(i, kEgContexts - 1)]));
      m = v - 1 + 3;
    }
  }
  return neg ? -int64_t(m) : int64_t(m);
}

}  // namespace detail

inline ByteBuffer entropy_encode(const QuantizedTensor& q) {
  RangeEncoder enc;
  detail::IndexContexts ctx;
  bool prev_zero = true;
  for (int64_t k : q.indices) {
    detail::encode_index(&enc, &ctx, k, prev_zero);
    prev_zero = k == 0;
  }
  return enc.finish();
}

inline std::vector<int64_t> entropy_decode(const uint8_t* data, size_t size,
                                           size_t count) {
  RangeDecoder dec(data, size);
  detail::IndexContexts ctx;
  std::vector<int64_t> out(count);
  bool prev_zero = true;
  for (size_t i = 0; i < count; i++) {
    out[i] = detail::decode_index(&dec, &ctx, prev_zero);
    prev_zero = out[i] == 0;
  }
  return out;
}

inline std::vector<int64_t> entropy_decode(const ByteBuffer& bytes,
                                           size_t count) {
  return entropy_decode(bytes.data(), bytes.size(), count);
}

// ---------------------------------------------------------------------------
// Model <-> tensor records
// ---------------------------------------------------------------------------

inline std::vector<TensorRecord> model_to_tensors(
    const RadianceFieldModel& model) {
  std::vector<TensorRecord> out;
  auto emit = [&](const MLPParams& net, const std::string& prefix) {
    for (size_t i = 0; i < net.layers.size(); i++) {
      const MLPLayer& l = net.layers[i];
      TensorRecord w;
      w.name = prefix + ".l" + std::to_string(i) + ".weight";
      w.shape = {uint32_t(l.weight.rows()), uint32_t(l.weight.cols())};
      for (int r = 0; r < l.weight.rows(); r++)
        for (int c = 0; c < l.weight.cols(); c++)
          w.values.push_back(l.weight(r, c));
      out.push_back(std::move(w));
      TensorRecord b;
      b.name = prefix + ".l" + std::to_string(i) + ".bias";
      b.shape = {uint32_t(l.bias.size())};
      b.values.assign(l.bias.data(), l.bias.data() + l.bias.size());
      out.push_back(std::move(b));
    }
  };
  emit(model.proposal, "proposal");
  emit(model.main, "main");
  return out;
}

inline RadianceFieldModel tensors_to_model(
    const std::vector<TensorRecord>& tensors, const EncodingConfig& enc,
    const RenderConfig& render_cfg) {
  RadianceFieldModel m;
  m.encoding = enc;
  m.render_cfg = render_cfg;
  auto fill = [&](MLPParams* net, const std::string& prefix) {
    for (size_t i = 0;; i++) {
      std::string base = prefix + ".l" + std::to_string(i);
      const TensorRecord* w = nullptr;
      const TensorRecord* b = nullptr;
      for (const auto& t : tensors) {
        if (t.name == base + ".weight") w = &t;
        if (t.name == base + ".bias") b = &t;
      }
      if (!w && !b) break;
      if (!w || !b)
        throw DecodeError("tensor manifest missing half of layer " + base, 0);
      if (w->shape.size() != 2 || b->shape.size() != 1 ||
          w->shape[0] != b->shape[0])
        throw DecodeError("tensor shapes inconsistent for " + base, 0);
      MLPLayer l;
      l.weight.resize(w->shape[0], w->shape[1]);
      for (uint32_t r = 0; r < w->shape[0]; r++)
        for (uint32_t c = 0; c < w->shape[1]; c++)
          l.weight(r, c) = w->values[size_t(r) * w->shape[1] + c];
      l.bias.resize(b->shape[0]);
      for (uint32_t r = 0; r < b->shape[0]; r++) l.bias(r) = b->values[r];
      net->layers.push_back(std::move(l));
    }
  };
  fill(&m.proposal, "proposal");
  fill(&m.main, "main");
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Bitstream container
// ---------------------------------------------------------------------------
//
// Layout: magic "NNCb", version byte, QP as signed 8-bit, quantizer kind
// byte, tensor count as 32-bit LE, then per tensor: name length (32-bit LE)
// and bytes, rank (32-bit LE), dims (32-bit LE each), step (64-bit LE
// float), payload bit count (64-bit LE); then the tensor payloads,
// byte-aligned, in manifest order.

constexpr uint8_t kParamFormatVersion = 1;

struct ParamTensorInfo {
  std::string name;
  std::vector<uint32_t> shape;
  double step = 1;
  uint64_t payload_bits = 0;

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
};

struct ParamManifest {
  int qp = 0;
  QuantizerKind kind = QuantizerKind::kUniform;
  std::vector<ParamTensorInfo> tensors;
  size_t header_bytes = 0;
};

struct ParamBitstream {
  ByteBuffer bytes;
  size_t bit_length = 0;  // exact size of the file, header included
};

inline ParamBitstream encode_model(const RadianceFieldModel& model, int qp,
                                   QuantizerKind kind) {
  model.validate();
  std::vector<TensorRecord> tensors = model_to_tensors(model);

  ByteBuffer header;
  header.insert(header.end(), {'N', 'N', 'C', 'b'});
  put_u8(header, kParamFormatVersion);
  put_u8(header, static_cast<uint8_t>(static_cast<int8_t>(qp)));
  put_u8(header, static_cast<uint8_t>(kind));
  put_u32le(header, static_cast<uint32_t>(tensors.size()));

  std::vector<ByteBuffer> payloads;
  for (const TensorRecord& t : tensors) {
    double step = qp_to_stepsize(qp, t);
    QuantizedTensor q = quantize(t, step, kind);
    ByteBuffer payload = entropy_encode(q);
    put_u32le(header, static_cast<uint32_t>(t.name.size()));
    header.insert(header.end(), t.name.begin(), t.name.end());
    put_u32le(header, static_cast<uint32_t>(t.shape.size()));
    for (uint32_t d : t.shape) put_u32le(header, d);
    put_f64le(header, step);
    put_u64le(header, uint64_t(payload.size()) * 8);
    payloads.push_back(std::move(payload));
  }

  ParamBitstream bs;
  bs.bytes = std::move(header);
  for (const ByteBuffer& p : payloads)
    bs.bytes.insert(bs.bytes.end(), p.begin(), p.end());
  bs.bit_length = bs.bytes.size() * 8;
  return bs;
}

// Parses the header alone; valid even when payloads are absent.
inline ParamManifest decode_manifest(const ByteBuffer& bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "NNCb") throw DecodeError("bad parameter-stream magic", 0);
  if (r.u8() != kParamFormatVersion)
    throw DecodeError("unsupported format version", r.pos());
  ParamManifest m;
  m.qp = static_cast<int8_t>(r.u8());
  uint8_t kind = r.u8();
  if (kind > 1) throw DecodeError("unknown quantizer kind", r.pos());
  m.kind = static_cast<QuantizerKind>(kind);
  uint32_t count = r.u32le();
  if (count > 4096) throw DecodeError("implausible tensor count", r.pos());
  for (uint32_t i = 0; i < count; i++) {
    ParamTensorInfo info;
    uint32_t name_len = r.u32le();
    if (name_len > 4096) throw DecodeError("implausible name length", r.pos());
    info.name = r.bytes(name_len);
    uint32_t rank = r.u32le();
    if (rank > 8) throw DecodeError("implausible tensor rank", r.pos());
    for (uint32_t d = 0; d < rank; d++) {
      uint32_t dim = r.u32le();
      if (dim == 0 || dim > (1u << 24))
        throw DecodeError("implausible dimension", r.pos());
      info.shape.push_back(dim);
    }
    info.step = r.f64le();
    if (!(info.step > 0))
      throw DecodeError("non-positive step size", r.pos());
    info.payload_bits = r.u64le();
    if (info.payload_bits % 8 != 0)
      throw DecodeError("payload not byte aligned", r.pos());
    m.tensors.push_back(std::move(info));
  }
  m.header_bytes = r.pos();
  return m;
}

inline std::vector<TensorRecord> decode_tensors(const ByteBuffer& bytes,
                                                ParamManifest* manifest_out) {
  ParamManifest m = decode_manifest(bytes);
  size_t off = m.header_bytes;
  std::vector<TensorRecord> out;
  for (const ParamTensorInfo& info : m.tensors) {
    size_t payload_bytes = info.payload_bits / 8;
    if (off + payload_bytes > bytes.size())
      throw DecodeError("payload truncated for tensor " + info.name, off);
    QuantizedTensor q;
    q.name = info.name;
    q.shape = info.shape;
    q.step = info.step;
    q.kind = m.kind;
    q.indices =
        entropy_decode(bytes.data() + off, payload_bytes, info.element_count());
    off += payload_bytes;
    out.push_back(dequantize(q));
  }
  if (off != bytes.size())
    throw DecodeError("trailing bytes after last payload", off);
  if (manifest_out) *manifest_out = std::move(m);
  return out;
}

inline RadianceFieldModel decode_model(const ParamBitstream& bs,
                                       const EncodingConfig& enc,
                                       const RenderConfig& render_cfg) {
  return tensors_to_model(decode_tensors(bs.bytes, nullptr), enc, render_cfg);
}

inline RadianceFieldModel decode_model(const ByteBuffer& bytes,
                                       const EncodingConfig& enc,
                                       const RenderConfig& render_cfg) {
  return tensors_to_model(decode_tensors(bytes, nullptr), enc, render_cfg);
}

}  // namespace nerfstream

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
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "nerfstream/common.hpp"
#include "nerfstream/rng.hpp"

namespace nerfstream {

namespace detail {

// glibc returns large freed blocks to the OS immediately, so a loop that
// allocates and frees megabyte-sized matrices every iteration pays for page
// faults on each pass. Raising the thresholds once keeps the arena resident.
inline void keep_heap_resident() {
#if defined(__GLIBC__)
  static const bool tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)tuned;
#endif
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Camera model
// ---------------------------------------------------------------------------
//
// Camera frame: x right, y down, z forward. `orientation` maps camera
// coordinates to world coordinates; its columns are the camera axes in world
// space. Pixel (i, j) is sampled at image coordinate (i + 0.5, j + 0.5), so
// the principal point (cx, cy) lives in the same continuous coordinates.

struct CameraPose {
  Vec3 position;
  Mat3 orientation;
  double focal = 1;  // pixels
  double cx = 0, cy = 0;

  Vec3 forward() const { return orientation.col(2); }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

inline Ray trace_ray(const CameraPose& pose, int i, int j, int w, int h) {
  if (i < 0 || i >= w || j < 0 || j >= h)
    throw ConfigError("pixel outside image");
  Vec3 cam_dir{(i + 0.5 - pose.cx) / pose.focal,
               (j + 0.5 - pose.cy) / pose.focal, 1.0};
  return {pose.position, normalize(pose.orientation * cam_dir)};
}

// World-from-camera orientation looking from `eye` toward `target`, image
// "up" aligned against world `up`.
inline Mat3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 fwd = normalize(target - eye);
  Vec3 up_ref = up;
  if (std::fabs(dot(fwd, normalize(up_ref))) > 0.999)
    up_ref = Vec3{0, 1, 0};
  Vec3 right = normalize(cross(fwd, up_ref));
  Vec3 down = cross(fwd, right);
  return Mat3::from_cols(right, down, fwd);
}

// ---------------------------------------------------------------------------
// Rendering configuration and volume rendering
// ---------------------------------------------------------------------------

struct RenderConfig {
  int n_coarse = 32;
  int n_fine = 32;
  double t_near = 0.5;
  double t_far = 5.5;
  RGB background;
};

struct RadianceSample {
  double sigma = 0;
  RGB c;
  double delta = 0;
};

// Front-to-back compositing over ordered samples:
//   alpha_i = 1 - exp(-sigma_i * delta_i)
//   T_i     = prod_{j<i} (1 - alpha_j)
//   C       = sum_i T_i * alpha_i * c_i + T_end * background
inline RGB volume_render(const std::vector<RadianceSample>& samples,
                         const RGB& background) {
  double t = 1.0;
  RGB out{0, 0, 0};
  for (const auto& s : samples) {
    double alpha = 1.0 - std::exp(-s.sigma * s.delta);
    double w = t * alpha;
    out.r += w * s.c.r;
    out.g += w * s.c.g;
    out.b += w * s.c.b;
    t *= 1.0 - alpha;
  }
  out.r += t * background.r;
  out.g += t * background.g;
  out.b += t * background.b;
  return out;
}

// ---------------------------------------------------------------------------
// Sampling along rays
// ---------------------------------------------------------------------------

// Stratified: one uniform draw inside each of n_coarse equal-width bins.
inline std::vector<double> sample_coarse(const RenderConfig& cfg, Pcg32& rng) {
  std::vector<double> ts(cfg.n_coarse);
  double span = (cfg.t_far - cfg.t_near) / cfg.n_coarse;
  for (int i = 0; i < cfg.n_coarse; i++)
    ts[i] = cfg.t_near + span * (i + rng.uniform());
  return ts;
}

// Deterministic variant used for view synthesis: bin midpoints.
inline std::vector<double> sample_coarse_midpoints(const RenderConfig& cfg) {
  std::vector<double> ts(cfg.n_coarse);
  double span = (cfg.t_far - cfg.t_near) / cfg.n_coarse;
  for (int i = 0; i < cfg.n_coarse; i++)
    ts[i] = cfg.t_near + span * (i + 0.5);
  return ts;
}

// Inverse-transform sampling of n_fine locations from the piecewise-constant
// PDF proportional to `weights`. Bin i surrounds coarse_ts[i]: edges are the
// midpoints between consecutive coarse samples, clamped to the first and
// last sample. `us` supplies the uniform draws (one per fine sample), which
// lets synthesis use fixed quantile positions while training draws randomly.
// Falls back to a uniform PDF when all weights are below 1e-12.
inline std::vector<double> sample_fine_from(
    const std::vector<double>& coarse_ts, const std::vector<double>& weights,
    const std::vector<double>& us) {
  size_t n = coarse_ts.size();
  std::vector<double> edges(n + 1);
  edges[0] = coarse_ts[0];
  for (size_t i = 1; i < n; i++)
    edges[i] = 0.5 * (coarse_ts[i - 1] + coarse_ts[i]);
  edges[n] = coarse_ts[n - 1];

  double total = 0;
  for (double w : weights) total += w;
  std::vector<double> cdf(n + 1, 0.0);
  if (total < 1e-12) {
    for (size_t i = 0; i <= n; i++) cdf[i] = double(i) / n;
  } else {
    for (size_t i = 0; i < n; i++) cdf[i + 1] = cdf[i] + weights[i] / total;
    cdf[n] = 1.0;
  }

  std::vector<double> fine(us.size());
  for (size_t k = 0; k < us.size(); k++) {
    double u = us[k];
    size_t hi = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    if (hi == 0) hi = 1;
    if (hi > n) hi = n;
    size_t lo = hi - 1;
    double seg = cdf[hi] - cdf[lo];
    double frac = seg > 0 ? (u - cdf[lo]) / seg : 0.5;
    fine[k] = edges[lo] + frac * (edges[hi] - edges[lo]);
  }
  std::sort(fine.begin(), fine.end());
  return fine;
}

inline std::vector<double> sample_fine(const std::vector<double>& coarse_ts,
                                       const std::vector<double>& weights,
                                       int n_fine, Pcg32& rng) {
  std::vector<double> us(n_fine);
  for (double& u : us) u = rng.uniform();
  return sample_fine_from(coarse_ts, weights, us);
}

// Fixed quantiles for deterministic synthesis.
inline std::vector<double> fine_quantiles(int n_fine) {
  std::vector<double> us(n_fine);
  for (int i = 0; i < n_fine; i++) us[i] = (i + 0.5) / n_fine;
  return us;
}

// Merge coarse and fine t-values into one sorted list, recording where the
// coarse samples landed (the proposal pass is re-rendered at exactly those
// positions during training).
inline void merge_samples(const std::vector<double>& coarse,
                          const std::vector<double>& fine,
                          std::vector<double>* merged,
                          std::vector<int>* coarse_index) {
  merged->clear();
  coarse_index->clear();
  merged->reserve(coarse.size() + fine.size());
  coarse_index->reserve(coarse.size());
  size_t a = 0, b = 0;
  while (a < coarse.size() || b < fine.size()) {
    bool take_coarse =
        b >= fine.size() || (a < coarse.size() && coarse[a] <= fine[b]);
    if (take_coarse) {
      coarse_index->push_back(static_cast<int>(merged->size()));
      merged->push_back(coarse[a++]);
    } else {
      merged->push_back(fine[b++]);
    }
  }
}

// Inter-sample spacing; the last sample extends to t_far.
inline std::vector<double> deltas_from_ts(const std::vector<double>& ts,
                                          double t_far) {
  std::vector<double> d(ts.size());
  for (size_t i = 0; i + 1 < ts.size(); i++) d[i] = ts[i + 1] - ts[i];
  if (!ts.empty()) d.back() = std::max(0.0, t_far - ts.back());
  return d;
}

// ---------------------------------------------------------------------------
// Positional encoding
// ---------------------------------------------------------------------------
//
// Output order: frequency-major, then component, sin before cos:
//   [sin(2^0 pi v_0), cos(2^0 pi v_0), sin(2^0 pi v_1), ...,
//    sin(2^1 pi v_0), ...]
// Length is k * 2L for a k-vector.

struct EncodingConfig {
  int l_pos = 6;
  int l_dir = 0;

  int input_width() const { return 3 * 2 * l_pos + 3 * 2 * l_dir; }
};

inline void positional_encode(const double* v, int k, int l, double* out) {
  double pi = 3.14159265358979323846;
  // One sin/cos pair per component; higher octaves by angle doubling,
  // sin(2a) = 2 sin(a) cos(a), cos(2a) = cos^2(a) - sin^2(a).
  for (int i = 0; i < k; i++) {
    double a = pi * v[i];
    double s = std::sin(a);
    double c = std::cos(a);
    double* o = out + 2 * i;
    for (int f = 0; f < l; f++) {
      o[0] = s;
      o[1] = c;
      o += 2 * k;
      double s2 = 2.0 * s * c;
      double c2 = (c - s) * (c + s);
      s = s2;
      c = c2;
    }
  }
}

inline std::vector<double> positional_encode(const std::vector<double>& v,
                                             int l) {
  std::vector<double> out(v.size() * 2 * l);
  positional_encode(v.data(), static_cast<int>(v.size()), l, out.data());
  return out;
}

// Encoded network input for a world position (and direction when l_dir > 0).
inline void encode_point(const EncodingConfig& enc, const Vec3& x,
                         const Vec3& d, double* out) {
  double p[3] = {x.x, x.y, x.z};
  positional_encode(p, 3, enc.l_pos, out);
  if (enc.l_dir > 0) {
    double q[3] = {d.x, d.y, d.z};
    positional_encode(q, 3, enc.l_dir, out + 6 * enc.l_pos);
  }
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------
//
// Dense layers with a smooth rational activation on hidden layers,
//   g(x) = x / sqrt(1 + x^2),   g'(x) = (1 + x^2)^(-3/2),
// and a linear last layer. The smooth activation keeps finite-difference
// gradient checks clean and avoids transcendentals in the hot loop.

struct MLPLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MLPParams {
  std::vector<MLPLayer> layers;

  int input_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  int output_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }
  size_t parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
  void validate() const {
    for (size_t i = 0; i + 1 < layers.size(); i++) {
      if (layers[i].weight.rows() != layers[i + 1].weight.cols())
        throw ConfigError("layer widths do not chain");
    }
    for (const auto& l : layers) {
      if (l.bias.size() != l.weight.rows())
        throw ConfigError("bias width mismatch");
    }
  }
};

inline MLPParams make_mlp(int in, const std::vector<int>& hidden, int out,
                          Pcg32& rng) {
  MLPParams p;
  std::vector<int> widths;
  widths.push_back(in);
  for (int h : hidden) widths.push_back(h);
  widths.push_back(out);
  for (size_t i = 0; i + 1 < widths.size(); i++) {
    MLPLayer l;
    l.weight.resize(widths[i + 1], widths[i]);
    double a = std::sqrt(6.0 / (widths[i] + widths[i + 1]));
    for (int r = 0; r < l.weight.rows(); r++)
      for (int c = 0; c < l.weight.cols(); c++)
        l.weight(r, c) = rng.uniform(-a, a);
    l.bias = Eigen::VectorXd::Zero(widths[i + 1]);
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace detail {

inline void isru_inplace(Eigen::MatrixXd& x) {
  x.array() /= (1.0 + x.array().square()).sqrt();
}

}  // namespace detail

// Activations of every layer for a column batch of inputs. act[0] is the
// input; act[k] for k >= 1 is the output of layer k-1 (hidden layers after
// the nonlinearity, last layer linear).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> act;
};

inline void mlp_forward_batch(const MLPParams& p, const Eigen::MatrixXd& input,
                              ForwardTrace* trace) {
  if (input.rows() != p.input_width())
    throw ConfigError("mlp input width mismatch");
  trace->act.assign(1, input);
  for (size_t k = 0; k < p.layers.size(); k++) {
    Eigen::MatrixXd z(p.layers[k].weight.rows(), input.cols());
    z.noalias() = p.layers[k].weight * trace->act[k];
    z.colwise() += p.layers[k].bias;
    if (k + 1 < p.layers.size()) detail::isru_inplace(z);
    trace->act.push_back(std::move(z));
  }
}

inline std::vector<double> mlp_forward(const MLPParams& p,
                                       const std::vector<double>& input) {
  Eigen::MatrixXd in(input.size(), 1);
  for (size_t i = 0; i < input.size(); i++) in(i, 0) = input[i];
  ForwardTrace t;
  mlp_forward_batch(p, in, &t);
  const Eigen::MatrixXd& out = t.act.back();
  return std::vector<double>(out.data(), out.data() + out.rows());
}

// Gradient with the same layer layout as MLPParams.
struct MLPGrad {
  std::vector<MLPLayer> layers;

  static MLPGrad zeros_like(const MLPParams& p) {
    MLPGrad g;
    for (const auto& l : p.layers) {
      MLPLayer z;
      z.weight = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
      z.bias = Eigen::VectorXd::Zero(l.bias.size());
      g.layers.push_back(std::move(z));
    }
    return g;
  }
  void add(const MLPGrad& o) {
    for (size_t i = 0; i < layers.size(); i++) {
      layers[i].weight += o.layers[i].weight;
      layers[i].bias += o.layers[i].bias;
    }
  }
};

// Backpropagates d_out (gradient w.r.t. the last layer's output, one column
// per batch element) through the trace, accumulating into grad.
inline void mlp_backward_batch(const MLPParams& p, const ForwardTrace& trace,
                               Eigen::MatrixXd d_out, MLPGrad* grad) {
  Eigen::MatrixXd prev;
  for (int k = static_cast<int>(p.layers.size()) - 1; k >= 0; k--) {
    if (k + 1 < static_cast<int>(p.layers.size())) {
      // act[k+1] = g(z); recover g'(z) = (1 - g^2)^(3/2) since g^2 =
      // z^2/(1+z^2) implies 1 - g^2 = 1/(1+z^2).
      auto g = trace.act[k + 1].array();
      d_out.array() *= (1.0 - g.square()) * (1.0 - g.square()).sqrt();
    }
    grad->layers[k].weight.noalias() += d_out * trace.act[k].transpose();
    grad->layers[k].bias += d_out.rowwise().sum();
    if (k > 0) {
      prev.resize(p.layers[k].weight.cols(), d_out.cols());
      prev.noalias() = p.layers[k].weight.transpose() * d_out;
      std::swap(d_out, prev);
    }
  }
}

// ---------------------------------------------------------------------------
// Radiance field model
// ---------------------------------------------------------------------------
//
// Two networks: a density-only proposal net that places fine samples, and
// the main net with a density head plus an RGB head. Raw outputs map to
// physical quantities as sigma = softplus(raw), c = sigmoid(raw).

struct RadianceFieldModel {
  MLPParams proposal;  // output width 1 (raw sigma)
  MLPParams main;      // output width 4 (raw sigma, raw rgb)
  EncodingConfig encoding;
  RenderConfig render_cfg;

  void validate() const {
    proposal.validate();
    main.validate();
    if (proposal.input_width() != encoding.input_width() ||
        main.input_width() != encoding.input_width())
      throw ConfigError("network input width does not match encoding");
    if (proposal.output_width() != 1)
      throw ConfigError("proposal head must be width 1");
    if (main.output_width() != 4) throw ConfigError("main head must be width 4");
  }
};

inline double softplus(double x) {
  // log(1 + e^x) evaluated without overflow.
  return x > 30 ? x : std::log1p(std::exp(x));
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ModelDefaults {
  std::vector<int> main_hidden{64, 64, 64, 64};
  std::vector<int> proposal_hidden{32, 32};
};

inline RadianceFieldModel make_model(const EncodingConfig& enc,
                                     const RenderConfig& render_cfg,
                                     uint64_t seed,
                                     const ModelDefaults& arch = {}) {
  RadianceFieldModel m;
  m.encoding = enc;
  m.render_cfg = render_cfg;
  Pcg32 rng_main = keyed_rng(seed, kStreamInit, 0);
  Pcg32 rng_prop = keyed_rng(seed, kStreamInit, 1);
  m.main = make_mlp(enc.input_width(), arch.main_hidden, 4, rng_main);
  m.proposal = make_mlp(enc.input_width(), arch.proposal_hidden, 1, rng_prop);
  m.validate();
  return m;
}

// Single-point field query through the main network.
inline void query_field(const RadianceFieldModel& model, const Vec3& x,
                        const Vec3& d, double* sigma, RGB* c) {
  std::vector<double> in(model.encoding.input_width());
  encode_point(model.encoding, x, d, in.data());
  std::vector<double> out = mlp_forward(model.main, in);
  *sigma = softplus(out[0]);
  *c = RGB{sigmoid(out[1]), sigmoid(out[2]), sigmoid(out[3])};
}

// ---------------------------------------------------------------------------
// View synthesis
// ---------------------------------------------------------------------------

namespace detail {

// Encodes world positions along a set of rays into a column batch.
inline Eigen::MatrixXd encode_ray_points(const EncodingConfig& enc,
                                         const std::vector<Ray>& rays,
                                         const std::vector<double>& ts,
                                         size_t per_ray) {
  Eigen::MatrixXd in(enc.input_width(), ts.size());
  const Eigen::Index stride = in.rows();
  double* base = in.data();
  for (size_t r = 0; r < rays.size(); r++) {
    for (size_t k = 0; k < per_ray; k++) {
      size_t idx = r * per_ray + k;
      Vec3 p = rays[r].origin + rays[r].direction * ts[idx];
      encode_point(enc, p, rays[r].direction, base + stride * idx);
    }
  }
  return in;
}

}  // namespace detail

// Rendering weights w_i = T_i * alpha_i from densities alone, plus the final
// transmittance appended as the last element.
inline std::vector<double> render_weights(const std::vector<double>& sigmas,
                                          const std::vector<double>& deltas) {
  std::vector<double> w(sigmas.size() + 1);
  double t = 1.0;
  for (size_t i = 0; i < sigmas.size(); i++) {
    double alpha = 1.0 - std::exp(-sigmas[i] * deltas[i]);
    w[i] = t * alpha;
    t *= 1.0 - alpha;
  }
  w.back() = t;
  return w;
}

// Deterministic two-pass synthesis of one view: coarse midpoints through the
// proposal net, fine samples at fixed quantiles of the proposal weights,
// main net over the merged samples, volume rendering.
inline Image synthesize_view(const RadianceFieldModel& model,
                             const CameraPose& pose, int w, int h) {
  model.validate();
  detail::keep_heap_resident();
  const RenderConfig& rc = model.render_cfg;
  Image img(w, h);
  std::vector<double> coarse = sample_coarse_midpoints(rc);
  std::vector<double> quant = fine_quantiles(rc.n_fine);
  std::vector<double> cdeltas = deltas_from_ts(coarse, rc.t_far);
  const size_t nc = coarse.size();
  const size_t nm = nc + rc.n_fine;
  const size_t total = size_t(w) * h;

  // Fixed-size ray chunks keep every per-chunk matrix cache-resident.
  constexpr size_t kChunkRays = 32;
  std::vector<Ray> rays;
  std::vector<double> coarse_all, merged_all, wts, merged;
  std::vector<int> cidx;
  for (size_t c0 = 0; c0 < total; c0 += kChunkRays) {
    size_t c1 = std::min(total, c0 + kChunkRays);
    size_t nr = c1 - c0;
    rays.clear();
    for (size_t i = c0; i < c1; i++) {
      int y = static_cast<int>(i) / w;
      int x = static_cast<int>(i) % w;
      rays.push_back(trace_ray(pose, x, y, w, h));
    }

    // Proposal pass at shared coarse midpoints.
    coarse_all.resize(nr * nc);
    for (size_t r = 0; r < nr; r++)
      std::copy(coarse.begin(), coarse.end(), coarse_all.begin() + r * nc);
    Eigen::MatrixXd enc_c =
        detail::encode_ray_points(model.encoding, rays, coarse_all, nc);
    ForwardTrace trace;
    mlp_forward_batch(model.proposal, enc_c, &trace);
    Eigen::ArrayXd raw0_c = trace.act.back().row(0).transpose();
    Eigen::ArrayXd sig_c =
        (raw0_c > 30.0).select(raw0_c, raw0_c.exp().log1p());

    merged_all.clear();
    wts.resize(nc);
    for (size_t r = 0; r < nr; r++) {
      double t = 1.0;
      for (size_t k = 0; k < nc; k++) {
        double alpha = 1.0 - std::exp(-sig_c[r * nc + k] * cdeltas[k]);
        wts[k] = t * alpha;
        t *= 1.0 - alpha;
      }
      std::vector<double> fine = sample_fine_from(coarse, wts, quant);
      merge_samples(coarse, fine, &merged, &cidx);
      merged_all.insert(merged_all.end(), merged.begin(), merged.end());
    }

    // Main pass over merged samples; row 0 of logi is unused, rows 1..3 are
    // the colors.
    Eigen::MatrixXd enc_m =
        detail::encode_ray_points(model.encoding, rays, merged_all, nm);
    mlp_forward_batch(model.main, enc_m, &trace);
    const Eigen::MatrixXd& raw = trace.act.back();
    Eigen::ArrayXXd logi = 1.0 / (1.0 + (-raw.array()).exp());
    Eigen::ArrayXd raw0 = raw.row(0).transpose();
    Eigen::ArrayXd sig = (raw0 > 30.0).select(raw0, raw0.exp().log1p());

    for (size_t r = 0; r < nr; r++) {
      const double* ts = &merged_all[r * nm];
      double t = 1.0;
      RGB px{0, 0, 0};
      for (size_t k = 0; k < nm; k++) {
        size_t idx = r * nm + k;
        double delta = (k + 1 < nm ? ts[k + 1] - ts[k]
                                   : std::max(0.0, rc.t_far - ts[k]));
        double alpha = 1.0 - std::exp(-sig[idx] * delta);
        double wk = t * alpha;
        px.r += wk * logi(1, idx);
        px.g += wk * logi(2, idx);
        px.b += wk * logi(3, idx);
        t *= 1.0 - alpha;
      }
      px.r += t * rc.background.r;
      px.g += t * rc.background.g;
      px.b += t * rc.background.b;
      size_t i = c0 + r;
      img.set(static_cast<int>(i) % w, static_cast<int>(i) / w,
              RGB{clamp01(px.r), clamp01(px.g), clamp01(px.b)});
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------
//
// Layout: magic "NRF1", then a manifest of layer shapes as 32-bit
// little-endian integers (network count; per network: layer count, then
// out/in per layer), then every tensor row-major as 64-bit little-endian
// floats (per layer: weight then bias), proposal network first.

inline void append_mlp_manifest(ByteBuffer& b, const MLPParams& p) {
  put_u32le(b, static_cast<uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    put_u32le(b, static_cast<uint32_t>(l.weight.rows()));
    put_u32le(b, static_cast<uint32_t>(l.weight.cols()));
  }
}

inline void append_mlp_tensors(ByteBuffer& b, const MLPParams& p) {
  for (const auto& l : p.layers) {
    for (int r = 0; r < l.weight.rows(); r++)
      for (int c = 0; c < l.weight.cols(); c++) put_f64le(b, l.weight(r, c));
    for (int r = 0; r < l.bias.size(); r++) put_f64le(b, l.bias(r));
  }
}

inline ByteBuffer serialize_model(const RadianceFieldModel& model) {
  model.validate();
  ByteBuffer b;
  b.insert(b.end(), {'N', 'R', 'F', '1'});
  put_u32le(b, 2);
  append_mlp_manifest(b, model.proposal);
  append_mlp_manifest(b, model.main);
  append_mlp_tensors(b, model.proposal);
  append_mlp_tensors(b, model.main);
  return b;
}

inline MLPParams read_mlp_manifest(ByteReader& r) {
  uint32_t n_layers = r.u32le();
  if (n_layers == 0 || n_layers > 64)
    throw DecodeError("implausible layer count", r.pos());
  MLPParams p;
  for (uint32_t i = 0; i < n_layers; i++) {
    MLPLayer l;
    uint32_t rows = r.u32le();
    uint32_t cols = r.u32le();
    if (rows == 0 || cols == 0 || rows > 65536 || cols > 65536)
      throw DecodeError("implausible layer shape", r.pos());
    l.weight.resize(rows, cols);
    l.bias.resize(rows);
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline void read_mlp_tensors(ByteReader& r, MLPParams* p) {
  for (auto& l : p->layers) {
    for (int row = 0; row < l.weight.rows(); row++)
      for (int col = 0; col < l.weight.cols(); col++)
        l.weight(row, col) = r.f64le();
    for (int row = 0; row < l.bias.size(); row++) l.bias(row) = r.f64le();
  }
}

// The checkpoint carries tensors only; encoding and render configuration
// come from the caller and are validated against the stored shapes.
inline RadianceFieldModel deserialize_model(const ByteBuffer& bytes,
                                            const EncodingConfig& enc,
                                            const RenderConfig& render_cfg) {
  ByteReader r(bytes);
  if (r.bytes(4) != "NRF1") throw DecodeError("bad checkpoint magic", 0);
  uint32_t n_nets = r.u32le();
  if (n_nets != 2) throw DecodeError("expected two networks", r.pos());
  RadianceFieldModel m;
  m.encoding = enc;
  m.render_cfg = render_cfg;
  m.proposal = read_mlp_manifest(r);
  m.main = read_mlp_manifest(r);
  read_mlp_tensors(r, &m.proposal);
  read_mlp_tensors(r, &m.main);
  if (r.remaining() != 0) throw DecodeError("trailing bytes", r.pos());
  m.validate();
  return m;
}

inline void save_model(const std::string& path,
                       const RadianceFieldModel& model) {
  write_file(path, serialize_model(model));
}

inline RadianceFieldModel load_model(const std::string& path,
                                     const EncodingConfig& enc,
                                     const RenderConfig& render_cfg) {
  return deserialize_model(read_file(path), enc, render_cfg);
}

}  // namespace nerfstream

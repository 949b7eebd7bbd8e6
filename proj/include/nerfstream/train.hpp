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
#include <cmath>
#include <functional>
#include <vector>

#include "nerfstream/common.hpp"
#include "nerfstream/field.hpp"
#include "nerfstream/rng.hpp"
#include "nerfstream/scene.hpp"

namespace nerfstream {

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
  int iterations = 5000;
  int batch_rays = 1024;
  double learning_rate = 5e-4;
  // When positive, the step size decays geometrically from learning_rate to
  // this value over the run; 0 keeps the step size constant.
  double final_learning_rate = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t seed = 1;

  // Step size for one iteration of a run.
  double learning_rate_at(int it) const {
    if (iterations <= 1 || final_learning_rate <= 0 ||
        final_learning_rate == learning_rate)
      return learning_rate;
    double frac = double(it) / double(iterations - 1);
    return learning_rate *
           std::pow(final_learning_rate / learning_rate, frac);
  }

  void validate() const {
    if (iterations < 0 || batch_rays <= 0 || learning_rate <= 0)
      throw ConfigError("bad training configuration");
    if (final_learning_rate < 0 || final_learning_rate > learning_rate)
      throw ConfigError(
          "final_learning_rate must lie in [0, learning_rate]");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
      throw ConfigError("adam betas must lie in (0,1)");
  }
};

// ---------------------------------------------------------------------------
// Ray batches with fixed sample positions
// ---------------------------------------------------------------------------
//
// Sample positions are chosen before the gradient step and held fixed inside
// it: the proposal net receives gradient through its rendered color, not
// through where the fine samples landed. This keeps the loss an ordinary
// differentiable function of the parameters, which the finite-difference
// oracle can check directly.

struct RayBatch {
  std::vector<Ray> rays;          // R rays
  std::vector<RGB> targets;       // R target colors
  std::vector<double> ts;         // R * n_merged, sorted per ray
  std::vector<int> coarse_index;  // R * n_coarse, local index into a ray's ts
  int n_merged = 0;
  int n_coarse = 0;

  size_t ray_count() const { return rays.size(); }
};

struct ModelGrad {
  MLPGrad main;
  MLPGrad proposal;

  static ModelGrad zeros_like(const RadianceFieldModel& m) {
    return {MLPGrad::zeros_like(m.main), MLPGrad::zeros_like(m.proposal)};
  }
  void add(const ModelGrad& o) {
    main.add(o.main);
    proposal.add(o.proposal);
  }
};

struct LossGrad {
  double loss = 0;        // mse_fine + mse_coarse, the quantity differentiated
  double mse_fine = 0;    // mean over rays and channels, main pass
  double mse_coarse = 0;  // same, proposal pass
  ModelGrad grad;
};

namespace detail {

// Backward pass through front-to-back compositing. Given the upstream
// gradient g = dL/dC, accumulates dL/dsigma_i and dL/dc_i. Uses the suffix
// form dC/dsigma_i = delta_i * (T_{i+1} c_i - S_{i+1}) with
// S_{i+1} = sum_{j>i} w_j c_j + T_end * background, which stays finite even
// as alpha_i -> 1.
struct CompositeBackward {
  // Forward state per sample.
  std::vector<double> alpha;
  std::vector<double> trans;  // trans[i] = T_i, size n+1, trans[n] = T_end

  RGB forward(const double* sigma, const RGB* color, const double* delta,
              size_t n, const RGB& background) {
    alpha.resize(n);
    for (size_t i = 0; i < n; i++)
      alpha[i] = 1.0 - std::exp(-sigma[i] * delta[i]);
    return forward_from_alpha(alpha.data(), color, n, background);
  }

  // Variant for callers that already computed alpha_i = 1 - exp(-sigma_i
  // delta_i) in bulk.
  RGB forward_from_alpha(const double* a, const RGB* color, size_t n,
                         const RGB& background) {
    if (a != alpha.data()) alpha.assign(a, a + n);
    trans.resize(n + 1);
    double t = 1.0;
    RGB out{0, 0, 0};
    for (size_t i = 0; i < n; i++) {
      trans[i] = t;
      double w = t * alpha[i];
      out.r += w * color[i].r;
      out.g += w * color[i].g;
      out.b += w * color[i].b;
      t *= 1.0 - alpha[i];
    }
    trans[n] = t;
    out.r += t * background.r;
    out.g += t * background.g;
    out.b += t * background.b;
    return out;
  }

  void backward(const RGB* color, const double* delta, size_t n,
                const RGB& background, const RGB& g, double* d_sigma,
                RGB* d_color) const {
    RGB suffix{trans[n] * background.r, trans[n] * background.g,
               trans[n] * background.b};
    for (size_t i = n; i-- > 0;) {
      double w = trans[i] * alpha[i];
      d_color[i].r += w * g.r;
      d_color[i].g += w * g.g;
      d_color[i].b += w * g.b;
      double dr = trans[i + 1] * color[i].r - suffix.r;
      double dg = trans[i + 1] * color[i].g - suffix.g;
      double db = trans[i + 1] * color[i].b - suffix.b;
      d_sigma[i] += delta[i] * (dr * g.r + dg * g.g + db * g.b);
      suffix.r += w * color[i].r;
      suffix.g += w * color[i].g;
      suffix.b += w * color[i].b;
    }
  }
};

}  // namespace detail

// Loss over a batch with fixed sample positions:
//   loss = mse_fine + mse_coarse
// where mse_fine is the photometric error of the main pass over the merged
// samples and mse_coarse the error of the proposal pass rendered at the
// coarse positions (reusing the main net's colors there). Gradients flow to
// both networks. Both terms vanish together exactly when every rendered
// color matches its target.
inline LossGrad loss_and_grad(const RadianceFieldModel& model,
                              const RayBatch& batch) {
  model.validate();
  if (batch.rays.empty()) throw ConfigError("empty ray batch");
  const RenderConfig& rc = model.render_cfg;
  const size_t n_rays = batch.ray_count();
  const size_t nm = batch.n_merged;
  const size_t nc = batch.n_coarse;
  const double inv_count = 1.0 / (double(n_rays) * 3.0);

  LossGrad out;
  out.grad = ModelGrad::zeros_like(model);

  // Fixed-size ray blocks keep peak memory flat and make the gradient a
  // fixed-order sum, independent of any parallel execution of blocks.
  constexpr size_t kBlockRays = 32;
  std::vector<double> d_sigma(nm), d_sigma_c(nc);
  std::vector<RGB> color(nm), d_color(nm), color_c(nc), d_color_c(nc);
  detail::CompositeBackward comp;

  for (size_t r0 = 0; r0 < n_rays; r0 += kBlockRays) {
    size_t r1 = std::min(n_rays, r0 + kBlockRays);
    size_t block = r1 - r0;

    std::vector<Ray> rays(batch.rays.begin() + r0, batch.rays.begin() + r1);
    std::vector<double> ts(batch.ts.begin() + r0 * nm,
                           batch.ts.begin() + r1 * nm);
    Eigen::MatrixXd enc_m =
        detail::encode_ray_points(model.encoding, rays, ts, nm);

    // Gather the coarse subset of the already-encoded merged points.
    Eigen::MatrixXd enc_c(enc_m.rows(), block * nc);
    for (size_t r = 0; r < block; r++)
      for (size_t j = 0; j < nc; j++)
        enc_c.col(r * nc + j) =
            enc_m.col(r * nm + batch.coarse_index[(r0 + r) * nc + j]);

    ForwardTrace trace_m, trace_c;
    mlp_forward_batch(model.main, enc_m, &trace_m);
    mlp_forward_batch(model.proposal, enc_c, &trace_c);
    const Eigen::MatrixXd& raw_m = trace_m.act.back();
    const Eigen::MatrixXd& raw_c = trace_c.act.back();

    // Head nonlinearities and alphas for the whole block at once, so the
    // per-ray compositing below is transcendental-free. logi row 0 is the
    // softplus derivative, rows 1..3 the colors.
    Eigen::ArrayXXd logi_m = 1.0 / (1.0 + (-raw_m.array()).exp());
    Eigen::ArrayXd raw0_m = raw_m.row(0).transpose();
    Eigen::ArrayXd sig_m =
        (raw0_m > 30.0).select(raw0_m, raw0_m.exp().log1p());
    Eigen::ArrayXd raw0_c = raw_c.row(0).transpose();
    Eigen::ArrayXd logi_c = 1.0 / (1.0 + (-raw0_c).exp());
    Eigen::ArrayXd sig_c =
        (raw0_c > 30.0).select(raw0_c, raw0_c.exp().log1p());

    Eigen::ArrayXd delta_m(block * nm), delta_c(block * nc);
    for (size_t r = 0; r < block; r++) {
      const double* ray_ts = &batch.ts[(r0 + r) * nm];
      const int* cidx = &batch.coarse_index[(r0 + r) * nc];
      for (size_t k = 0; k < nm; k++)
        delta_m[r * nm + k] =
            (k + 1 < nm ? ray_ts[k + 1] - ray_ts[k]
                        : std::max(0.0, rc.t_far - ray_ts[k]));
      for (size_t j = 0; j < nc; j++)
        delta_c[r * nc + j] =
            (j + 1 < nc ? ray_ts[cidx[j + 1]] - ray_ts[cidx[j]]
                        : std::max(0.0, rc.t_far - ray_ts[cidx[j]]));
    }
    Eigen::ArrayXd alpha_m = 1.0 - (-(sig_m * delta_m)).exp();
    Eigen::ArrayXd alpha_c = 1.0 - (-(sig_c * delta_c)).exp();

    Eigen::MatrixXd d_raw_m = Eigen::MatrixXd::Zero(4, block * nm);
    Eigen::MatrixXd d_raw_c = Eigen::MatrixXd::Zero(1, block * nc);

    for (size_t r = 0; r < block; r++) {
      const RGB& target = batch.targets[r0 + r];
      const int* cidx = &batch.coarse_index[(r0 + r) * nc];

      for (size_t k = 0; k < nm; k++) {
        size_t col = r * nm + k;
        color[k] = RGB{logi_m(1, col), logi_m(2, col), logi_m(3, col)};
        d_sigma[k] = 0;
        d_color[k] = RGB{0, 0, 0};
      }

      // Main pass over merged samples.
      RGB c_fine = comp.forward_from_alpha(&alpha_m[r * nm], color.data(), nm,
                                           rc.background);
      RGB res_f{c_fine.r - target.r, c_fine.g - target.g,
                c_fine.b - target.b};
      out.mse_fine +=
          (res_f.r * res_f.r + res_f.g * res_f.g + res_f.b * res_f.b) *
          inv_count;
      RGB g_f{2 * inv_count * res_f.r, 2 * inv_count * res_f.g,
              2 * inv_count * res_f.b};
      comp.backward(color.data(), &delta_m[r * nm], nm, rc.background, g_f,
                    d_sigma.data(), d_color.data());

      // Proposal pass at the coarse positions, reusing main-net colors.
      for (size_t j = 0; j < nc; j++) {
        color_c[j] = color[cidx[j]];
        d_sigma_c[j] = 0;
        d_color_c[j] = RGB{0, 0, 0};
      }
      RGB c_coarse = comp.forward_from_alpha(&alpha_c[r * nc], color_c.data(),
                                             nc, rc.background);
      RGB res_c{c_coarse.r - target.r, c_coarse.g - target.g,
                c_coarse.b - target.b};
      out.mse_coarse +=
          (res_c.r * res_c.r + res_c.g * res_c.g + res_c.b * res_c.b) *
          inv_count;
      RGB g_c{2 * inv_count * res_c.r, 2 * inv_count * res_c.g,
              2 * inv_count * res_c.b};
      comp.backward(color_c.data(), &delta_c[r * nc], nc, rc.background, g_c,
                    d_sigma_c.data(), d_color_c.data());
      for (size_t j = 0; j < nc; j++) d_color[cidx[j]] += d_color_c[j];

      // Chain through the output nonlinearities into raw head outputs.
      for (size_t k = 0; k < nm; k++) {
        size_t col = r * nm + k;
        d_raw_m(0, col) = d_sigma[k] * logi_m(0, col);
        for (int ch = 0; ch < 3; ch++) {
          double s = color[k][ch];
          d_raw_m(1 + ch, col) = d_color[k][ch] * s * (1.0 - s);
        }
      }
      for (size_t j = 0; j < nc; j++) {
        size_t col = r * nc + j;
        d_raw_c(0, col) = d_sigma_c[j] * logi_c[col];
      }
    }

    mlp_backward_batch(model.main, trace_m, std::move(d_raw_m),
                       &out.grad.main);
    mlp_backward_batch(model.proposal, trace_c, std::move(d_raw_c),
                       &out.grad.proposal);
  }

  out.loss = out.mse_fine + out.mse_coarse;
  return out;
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

// Draws one training batch for iteration `it`. Each ray owns two keyed
// random streams (pixel choice + stratified bins, and fine-sample draws), so
// the batch depends only on (seed, it, ray index).
inline RayBatch draw_batch(const RadianceFieldModel& model,
                           const CapturedDataset& data,
                           const TrainConfig& cfg, int it) {
  const RenderConfig& rc = model.render_cfg;
  const int nc = rc.n_coarse;
  const int nm = rc.n_coarse + rc.n_fine;
  RayBatch batch;
  batch.n_merged = nm;
  batch.n_coarse = nc;
  batch.rays.resize(cfg.batch_rays);
  batch.targets.resize(cfg.batch_rays);
  batch.ts.resize(size_t(cfg.batch_rays) * nm);
  batch.coarse_index.resize(size_t(cfg.batch_rays) * nc);

  std::vector<std::vector<double>> coarse_all(cfg.batch_rays);
  for (int r = 0; r < cfg.batch_rays; r++) {
    Pcg32 rng = keyed_rng(cfg.seed, kStreamTrainRays,
                          hash_combine(uint64_t(it), uint64_t(r)));
    uint32_t view = rng.below(static_cast<uint32_t>(data.images.size()));
    int x = static_cast<int>(rng.below(static_cast<uint32_t>(data.width)));
    int y = static_cast<int>(rng.below(static_cast<uint32_t>(data.height)));
    batch.rays[r] = trace_ray(data.poses[view], x, y, data.width, data.height);
    batch.targets[r] = data.images[view].get(x, y);
    coarse_all[r] = sample_coarse(rc, rng);
  }

  // Proposal weights at the coarse samples decide where fine samples land.
  // Evaluated in fixed-size ray chunks to keep the working set in cache.
  constexpr int kChunkRays = 64;
  std::vector<Ray> chunk_rays;
  std::vector<double> flat;
  std::vector<double> sigmas(nc);
  std::vector<double> merged;
  std::vector<int> cidx;
  for (int q0 = 0; q0 < cfg.batch_rays; q0 += kChunkRays) {
    int q1 = std::min(cfg.batch_rays, q0 + kChunkRays);
    chunk_rays.assign(batch.rays.begin() + q0, batch.rays.begin() + q1);
    flat.clear();
    for (int r = q0; r < q1; r++)
      flat.insert(flat.end(), coarse_all[r].begin(), coarse_all[r].end());
    Eigen::MatrixXd enc =
        detail::encode_ray_points(model.encoding, chunk_rays, flat, nc);
    ForwardTrace trace;
    mlp_forward_batch(model.proposal, enc, &trace);
    const Eigen::MatrixXd& raw = trace.act.back();

    for (int r = q0; r < q1; r++) {
      const std::vector<double>& coarse = coarse_all[r];
      std::vector<double> cdeltas = deltas_from_ts(coarse, rc.t_far);
      for (int k = 0; k < nc; k++)
        sigmas[k] = softplus(raw(0, size_t(r - q0) * nc + k));
      std::vector<double> wts = render_weights(sigmas, cdeltas);
      wts.pop_back();
      Pcg32 rng = keyed_rng(cfg.seed, kStreamJitter,
                            hash_combine(uint64_t(it), uint64_t(r)));
      std::vector<double> fine = sample_fine(coarse, wts, rc.n_fine, rng);
      merge_samples(coarse, fine, &merged, &cidx);
      std::copy(merged.begin(), merged.end(),
                batch.ts.begin() + size_t(r) * nm);
      std::copy(cidx.begin(), cidx.end(),
                batch.coarse_index.begin() + size_t(r) * nc);
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  ModelGrad m;
  ModelGrad v;
  int64_t step = 0;

  static AdamState zeros_like(const RadianceFieldModel& model) {
    return {ModelGrad::zeros_like(model), ModelGrad::zeros_like(model), 0};
  }
};

namespace detail {

inline void adam_update_mlp(MLPParams* p, const MLPGrad& g, MLPGrad* m,
                            MLPGrad* v, const TrainConfig& cfg, double bc1,
                            double bc2) {
  for (size_t i = 0; i < p->layers.size(); i++) {
    auto upd = [&](auto& theta, const auto& grad, auto& m1, auto& m2) {
      m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * grad;
      m2.array() =
          cfg.beta2 * m2.array() + (1 - cfg.beta2) * grad.array().square();
      theta.array() -= cfg.learning_rate * (m1.array() / bc1) /
                       ((m2.array() / bc2).sqrt() + cfg.eps);
    };
    upd(p->layers[i].weight, g.layers[i].weight, m->layers[i].weight,
        v->layers[i].weight);
    upd(p->layers[i].bias, g.layers[i].bias, m->layers[i].bias,
        v->layers[i].bias);
  }
}

}  // namespace detail

inline void adam_step(RadianceFieldModel* model, const ModelGrad& grad,
                      AdamState* state, const TrainConfig& cfg) {
  state->step++;
  double bc1 = 1.0 - std::pow(cfg.beta1, double(state->step));
  double bc2 = 1.0 - std::pow(cfg.beta2, double(state->step));
  detail::adam_update_mlp(&model->main, grad.main, &state->m.main,
                          &state->v.main, cfg, bc1, bc2);
  detail::adam_update_mlp(&model->proposal, grad.proposal, &state->m.proposal,
                          &state->v.proposal, cfg, bc1, bc2);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

using ProgressFn = std::function<void(int iteration, double loss)>;

inline RadianceFieldModel train(const RadianceFieldModel& init,
                                const CapturedDataset& data,
                                const TrainConfig& cfg,
                                const ProgressFn& progress = nullptr) {
  cfg.validate();
  if (data.images.empty()) throw ConfigError("empty dataset");
  detail::keep_heap_resident();
  RadianceFieldModel model = init;
  AdamState adam = AdamState::zeros_like(model);
  for (int it = 0; it < cfg.iterations; it++) {
    RayBatch batch = draw_batch(model, data, cfg, it);
    LossGrad lg = loss_and_grad(model, batch);
    if (!std::isfinite(lg.loss))
      throw TrainingError("non-finite loss at iteration " +
                          std::to_string(it) +
                          "; lower the learning rate");
    TrainConfig step_cfg = cfg;
    step_cfg.learning_rate = cfg.learning_rate_at(it);
    adam_step(&model, lg.grad, &adam, step_cfg);
    if (progress && (it % 100 == 0 || it + 1 == cfg.iterations))
      progress(it, lg.loss);
  }
  return model;
}

}  // namespace nerfstream

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

#include "nerfstream/train.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace nerfstream {
namespace {

// Tiny model with a single hidden unit per network, L_pos = 1.
RadianceFieldModel tiny_model(uint64_t seed) {
  EncodingConfig enc;
  enc.l_pos = 1;
  RenderConfig rc;
  rc.t_near = 0.5;
  rc.t_far = 2.5;
  rc.background = RGB{0.2, 0.1, 0.3};
  ModelDefaults arch;
  arch.main_hidden = {1};
  arch.proposal_hidden = {1};
  return make_model(enc, rc, seed, arch);
}

// One ray, two merged samples, the first of which is the coarse sample.
RayBatch tiny_batch() {
  RayBatch b;
  b.n_merged = 2;
  b.n_coarse = 1;
  b.rays = {Ray{Vec3{0, -2, 0}, normalize(Vec3{0.1, 1, 0.05})}};
  b.targets = {RGB{0.2, 0.7, 0.4}};
  b.ts = {1.0, 1.7};
  b.coarse_index = {0};
  return b;
}

// All tunable doubles of a model, for finite differencing.
std::vector<double*> all_params(RadianceFieldModel* m) {
  std::vector<double*> out;
  for (MLPParams* net : {&m->main, &m->proposal}) {
    for (auto& l : net->layers) {
      for (int i = 0; i < l.weight.size(); i++) out.push_back(l.weight.data() + i);
      for (int i = 0; i < l.bias.size(); i++) out.push_back(l.bias.data() + i);
    }
  }
  return out;
}

std::vector<double> flat_grad(const ModelGrad& g) {
  std::vector<double> out;
  for (const MLPGrad* net : {&g.main, &g.proposal}) {
    for (const auto& l : net->layers) {
      out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
      out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
  }
  return out;
}

TEST(LossTest, PerfectPredictionHasZeroLossAndGradient) {
  // With all parameters zero every density and color is constant, and with
  // a 0.5 gray background every rendered color is exactly 0.5.
  RadianceFieldModel m = tiny_model(3);
  for (MLPParams* net : {&m.main, &m.proposal}) {
    for (auto& l : net->layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  m.render_cfg.background = RGB{0.5, 0.5, 0.5};
  RayBatch b = tiny_batch();
  b.targets = {RGB{0.5, 0.5, 0.5}};
  LossGrad lg = loss_and_grad(m, b);
  EXPECT_NEAR(lg.loss, 0.0, 1e-24);
  double gnorm = 0;
  for (double g : flat_grad(lg.grad)) gnorm += g * g;
  EXPECT_LT(std::sqrt(gnorm), 1e-12);
}

TEST(LossTest, GradientMatchesFiniteDifferences) {
  RadianceFieldModel m = tiny_model(17);
  RayBatch b = tiny_batch();
  LossGrad lg = loss_and_grad(m, b);
  std::vector<double> analytic = flat_grad(lg.grad);
  std::vector<double*> params = all_params(&m);
  ASSERT_EQ(analytic.size(), params.size());

  const double h = 1e-5;
  for (size_t i = 0; i < params.size(); i++) {
    double saved = *params[i];
    *params[i] = saved + h;
    double up = loss_and_grad(m, b).loss;
    *params[i] = saved - h;
    double down = loss_and_grad(m, b).loss;
    *params[i] = saved;
    double fd = (up - down) / (2 * h);
    double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-10});
    EXPECT_LT(std::fabs(fd - analytic[i]) / denom, 1e-4)
        << "param " << i << " analytic " << analytic[i] << " fd " << fd;
  }
}

TEST(LossTest, GradientMatchesFiniteDifferencesAcrossRandomTrials) {
  const double h = 1e-5;
  for (int trial = 0; trial < 100; trial++) {
    RadianceFieldModel m = tiny_model(1000 + trial);
    Pcg32 rng(trial);
    RayBatch b;
    b.n_merged = 3;
    b.n_coarse = 2;
    b.rays = {Ray{Vec3{rng.uniform(-1, 1), -2, rng.uniform(-1, 1)},
                  normalize(Vec3{rng.uniform(-0.3, 0.3), 1,
                                 rng.uniform(-0.3, 0.3)})}};
    b.targets = {RGB{rng.uniform(), rng.uniform(), rng.uniform()}};
    double t0 = rng.uniform(0.6, 1.0);
    double t1 = t0 + rng.uniform(0.1, 0.5);
    double t2 = t1 + rng.uniform(0.1, 0.5);
    b.ts = {t0, t1, t2};
    b.coarse_index = {0, 2};

    LossGrad lg = loss_and_grad(m, b);
    std::vector<double> analytic = flat_grad(lg.grad);
    std::vector<double*> params = all_params(&m);
    for (size_t i = 0; i < params.size(); i++) {
      double saved = *params[i];
      *params[i] = saved + h;
      double up = loss_and_grad(m, b).loss;
      *params[i] = saved - h;
      double down = loss_and_grad(m, b).loss;
      *params[i] = saved;
      double fd = (up - down) / (2 * h);
      double denom = std::max({std::fabs(fd), std::fabs(analytic[i]), 1e-10});
      ASSERT_LT(std::fabs(fd - analytic[i]) / denom, 1e-4)
          << "trial " << trial << " param " << i;
    }
  }
}

// Scalar re-render of the main pass of a one-ray batch, independent of the
// batched code path.
RGB rerender_main(const RadianceFieldModel& m, const RayBatch& b) {
  std::vector<RadianceSample> samples(b.n_merged);
  for (int k = 0; k < b.n_merged; k++) {
    Vec3 p = b.rays[0].origin + b.rays[0].direction * b.ts[k];
    std::vector<double> in(m.encoding.input_width());
    encode_point(m.encoding, p, b.rays[0].direction, in.data());
    std::vector<double> raw = mlp_forward(m.main, in);
    samples[k].sigma = softplus(raw[0]);
    samples[k].c = RGB{sigmoid(raw[1]), sigmoid(raw[2]), sigmoid(raw[3])};
    samples[k].delta = k + 1 < b.n_merged
                           ? b.ts[k + 1] - b.ts[k]
                           : m.render_cfg.t_far - b.ts[k];
  }
  return volume_render(samples, m.render_cfg.background);
}

TEST(LossTest, DoublingResidualsQuadruplesLoss) {
  RadianceFieldModel m = tiny_model(23);
  RayBatch b = tiny_batch();
  double base = loss_and_grad(m, b).mse_fine;

  // Moving the target to 2t - p doubles the residual p - t; the prediction
  // itself does not depend on the target.
  RGB pred = rerender_main(m, b);
  RayBatch doubled = b;
  for (int ch = 0; ch < 3; ch++)
    doubled.targets[0][ch] = 2 * b.targets[0][ch] - pred[ch];
  double quad = loss_and_grad(m, doubled).mse_fine;
  ASSERT_GT(base, 1e-8);
  EXPECT_NEAR(quad / base, 4.0, 1e-9);
}

TEST(TrainTest, ZeroIterationsLeaveParametersUntouched) {
  AnalyticScene scene = make_scene(6, 2);
  TrajectorySpec tspec;
  tspec.view_count = 2;
  RenderConfig rc;
  rc.n_coarse = 4;
  rc.n_fine = 4;
  rc.background = scene.background;
  auto poses = generate_trajectory(tspec, scene, 16, 16);
  CapturedDataset data = capture_dataset(scene, poses, 16, 16, rc);

  EncodingConfig enc;
  enc.l_pos = 2;
  ModelDefaults arch;
  arch.main_hidden = {8};
  arch.proposal_hidden = {4};
  RadianceFieldModel m = make_model(enc, rc, 4, arch);
  TrainConfig cfg;
  cfg.iterations = 0;
  RadianceFieldModel out = train(m, data, cfg);
  EXPECT_EQ(serialize_model(out), serialize_model(m));
}

TEST(TrainTest, FixedSeedReproducesParametersBitExactly) {
  AnalyticScene scene = make_scene(6, 2);
  TrajectorySpec tspec;
  tspec.view_count = 3;
  RenderConfig rc;
  rc.n_coarse = 6;
  rc.n_fine = 6;
  rc.background = scene.background;
  auto poses = generate_trajectory(tspec, scene, 16, 16);
  CapturedDataset data = capture_dataset(scene, poses, 16, 16, rc);

  EncodingConfig enc;
  enc.l_pos = 3;
  ModelDefaults arch;
  arch.main_hidden = {16, 16};
  arch.proposal_hidden = {8};
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.batch_rays = 32;
  cfg.seed = 99;

  RadianceFieldModel a =
      train(make_model(enc, rc, cfg.seed, arch), data, cfg);
  RadianceFieldModel b =
      train(make_model(enc, rc, cfg.seed, arch), data, cfg);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
}

TEST(TrainTest, LossDecreasesOnToyScene) {
  AnalyticScene scene = make_scene(12, 1);
  TrajectorySpec tspec;
  tspec.view_count = 6;
  RenderConfig rc;
  rc.n_coarse = 8;
  rc.n_fine = 8;
  rc.background = scene.background;
  auto poses = generate_trajectory(tspec, scene, 16, 16);
  CapturedDataset data = capture_dataset(scene, poses, 16, 16, rc);

  EncodingConfig enc;
  enc.l_pos = 4;
  ModelDefaults arch;
  arch.main_hidden = {24, 24};
  arch.proposal_hidden = {12};
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.batch_rays = 64;
  cfg.learning_rate = 2e-3;
  cfg.seed = 7;

  double first = -1, last = -1;
  train(make_model(enc, rc, cfg.seed, arch), data, cfg,
        [&](int it, double loss) {
          if (it == 0) first = loss;
          last = loss;
        });
  ASSERT_GE(first, 0.0);
  EXPECT_LT(last, first);
}

TEST(TrainTest, InvalidConfigsAreRejected) {
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_rays = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.final_learning_rate = -1e-5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.final_learning_rate = cfg.learning_rate * 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainTest, LearningRateScheduleEndpoints) {
  TrainConfig cfg;
  cfg.iterations = 101;
  cfg.learning_rate = 1e-3;
  EXPECT_EQ(cfg.learning_rate_at(0), 1e-3);
  EXPECT_EQ(cfg.learning_rate_at(50), 1e-3);
  EXPECT_EQ(cfg.learning_rate_at(100), 1e-3);
  cfg.final_learning_rate = 1e-4;
  cfg.validate();
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(0), 1e-3);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(100), 1e-4);
  EXPECT_NEAR(cfg.learning_rate_at(50), std::sqrt(1e-3 * 1e-4), 1e-12);
}

TEST(TrainTest, EmptyBatchIsRejected) {
  RadianceFieldModel m = tiny_model(1);
  RayBatch b;
  b.n_merged = 2;
  b.n_coarse = 1;
  EXPECT_THROW(loss_and_grad(m, b), ConfigError);
}

}  // namespace
}  // namespace nerfstream

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

#include "nerfstream/scene.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gtest/gtest.h"

namespace nerfstream {
namespace {

TEST(SceneTest, MakeSceneIsDeterministic) {
  AnalyticScene a = make_scene(7, 1);
  AnalyticScene b = make_scene(7, 1);
  ASSERT_EQ(a.primitives.size(), 1u);
  ASSERT_EQ(b.primitives.size(), 1u);
  EXPECT_EQ(a.primitives[0].center.x, b.primitives[0].center.x);
  EXPECT_EQ(a.primitives[0].center.y, b.primitives[0].center.y);
  EXPECT_EQ(a.primitives[0].center.z, b.primitives[0].center.z);
  EXPECT_EQ(a.primitives[0].radius, b.primitives[0].radius);
  EXPECT_EQ(a.primitives[0].peak_density, b.primitives[0].peak_density);
  EXPECT_EQ(a.background.r, b.background.r);
}

TEST(SceneTest, DifferentSeedsDiffer) {
  AnalyticScene a = make_scene(7, 5);
  AnalyticScene b = make_scene(8, 5);
  bool any_diff = false;
  for (size_t i = 0; i < 5; i++) {
    if (a.primitives[i].center.x != b.primitives[i].center.x ||
        a.primitives[i].radius != b.primitives[i].radius ||
        a.primitives[i].peak_density != b.primitives[i].peak_density) {
      any_diff = true;
    }
  }
  EXPECT_TRUE(any_diff);
}

TEST(SceneTest, PrimitivesRespectInvariants) {
  AnalyticScene s = make_scene(7, 3);
  for (const auto& p : s.primitives) {
    EXPECT_TRUE(s.bounds.contains(p.center));
    EXPECT_GT(p.radius, 0.0);
    EXPECT_GT(p.peak_density, 0.0);
    for (int c = 0; c < 3; c++) {
      EXPECT_GE(p.albedo[c], 0.0);
      EXPECT_LE(p.albedo[c], 1.0);
    }
  }
}

TEST(SceneTest, FieldFarFromPrimitivesIsBackground) {
  AnalyticScene s = make_scene(3, 2);
  double sigma;
  RGB c;
  scene_field(s, Vec3{40, 40, 40}, &sigma, &c);
  EXPECT_LT(sigma, 1e-8);
  EXPECT_EQ(c.r, s.background.r);
  EXPECT_EQ(c.g, s.background.g);
  EXPECT_EQ(c.b, s.background.b);
}

TEST(SceneTest, FieldAtCenterOfSolePrimitive) {
  AnalyticScene s;
  Primitive p;
  p.center = Vec3{0.1, -0.2, 0.3};
  p.radius = 0.4;
  p.peak_density = 12.5;
  p.albedo = RGB{0.9, 0.3, 0.2};
  s.primitives.push_back(p);
  s.background = RGB{0, 0, 0};
  double sigma;
  RGB c;
  scene_field(s, p.center, &sigma, &c);
  EXPECT_NEAR(sigma, 12.5, 1e-12);
  EXPECT_NEAR(c.r, 0.9, 1e-12);
  EXPECT_NEAR(c.g, 0.3, 1e-12);
  EXPECT_NEAR(c.b, 0.2, 1e-12);
}

TEST(SceneTest, FieldAtOneRadiusFollowsGaussian) {
  // With std dev radius/2, the density one radius out is peak * exp(-2).
  AnalyticScene s;
  Primitive p;
  p.center = Vec3{0, 0, 0};
  p.radius = 0.3;
  p.peak_density = 10.0;
  s.primitives.push_back(p);
  double sigma;
  RGB c;
  scene_field(s, Vec3{0.3, 0, 0}, &sigma, &c);
  EXPECT_NEAR(sigma, 10.0 * 0.13533528323661270, 1e-12);
}

TEST(SceneTest, OrbitFourViewsAreEquallySpaced) {
  AnalyticScene s = make_scene(2, 3);
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kOrbit360;
  spec.view_count = 4;
  std::vector<CameraPose> poses = generate_trajectory(spec, s, 64, 64);
  ASSERT_EQ(poses.size(), 4u);
  Vec3 center = s.centroid();
  double d0 = norm(poses[0].position - center);
  for (const auto& p : poses)
    EXPECT_NEAR(norm(p.position - center), d0, 1e-12);
  for (int k = 0; k < 4; k++) {
    Vec3 a = poses[k].position - center;
    Vec3 b = poses[(k + 1) % 4].position - center;
    double gap = std::atan2(b.y, b.x) - std::atan2(a.y, a.x);
    while (gap < 0) gap += 2 * M_PI;
    EXPECT_NEAR(gap, M_PI / 2, 1e-9);
  }
}

TEST(SceneTest, OrbitFortyViewsHaveNineDegreeGaps) {
  AnalyticScene s = make_scene(2, 3);
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kOrbit360;
  spec.view_count = 40;
  std::vector<CameraPose> poses = generate_trajectory(spec, s, 64, 64);
  Vec3 center = s.centroid();
  for (int k = 0; k < 40; k++) {
    // Compare azimuths in the horizontal plane.
    Vec3 a = poses[k].position - center;
    Vec3 b = poses[(k + 1) % 40].position - center;
    double az_a = std::atan2(a.y, a.x);
    double az_b = std::atan2(b.y, b.x);
    double gap = az_b - az_a;
    while (gap < 0) gap += 2 * M_PI;
    EXPECT_NEAR(gap, 2 * M_PI / 40, 1e-6);
  }
}

TEST(SceneTest, FrontFacingViewsShareForwardAxis) {
  AnalyticScene s = make_scene(5, 2);
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kFrontFacing;
  spec.view_count = 9;
  std::vector<CameraPose> poses = generate_trajectory(spec, s, 64, 64);
  ASSERT_EQ(poses.size(), 9u);
  Vec3 fwd = poses[0].forward();
  for (const auto& p : poses) {
    EXPECT_NEAR(p.forward().x, fwd.x, 1e-9);
    EXPECT_NEAR(p.forward().y, fwd.y, 1e-9);
    EXPECT_NEAR(p.forward().z, fwd.z, 1e-9);
  }
}

TEST(SceneTest, AllTrajectoryPosesAreOrthonormal) {
  AnalyticScene s = make_scene(11, 4);
  for (TrajectoryKind kind :
       {TrajectoryKind::kOrbit360, TrajectoryKind::kFrontFacing,
        TrajectoryKind::kTestPath}) {
    TrajectorySpec spec;
    spec.kind = kind;
    spec.view_count = 12;
    for (const auto& p : generate_trajectory(spec, s, 64, 64))
      EXPECT_LE(orthonormality_error(p.orientation), 1e-9);
  }
}

TEST(SceneTest, TestPathInterleavesTrainingOrbit) {
  AnalyticScene s = make_scene(2, 3);
  TrajectorySpec train_spec;
  train_spec.view_count = 8;
  TrajectorySpec test_spec = train_spec;
  test_spec.kind = TrajectoryKind::kTestPath;
  auto train_poses = generate_trajectory(train_spec, s, 64, 64);
  auto test_poses = generate_trajectory(test_spec, s, 64, 64);
  for (const auto& tp : test_poses) {
    for (const auto& rp : train_poses)
      EXPECT_GT(norm(tp.position - rp.position), 1e-6);
  }
}

TEST(SceneTest, EmptySceneRendersBackground) {
  AnalyticScene s;
  s.background = RGB{0.2, 0.4, 0.6};
  CameraPose pose;
  pose.position = Vec3{0, -3, 0};
  pose.orientation = look_at(pose.position, Vec3{0, 0, 0}, Vec3{0, 0, 1});
  pose.focal = 20;
  pose.cx = 8;
  pose.cy = 8;
  RenderConfig cfg;
  cfg.background = s.background;
  Image img = render_ground_truth(s, pose, 16, 16, cfg);
  for (int y = 0; y < 16; y++) {
    for (int x = 0; x < 16; x++) {
      EXPECT_NEAR(img.at(x, y, 0), 0.2, 1e-12);
      EXPECT_NEAR(img.at(x, y, 1), 0.4, 1e-12);
      EXPECT_NEAR(img.at(x, y, 2), 0.6, 1e-12);
    }
  }
}

TEST(SceneTest, OpaquePrimitiveDominatesCenterPixel) {
  AnalyticScene s;
  Primitive p;
  p.center = Vec3{0, 0, 0};
  p.radius = 0.5;
  p.peak_density = 40.0;  // line integral ~25, essentially opaque
  p.albedo = RGB{0.8, 0.1, 0.3};
  s.primitives.push_back(p);
  s.background = RGB{0, 0, 0};
  CameraPose pose;
  pose.position = Vec3{0, -2.5, 0};
  pose.orientation = look_at(pose.position, Vec3{0, 0, 0}, Vec3{0, 0, 1});
  pose.focal = 40;
  pose.cx = 16;
  pose.cy = 16;
  RenderConfig cfg;
  Image img = render_ground_truth(s, pose, 32, 32, cfg);
  // Pixel (15, 15) has center (15.5, 15.5); the ray through (16, 16) is the
  // optical axis, half a pixel away. Sample just off axis points at the blob.
  EXPECT_NEAR(img.at(15, 15, 0), 0.8, 0.02);
  EXPECT_NEAR(img.at(15, 15, 1), 0.1, 0.02);
  EXPECT_NEAR(img.at(15, 15, 2), 0.3, 0.02);
}

TEST(SceneTest, RenderIsDeterministic) {
  AnalyticScene s = make_scene(4, 3);
  TrajectorySpec spec;
  spec.view_count = 2;
  auto poses = generate_trajectory(spec, s, 16, 16);
  RenderConfig cfg;
  cfg.background = s.background;
  Image a = render_ground_truth(s, poses[0], 16, 16, cfg);
  Image b = render_ground_truth(s, poses[0], 16, 16, cfg);
  EXPECT_EQ(a.data, b.data);
}

TEST(SceneTest, CaptureMatchesIndividualRenders) {
  AnalyticScene s = make_scene(4, 2);
  TrajectorySpec spec;
  spec.view_count = 3;
  auto poses = generate_trajectory(spec, s, 16, 16);
  RenderConfig cfg;
  cfg.background = s.background;
  CapturedDataset d = capture_dataset(s, poses, 16, 16, cfg);
  ASSERT_EQ(d.images.size(), 3u);
  ASSERT_EQ(d.poses.size(), 3u);
  for (size_t i = 0; i < poses.size(); i++) {
    Image ref = render_ground_truth(s, poses[i], 16, 16, cfg);
    EXPECT_EQ(d.images[i].data, ref.data);
  }
}

TEST(SceneTest, DatasetRoundTripsThroughDisk) {
  AnalyticScene s = make_scene(9, 2);
  TrajectorySpec spec;
  spec.view_count = 2;
  auto poses = generate_trajectory(spec, s, 16, 16);
  RenderConfig cfg;
  cfg.background = s.background;
  CapturedDataset d = capture_dataset(s, poses, 16, 16, cfg);

  std::string dir = ::testing::TempDir() + "/nerfstream_dataset";
  save_dataset(dir, d);
  CapturedDataset loaded = load_dataset(dir);
  ASSERT_EQ(loaded.images.size(), d.images.size());
  EXPECT_EQ(loaded.width, 16);
  EXPECT_EQ(loaded.height, 16);

  // Pixels pass through 32-bit floats on disk.
  for (size_t i = 0; i < d.images.size(); i++) {
    for (size_t k = 0; k < d.images[i].data.size(); k++) {
      EXPECT_EQ(loaded.images[i].data[k],
                double(float(d.images[i].data[k])));
    }
  }
  for (size_t i = 0; i < d.poses.size(); i++) {
    EXPECT_EQ(loaded.poses[i].position.x, d.poses[i].position.x);
    EXPECT_EQ(loaded.poses[i].focal, d.poses[i].focal);
    EXPECT_EQ(loaded.poses[i].orientation.m, d.poses[i].orientation.m);
  }
  std::filesystem::remove_all(dir);
}

TEST(SceneTest, TruncatedImageFileIsRejected) {
  Image img(16, 16);
  ByteBuffer b = serialize_image(img);
  b.resize(b.size() - 3);
  EXPECT_THROW(deserialize_image(b), DecodeError);
  ByteBuffer bad = serialize_image(img);
  bad[0] = 'X';
  EXPECT_THROW(deserialize_image(bad), DecodeError);
}

TEST(SceneTest, PosesFileSizeMustMatchRecordSize) {
  AnalyticScene s = make_scene(2, 1);
  TrajectorySpec spec;
  spec.view_count = 2;
  auto poses = generate_trajectory(spec, s, 16, 16);
  ByteBuffer b = serialize_poses(poses);
  EXPECT_EQ(deserialize_poses(b).size(), 2u);
  b.pop_back();
  EXPECT_THROW(deserialize_poses(b), DecodeError);
}

}  // namespace
}  // namespace nerfstream

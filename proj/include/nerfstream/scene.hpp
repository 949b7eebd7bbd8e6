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
#include <filesystem>
#include <string>
#include <vector>

#include "nerfstream/common.hpp"
#include "nerfstream/field.hpp"
#include "nerfstream/rng.hpp"

namespace nerfstream {

// ---------------------------------------------------------------------------
// Analytic scenes
// ---------------------------------------------------------------------------
//
// A scene is a sum of isotropic Gaussian density blobs inside a fixed box.
// The analytic field is the oracle the networks must learn, and the source
// of pristine reference renders.

struct Primitive {
  Vec3 center;
  double radius = 0.5;        // blob extent; Gaussian std dev is radius/2
  double peak_density = 10;   // density at the center
  RGB albedo{0.5, 0.5, 0.5};
};

struct Box {
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
};

struct AnalyticScene {
  std::vector<Primitive> primitives;
  RGB background;
  Box bounds;

  Vec3 centroid() const {
    Vec3 c;
    for (const auto& p : primitives) c += p.center;
    return c / double(primitives.size());
  }
};

inline AnalyticScene make_scene(uint64_t seed, int primitive_count) {
  Pcg32 rng = keyed_rng(seed, kStreamScene);
  AnalyticScene s;
  s.background =
      RGB{rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.25),
          rng.uniform(0.05, 0.25)};
  for (int i = 0; i < primitive_count; i++) {
    Primitive p;
    p.center = Vec3{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                    rng.uniform(-0.6, 0.6)};
    p.radius = rng.uniform(0.25, 0.5);
    p.peak_density = rng.uniform(8.0, 24.0);
    p.albedo =
        RGB{rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95),
            rng.uniform(0.15, 0.95)};
    s.primitives.push_back(p);
  }
  return s;
}

// Density and color at a point. Each blob contributes
//   peak_density * exp(-|x - center|^2 / (2 * (radius/2)^2));
// color is the density-weighted average of the contributing albedos, and
// the background color where total density vanishes (< 1e-8).
inline void scene_field(const AnalyticScene& scene, const Vec3& x,
                        double* sigma, RGB* c) {
  double total = 0;
  RGB mix{0, 0, 0};
  for (const auto& p : scene.primitives) {
    Vec3 d = x - p.center;
    double h = p.radius * 0.5;
    double w = p.peak_density * std::exp(-dot(d, d) / (2.0 * h * h));
    total += w;
    mix.r += w * p.albedo.r;
    mix.g += w * p.albedo.g;
    mix.b += w * p.albedo.b;
  }
  *sigma = total;
  if (total < 1e-8) {
    *c = scene.background;
  } else {
    *c = RGB{mix.r / total, mix.g / total, mix.b / total};
  }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

enum class TrajectoryKind { kOrbit360, kFrontFacing, kTestPath };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kOrbit360;
  int view_count = 40;
  double radius = 2.6;     // orbit radius / front-facing standoff distance
  double extent = 1.2;     // front-facing grid width
  double elevation = 0.4;  // orbit elevation angle, radians
  double focal = 80;       // pixels
};

inline TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "orbit360") return TrajectoryKind::kOrbit360;
  if (s == "front_facing") return TrajectoryKind::kFrontFacing;
  if (s == "test_path") return TrajectoryKind::kTestPath;
  throw UsageError("unknown trajectory kind: " + s);
}

// orbit360: equally spaced azimuths on a circle around the scene centroid,
// all cameras looking at the centroid. test_path: the same circle with
// azimuths offset by half a step, so test views interleave the training
// ring without coinciding. front_facing: a planar grid of positions with
// all forward axes parallel (+y), facing the scene from one side.
inline std::vector<CameraPose> generate_trajectory(const TrajectorySpec& spec,
                                                   const AnalyticScene& scene,
                                                   int w, int h) {
  if (spec.view_count < 2) throw ConfigError("view_count must be >= 2");
  std::vector<CameraPose> poses;
  Vec3 center = scene.centroid();
  Vec3 up{0, 0, 1};
  double two_pi = 6.283185307179586;

  auto intrinsics = [&](CameraPose* p) {
    p->focal = spec.focal;
    p->cx = w / 2.0;
    p->cy = h / 2.0;
  };

  switch (spec.kind) {
    case TrajectoryKind::kOrbit360:
    case TrajectoryKind::kTestPath: {
      double offset = spec.kind == TrajectoryKind::kTestPath ? 0.5 : 0.0;
      for (int k = 0; k < spec.view_count; k++) {
        double az = two_pi * (k + offset) / spec.view_count;
        Vec3 pos = center + Vec3{std::cos(az) * std::cos(spec.elevation),
                                 std::sin(az) * std::cos(spec.elevation),
                                 std::sin(spec.elevation)} *
                                spec.radius;
        CameraPose p;
        p.position = pos;
        p.orientation = look_at(pos, center, up);
        intrinsics(&p);
        poses.push_back(p);
      }
      break;
    }
    case TrajectoryKind::kFrontFacing: {
      int grid = static_cast<int>(std::ceil(std::sqrt(double(spec.view_count))));
      double step = grid > 1 ? spec.extent / (grid - 1) : 0.0;
      Mat3 orient = look_at(Vec3{0, -1, 0}, Vec3{0, 0, 0}, up);
      for (int k = 0; k < spec.view_count; k++) {
        int gx = k % grid;
        int gz = k / grid;
        CameraPose p;
        p.position = center + Vec3{-spec.extent / 2 + step * gx, -spec.radius,
                                   -spec.extent / 2 + step * gz};
        p.orientation = orient;
        intrinsics(&p);
        poses.push_back(p);
      }
      break;
    }
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Ground-truth rendering
// ---------------------------------------------------------------------------

// Reference renders integrate the analytic field densely: fixed midpoint
// samples at kGtOversample times the model's merged sample count.
constexpr int kGtOversample = 8;

inline RGB render_ground_truth_pixel(const AnalyticScene& scene,
                                     const Ray& ray,
                                     const RenderConfig& cfg) {
  int n = (cfg.n_coarse + cfg.n_fine) * kGtOversample;
  double span = (cfg.t_far - cfg.t_near) / n;
  std::vector<RadianceSample> samples(n);
  for (int i = 0; i < n; i++) {
    double t = cfg.t_near + span * (i + 0.5);
    Vec3 p = ray.origin + ray.direction * t;
    samples[i].delta = span;
    scene_field(scene, p, &samples[i].sigma, &samples[i].c);
  }
  return volume_render(samples, scene.background);
}

inline Image render_ground_truth(const AnalyticScene& scene,
                                 const CameraPose& pose, int w, int h,
                                 const RenderConfig& cfg) {
  if (w < 8 || h < 8) throw ConfigError("image too small");
  Image img(w, h);
  for (int y = 0; y < h; y++) {
    for (int x = 0; x < w; x++) {
      RGB px = render_ground_truth_pixel(scene, trace_ray(pose, x, y, w, h),
                                         cfg);
      img.set(x, y, RGB{clamp01(px.r), clamp01(px.g), clamp01(px.b)});
    }
  }
  return img;
}

struct CapturedDataset {
  std::vector<Image> images;
  std::vector<CameraPose> poses;
  int width = 0, height = 0;
};

inline CapturedDataset capture_dataset(const AnalyticScene& scene,
                                       const std::vector<CameraPose>& poses,
                                       int w, int h, const RenderConfig& cfg) {
  CapturedDataset d;
  d.width = w;
  d.height = h;
  d.poses = poses;
  d.images.reserve(poses.size());
  for (const auto& p : poses)
    d.images.push_back(render_ground_truth(scene, p, w, h, cfg));
  return d;
}

// ---------------------------------------------------------------------------
// Dataset IO
// ---------------------------------------------------------------------------
//
// Image file: magic "NSB1", width and height as 32-bit little-endian
// integers, then row-major 32-bit little-endian floats (3 per pixel).
// Poses file: per pose, 15 little-endian 64-bit floats: position (3),
// row-major rotation (9), focal, cx, cy. Pose count is implied by size.

inline ByteBuffer serialize_image(const Image& img) {
  ByteBuffer b;
  b.insert(b.end(), {'N', 'S', 'B', '1'});
  put_u32le(b, static_cast<uint32_t>(img.width));
  put_u32le(b, static_cast<uint32_t>(img.height));
  for (double v : img.data) put_f32le(b, static_cast<float>(v));
  return b;
}

inline Image deserialize_image(const ByteBuffer& bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "NSB1") throw DecodeError("bad image magic", 0);
  uint32_t w = r.u32le();
  uint32_t h = r.u32le();
  if (w == 0 || h == 0 || w > 16384 || h > 16384)
    throw DecodeError("implausible image size", r.pos());
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : img.data) v = r.f32le();
  if (r.remaining() != 0) throw DecodeError("trailing bytes", r.pos());
  return img;
}

inline ByteBuffer serialize_poses(const std::vector<CameraPose>& poses) {
  ByteBuffer b;
  for (const auto& p : poses) {
    put_f64le(b, p.position.x);
    put_f64le(b, p.position.y);
    put_f64le(b, p.position.z);
    for (double v : p.orientation.m) put_f64le(b, v);
    put_f64le(b, p.focal);
    put_f64le(b, p.cx);
    put_f64le(b, p.cy);
  }
  return b;
}

inline std::vector<CameraPose> deserialize_poses(const ByteBuffer& bytes) {
  constexpr size_t kPoseBytes = 15 * 8;
  if (bytes.size() % kPoseBytes != 0)
    throw DecodeError("poses file size not a multiple of one pose record",
                      bytes.size());
  ByteReader r(bytes);
  std::vector<CameraPose> poses(bytes.size() / kPoseBytes);
  for (auto& p : poses) {
    p.position = Vec3{r.f64le(), r.f64le(), r.f64le()};
    for (double& v : p.orientation.m) v = r.f64le();
    p.focal = r.f64le();
    p.cx = r.f64le();
    p.cy = r.f64le();
    if (orthonormality_error(p.orientation) > 1e-9)
      throw DecodeError("pose rotation not orthonormal", r.pos());
  }
  return poses;
}

inline std::string image_filename(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "im_%04zu.nsb", index);
  return buf;
}

inline void save_dataset(const std::string& dir, const CapturedDataset& d) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < d.images.size(); i++)
    write_file(dir + "/" + image_filename(i), serialize_image(d.images[i]));
  write_file(dir + "/poses.bin", serialize_poses(d.poses));
}

inline CapturedDataset load_dataset(const std::string& dir) {
  CapturedDataset d;
  d.poses = deserialize_poses(read_file(dir + "/poses.bin"));
  for (size_t i = 0; i < d.poses.size(); i++) {
    d.images.push_back(deserialize_image(read_file(dir + "/" +
                                                   image_filename(i))));
    if (i > 0 && (d.images[i].width != d.images[0].width ||
                  d.images[i].height != d.images[0].height))
      throw DecodeError("dataset images disagree on size", 0);
  }
  if (d.images.empty()) throw UsageError("dataset is empty: " + dir);
  d.width = d.images[0].width;
  d.height = d.images[0].height;
  return d;
}

}  // namespace nerfstream

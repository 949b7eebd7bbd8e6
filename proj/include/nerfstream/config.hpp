// Copyright 2026 The nerfstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration: a plain-text key-value file selecting the scene,
// the camera trajectories, the training setup, and the strategy sweep.
//
// Format: one `key = value` pair per line; blank lines and lines starting
// with `#` are ignored. Every key has a default, listed in the key table
// below; unknown keys are rejected so typos fail loudly. QP ladders are
// comma-separated integer lists.

#ifndef NERFSTREAM_CONFIG_HPP_
#define NERFSTREAM_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nerfstream/common.hpp"
#include "nerfstream/field.hpp"
#include "nerfstream/image_codec.hpp"
#include "nerfstream/param_codec.hpp"
#include "nerfstream/scene.hpp"
#include "nerfstream/train.hpp"

namespace nerfstream {

enum class Strategy { kAnchor = 0, kParamBased = 1, kPixelBased = 2 };

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "anchor") return Strategy::kAnchor;
  if (s == "param_based") return Strategy::kParamBased;
  if (s == "pixel_based") return Strategy::kPixelBased;
  throw UsageError("unknown strategy: " + s);
}

inline std::string strategy_to_string(Strategy s) {
  switch (s) {
    case Strategy::kAnchor: return "anchor";
    case Strategy::kParamBased: return "param_based";
    case Strategy::kPixelBased: return "pixel_based";
  }
  throw UsageError("bad strategy value");
}

inline CodingMode coding_mode_from_string(const std::string& s) {
  if (s == "intra") return CodingMode::kIntra;
  if (s == "inter") return CodingMode::kInter;
  throw UsageError("unknown codec mode: " + s);
}

inline std::string coding_mode_to_string(CodingMode m) {
  return m == CodingMode::kIntra ? "intra" : "inter";
}

inline QuantizerKind quantizer_from_string(const std::string& s) {
  if (s == "uniform") return QuantizerKind::kUniform;
  if (s == "dependent") return QuantizerKind::kDependent;
  throw UsageError("unknown quantizer: " + s);
}

inline std::string quantizer_to_string(QuantizerKind k) {
  return k == QuantizerKind::kUniform ? "uniform" : "dependent";
}

inline std::string trajectory_kind_to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::kOrbit360: return "orbit360";
    case TrajectoryKind::kFrontFacing: return "front_facing";
    case TrajectoryKind::kTestPath: return "test_path";
  }
  throw UsageError("bad trajectory kind value");
}

// Sweep selection for run_experiment: which compressed strategies to run.
struct SweepSelection {
  bool param = true;
  bool pixel_intra = true;
  bool pixel_inter = true;
};

struct ExperimentConfig {
  uint64_t scene_seed = 7;
  int scene_primitives = 2;
  int width = 64;
  int height = 64;

  TrajectorySpec train_trajectory;
  TrajectorySpec test_trajectory;

  RenderConfig render;
  TrainConfig train;

  // Strategy selected for the single-strategy entry points.
  Strategy strategy = Strategy::kParamBased;
  CodingMode codec_mode = CodingMode::kInter;
  QuantizerKind param_quantizer = QuantizerKind::kDependent;

  std::vector<int> param_qp_ladder{-28, -24, -20, -16};
  std::vector<int> pixel_intra_qp_ladder{25, 30, 39, 51};
  std::vector<int> pixel_inter_qp_ladder{18, 25, 30, 51};

  SweepSelection sweep;

  ExperimentConfig() {
    train_trajectory.kind = TrajectoryKind::kOrbit360;
    train_trajectory.view_count = 40;
    test_trajectory.kind = TrajectoryKind::kTestPath;
    test_trajectory.view_count = 10;
  }

  void validate() const {
    if (width < 8 || height < 8)
      throw ConfigError("image dimensions must be at least 8x8");
    if (scene_primitives < 1)
      throw ConfigError("scene needs at least one primitive");
    if (train_trajectory.view_count < 2 || test_trajectory.view_count < 2)
      throw ConfigError("trajectories need at least two views");
    if (render.n_coarse < 2 || render.n_fine < 1)
      throw ConfigError("sample counts too small");
    if (!(render.t_far > render.t_near) || render.t_near <= 0)
      throw ConfigError("bad ray interval");
    train.validate();
    check_ladder(param_qp_ladder, "strategy.param_qp_ladder");
    check_ladder(pixel_intra_qp_ladder, "strategy.pixel_intra_qp_ladder");
    check_ladder(pixel_inter_qp_ladder, "strategy.pixel_inter_qp_ladder");
  }

 private:
  static void check_ladder(const std::vector<int>& ladder,
                           const std::string& name) {
    if (ladder.empty()) throw ConfigError(name + " must not be empty");
    for (size_t i = 1; i < ladder.size(); i++)
      if (ladder[i] <= ladder[i - 1])
        throw ConfigError(name + " must be strictly increasing");
  }
};

// Raw key-value view of a config file, before typing.
using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline int64_t parse_int(const std::string& key, const std::string& value,
                         int64_t lo, int64_t hi) {
  size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": not an integer: " + value);
  }
  if (used != value.size())
    throw UsageError("config key " + key + ": not an integer: " + value);
  if (v < lo || v > hi)
    throw UsageError("config key " + key + ": value " + value +
                     " out of range");
  return v;
}

inline double parse_real(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": not a number: " + value);
  }
  if (used != value.size())
    throw UsageError("config key " + key + ": not a number: " + value);
  return v;
}

inline std::vector<int> parse_ladder(const std::string& key,
                                     const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw UsageError("config key " + key + ": empty ladder entry");
    out.push_back(static_cast<int>(parse_int(key, item, -64, 64)));
  }
  return out;
}

inline std::string render_ladder(const std::vector<int>& ladder) {
  std::string out;
  for (size_t i = 0; i < ladder.size(); i++) {
    if (i) out += ",";
    out += std::to_string(ladder[i]);
  }
  return out;
}

inline SweepSelection parse_sweep(const std::string& key,
                                  const std::string& value) {
  SweepSelection s{false, false, false};
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item == "param")
      s.param = true;
    else if (item == "pixel_intra")
      s.pixel_intra = true;
    else if (item == "pixel_inter")
      s.pixel_inter = true;
    else
      throw UsageError("config key " + key + ": unknown sweep entry: " + item);
  }
  return s;
}

inline std::string render_sweep(const SweepSelection& s) {
  std::vector<std::string> parts;
  if (s.param) parts.push_back("param");
  if (s.pixel_intra) parts.push_back("pixel_intra");
  if (s.pixel_inter) parts.push_back("pixel_inter");
  std::string out;
  for (size_t i = 0; i < parts.size(); i++) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

inline std::string render_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Parses config text into a raw key-value map. Later occurrences of a key
// override earlier ones.
inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    line_no++;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw UsageError("config line " + std::to_string(line_no) +
                       ": empty key");
    map[key] = value;
  }
  return map;
}

inline ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Applies one `key=value` override, as given on a command line.
inline void apply_override(ConfigMap* map, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw UsageError("override must look like key=value: " + assignment);
  std::string key = detail::trim(assignment.substr(0, eq));
  std::string value = detail::trim(assignment.substr(eq + 1));
  if (key.empty()) throw UsageError("override has empty key: " + assignment);
  (*map)[key] = value;
}

// Builds a typed configuration from a raw map. Missing keys keep their
// defaults; unknown keys are an error. The result is validated.
inline ExperimentConfig make_experiment_config(const ConfigMap& map) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : map) {
    if (key == "scene.seed") {
      cfg.scene_seed = static_cast<uint64_t>(
          detail::parse_int(key, value, 0, INT64_MAX));
    } else if (key == "scene.primitives") {
      cfg.scene_primitives =
          static_cast<int>(detail::parse_int(key, value, 1, 64));
    } else if (key == "scene.width") {
      cfg.width = static_cast<int>(detail::parse_int(key, value, 8, 16384));
    } else if (key == "scene.height") {
      cfg.height = static_cast<int>(detail::parse_int(key, value, 8, 16384));
    } else if (key == "trajectory.train_kind") {
      cfg.train_trajectory.kind = trajectory_kind_from_string(value);
    } else if (key == "trajectory.train_views") {
      cfg.train_trajectory.view_count =
          static_cast<int>(detail::parse_int(key, value, 2, 100000));
    } else if (key == "trajectory.test_kind") {
      cfg.test_trajectory.kind = trajectory_kind_from_string(value);
    } else if (key == "trajectory.test_views") {
      cfg.test_trajectory.view_count =
          static_cast<int>(detail::parse_int(key, value, 2, 100000));
    } else if (key == "trajectory.radius") {
      cfg.train_trajectory.radius = detail::parse_real(key, value);
      cfg.test_trajectory.radius = cfg.train_trajectory.radius;
    } else if (key == "trajectory.extent") {
      cfg.train_trajectory.extent = detail::parse_real(key, value);
      cfg.test_trajectory.extent = cfg.train_trajectory.extent;
    } else if (key == "trajectory.elevation") {
      cfg.train_trajectory.elevation = detail::parse_real(key, value);
      cfg.test_trajectory.elevation = cfg.train_trajectory.elevation;
    } else if (key == "trajectory.focal") {
      cfg.train_trajectory.focal = detail::parse_real(key, value);
      cfg.test_trajectory.focal = cfg.train_trajectory.focal;
    } else if (key == "render.n_coarse") {
      cfg.render.n_coarse =
          static_cast<int>(detail::parse_int(key, value, 2, 4096));
    } else if (key == "render.n_fine") {
      cfg.render.n_fine =
          static_cast<int>(detail::parse_int(key, value, 1, 4096));
    } else if (key == "render.t_near") {
      cfg.render.t_near = detail::parse_real(key, value);
    } else if (key == "render.t_far") {
      cfg.render.t_far = detail::parse_real(key, value);
    } else if (key == "train.iterations") {
      cfg.train.iterations =
          static_cast<int>(detail::parse_int(key, value, 0, 100000000));
    } else if (key == "train.batch_rays") {
      cfg.train.batch_rays =
          static_cast<int>(detail::parse_int(key, value, 1, 1 << 20));
    } else if (key == "train.learning_rate") {
      cfg.train.learning_rate = detail::parse_real(key, value);
    } else if (key == "train.final_learning_rate") {
      cfg.train.final_learning_rate = detail::parse_real(key, value);
    } else if (key == "train.seed") {
      cfg.train.seed = static_cast<uint64_t>(
          detail::parse_int(key, value, 0, INT64_MAX));
    } else if (key == "strategy.active") {
      cfg.strategy = strategy_from_string(value);
    } else if (key == "strategy.codec_mode") {
      cfg.codec_mode = coding_mode_from_string(value);
    } else if (key == "strategy.param_quantizer") {
      cfg.param_quantizer = quantizer_from_string(value);
    } else if (key == "strategy.param_qp_ladder") {
      cfg.param_qp_ladder = detail::parse_ladder(key, value);
    } else if (key == "strategy.pixel_intra_qp_ladder") {
      cfg.pixel_intra_qp_ladder = detail::parse_ladder(key, value);
    } else if (key == "strategy.pixel_inter_qp_ladder") {
      cfg.pixel_inter_qp_ladder = detail::parse_ladder(key, value);
    } else if (key == "strategy.sweep") {
      cfg.sweep = detail::parse_sweep(key, value);
    } else {
      throw UsageError("unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

// Canonical text form listing every key. parse + make round-trips exactly.
inline std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "scene.seed = " << cfg.scene_seed << "\n";
  out << "scene.primitives = " << cfg.scene_primitives << "\n";
  out << "scene.width = " << cfg.width << "\n";
  out << "scene.height = " << cfg.height << "\n";
  out << "trajectory.train_kind = "
      << trajectory_kind_to_string(cfg.train_trajectory.kind) << "\n";
  out << "trajectory.train_views = " << cfg.train_trajectory.view_count
      << "\n";
  out << "trajectory.test_kind = "
      << trajectory_kind_to_string(cfg.test_trajectory.kind) << "\n";
  out << "trajectory.test_views = " << cfg.test_trajectory.view_count << "\n";
  out << "trajectory.radius = " << detail::render_real(
      cfg.train_trajectory.radius) << "\n";
  out << "trajectory.extent = " << detail::render_real(
      cfg.train_trajectory.extent) << "\n";
  out << "trajectory.elevation = " << detail::render_real(
      cfg.train_trajectory.elevation) << "\n";
  out << "trajectory.focal = " << detail::render_real(
      cfg.train_trajectory.focal) << "\n";
  out << "render.n_coarse = " << cfg.render.n_coarse << "\n";
  out << "render.n_fine = " << cfg.render.n_fine << "\n";
  out << "render.t_near = " << detail::render_real(cfg.render.t_near) << "\n";
  out << "render.t_far = " << detail::render_real(cfg.render.t_far) << "\n";
  out << "train.iterations = " << cfg.train.iterations << "\n";
  out << "train.batch_rays = " << cfg.train.batch_rays << "\n";
  out << "train.learning_rate = "
      << detail::render_real(cfg.train.learning_rate) << "\n";
  out << "train.final_learning_rate = "
      << detail::render_real(cfg.train.final_learning_rate) << "\n";
  out << "train.seed = " << cfg.train.seed << "\n";
  out << "strategy.active = " << strategy_to_string(cfg.strategy) << "\n";
  out << "strategy.codec_mode = " << coding_mode_to_string(cfg.codec_mode)
      << "\n";
  out << "strategy.param_quantizer = "
      << quantizer_to_string(cfg.param_quantizer) << "\n";
  out << "strategy.param_qp_ladder = "
      << detail::render_ladder(cfg.param_qp_ladder) << "\n";
  out << "strategy.pixel_intra_qp_ladder = "
      << detail::render_ladder(cfg.pixel_intra_qp_ladder) << "\n";
  out << "strategy.pixel_inter_qp_ladder = "
      << detail::render_ladder(cfg.pixel_inter_qp_ladder) << "\n";
  out << "strategy.sweep = " << detail::render_sweep(cfg.sweep) << "\n";
  return out.str();
}

}  // namespace nerfstream

#endif  // NERFSTREAM_CONFIG_HPP_

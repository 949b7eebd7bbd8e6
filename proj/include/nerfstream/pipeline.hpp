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

// End-to-end experiment orchestration. Runs the two streaming strategies and
// the uncompressed anchor against one shared scene and reports, per (strategy,
// qp) point, the downlink bit count and the distortion of rendered test views
// against analytic ground truth.
//
// Strategy shapes:
//   param_based   capture -> train on pristine images -> encode parameters at
//                 qp -> decode -> render test views with decoded parameters.
//                 B counts only the parameter bitstream: the uplink of
//                 training images to the trainer is not part of the
//                 client-bound payload.
//   pixel_intra / pixel_inter
//                 capture -> encode the training images at qp -> decode ->
//                 train on the decoded images (original poses) -> render test
//                 views with the trained, uncompressed parameters. B counts
//                 the full image bitstream, pose metadata included.
//   anchor        capture -> train on pristine images -> render. B is the raw
//                 serialized checkpoint size, flagged non-streamable; it is
//                 the quality reference for both strategies.
//
// Every point shares the scene, the trajectories, and the training seed, so
// differences between curves isolate codec effects. Points are pure functions
// of (config, qp) and may run in any order or in parallel.

#ifndef NERFSTREAM_PIPELINE_HPP_
#define NERFSTREAM_PIPELINE_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nerfstream/config.hpp"
#include "nerfstream/eval.hpp"
#include "nerfstream/field.hpp"
#include "nerfstream/image_codec.hpp"
#include "nerfstream/param_codec.hpp"
#include "nerfstream/scene.hpp"
#include "nerfstream/train.hpp"

namespace nerfstream {

using LogFn = std::function<void(const std::string&)>;

// One experiment point: a strategy evaluated at one qp (or the anchor).
struct StrategyResult {
  std::string strategy;  // "anchor", "param_based", "pixel_intra",
                         // "pixel_inter"
  int qp = 0;
  uint64_t total_bits = 0;
  bool streamable = true;
  std::string error;  // nonempty: this point failed and carries no data

  int width = 0, height = 0;
  std::vector<Image> rendered;        // one per test view
  std::vector<double> view_psnr_db;   // vs analytic ground truth
  double mean_psnr_db = 0;

  double train_seconds = 0;
  double codec_seconds = 0;
  double render_seconds = 0;

  ByteBuffer bitstream;             // the payload B measures
  std::vector<Image> train_inputs;  // images the trainer consumed (pixel only)
  RadianceFieldModel model;         // parameters used for rendering
};

// Shared per-experiment state: scene, captured training set, test poses, and
// analytic ground-truth renders of the test poses (the distortion reference).
struct ExperimentContext {
  AnalyticScene scene;
  CapturedDataset dataset;
  std::vector<CameraPose> test_poses;
  std::vector<Image> test_gt;
};

inline ExperimentContext prepare_context(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentContext ctx;
  ctx.scene = make_scene(cfg.scene_seed, cfg.scene_primitives);
  std::vector<CameraPose> train_poses = generate_trajectory(
      cfg.train_trajectory, ctx.scene, cfg.width, cfg.height);
  ctx.test_poses = generate_trajectory(cfg.test_trajectory, ctx.scene,
                                       cfg.width, cfg.height);
  ctx.dataset =
      capture_dataset(ctx.scene, train_poses, cfg.width, cfg.height,
                      cfg.render);
  ctx.test_gt.reserve(ctx.test_poses.size());
  for (const auto& pose : ctx.test_poses)
    ctx.test_gt.push_back(render_ground_truth(ctx.scene, pose, cfg.width,
                                              cfg.height, cfg.render));
  return ctx;
}

namespace detail {

inline double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

inline RadianceFieldModel train_field(const ExperimentConfig& cfg,
                                      const CapturedDataset& data,
                                      const LogFn& log,
                                      const std::string& label,
                                      double* seconds) {
  auto t0 = std::chrono::steady_clock::now();
  RadianceFieldModel init =
      make_model(EncodingConfig{}, cfg.render, cfg.train.seed);
  ProgressFn progress;
  if (log) {
    int every = std::max(1, cfg.train.iterations / 5);
    progress = [&log, &label, every](int it, double loss) {
      if ((it + 1) % every == 0) {
        std::ostringstream os;
        os << label << ": iteration " << (it + 1) << ", loss " << loss;
        log(os.str());
      }
    };
  }
  RadianceFieldModel model = train(init, data, cfg.train, progress);
  if (seconds) *seconds = seconds_since(t0);
  return model;
}

inline void score_renders(const ExperimentConfig& cfg,
                          const ExperimentContext& ctx,
                          const RadianceFieldModel& model,
                          StrategyResult* out) {
  auto t0 = std::chrono::steady_clock::now();
  out->rendered.clear();
  out->view_psnr_db.clear();
  out->rendered.reserve(ctx.test_poses.size());
  for (size_t i = 0; i < ctx.test_poses.size(); i++) {
    Image view = synthesize_view(model, ctx.test_poses[i], cfg.width,
                                 cfg.height);
    out->view_psnr_db.push_back(psnr(view, ctx.test_gt[i]));
    out->rendered.push_back(std::move(view));
  }
  out->mean_psnr_db = mean_finite_psnr(out->view_psnr_db);
  out->render_seconds = seconds_since(t0);
}

}  // namespace detail

// Anchor: pristine training, no codec in the path. The bit count is the raw
// serialized checkpoint, recorded for reference only.
inline StrategyResult run_anchor(const ExperimentConfig& cfg,
                                 const ExperimentContext& ctx,
                                 const LogFn& log = nullptr) {
  StrategyResult r;
  r.strategy = "anchor";
  r.streamable = false;
  r.width = cfg.width;
  r.height = cfg.height;
  r.model = detail::train_field(cfg, ctx.dataset, log, "anchor",
                                &r.train_seconds);
  r.bitstream = serialize_model(r.model);
  r.total_bits = uint64_t(r.bitstream.size()) * 8;
  detail::score_renders(cfg, ctx, r.model, &r);
  return r;
}

inline StrategyResult run_anchor(const ExperimentConfig& cfg,
                                 const LogFn& log = nullptr) {
  ExperimentContext ctx = prepare_context(cfg);
  return run_anchor(cfg, ctx, log);
}

// Parameter-based strategy at one qp, reusing an already trained model (the
// training stage is shared with the anchor: same data, same seed). Renders
// with the decoded parameters; B is the parameter bitstream size.
inline StrategyResult run_param_strategy(const ExperimentConfig& cfg, int qp,
                                         const ExperimentContext& ctx,
                                         const RadianceFieldModel& trained,
                                         const LogFn& log = nullptr) {
  if (cfg.strategy != Strategy::kParamBased)
    throw UsageError("config does not select the parameter-based strategy");
  StrategyResult r;
  r.strategy = "param_based";
  r.qp = qp;
  r.width = cfg.width;
  r.height = cfg.height;
  auto t0 = std::chrono::steady_clock::now();
  ParamBitstream bs = encode_model(trained, qp, cfg.param_quantizer);
  r.model = decode_model(bs, trained.encoding, trained.render_cfg);
  r.codec_seconds = detail::seconds_since(t0);
  r.bitstream = std::move(bs.bytes);
  r.total_bits = bs.bit_length;
  detail::score_renders(cfg, ctx, r.model, &r);
  if (log)
    log("param_based qp=" + std::to_string(qp) + ": " +
        std::to_string(r.total_bits) + " bits, mean PSNR " +
        std::to_string(r.mean_psnr_db) + " dB");
  return r;
}

inline StrategyResult run_param_strategy(const ExperimentConfig& cfg, int qp,
                                         const LogFn& log = nullptr) {
  ExperimentContext ctx = prepare_context(cfg);
  double train_seconds = 0;
  RadianceFieldModel trained = detail::train_field(
      cfg, ctx.dataset, log, "param_based train", &train_seconds);
  StrategyResult r = run_param_strategy(cfg, qp, ctx, trained, log);
  r.train_seconds = train_seconds;
  return r;
}

// Pixel-based strategy at one qp: the training images pass through the image
// codec before training; rendering uses the trained parameters unquantized.
// B is the image bitstream size, pose metadata included.
inline StrategyResult run_pixel_strategy(const ExperimentConfig& cfg, int qp,
                                         const ExperimentContext& ctx,
                                         const LogFn& log = nullptr) {
  if (cfg.strategy != Strategy::kPixelBased)
    throw UsageError("config does not select the pixel-based strategy");
  StrategyResult r;
  r.strategy = cfg.codec_mode == CodingMode::kIntra ? "pixel_intra"
                                                    : "pixel_inter";
  r.qp = qp;
  r.width = cfg.width;
  r.height = cfg.height;
  auto t0 = std::chrono::steady_clock::now();
  ImageBitstream bs = encode_sequence(ctx.dataset.images, ctx.dataset.poses,
                                      cfg.codec_mode, qp);
  DecodedSequence dec = decode_sequence(bs.bytes);
  r.codec_seconds = detail::seconds_since(t0);
  r.bitstream = std::move(bs.bytes);
  r.total_bits = bs.bit_length;

  CapturedDataset train_data;
  train_data.images = dec.frames;
  train_data.poses = ctx.dataset.poses;
  train_data.width = cfg.width;
  train_data.height = cfg.height;
  r.train_inputs = std::move(dec.frames);
  r.model = detail::train_field(cfg, train_data, log,
                                r.strategy + " qp=" + std::to_string(qp),
                                &r.train_seconds);
  detail::score_renders(cfg, ctx, r.model, &r);
  if (log)
    log(r.strategy + " qp=" + std::to_string(qp) + ": " +
        std::to_string(r.total_bits) + " bits, mean PSNR " +
        std::to_string(r.mean_psnr_db) + " dB");
  return r;
}

inline StrategyResult run_pixel_strategy(const ExperimentConfig& cfg, int qp,
                                         const LogFn& log = nullptr) {
  ExperimentContext ctx = prepare_context(cfg);
  return run_pixel_strategy(cfg, qp, ctx, log);
}

// Builds RD curves from experiment results: one curve per compressed strategy
// with at least two successful points, each annotated with the anchor PSNR.
inline std::vector<RDCurve> curves_from_results(
    const std::vector<StrategyResult>& results) {
  const StrategyResult* anchor = nullptr;
  for (const auto& r : results)
    if (r.strategy == "anchor" && r.error.empty()) anchor = &r;
  if (!anchor) throw ConfigError("no successful anchor result");

  auto to_summary = [](const StrategyResult& r) {
    RunSummary s;
    s.strategy = r.strategy;
    s.qp = r.qp;
    s.bits = r.total_bits;
    s.image_count = r.rendered.size();
    s.width = size_t(r.width);
    s.height = size_t(r.height);
    s.view_psnr_db = r.view_psnr_db;
    return s;
  };

  std::vector<RDCurve> curves;
  for (const char* tag : {"param_based", "pixel_intra", "pixel_inter"}) {
    std::vector<RunSummary> group;
    for (const auto& r : results)
      if (r.strategy == tag && r.error.empty() && !r.rendered.empty())
        group.push_back(to_summary(r));
    if (group.size() >= 2)
      curves.push_back(build_curve(group, to_summary(*anchor)));
  }
  return curves;
}

namespace detail {

inline std::string result_dir_name(const StrategyResult& r) {
  if (r.strategy == "anchor") return "anchor";
  return r.strategy + "_qp" + std::to_string(r.qp);
}

inline std::string bitstream_filename(const StrategyResult& r) {
  if (r.strategy == "anchor") return "model.nrf";
  if (r.strategy == "param_based") return "params.nnc";
  return "images.ivs";
}

inline std::string view_filename(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%04zu.nsb", index);
  return buf;
}

inline std::string render_metrics(const StrategyResult& r) {
  std::ostringstream out;
  out << "strategy = " << r.strategy << "\n";
  out << "qp = " << r.qp << "\n";
  out << "streamable = " << (r.streamable ? 1 : 0) << "\n";
  out << "bits = " << r.total_bits << "\n";
  if (!r.rendered.empty())
    out << "rate_bpp = "
        << render_real(rate_bpp(r.total_bits, r.rendered.size(),
                                size_t(r.width), size_t(r.height)))
        << "\n";
  out << "mean_psnr_db = " << render_real(r.mean_psnr_db) << "\n";
  out << "view_psnr_db = ";
  for (size_t i = 0; i < r.view_psnr_db.size(); i++) {
    if (i) out << ",";
    out << render_real(r.view_psnr_db[i]);
  }
  out << "\n";
  out << "train_seconds = " << render_real(r.train_seconds) << "\n";
  out << "codec_seconds = " << render_real(r.codec_seconds) << "\n";
  out << "render_seconds = " << render_real(r.render_seconds) << "\n";
  if (!r.error.empty()) out << "error = " << r.error << "\n";
  return out.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write file: " + path);
  out << text;
  if (!out) throw UsageError("cannot write file: " + path);
}

}  // namespace detail

// Persists one result under dir: the bitstream, the rendered views, and a
// key-value metrics file.
inline void save_result(const StrategyResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  detail::write_text_file(dir + "/metrics.txt", detail::render_metrics(r));
  if (!r.bitstream.empty())
    write_file(dir + "/" + detail::bitstream_filename(r), r.bitstream);
  for (size_t i = 0; i < r.rendered.size(); i++)
    write_file(dir + "/" + detail::view_filename(i),
               serialize_image(r.rendered[i]));
}

// Persists a whole experiment: manifest (the resolved config), per-point
// sub-directories, the metrics CSV, and the RD plot.
inline void save_experiment(const ExperimentConfig& cfg,
                            const std::vector<StrategyResult>& results,
                            const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  detail::write_text_file(out_dir + "/manifest.cfg", render_config(cfg));
  for (const auto& r : results)
    save_result(r, out_dir + "/" + detail::result_dir_name(r));
  bool have_anchor = false;
  for (const auto& r : results)
    if (r.strategy == "anchor" && r.error.empty()) have_anchor = true;
  if (have_anchor) {
    std::vector<RDCurve> curves = curves_from_results(results);
    export_csv(curves, out_dir + "/metrics.csv");
    export_plot(curves, out_dir + "/plot.svg");
  }
}

// Runs the anchor once, then every selected strategy at every qp of its
// ladder. A failing point records its error and leaves the other points
// intact. With workers > 1 the qp points run in parallel; results are
// identical to the sequential order because points are isolated.
inline std::vector<StrategyResult> run_experiment(
    const ExperimentConfig& cfg, const std::string& out_dir = "",
    int workers = 1, const LogFn& log = nullptr) {
  cfg.validate();
  if (workers < 1) throw UsageError("workers must be at least 1");

  std::mutex log_mutex;
  LogFn locked_log;
  if (log)
    locked_log = [&log, &log_mutex](const std::string& line) {
      std::lock_guard<std::mutex> hold(log_mutex);
      log(line);
    };

  ExperimentContext ctx = prepare_context(cfg);

  std::vector<StrategyResult> results(
      1 + (cfg.sweep.param ? cfg.param_qp_ladder.size() : 0) +
      (cfg.sweep.pixel_intra ? cfg.pixel_intra_qp_ladder.size() : 0) +
      (cfg.sweep.pixel_inter ? cfg.pixel_inter_qp_ladder.size() : 0));

  StrategyResult& anchor = results[0];
  try {
    anchor = run_anchor(cfg, ctx, locked_log);
  } catch (const std::exception& e) {
    anchor.strategy = "anchor";
    anchor.streamable = false;
    anchor.width = cfg.width;
    anchor.height = cfg.height;
    anchor.error = e.what();
  }

  std::vector<std::function<void()>> jobs;
  size_t slot = 1;
  if (cfg.sweep.param) {
    ExperimentConfig param_cfg = cfg;
    param_cfg.strategy = Strategy::kParamBased;
    for (int qp : cfg.param_qp_ladder) {
      StrategyResult& out = results[slot++];
      jobs.push_back([param_cfg, qp, &ctx, &anchor, &out, &locked_log]() {
        out.strategy = "param_based";
        out.qp = qp;
        out.width = param_cfg.width;
        out.height = param_cfg.height;
        if (!anchor.error.empty()) {
          out.error = "shared training failed: " + anchor.error;
          return;
        }
        try {
          out = run_param_strategy(param_cfg, qp, ctx, anchor.model,
                                   locked_log);
          out.train_seconds = anchor.train_seconds;
        } catch (const std::exception& e) {
          out.error = e.what();
        }
      });
    }
  }
  auto add_pixel_jobs = [&](CodingMode mode, const std::vector<int>& ladder) {
    ExperimentConfig pixel_cfg = cfg;
    pixel_cfg.strategy = Strategy::kPixelBased;
    pixel_cfg.codec_mode = mode;
    for (int qp : ladder) {
      StrategyResult& out = results[slot++];
      jobs.push_back([pixel_cfg, qp, &ctx, &out, &locked_log]() {
        out.strategy = pixel_cfg.codec_mode == CodingMode::kIntra
                           ? "pixel_intra"
                           : "pixel_inter";
        out.qp = qp;
        out.width = pixel_cfg.width;
        out.height = pixel_cfg.height;
        try {
          out = run_pixel_strategy(pixel_cfg, qp, ctx, locked_log);
        } catch (const std::exception& e) {
          out.error = e.what();
        }
      });
    }
  };
  if (cfg.sweep.pixel_intra)
    add_pixel_jobs(CodingMode::kIntra, cfg.pixel_intra_qp_ladder);
  if (cfg.sweep.pixel_inter)
    add_pixel_jobs(CodingMode::kInter, cfg.pixel_inter_qp_ladder);

  if (workers <= 1) {
    for (auto& job : jobs) job();
  } else {
    std::atomic<size_t> next{0};
    auto drain = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= jobs.size()) break;
        jobs[i]();
      }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(workers, int(jobs.size()));
    pool.reserve(size_t(std::max(0, n - 1)));
    for (int k = 1; k < n; k++) pool.emplace_back(drain);
    drain();
    for (auto& t : pool) t.join();
  }

  if (!out_dir.empty()) save_experiment(cfg, results, out_dir);
  return results;
}

}  // namespace nerfstream

#endif  // NERFSTREAM_PIPELINE_HPP_

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

// Command-line front end. Subcommands:
//   capture        render the training trajectory to a dataset directory
//   train          train a radiance field and save the checkpoint
//   encode-params  compress a checkpoint into a parameter bitstream
//   decode-params  reconstruct a checkpoint from a parameter bitstream
//   encode-images  compress a dataset directory into an image bitstream
//   decode-images  reconstruct a dataset directory from an image bitstream
//   run            full experiment: anchor + every strategy over its ladder
//   plot           render an RD plot from a metrics CSV
//
// Exit codes: 0 success, 1 runtime failure (failing stage named on stderr),
// 2 usage error.

#pragma once

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nerfstream/config.hpp"
#include "nerfstream/eval.hpp"
#include "nerfstream/pipeline.hpp"

namespace nerfstream {

namespace cli_detail {

struct CliArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
  int workers = 1;
  uint64_t seed = 0;
  bool seed_given = false;
  std::string input;
  int qp = 0;
  bool qp_given = false;
};

inline void add_common_options(CLI::App* sub, CliArgs* a) {
  sub->add_option("--config", a->config_path,
                  "experiment config file (key = value lines)")
      ->check(CLI::ExistingFile);
  sub->add_option("--set", a->sets,
                  "override one config key, e.g. --set train.iterations=100")
      ->type_size(1);
  sub->add_option("--seed", a->seed, "override scene and training seed");
}

inline ExperimentConfig resolve_config(const CliArgs& a) {
  ConfigMap map;
  if (!a.config_path.empty()) map = load_config_file(a.config_path);
  for (const auto& s : a.sets) apply_override(&map, s);
  ExperimentConfig cfg = make_experiment_config(map);
  if (a.seed_given) {
    cfg.scene_seed = a.seed;
    cfg.train.seed = a.seed;
  }
  return cfg;
}

inline void print_result_line(const StrategyResult& r) {
  std::cout << r.strategy;
  if (r.strategy != "anchor") std::cout << " qp " << r.qp;
  if (!r.error.empty()) {
    std::cout << ": FAILED: " << r.error << "\n";
    return;
  }
  std::cout << ": " << r.total_bits << " bits, mean PSNR " << r.mean_psnr_db
            << " dB" << (r.streamable ? "" : " (non-streamable reference)")
            << "\n";
}

}  // namespace cli_detail

inline int cli_main(int argc, char** argv) {
  using cli_detail::CliArgs;

  CLI::App app{
      "Desk-scale benchmark of two radiance-field streaming strategies:\n"
      "compressed training images (pixel) vs compressed trained parameters\n"
      "(param), measured against an uncompressed anchor."};
  app.require_subcommand(1);

  CliArgs capture_args, train_args, enc_p_args, dec_p_args, enc_i_args,
      dec_i_args, run_args, plot_args;

  CLI::App* capture =
      app.add_subcommand("capture", "render the training trajectory");
  cli_detail::add_common_options(capture, &capture_args);
  capture->add_option("--out", capture_args.out, "output dataset directory")
      ->required();

  CLI::App* train_cmd =
      app.add_subcommand("train", "train a radiance field checkpoint");
  cli_detail::add_common_options(train_cmd, &train_args);
  train_cmd
      ->add_option("dataset", train_args.input,
                   "dataset directory (captured per config when omitted)")
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_args.out, "output directory")
      ->required();

  CLI::App* enc_p = app.add_subcommand(
      "encode-params", "compress a checkpoint into a parameter bitstream");
  cli_detail::add_common_options(enc_p, &enc_p_args);
  enc_p->add_option("checkpoint", enc_p_args.input, "checkpoint file (.nrf)")
      ->required()
      ->check(CLI::ExistingFile);
  enc_p->add_option("--qp", enc_p_args.qp,
                    "quantization parameter (default: finest ladder value)");
  enc_p->add_option("--out", enc_p_args.out, "output bitstream file")
      ->required();

  CLI::App* dec_p = app.add_subcommand(
      "decode-params", "reconstruct a checkpoint from a parameter bitstream");
  cli_detail::add_common_options(dec_p, &dec_p_args);
  dec_p->add_option("bitstream", dec_p_args.input, "parameter bitstream file")
      ->required()
      ->check(CLI::ExistingFile);
  dec_p->add_option("--out", dec_p_args.out, "output checkpoint file")
      ->required();

  CLI::App* enc_i = app.add_subcommand(
      "encode-images", "compress a dataset directory into an image bitstream");
  cli_detail::add_common_options(enc_i, &enc_i_args);
  enc_i->add_option("dataset", enc_i_args.input, "dataset directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  enc_i->add_option("--qp", enc_i_args.qp,
                    "quantization parameter (default: finest ladder value)");
  enc_i->add_option("--out", enc_i_args.out, "output bitstream file")
      ->required();

  CLI::App* dec_i = app.add_subcommand(
      "decode-images", "reconstruct a dataset from an image bitstream");
  cli_detail::add_common_options(dec_i, &dec_i_args);
  dec_i->add_option("bitstream", dec_i_args.input, "image bitstream file")
      ->required()
      ->check(CLI::ExistingFile);
  dec_i->add_option("--out", dec_i_args.out, "output dataset directory")
      ->required();

  CLI::App* run = app.add_subcommand(
      "run", "run the full experiment and write metrics and plot");
  cli_detail::add_common_options(run, &run_args);
  run->add_option("--out", run_args.out, "output directory")->required();
  run->add_option("--workers", run_args.workers,
                  "parallel qp points (default 1)")
      ->check(CLI::Range(1, 256));

  CLI::App* plot_cmd =
      app.add_subcommand("plot", "render an RD plot from a metrics CSV");
  cli_detail::add_common_options(plot_cmd, &plot_args);
  plot_cmd->add_option("metrics", plot_args.input, "metrics CSV file")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_args.out, "output plot file (.svg)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n"
              << "run '" << (argc > 0 ? argv[0] : "nerfstream")
              << " --help' for usage\n";
    return 2;
  }

  capture_args.seed_given = capture->count("--seed") > 0;
  train_args.seed_given = train_cmd->count("--seed") > 0;
  enc_p_args.seed_given = enc_p->count("--seed") > 0;
  dec_p_args.seed_given = dec_p->count("--seed") > 0;
  enc_i_args.seed_given = enc_i->count("--seed") > 0;
  dec_i_args.seed_given = dec_i->count("--seed") > 0;
  run_args.seed_given = run->count("--seed") > 0;
  plot_args.seed_given = plot_cmd->count("--seed") > 0;
  enc_p_args.qp_given = enc_p->count("--qp") > 0;
  enc_i_args.qp_given = enc_i->count("--qp") > 0;

  const CliArgs* active = nullptr;
  if (capture->parsed()) active = &capture_args;
  if (train_cmd->parsed()) active = &train_args;
  if (enc_p->parsed()) active = &enc_p_args;
  if (dec_p->parsed()) active = &dec_p_args;
  if (enc_i->parsed()) active = &enc_i_args;
  if (dec_i->parsed()) active = &dec_i_args;
  if (run->parsed()) active = &run_args;
  if (plot_cmd->parsed()) active = &plot_args;
  if (!active) {
    std::cerr << "no subcommand selected\n";
    return 2;
  }

  ExperimentConfig cfg;
  try {
    cfg = cli_detail::resolve_config(*active);
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  LogFn log = [](const std::string& line) { std::cout << line << "\n"; };
  std::string stage = "setup";
  try {
    if (capture->parsed()) {
      stage = "capture";
      AnalyticScene scene = make_scene(cfg.scene_seed, cfg.scene_primitives);
      std::vector<CameraPose> poses = generate_trajectory(
          cfg.train_trajectory, scene, cfg.width, cfg.height);
      CapturedDataset data =
          capture_dataset(scene, poses, cfg.width, cfg.height, cfg.render);
      stage = "save";
      save_dataset(capture_args.out, data);
      detail::write_text_file(capture_args.out + "/manifest.cfg",
                                  render_config(cfg));
      std::cout << "captured " << data.images.size() << " views to "
                << capture_args.out << "\n";
    } else if (train_cmd->parsed()) {
      CapturedDataset data;
      if (!train_args.input.empty()) {
        stage = "dataset load";
        data = load_dataset(train_args.input);
      } else {
        stage = "capture";
        AnalyticScene scene =
            make_scene(cfg.scene_seed, cfg.scene_primitives);
        std::vector<CameraPose> poses = generate_trajectory(
            cfg.train_trajectory, scene, cfg.width, cfg.height);
        data =
            capture_dataset(scene, poses, cfg.width, cfg.height, cfg.render);
      }
      stage = "train";
      double seconds = 0;
      RadianceFieldModel model =
          detail::train_field(cfg, data, log, "train", &seconds);
      stage = "save";
      std::filesystem::create_directories(train_args.out);
      save_model(train_args.out + "/model.nrf", model);
      detail::write_text_file(train_args.out + "/manifest.cfg",
                                  render_config(cfg));
      std::cout << "trained " << cfg.train.iterations << " iterations in "
                << seconds << " s; checkpoint at " << train_args.out
                << "/model.nrf\n";
    } else if (enc_p->parsed()) {
      stage = "checkpoint load";
      RadianceFieldModel model =
          load_model(enc_p_args.input, EncodingConfig{}, cfg.render);
      stage = "parameter encode";
      int qp = enc_p_args.qp_given ? enc_p_args.qp : cfg.param_qp_ladder[0];
      ParamBitstream bs = encode_model(model, qp, cfg.param_quantizer);
      stage = "save";
      write_file(enc_p_args.out, bs.bytes);
      std::cout << "encoded parameters at qp " << qp << ": " << bs.bit_length
                << " bits\n";
    } else if (dec_p->parsed()) {
      stage = "parameter decode";
      RadianceFieldModel model = decode_model(read_file(dec_p_args.input),
                                              EncodingConfig{}, cfg.render);
      stage = "save";
      save_model(dec_p_args.out, model);
      std::cout << "decoded checkpoint to " << dec_p_args.out << "\n";
    } else if (enc_i->parsed()) {
      stage = "dataset load";
      CapturedDataset data = load_dataset(enc_i_args.input);
      stage = "image encode";
      int qp = enc_i_args.qp_given
                   ? enc_i_args.qp
                   : (cfg.codec_mode == CodingMode::kIntra
                          ? cfg.pixel_intra_qp_ladder[0]
                          : cfg.pixel_inter_qp_ladder[0]);
      ImageBitstream bs =
          encode_sequence(data.images, data.poses, cfg.codec_mode, qp);
      stage = "save";
      write_file(enc_i_args.out, bs.bytes);
      std::cout << "encoded " << data.images.size() << " images ("
                << coding_mode_to_string(cfg.codec_mode) << ", qp " << qp
                << "): " << bs.bit_length << " bits\n";
    } else if (dec_i->parsed()) {
      stage = "image decode";
      DecodedSequence dec = decode_sequence(read_file(dec_i_args.input));
      stage = "save";
      CapturedDataset data;
      data.images = std::move(dec.frames);
      data.poses = std::move(dec.poses);
      data.width = int(dec.width);
      data.height = int(dec.height);
      save_dataset(dec_i_args.out, data);
      std::cout << "decoded " << data.images.size() << " images to "
                << dec_i_args.out << "\n";
    } else if (run->parsed()) {
      stage = "experiment";
      std::vector<StrategyResult> results =
          run_experiment(cfg, run_args.out, run_args.workers, log);
      for (const auto& r : results) cli_detail::print_result_line(r);
      std::cout << "results in " << run_args.out << "\n";
      bool failed = false;
      for (const auto& r : results)
        if (!r.error.empty()) {
          std::cerr << "experiment point failed: " << r.strategy << " qp "
                    << r.qp << ": " << r.error << "\n";
          failed = true;
        }
      if (failed) return 1;
    } else if (plot_cmd->parsed()) {
      stage = "metrics load";
      std::vector<RDCurve> curves = import_csv(plot_args.input);
      stage = "plot render";
      export_plot(curves, plot_args.out);
      std::cout << "plot written to " << plot_args.out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error in stage '" << stage << "': " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nerfstream

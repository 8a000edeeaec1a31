#ifndef DNM_CLI_HPP
#define DNM_CLI_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnm/config.hpp"
#include "dnm/evaluation.hpp"
#include "dnm/gradcheck_suite.hpp"
#include "dnm/io.hpp"
#include "dnm/trainer.hpp"

namespace dnm::cli {

enum ExitCode : int { ok = 0, usage = 1, data = 2, numerical = 3 };

namespace detail {

namespace fs = std::filesystem;

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw FormatError(FormatError::Kind::io, "cannot create directory " + dir.string());
}

inline std::vector<StereoSample> samples_of(std::vector<SceneFile> files, const CameraRig& rig) {
  std::vector<StereoSample> out;
  for (auto& f : files) {
    f.sample.rig = rig;
    out.push_back(std::move(f.sample));
  }
  return out;
}

struct SynthArgs {
  std::string out;
  std::size_t count = 10;
  std::string profile = "constant";
  double disp_px = 4.0;
  double disp_bottom_px = 8.0;
  std::string texture = "smoothed-noise";
  std::size_t height = 64;
  std::size_t width = 128;
  std::uint64_t seed = 0;
  double focal_px = 100.0;
  double baseline_m = 0.54;
};

inline int run_synth(const SynthArgs& a, std::ostream& out) {
  SceneSpec spec;
  spec.profile = parse_profile(a.profile);
  spec.texture = parse_texture(a.texture);
  spec.disparity_px = a.disp_px;
  spec.disparity_bottom_px = a.disp_bottom_px;
  spec.height = a.height;
  spec.width = a.width;
  const CameraRig rig{a.focal_px, a.baseline_m};
  rig.validate();
  ensure_dir(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    spec.seed = a.seed + i;
    save_scene(generate_scene(spec), a.out, scene_stem(i));
  }
  dnm::detail::write_file((fs::path(a.out) / "rig.json").string(), rig_json(rig));
  out << "wrote " << a.count << " scenes to " << a.out << "\n";
  return ok;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

inline std::string epoch_checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.dnmc", epoch);
  return buf;
}

inline int run_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  cfg.validate();
  const auto samples = samples_of(load_scene_dir(a.data), CameraRig{});
  if (samples.empty() && cfg.epochs > 0) throw ConfigError("no scenes found in " + a.data);
  const fs::path dir(a.out);
  ensure_dir(dir);
  dnm::detail::write_file((dir / "config.json").string(), train_config_json(cfg));

  NetworkConfig net = cfg.network;
  net.seed = cfg.seed;
  save_checkpoint(make_dual_model(cfg.model, net), (dir / "init.dnmc").string());

  const std::string csv_path = (dir / "loss.csv").string();
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw FormatError(FormatError::Kind::io, "cannot write " + csv_path);
  csv << loss_csv_header(cfg.model, kOutputScales) << "\n";
  csv.flush();

  TrainCallbacks cb;
  double epoch_sum = 0.0;
  std::size_t epoch_steps = 0;
  cb.on_step = [&](const LossRecord& r) {
    csv << loss_csv_row(r.step, r.lr, r.breakdown) << "\n";
    epoch_sum += r.breakdown.total;
    ++epoch_steps;
  };
  cb.on_epoch_end = [&](std::size_t epoch, const DualModel& m) {
    csv.flush();
    save_checkpoint(m, (dir / epoch_checkpoint_name(epoch)).string());
    out << "epoch " << epoch << " mean C " << format_number(epoch_sum / static_cast<double>(epoch_steps)) << "\n";
    epoch_sum = 0.0;
    epoch_steps = 0;
  };
  TrainResult result = [&] {
    try {
      return train(cfg, samples, cb);
    } catch (const NumericalError&) {
      csv.flush();
      throw;
    }
  }();
  csv.flush();
  if (!csv) throw FormatError(FormatError::Kind::io, "write failed for " + csv_path);
  save_checkpoint(result.model, (dir / "model.dnmc").string());
  out << "trained " << result.history.size() << " steps; model written to " << (dir / "model.dnmc").string() << "\n";
  return ok;
}

struct InferArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
  bool pp = false;
  std::string view = "left";
  std::size_t channel = 0;
};

inline int run_infer(const InferArgs& a, std::ostream& out) {
  const DualModel model = load_checkpoint(a.checkpoint);
  const Tensor image = load_image(a.image);
  const View view = a.view == "right" ? View::right : View::left;
  const DisparityPredictor predict = predictor_for(model, view, a.channel);
  const Tensor disp = a.pp ? post_process(predict, image) : predict(image);
  save_pfm(to_float_map(disparity_to_pixels(disp)), a.out);
  out << "wrote " << a.out << "\n";
  return ok;
}

struct EvalArgs {
  std::string checkpoint;
  std::string predictions;
  std::string data;
  bool pp = false;
  std::string out;
  std::string per_image;
  std::string method;
};

inline void write_text(const std::string& path, const std::string& text) { dnm::detail::write_file(path, text); }

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto files = load_scene_dir(a.data);
  const CameraRig rig = load_rig_or_default(a.data);
  if (files.empty()) throw ConfigError("no scenes found in " + a.data);
  std::vector<std::string> stems;
  for (const auto& f : files) stems.push_back(f.stem);
  const auto samples = samples_of(files, rig);

  EvaluationResult res;
  std::string method = a.method;
  if (!a.checkpoint.empty()) {
    const DualModel model = load_checkpoint(a.checkpoint);
    res = evaluate_set(model, samples, rig, a.pp);
    if (method.empty()) method = std::string(to_string(model.kind)) + (a.pp ? "+pp" : "");
  } else {
    // Precomputed predictions: <stem>.disp.pfm in pixels, matched by stem.
    std::map<const Tensor*, std::size_t> index;
    for (std::size_t i = 0; i < samples.size(); ++i) index[&samples[i].left] = i;
    const fs::path pred_dir(a.predictions);
    const DisparityPredictor lookup = [&](const Tensor& image) {
      const auto it = index.find(&image);
      if (it == index.end()) throw ConfigError("eval: post-processing needs a checkpoint");
      const std::string path = (pred_dir / (stems[it->second] + ".disp.pfm")).string();
      Tensor px = to_tensor(load_pfm(path));
      if (px.height() != image.height() || px.width() != image.width()) {
        throw ShapeError("eval: prediction " + path + " does not match the image extents");
      }
      return disparity_to_fraction(px);
    };
    if (a.pp) throw ConfigError("eval: --pp applies to --checkpoint only");
    res = evaluate_set(lookup, samples, rig, false);
    if (method.empty()) method = "predictions";
  }

  const std::string table = metrics_csv_header() + "\n" + metrics_csv_row(method, res.mean) + "\n";
  if (!a.out.empty()) write_text(a.out, table);
  if (!a.per_image.empty()) {
    std::string rows = metrics_csv_header("image") + "\n";
    for (std::size_t i = 0; i < stems.size(); ++i) rows += metrics_csv_row(stems[i], res.per_image[i]) + "\n";
    write_text(a.per_image, rows);
  }
  out << table;
  return ok;
}

inline int run_gradcheck(std::uint64_t seed, std::ostream& out) {
  const auto entries = run_gradcheck_suite(seed);
  bool all = true;
  char line[128];
  std::snprintf(line, sizeof line, "%-30s %-12s %-10s %s\n", "op", "max_rel_err", "tolerance", "status");
  out << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-30s %-12.3e %-10.0e %s\n", e.name.c_str(), e.max_error, e.tolerance,
                  e.passed() ? "ok" : "FAIL");
    out << line;
    all = all && e.passed();
  }
  return all ? ok : numerical;
}

}  // namespace detail

/// Entry point of the `dnm` tool. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dual-network unsupervised monocular depth estimation", "dnm"};
  app.require_subcommand(1);

  detail::SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic rectified stereo scene set");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
  s->add_option("--profile", synth.profile, "Disparity profile")->check(CLI::IsMember({"constant", "two-plane", "slanted"}));
  s->add_option("--disp-px", synth.disp_px, "Disparity in pixels (top plane / top row)");
  s->add_option("--disp-bottom-px", synth.disp_bottom_px, "Bottom plane / bottom row disparity in pixels");
  s->add_option("--texture", synth.texture, "Texture kind")
      ->check(CLI::IsMember({"random-noise", "smoothed-noise", "checkers"}));
  s->add_option("--height", synth.height, "Image height")->check(CLI::PositiveNumber);
  s->add_option("--width", synth.width, "Image width")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Seed of the first scene; scene i uses seed + i");
  s->add_option("--focal-px", synth.focal_px, "Focal length written to rig.json");
  s->add_option("--baseline-m", synth.baseline_m, "Baseline written to rig.json");

  detail::TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a dual-network model on a scene directory");
  t->add_option("--config", tr.config, "Training configuration (JSON)");
  t->add_option("--data", tr.data, "Scene directory")->required();
  t->add_option("--out", tr.out, "Output directory for loss.csv and checkpoints")->required();

  detail::InferArgs inf;
  auto* i = app.add_subcommand("infer", "Predict a disparity map (pixels, PFM) for one image");
  i->add_option("--checkpoint", inf.checkpoint, "Model checkpoint")->required();
  i->add_option("--image", inf.image, "Input PPM/PGM image")->required();
  i->add_option("--out", inf.out, "Output .disp.pfm")->required();
  i->add_flag("--pp", inf.pp, "Flip-and-blend post-processing");
  i->add_option("--view", inf.view, "Network to run")->check(CLI::IsMember({"left", "right"}));
  i->add_option("--channel", inf.channel, "Output channel (two-channel models)")->check(CLI::Range(0, 1));

  detail::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Depth metrics against a scene directory with ground truth");
  auto* ck = e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
  auto* pr = e->add_option("--predictions", ev.predictions, "Directory of <stem>.disp.pfm predictions");
  ck->excludes(pr);
  e->add_option("--data", ev.data, "Scene directory")->required();
  e->add_flag("--pp", ev.pp, "Flip-and-blend post-processing");
  e->add_option("--out", ev.out, "Metrics CSV");
  e->add_option("--per-image", ev.per_image, "Per-image metrics CSV");
  e->add_option("--method", ev.method, "Label for the method column");

  std::uint64_t gc_seed = 7;
  auto* g = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  g->add_option("--seed", gc_seed, "Seed for the random test points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& pe) {
    err << "dnm: " << pe.what() << "\n";
    err << "run 'dnm --help' for usage\n";
    return usage;
  }

  try {
    if (*s) return detail::run_synth(synth, out);
    if (*t) return detail::run_train(tr, out);
    if (*i) return detail::run_infer(inf, out);
    if (*e) {
      if (ev.checkpoint.empty() == ev.predictions.empty()) {
        err << "dnm eval: exactly one of --checkpoint or --predictions is required\n";
        return usage;
      }
      return detail::run_eval(ev, out);
    }
    if (*g) return detail::run_gradcheck(gc_seed, out);
  } catch (const NumericalError& ex) {
    err << "dnm: numerical failure: " << ex.what() << "\n";
    return numerical;
  } catch (const Error& ex) {
    err << "dnm: " << ex.what() << "\n";
    return data;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "dnm: " << ex.what() << "\n";
    return data;
  }
  return usage;
}

}  // namespace dnm::cli

#endif  // DNM_CLI_HPP

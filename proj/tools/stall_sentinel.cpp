#include "sentinel/config.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/sequential.hpp"
#include "sentinel/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/os.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace sentinel;

namespace {

PipelineConfig config_from(const std::string& path, std::optional<int> workers) {
  PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
  if (workers) {
    cfg.workers = *workers;
    cfg.validate();
  }
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(fmt::format("cannot create directory {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  auto file = fmt::output_file(path.string());
  file.print("{}", text);
}

// "h=0.5,1,2" or "0.5,1,2"
std::vector<double> parse_sweep(std::string spec) {
  if (spec.rfind("h=", 0) == 0) spec.erase(0, 2);
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const auto item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !(v > 0))
      throw Error(fmt::format("--sweep: bad threshold `{}`", item));
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

std::string h_label(double h) { return fmt::format("{}", h); }

int cmd_generate(const std::string& spec_path, const std::string& out) {
  const auto spec = synth::load_scene_spec(spec_path);
  ensure_dir(out);
  const auto scene = synth::generate(spec, out);
  fmt::print("generated {} frames, {} detections, {} stalls under {}\n", scene.manifest.size(),
             scene.detections.size(), scene.truth.size(), out);
  return 0;
}

struct RunArgs {
  std::string video_dir, config, out, calibration, snapshots, sweep;
  bool sequential = false, export_series = false;
  std::optional<int> workers;
};

int cmd_run(const RunArgs& a) {
  const auto cfg = config_from(a.config, a.workers);
  RunOptions opts;
  if (a.sequential) {
    if (a.calibration.empty()) throw Error("run --sequential needs --calibration <file>");
    opts.mode = DetectorMode::sequential;
    opts.calibration = load_calibration(a.calibration);
  }
  const auto result = run_pipeline(a.video_dir, cfg, opts);
  ensure_dir(a.out);
  const fs::path out = a.out;
  write_predictions(result.predictions, out / "predictions.txt");
  const auto report = format_run_report(result);
  write_text(out / "report.txt", report);
  fmt::print("{}", report);
  if (a.export_series) {
    for (std::size_t i = 0; i < result.candidates.size(); ++i)
      write_text(out / fmt::format("series_{}.csv", i), series_csv(result.candidates[i]));
  }
  if (!a.snapshots.empty()) {
    ensure_dir(a.snapshots);
    write_snapshots(result.video.forward, a.snapshots);
    write_snapshots(result.video.backward, a.snapshots);
  }
  if (!a.sweep.empty()) {
    if (!a.sequential) throw Error("--sweep on run needs --sequential");
    for (double h : parse_sweep(a.sweep)) {
      const auto preds = sequential_predictions(result, cfg, *opts.calibration, h);
      write_predictions(preds, out / fmt::format("predictions_h{}.txt", h_label(h)));
    }
  }
  fmt::print("{} predicted events written to {}\n", result.predictions.size(), (out / "predictions.txt").string());
  return 0;
}

int cmd_calibrate(const std::vector<std::string>& dirs, const std::string& config, const std::string& out,
                  std::optional<int> workers) {
  const auto cfg = config_from(config, workers);
  CalibrationSamples samples;
  for (const auto& d : dirs) samples.append(calibration_scores(d, cfg));
  if (samples.nominal.empty()) throw Error("no nominal samples found in the training videos");
  Warnings warnings;
  const auto cal = calibrate_gamma(samples.nominal, cfg.alpha_sig, &warnings, samples.all);
  for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
  write_calibration(cal, out);
  fmt::print("gamma={} norm_min={} norm_max={} alpha={} from {} scores\n", cal.gamma, cal.norm_min, cal.norm_max,
             cal.alpha, samples.nominal.size());
  return 0;
}

int cmd_eval(const std::string& preds_path, const std::string& gt_path, const std::string& config,
             const std::string& out, const std::string& sweep) {
  const auto cfg = config_from(config, std::nullopt);
  const auto gts = load_ground_truth(gt_path);
  std::optional<fs::path> out_dir;
  if (!out.empty()) {
    ensure_dir(out);
    out_dir = out;
  }
  if (preds_path.find("{h}") == std::string::npos || sweep.empty()) {
    const auto preds = load_predictions(preds_path);
    const auto report = evaluate(preds, gts, cfg.window_s, cfg.delay_cap_s);
    const auto text = format_report(report, preds, gts);
    fmt::print("{}", text);
    for (const auto& w : report.warnings) fmt::print(stderr, "warning: {}\n", w);
    if (out_dir) write_text(*out_dir / "eval_report.txt", text);
  }
  if (!sweep.empty()) {
    std::vector<OperatingRun> runs;
    for (double h : parse_sweep(sweep)) {
      OperatingRun run{h, {}};
      const auto pos = preds_path.find("{h}");
      if (pos != std::string::npos) {
        auto path = preds_path;
        path.replace(pos, 3, h_label(h));
        run.preds = load_predictions(path);
      } else {
        for (const auto& p : load_predictions(preds_path))
          if (p.score && *p.score >= h) run.preds.push_back(p);
      }
      runs.push_back(std::move(run));
    }
    Warnings warnings;
    const auto curve = precision_delay_curve(runs, gts, cfg.window_s, cfg.delay_cap_s, &warnings);
    for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
    const auto csv = format_curve_csv(curve);
    fmt::print("{}APD={}\n", csv, curve.apd);
    if (out_dir) write_text(*out_dir / "precision_delay.csv", csv + fmt::format("# APD={}\n", curve.apd));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stalled-vehicle detection on traffic video frames"};
  app.require_subcommand(1);
  std::optional<int> workers;
  app.add_option("--workers", workers, "worker threads (capped by STALL_SENTINEL_WORKERS)")->check(CLI::PositiveNumber);

  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("generate", "render a synthetic scene from a spec file");
  gen->add_option("spec", gen_spec, "scene spec")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run the detector on a video directory");
  run->add_option("video_dir", run_args.video_dir, "directory with manifest.txt, detections.csv, mask.pgm")->required();
  run->add_option("--config", run_args.config, "configuration file");
  run->add_option("--out", run_args.out, "output directory")->required();
  run->add_flag("--sequential", run_args.sequential, "use the CUSUM detector instead of backtracking");
  run->add_option("--calibration", run_args.calibration, "calibration file for --sequential");
  run->add_flag("--export-series", run_args.export_series, "write series_<i>.csv per candidate");
  run->add_option("--snapshots", run_args.snapshots, "write background snapshots as PGM here");
  run->add_option("--sweep", run_args.sweep, "h=<list>: extra predictions_h<h>.txt per CUSUM threshold");

  std::vector<std::string> cal_dirs;
  std::string cal_config, cal_out;
  auto* cal = app.add_subcommand("calibrate", "fit the CUSUM drift from training videos");
  cal->add_option("video_dirs", cal_dirs, "training video directories")->required();
  cal->add_option("--config", cal_config, "configuration file");
  cal->add_option("--out", cal_out, "calibration file to write")->required();

  std::string ev_preds, ev_gt, ev_config, ev_out, ev_sweep;
  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  ev->add_option("preds", ev_preds, "predictions file; may contain {h} with --sweep")->required();
  ev->add_option("ground_truth", ev_gt, "ground-truth file")->required();
  ev->add_option("--config", ev_config, "configuration file");
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--sweep", ev_sweep, "h=<list>: precision-delay curve and APD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) return cmd_generate(gen_spec, gen_out);
    if (*run) {
      run_args.workers = workers;
      return cmd_run(run_args);
    }
    if (*cal) return cmd_calibrate(cal_dirs, cal_config, cal_out, workers);
    if (*ev) return cmd_eval(ev_preds, ev_gt, ev_config, ev_out, ev_sweep);
  } catch (const std::exception& e) {
    std::fflush(stdout);
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}

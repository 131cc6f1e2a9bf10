#include "sentinel/pipeline.hpp"

#include "sentinel/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <future>

namespace sentinel {

namespace fs = std::filesystem;

StageError::StageError(std::string stage, const std::string& what)
    : Error(fmt::format("{}: {}", stage, what)), stage_(std::move(stage)) {}

VideoPaths VideoPaths::in(const fs::path& video_dir) {
  return {video_dir / "manifest.txt", video_dir / "detections.csv", video_dir / "mask.pgm"};
}

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::optional<PredictedEvent> backtracking_prediction(const std::string& video_id, const CandidateResult& c,
                                                      int persistence) {
  if (!c.onset) return std::nullopt;
  double score = 0.0;
  for (std::size_t i = c.onset->sample; i < c.onset->sample + static_cast<std::size_t>(persistence); ++i)
    score += c.smoothed.series.samples[i].value;
  return PredictedEvent{video_id, c.onset->timestamp_s, score / persistence};
}

void run_sequential(CandidateResult& c, const std::string& video_id, const Calibration& cal, double h,
                    std::optional<double> g) {
  c.evidence = c.raw;
  for (auto& s : c.evidence.samples) s.value = cal.normalize(s.value);
  CusumConfig cusum;
  cusum.gamma = cal.gamma;
  cusum.h = h;
  cusum.g = g.value_or(cal.gamma);
  cusum.alpha_sig = cal.alpha;
  c.alarm = detect(c.evidence, cusum);
  c.trace = cusum_trace(c.evidence, cusum.gamma);
  c.localization = {};
  c.prediction.reset();
  if (c.alarm) {
    c.localization = localize(c.evidence, c.trace, c.alarm->sample, cusum.g);
    const double peak = *std::max_element(c.trace.begin(), c.trace.end());
    c.prediction = PredictedEvent{video_id, c.alarm->timestamp_s, peak};
  }
}

}  // namespace

PreparedVideo prepare_video(const FrameManifest& manifest, const PipelineConfig& config) {
  config.validate();
  const int workers = effective_workers(config.workers);
  PreparedVideo video;
  video.manifest = stage("frame_store", [&] {
    return filter_corrupted(manifest, config.mean_threshold, config.sample_period_s);
  });
  stage("background", [&] {
    if (video.manifest.empty()) throw Error("no frames left after corrupted-frame filtering");
    if (workers > 1) {
      const int half = std::max(1, workers / 2);
      auto backward = std::async(std::launch::async, [&] {
        return run_direction(video.manifest, Direction::backward, config.snapshot_interval, config.mixture, half);
      });
      video.forward =
          run_direction(video.manifest, Direction::forward, config.snapshot_interval, config.mixture, workers - half);
      video.backward = backward.get();
    } else {
      video.forward = run_direction(video.manifest, Direction::forward, config.snapshot_interval, config.mixture, 1);
      video.backward = run_direction(video.manifest, Direction::backward, config.snapshot_interval, config.mixture, 1);
    }
    video.merged = merge(video.forward, video.backward);
    return 0;
  });
  return video;
}

RunResult analyze(PreparedVideo video, std::string video_id, std::span<const DetectionRecord> detections,
                  const SegmentationMask& mask, const PipelineConfig& config, const RunOptions& options) {
  config.validate();
  if (options.mode == DetectorMode::sequential && !options.calibration)
    throw StageError("sequential", "sequential mode needs a calibration");
  const int workers = effective_workers(config.workers);

  RunResult result;
  result.video_id = std::move(video_id);
  result.video = std::move(video);
  result.detections.assign(detections.begin(), detections.end());
  const auto& merged = result.video.merged;

  stage("detections", [&] {
    for (const auto& d : result.detections)
      if (d.snapshot_index >= static_cast<std::int64_t>(merged.size()))
        throw Error(fmt::format("detection refers to snapshot {} but the video has {} snapshots", d.snapshot_index,
                                merged.size()));
    result.after_nms = nms(result.detections, config.iou_thresh);
    const auto cloud = CentroidCloud::from_records(result.after_nms);
    const auto kept = filter_misclassified(result.after_nms, cloud, config.k1, config.l1);
    result.after_filters = filter_slow(kept, cloud, config.k2, config.l2);
    return 0;
  });

  const auto regions = stage("candidates", [&] {
    if (!merged.empty() && (mask.width != merged.front().frame.width || mask.height != merged.front().frame.height))
      throw Error(fmt::format("mask is {}x{} but frames are {}x{}", mask.width, mask.height,
                              merged.front().frame.width, merged.front().frame.height));
    return build_candidates(result.after_filters, mask, config.candidate_options());
  });

  const auto consts = config.ssim_constants();
  for (const auto& region : regions) {
    if (region.roi.w < consts.window || region.roi.h < consts.window) {
      result.warnings.push_back(fmt::format("candidate at ({:.1f}, {:.1f}) has an ROI smaller than the SSIM window",
                                            region.centroid.x, region.centroid.y));
      continue;
    }
    CandidateResult c;
    c.region = region;
    // Last frame of slot t_k in time order, whichever direction produced the snapshot.
    const auto slot_end = (static_cast<std::size_t>(region.first_seen_snapshot) + 1) *
                              static_cast<std::size_t>(config.snapshot_interval) - 1;
    c.reference_position = std::min(slot_end, result.video.manifest.size() - 1);
    result.candidates.push_back(std::move(c));
  }

  stage("similarity", [&] {
    parallel_for(result.candidates.size(), workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        auto& c = result.candidates[i];
        c.raw = roi_series(result.video.manifest, c.region.roi, c.reference_position, config.stride, consts);
        c.smoothed = savgol(c.raw, config.savgol_window, config.savgol_order);
        if (options.mode == DetectorMode::backtracking) {
          c.onset = backtrack_onset(c.smoothed.series, config.ssim_threshold, config.persistence);
          c.prediction = backtracking_prediction(result.video_id, c, config.persistence);
        } else {
          run_sequential(c, result.video_id, *options.calibration, config.h, config.g);
        }
      }
    });
    return 0;
  });

  for (const auto& c : result.candidates) {
    if (c.smoothed.too_short)
      result.warnings.push_back(fmt::format("series of candidate at ({:.1f}, {:.1f}) shorter than the smoothing window",
                                            c.region.centroid.x, c.region.centroid.y));
    if (c.prediction) result.predictions.push_back(*c.prediction);
  }
  return result;
}

RunResult run_pipeline(const fs::path& video_dir, const PipelineConfig& config, const RunOptions& options) {
  const auto paths = VideoPaths::in(video_dir);
  const auto manifest = stage("frame_store", [&] { return load_manifest(paths.manifest); });
  auto video = prepare_video(manifest, config);
  const auto detections = stage("detections", [&] { return load_detections(paths.detections, manifest.width, manifest.height); });
  const auto mask = stage("candidates", [&] {
    std::optional<int> w = manifest.width, h = manifest.height;
    if (!video.merged.empty()) {
      w = video.merged.front().frame.width;
      h = video.merged.front().frame.height;
    }
    return load_mask(paths.mask, w, h);
  });
  std::string video_id = manifest.video_id.empty() ? video_dir.filename().string() : manifest.video_id;
  return analyze(std::move(video), std::move(video_id), detections, mask, config, options);
}

std::vector<PredictedEvent> sequential_predictions(const RunResult& result, const PipelineConfig& config,
                                                   const Calibration& calibration, double h) {
  std::vector<PredictedEvent> out;
  for (auto c : result.candidates) {
    run_sequential(c, result.video_id, calibration, h, config.g);
    if (c.prediction) out.push_back(*c.prediction);
  }
  return out;
}

void CalibrationSamples::append(const CalibrationSamples& other) {
  nominal.insert(nominal.end(), other.nominal.begin(), other.nominal.end());
  all.insert(all.end(), other.all.begin(), other.all.end());
}

CalibrationSamples calibration_scores(const fs::path& video_dir, const PipelineConfig& config) {
  const auto result = run_pipeline(video_dir, config, RunOptions{});
  CalibrationSamples out;
  for (const auto& c : result.candidates) {
    const std::size_t end = c.onset ? c.onset->sample : c.raw.size();
    for (std::size_t i = 0; i < c.raw.size(); ++i) {
      if (i < end) out.nominal.push_back(c.raw.samples[i].value);
      out.all.push_back(c.raw.samples[i].value);
    }
  }
  return out;
}

std::string series_csv(const CandidateResult& c) {
  std::string out = "frame_index,timestamp_s,e_raw,e_smoothed\n";
  for (std::size_t i = 0; i < c.raw.size(); ++i)
    out += fmt::format("{},{},{},{}\n", c.raw.samples[i].frame_index, c.raw.samples[i].timestamp_s,
                       c.raw.samples[i].value, c.smoothed.series.samples[i].value);
  return out;
}

std::string format_run_report(const RunResult& r) {
  std::string out = fmt::format("video {}: {} frames after filtering, {} snapshots\n", r.video_id,
                                r.video.manifest.size(), r.video.merged.size());
  out += fmt::format("detections: {} loaded, {} after NMS, {} after kNN filters\n", r.detections.size(),
                     r.after_nms.size(), r.after_filters.size());
  out += fmt::format("{:>4} {:>9} {:>9} {:>22} {:>6} {:>8} {:>12}\n", "id", "cx", "cy", "roi", "t_k", "ref", "onset_s");
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    const auto& b = c.region.roi;
    out += fmt::format("{:>4} {:>9.2f} {:>9.2f} {:>22} {:>6} {:>8} {:>12}\n", i, c.region.centroid.x,
                       c.region.centroid.y, fmt::format("{},{},{},{}", b.x, b.y, b.w, b.h),
                       c.region.first_seen_snapshot, c.reference_position,
                       c.prediction ? fmt::format("{:.1f}", c.prediction->predicted_start_s) : std::string("-"));
  }
  for (const auto& w : r.warnings) out += fmt::format("warning: {}\n", w);
  return out;
}

}  // namespace sentinel

#pragma once

#include "sentinel/background.hpp"
#include "sentinel/candidates.hpp"
#include "sentinel/config.hpp"
#include "sentinel/detections.hpp"
#include "sentinel/error.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/sequential.hpp"
#include "sentinel/similarity.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sentinel {

/// Error raised by a pipeline stage; the message starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Standard file names inside a video directory.
struct VideoPaths {
  std::filesystem::path manifest;
  std::filesystem::path detections;
  std::filesystem::path mask;

  static VideoPaths in(const std::filesystem::path& video_dir);
};

/// Output of the stages that depend only on the frames.
struct PreparedVideo {
  FrameManifest manifest;  // after corrupted-frame filtering
  std::vector<BackgroundSnapshot> forward;
  std::vector<BackgroundSnapshot> backward;
  std::vector<BackgroundSnapshot> merged;
};

/// Corrupted-frame filter, forward and backward background runs (concurrent
/// when workers > 1) and the merge.
PreparedVideo prepare_video(const FrameManifest& manifest, const PipelineConfig& config);

enum class DetectorMode { backtracking, sequential };

struct CandidateResult {
  CandidateRegion region;
  std::size_t reference_position = 0;  // manifest position of the last frame of slot t_k
  SimilaritySeries raw;
  SmoothedSeries smoothed;
  // backtracking
  std::optional<Onset> onset;
  // sequential
  SimilaritySeries evidence;  // raw series normalized with the calibration
  std::optional<Detection> alarm;
  std::vector<double> trace;
  Localization localization;

  std::optional<PredictedEvent> prediction;
};

struct RunOptions {
  DetectorMode mode = DetectorMode::backtracking;
  std::optional<Calibration> calibration;  // required in sequential mode
};

struct RunResult {
  std::string video_id;
  PreparedVideo video;
  std::vector<DetectionRecord> detections;        // as loaded
  std::vector<DetectionRecord> after_nms;
  std::vector<DetectionRecord> after_filters;
  std::vector<CandidateResult> candidates;
  std::vector<PredictedEvent> predictions;        // one per candidate with an onset
  Warnings warnings;
};

/// Candidate selection and onset detection on a prepared video.
RunResult analyze(PreparedVideo video, std::string video_id, std::span<const DetectionRecord> detections,
                  const SegmentationMask& mask, const PipelineConfig& config, const RunOptions& options);

/// Loads manifest.txt, detections.csv and mask.pgm from video_dir and runs
/// every stage.
RunResult run_pipeline(const std::filesystem::path& video_dir, const PipelineConfig& config,
                       const RunOptions& options);

/// Sequential-mode predictions for a different alarm threshold, reusing the
/// evidence already computed by analyze().
std::vector<PredictedEvent> sequential_predictions(const RunResult& result, const PipelineConfig& config,
                                                   const Calibration& calibration, double h);

/// Raw SSIM samples of a training video's candidates. `nominal` holds the
/// samples before each backtracked onset, `all` every sample.
struct CalibrationSamples {
  std::vector<double> nominal;
  std::vector<double> all;

  void append(const CalibrationSamples& other);
};

CalibrationSamples calibration_scores(const std::filesystem::path& video_dir, const PipelineConfig& config);

/// `frame_index,timestamp_s,e_raw,e_smoothed` rows for one candidate.
std::string series_csv(const CandidateResult& candidate);

/// Candidate table written next to the predictions.
std::string format_run_report(const RunResult& result);

}  // namespace sentinel

#pragma once

#include "sentinel/background.hpp"
#include "sentinel/candidates.hpp"
#include "sentinel/sequential.hpp"
#include "sentinel/similarity.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace sentinel {

/// Every tunable of the pipeline. Loaded from `key = value` lines; unknown
/// keys and out-of-range values are rejected with the key in the message.
struct PipelineConfig {
  // frame_store
  double mean_threshold = 5.0;
  double sample_period_s = 30.0;
  // background
  int snapshot_interval = 120;
  MixtureParams mixture;
  // detections
  double iou_thresh = 0.5;
  int k1 = 20;
  double l1 = 5.0;
  int k2 = 2;
  double l2 = 20.0;
  // candidates
  int k_max = 8;
  int elbow_restarts = 4;
  double elbow_min_spread = 10.0;
  double roi_margin = 8.0;
  int kmeans_max_iters = 100;
  // similarity
  int ssim_window = 8;
  int savgol_window = 9;
  int savgol_order = 2;
  int stride = 10;
  int persistence = 3;
  double ssim_threshold = 0.5;
  // sequential
  double alpha_sig = 0.05;
  double h = 1.0;
  std::optional<double> g;  // defaults to the calibrated gamma
  // metrics
  double window_s = 10.0;
  double delay_cap_s = 300.0;
  // execution
  std::uint64_t seed = 0;
  int workers = 1;

  /// Throws Error naming the first field outside its valid range.
  void validate() const;

  /// Applies one `key = value` setting; throws Error for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  SsimConstants ssim_constants() const;
  CandidateOptions candidate_options() const;
};

PipelineConfig parse_config(std::string_view content, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace sentinel

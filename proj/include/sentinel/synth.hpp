#pragma once

#include "sentinel/candidates.hpp"
#include "sentinel/detections.hpp"
#include "sentinel/frame_store.hpp"
#include "sentinel/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sentinel::synth {

enum class StaticLayer { flat, gradient, texture };

struct VehicleTrack {
  double w = 30, h = 16;
  double x0 = 0, y0 = 0;       // top-left at enter_s
  double vx = 0, vy = 0;       // px/s
  double enter_s = 0, exit_s = 0;
  std::uint8_t luminance = 220;

  Box box_at(double t) const { return {x0 + vx * (t - enter_s), y0 + vy * (t - enter_s), w, h}; }
};

struct StallEvent {
  Box box;
  double onset_s = 0;               // tau
  std::optional<double> release_s;  // end of video when absent
  std::uint8_t luminance = 230;

  bool active(double t) const { return t >= onset_s && (!release_s || t < *release_s); }
};

struct DetectorNoise {
  double miss_rate = 0.0;
  double jitter_px = 0.0;             // centroid jitter sigma
  double false_positive_rate = 0.0;   // per snapshot
  double confidence_lo = 0.9;
  double confidence_hi = 0.99;
};

struct CorruptedWindow {
  double start_s = 0;
  double end_s = 0;
};

struct SceneSpec {
  std::string video_id = "scene";
  int width = 800;
  int height = 410;
  double duration_s = 900;
  double effective_fps = 1;
  int snapshot_interval = 120;  // frames between simulated detector runs
  StaticLayer static_layer = StaticLayer::texture;
  int static_level = 120;
  double texture_amplitude = 50;  // half-range of the static texture
  double vehicle_texture = 0;     // half-range of the vehicle surface pattern; 0 draws flat boxes
  double noise_sigma = 2.0;
  std::vector<VehicleTrack> tracks;
  std::vector<StallEvent> stalls;
  DetectorNoise detector_sim;
  std::vector<CorruptedWindow> corrupted_windows;
  std::vector<Box> road;  // road rectangles; the whole frame when empty
  std::uint64_t seed = 1;

  std::int64_t frame_count() const;
  double timestamp(std::int64_t frame_index) const { return static_cast<double>(frame_index) / effective_fps; }
  bool corrupted(double t) const;

  /// Throws Error describing the first invalid field.
  void validate() const;
};

/// Parses the line-oriented scene grammar (see README).
SceneSpec parse_scene_spec(std::string_view content, const std::string& source = "<scene>");
SceneSpec load_scene_spec(const std::filesystem::path& path);

/// Background luminance without vehicles or noise.
std::vector<std::uint8_t> render_static_layer(const SceneSpec& spec);
/// Frame exactly as written to disk.
Frame render_frame(const SceneSpec& spec, std::int64_t frame_index, const std::vector<std::uint8_t>& static_layer);
SegmentationMask render_mask(const SceneSpec& spec);
/// Detections of the simulated detector, one batch per background slot.
std::vector<DetectionRecord> simulate_detections(const SceneSpec& spec);
std::vector<GroundTruthEvent> ground_truth(const SceneSpec& spec);

struct GeneratedScene {
  FrameManifest manifest;
  std::filesystem::path manifest_path;
  std::filesystem::path detections_path;
  std::filesystem::path mask_path;
  std::filesystem::path ground_truth_path;
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthEvent> truth;
};

/// Writes manifest.txt, frames/, detections.csv, mask.pgm and
/// ground_truth.txt under out_dir.
GeneratedScene generate(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// Gaussian noise table: 65536 integer samples of round(sigma * z) at the
/// quantiles (i + 0.5) / 65536.
std::vector<std::int8_t> noise_table(double sigma);

}  // namespace sentinel::synth

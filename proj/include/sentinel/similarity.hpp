#pragma once

#include "sentinel/detections.hpp"
#include "sentinel/frame_store.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sentinel {

struct SimilaritySample {
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;
  double value = 0.0;
};

struct SimilaritySeries {
  std::vector<SimilaritySample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<double> values() const;
};

struct SsimConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  int window = 8;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  void validate() const;
};

/// Read-only view of an 8-bit patch with a row stride.
struct PatchView {
  const std::uint8_t* data = nullptr;
  int width = 0;
  int height = 0;
  int stride = 0;

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * stride + x]; }

  static PatchView of(std::span<const std::uint8_t> pixels, int width, int height);
  /// Sub-rectangle of a frame; the ROI must lie inside the frame.
  static PatchView crop(const Frame& frame, const Box& roi);
};

/// Mean SSIM over every window position (stride 1) using uniform-window
/// population statistics.
double ssim(const PatchView& a, const PatchView& b, const SsimConstants& consts = {});

/// e_t = ssim(ROI of frame t, ROI of the reference frame) for manifest
/// positions t = 0, stride, 2*stride, ... <= reference_position.
SimilaritySeries roi_series(const FrameManifest& manifest, const Box& roi, std::size_t reference_position, int stride,
                            const SsimConstants& consts = {});

/// Centre-point smoothing coefficients for a window of 2m+1 samples; also
/// available for any evaluation offset t in [-m, m] of the fitted polynomial.
std::vector<double> savgol_coefficients(int window, int order, int offset = 0);

struct SmoothedSeries {
  SimilaritySeries series;
  bool too_short = false;  // series shorter than the window; returned unchanged
};

/// Savitzky-Golay smoothing. Interior samples use the centre coefficients;
/// the first and last m samples evaluate the polynomial fitted to the
/// edge window, which keeps polynomials of degree <= order intact. Output is
/// clamped to [-1,1].
SmoothedSeries savgol(const SimilaritySeries& series, int window = 9, int order = 2);

struct Onset {
  std::size_t sample = 0;
  double timestamp_s = 0.0;
};

/// First sample opening a run of >= persistence consecutive samples above
/// the threshold.
std::optional<Onset> backtrack_onset(const SimilaritySeries& series, double threshold = 0.5, int persistence = 3);

}  // namespace sentinel

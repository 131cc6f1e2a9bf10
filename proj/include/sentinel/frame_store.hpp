#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sentinel {

/// Smallest frame side accepted anywhere in the pipeline; the SSIM window has
/// to fit inside a frame.
inline constexpr int kMinFrameSide = 8;

/// Single-channel 8-bit raster with its position in the video.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> luminance;  // row-major, width * height
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;

  std::uint8_t at(int x, int y) const { return luminance[static_cast<std::size_t>(y) * width + x]; }
  double mean() const;
};

/// Throws unless the frame satisfies the size invariants.
void validate_frame(const Frame& frame);

struct ManifestEntry {
  std::filesystem::path file;  // relative to FrameManifest::base_dir
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;

  bool operator==(const ManifestEntry&) const = default;
};

/// Ordered index of a video's extracted frames. Optional header directives
/// (`# width=W height=H effective_fps=F video_id=ID`) carry the declared
/// frame geometry and sampling rate.
struct FrameManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;
  double effective_fps = 1.0;
  std::optional<int> width;
  std::optional<int> height;
  std::string video_id;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  /// Position of frame_index within entries, if present.
  std::optional<std::size_t> position_of(std::int64_t frame_index) const;
};

FrameManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const FrameManifest& manifest, const std::filesystem::path& path);

/// Decodes the frame with the given frame_index.
Frame read_frame(const FrameManifest& manifest, std::int64_t frame_index);
/// Decodes the frame stored at a position of the manifest's entry list.
Frame read_frame_at(const FrameManifest& manifest, std::size_t position);

/// Drops every sample window whose first frame is (nearly) black. Windows are
/// [k * sample_period_s, (k+1) * sample_period_s) on the absolute timeline.
FrameManifest filter_corrupted(const FrameManifest& manifest, double mean_threshold = 5.0,
                               double sample_period_s = 30.0);

// PGM / PPM helpers.

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Reads binary PGM (P5) or PPM (P6, converted with integer ITU luma).
GrayImage read_pnm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const std::uint8_t> pixels);

/// Integer luma, round-to-nearest: (299 R + 587 G + 114 B + 500) / 1000.
constexpr std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

}  // namespace sentinel

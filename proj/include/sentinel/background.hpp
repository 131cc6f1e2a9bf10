#pragma once

#include "sentinel/frame_store.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sentinel {

struct GaussianComponent {
  float mean = 0.0f;
  float variance = 0.0f;
  float weight = 0.0f;
};

/// MOG2-style mixture parameters. Defaults follow common MOG2 practice.
struct MixtureParams {
  int max_components = 5;
  double learning_rate = 0.05;
  double var_init = 225.0;
  double var_floor = 4.0;
  double match_threshold_sq = 9.0;  // squared Mahalanobis distance (3 sigma)
  double background_ratio = 0.9;

  /// Throws Error naming the first offending field.
  void validate() const;
};

/// Upper bound on MixtureParams::max_components.
inline constexpr int kMaxMixtureComponents = 8;

/// Per-pixel Gaussian mixture. Components of each pixel are kept sorted by
/// descending weight / sigma and weights sum to one.
class MixtureModel {
 public:
  MixtureModel(int width, int height, MixtureParams params = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const MixtureParams& params() const { return params_; }

  /// Feeds one frame.
  void update(const Frame& frame);

  /// Feeds frames in order. Equivalent to calling update() on each, but walks
  /// the model one pixel block at a time so the block stays in cache across
  /// all frames. Pixel blocks are spread over `workers` threads.
  void update_batch(std::span<const Frame* const> frames, int workers = 1);

  std::span<const GaussianComponent> components(int x, int y) const;
  /// Replaces the components of one pixel; they are normalized and sorted.
  void set_components(int x, int y, std::span<const GaussianComponent> components);

  Frame render() const;

 private:
  void check_frame(const Frame& frame) const;
  void update_range(std::span<const Frame* const> frames, std::size_t begin, std::size_t end);

  int width_;
  int height_;
  MixtureParams params_;
  std::vector<GaussianComponent> components_;  // pixel-major, max_components per pixel
  std::vector<std::uint8_t> counts_;
};

/// Value-semantics wrapper: returns the model after one update.
MixtureModel update(MixtureModel model, const Frame& frame);

/// Per pixel: weighted mean of the leading components whose cumulative weight
/// first exceeds background_ratio, rounded to 8 bits.
Frame render_background(const MixtureModel& model);

enum class Direction { forward, backward, merged };

std::string_view to_string(Direction d);

struct BackgroundSnapshot {
  Frame frame;
  std::int64_t snapshot_index = 0;       // slot j on the original timeline
  std::int64_t source_frame_index = 0;   // frame_index of the frame fed last
  std::size_t source_position = 0;       // manifest position of that frame
  Direction direction = Direction::forward;
};

/// Runs the mixture over the manifest in the given order. Slot j covers
/// positions [j*interval, (j+1)*interval) for the J = size/interval complete
/// slots. Forward emits slot j after feeding position (j+1)*interval - 1;
/// backward feeds from the end and emits slot j after feeding position
/// j*interval. Both lists are returned in ascending slot order.
std::vector<BackgroundSnapshot> run_direction(const FrameManifest& manifest, Direction direction,
                                              int snapshot_interval, const MixtureParams& params = {},
                                              int workers = 1);

/// Slots j < floor(J/2) come from the backward pass, the rest from the
/// forward pass.
std::vector<BackgroundSnapshot> merge(std::span<const BackgroundSnapshot> forward,
                                      std::span<const BackgroundSnapshot> backward);

/// Writes `bg_<direction>_<snapshot_index>.pgm` for each snapshot.
void write_snapshots(std::span<const BackgroundSnapshot> snapshots, const std::filesystem::path& out_dir);

}  // namespace sentinel

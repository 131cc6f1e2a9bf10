#pragma once

#include "sentinel/detections.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sentinel {

/// Binary road/vehicle mask; true marks pixels where a stalled vehicle can be.
struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> road;  // 0 or 1, row-major

  bool is_road(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height && road[static_cast<std::size_t>(y) * width + x] != 0;
  }
  bool is_road(Point p) const;
};

/// Loads a 0/255 PGM mask. When expected dimensions are given they must match.
SegmentationMask load_mask(const std::filesystem::path& path, std::optional<int> expected_width = std::nullopt,
                           std::optional<int> expected_height = std::nullopt);
void write_mask(const SegmentationMask& mask, const std::filesystem::path& path);

struct KMeansResult {
  std::vector<Point> centroids;
  std::vector<int> assignment;
  double wcss = 0.0;
  /// Within-cluster sum of squares after every Lloyd update.
  std::vector<double> wcss_history;
  int iterations = 0;
};

/// Lloyd's algorithm from a seeded k-means++ start. Stops at an assignment
/// fixpoint or after max_iters updates.
KMeansResult kmeans(std::span<const Point> points, int k, int max_iters = 100, std::uint64_t seed = 0);

/// Lowest-wcss result of `restarts` k-means runs with seeds derived from `seed`.
KMeansResult kmeans_best_of(std::span<const Point> points, int k, int restarts, int max_iters, std::uint64_t seed);

struct ElbowOptions {
  int k_max = 8;
  std::uint64_t seed = 0;
  int restarts = 4;
  int max_iters = 100;
  /// A cloud whose RMS distance to its mean is at most this many pixels is a
  /// single cluster.
  double min_spread = 10.0;
};

struct ElbowResult {
  int k = 1;
  std::vector<double> wcss;  // wcss[i] belongs to k = i + 1
};

/// Picks K at the point of the (k, wcss) curve farthest from the chord
/// between its endpoints, with both axes scaled to [0,1].
ElbowResult elbow(std::span<const Point> points, const ElbowOptions& options);
int select_k_elbow(std::span<const Point> points, int k_max, std::uint64_t seed);

struct CandidateRegion {
  Point centroid;                    // (m, n)
  Box roi;                           // integral, clamped to the frame
  std::int64_t first_seen_snapshot;  // t_k
  std::vector<DetectionRecord> members;
};

struct CandidateOptions {
  ElbowOptions elbow;
  double roi_margin = 8.0;
};

/// Clusters record centroids, builds a margin-expanded ROI per cluster and
/// keeps clusters whose centroid lies on the road mask. Regions are ordered by
/// (first_seen_snapshot, centroid.x, centroid.y).
std::vector<CandidateRegion> build_candidates(std::span<const DetectionRecord> records, const SegmentationMask& mask,
                                              const CandidateOptions& options);

}  // namespace sentinel

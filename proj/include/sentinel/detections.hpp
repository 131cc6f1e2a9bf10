#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sentinel {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

/// Axis-aligned box, top-left corner plus size.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point center() const { return {x + w / 2.0, y + h / 2.0}; }
  bool contains(Point p) const { return p.x >= x && p.x <= right() && p.y >= y && p.y <= bottom(); }

  bool operator==(const Box&) const = default;
};

enum class VehicleClass { car, truck };

std::string_view to_string(VehicleClass c);

struct DetectionRecord {
  std::int64_t snapshot_index = 0;
  VehicleClass class_id = VehicleClass::car;
  double confidence = 0.0;
  Box box;

  Point centroid() const { return box.center(); }

  bool operator==(const DetectionRecord&) const = default;
};

/// Whole-video set of detection centroids, tagged with their snapshot.
struct CentroidCloud {
  struct Entry {
    Point p;
    std::int64_t snapshot_index = 0;
  };
  std::vector<Entry> points;

  static CentroidCloud from_records(std::span<const DetectionRecord> records);
};

/// Loads `<snapshot_index>,<class_id>,<confidence>,<x>,<y>,<w>,<h>` lines.
/// When frame bounds are given, centroids outside the frame are rejected.
/// Records come back sorted by (snapshot_index, confidence desc).
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path,
                                             std::optional<int> frame_width = std::nullopt,
                                             std::optional<int> frame_height = std::nullopt);
void write_detections(std::span<const DetectionRecord> records, const std::filesystem::path& path);

double iou(const Box& a, const Box& b);
/// 1 - IoU, the anchor-clustering distance.
double iou_distance(const Box& a, const Box& b);

/// Greedy per-snapshot NMS. Ties in confidence break on lexicographic
/// (x, y, w, h). Output is sorted by (snapshot_index, confidence desc).
std::vector<DetectionRecord> nms(std::span<const DetectionRecord> records, double iou_thresh = 0.5);

/// Uniform-grid index over a centroid cloud for k-th nearest neighbour queries.
class CentroidIndex {
 public:
  explicit CentroidIndex(const CentroidCloud& cloud);

  /// Distance from point `self` of the cloud to its k-th nearest other point,
  /// or nullopt when the cloud holds fewer than k other points.
  std::optional<double> knn_distance(std::size_t self, int k) const;
  /// Same, for an arbitrary query point; `exclude` optionally names a cloud
  /// point that is not counted as a neighbour.
  std::optional<double> knn_distance(Point query, int k, std::optional<std::size_t> exclude) const;

  /// Cloud position of the point equal to (p, snapshot_index), if any.
  std::optional<std::size_t> find(Point p, std::int64_t snapshot_index) const;

  const CentroidCloud& cloud() const { return *cloud_; }

 private:
  std::size_t cell_of(int cx, int cy) const { return static_cast<std::size_t>(cy) * cols_ + cx; }
  int col(double x) const;
  int row(double y) const;

  const CentroidCloud* cloud_;
  double min_x_ = 0.0, min_y_ = 0.0, cell_ = 1.0;
  int cols_ = 1, rows_ = 1;
  std::vector<std::size_t> cell_start_;  // CSR layout over cells
  std::vector<std::size_t> cell_items_;
};

/// k-th nearest neighbour distance of `query`, excluding the cloud point that
/// coincides with it (if any). nullopt when fewer than k neighbours exist.
std::optional<double> knn_distance(const CentroidCloud& cloud, Point query, int k);

/// Drops records whose centroid has d(k1) <= l1 over the cloud (static
/// objects mistaken for vehicles). Records without k1 neighbours are kept.
std::vector<DetectionRecord> filter_misclassified(std::span<const DetectionRecord> records,
                                                  const CentroidCloud& cloud, int k1, double l1);
std::vector<DetectionRecord> filter_misclassified(std::span<const DetectionRecord> records, int k1, double l1);

/// Drops records whose centroid has d(k2) >= l2 over the cloud (slow movers),
/// including records without k2 neighbours.
std::vector<DetectionRecord> filter_slow(std::span<const DetectionRecord> records, const CentroidCloud& cloud,
                                         int k2, double l2);
std::vector<DetectionRecord> filter_slow(std::span<const DetectionRecord> records, int k2, double l2);

}  // namespace sentinel

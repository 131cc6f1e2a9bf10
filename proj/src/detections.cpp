#include "sentinel/detections.hpp"

#include "sentinel/error.hpp"
#include "text_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

namespace sentinel {

namespace fs = std::filesystem;

std::string_view to_string(VehicleClass c) { return c == VehicleClass::car ? "car" : "truck"; }

CentroidCloud CentroidCloud::from_records(std::span<const DetectionRecord> records) {
  CentroidCloud cloud;
  cloud.points.reserve(records.size());
  for (const auto& r : records) cloud.points.push_back({r.centroid(), r.snapshot_index});
  return cloud;
}

namespace {

// Higher confidence first; ties on snapshot, then (x, y, w, h).
bool detection_order(const DetectionRecord& a, const DetectionRecord& b) {
  if (a.snapshot_index != b.snapshot_index) return a.snapshot_index < b.snapshot_index;
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  return std::tie(a.box.x, a.box.y, a.box.w, a.box.h) < std::tie(b.box.x, b.box.y, b.box.w, b.box.h);
}

}  // namespace

std::vector<DetectionRecord> load_detections(const fs::path& path, std::optional<int> frame_width,
                                             std::optional<int> frame_height) {
  const std::string source = path.string();
  const std::string content = text::read_file(path, "detection file");
  std::vector<DetectionRecord> records;
  for (const auto& line : text::lines(content)) {
    const auto f = text::split(line.content, ',');
    if (f.size() != 7)
      throw ParseError(source, line.number, "expected `<snapshot_index>,<class_id>,<confidence>,<x>,<y>,<w>,<h>`");
    DetectionRecord r;
    if (!text::parse_number(f[0], r.snapshot_index) || r.snapshot_index < 0)
      throw ParseError(source, line.number, "bad snapshot index");
    if (f[1] == "car")
      r.class_id = VehicleClass::car;
    else if (f[1] == "truck")
      r.class_id = VehicleClass::truck;
    else
      throw ParseError(source, line.number, fmt::format("unknown class `{}`", f[1]));
    if (!text::parse_number(f[2], r.confidence)) throw ParseError(source, line.number, "bad confidence");
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0))
      throw ParseError(source, line.number, fmt::format("confidence {} outside [0,1]", r.confidence));
    if (!text::parse_number(f[3], r.box.x) || !text::parse_number(f[4], r.box.y) ||
        !text::parse_number(f[5], r.box.w) || !text::parse_number(f[6], r.box.h))
      throw ParseError(source, line.number, "bad box coordinates");
    if (!(r.box.w > 0.0 && r.box.h > 0.0)) throw ParseError(source, line.number, "box width and height must be > 0");
    const Point c = r.centroid();
    if ((frame_width && !(c.x >= 0.0 && c.x < *frame_width)) || (frame_height && !(c.y >= 0.0 && c.y < *frame_height)))
      throw ParseError(source, line.number, fmt::format("centroid ({}, {}) outside the frame", c.x, c.y));
    records.push_back(r);
  }
  std::stable_sort(records.begin(), records.end(), detection_order);
  return records;
}

void write_detections(std::span<const DetectionRecord> records, const fs::path& path) {
  std::string out = "# snapshot_index,class_id,confidence,x,y,w,h\n";
  for (const auto& r : records)
    out += fmt::format("{},{},{},{},{},{},{}\n", r.snapshot_index, to_string(r.class_id), r.confidence, r.box.x,
                       r.box.y, r.box.w, r.box.h);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write detections: " + path.string());
  f << out;
  if (!f) throw Error("cannot write detections: " + path.string());
}

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

double iou_distance(const Box& a, const Box& b) { return 1.0 - iou(a, b); }

std::vector<DetectionRecord> nms(std::span<const DetectionRecord> records, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) throw Error(fmt::format("iou_thresh {} outside (0,1)", iou_thresh));
  std::vector<DetectionRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), detection_order);

  std::vector<DetectionRecord> kept;
  std::size_t group_begin = 0;
  while (group_begin < sorted.size()) {
    std::size_t group_end = group_begin;
    while (group_end < sorted.size() && sorted[group_end].snapshot_index == sorted[group_begin].snapshot_index)
      ++group_end;
    const std::size_t first_kept = kept.size();
    for (std::size_t i = group_begin; i < group_end; ++i) {
      const bool suppressed = std::any_of(kept.begin() + static_cast<std::ptrdiff_t>(first_kept), kept.end(),
                                          [&](const DetectionRecord& k) { return iou(k.box, sorted[i].box) > iou_thresh; });
      if (!suppressed) kept.push_back(sorted[i]);
    }
    group_begin = group_end;
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Grid kNN

CentroidIndex::CentroidIndex(const CentroidCloud& cloud) : cloud_(&cloud) {
  const auto& pts = cloud.points;
  if (pts.empty()) {
    cell_start_.assign(2, 0);
    return;
  }
  double max_x = pts[0].p.x, max_y = pts[0].p.y;
  min_x_ = max_x;
  min_y_ = max_y;
  for (const auto& e : pts) {
    min_x_ = std::min(min_x_, e.p.x);
    min_y_ = std::min(min_y_, e.p.y);
    max_x = std::max(max_x, e.p.x);
    max_y = std::max(max_y, e.p.y);
  }
  const double extent = std::max(max_x - min_x_, max_y - min_y_);
  const double per_side = std::ceil(std::sqrt(static_cast<double>(pts.size())));
  cell_ = extent > 0.0 ? extent / per_side : 1.0;
  cols_ = static_cast<int>(std::floor((max_x - min_x_) / cell_)) + 1;
  rows_ = static_cast<int>(std::floor((max_y - min_y_) / cell_)) + 1;

  std::vector<std::size_t> counts(static_cast<std::size_t>(cols_) * rows_ + 1, 0);
  std::vector<std::size_t> cell_of_point(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    cell_of_point[i] = cell_of(col(pts[i].p.x), row(pts[i].p.y));
    ++counts[cell_of_point[i] + 1];
  }
  for (std::size_t c = 1; c < counts.size(); ++c) counts[c] += counts[c - 1];
  cell_start_ = counts;
  cell_items_.resize(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) cell_items_[counts[cell_of_point[i]]++] = i;
}

int CentroidIndex::col(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - min_x_) / cell_)), 0, cols_ - 1);
}

int CentroidIndex::row(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - min_y_) / cell_)), 0, rows_ - 1);
}

std::optional<double> CentroidIndex::knn_distance(std::size_t self, int k) const {
  return knn_distance(cloud_->points.at(self).p, k, self);
}

std::optional<double> CentroidIndex::knn_distance(Point query, int k, std::optional<std::size_t> exclude) const {
  if (k < 1) throw Error(fmt::format("k = {} must be >= 1", k));
  const auto& pts = cloud_->points;
  const std::size_t available = pts.size() - (exclude && *exclude < pts.size() ? 1 : 0);
  if (available < static_cast<std::size_t>(k)) return std::nullopt;

  // Max-heap of the k smallest squared distances seen so far.
  std::vector<double> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  auto offer = [&](std::size_t i) {
    if (exclude && *exclude == i) return;
    const double dx = pts[i].p.x - query.x;
    const double dy = pts[i].p.y - query.y;
    const double d2 = dx * dx + dy * dy;
    if (heap.size() < static_cast<std::size_t>(k)) {
      heap.push_back(d2);
      std::push_heap(heap.begin(), heap.end());
    } else if (d2 < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = d2;
      std::push_heap(heap.begin(), heap.end());
    }
  };
  auto scan_cell = [&](int cx, int cy) {
    if (cx < 0 || cy < 0 || cx >= cols_ || cy >= rows_) return;
    const std::size_t c = cell_of(cx, cy);
    for (std::size_t j = cell_start_[c]; j < cell_start_[c + 1]; ++j) offer(cell_items_[j]);
  };

  const int qx = col(query.x);
  const int qy = row(query.y);
  const int max_ring = std::max(cols_, rows_);
  for (int r = 0; r <= max_ring; ++r) {
    if (r == 0) {
      scan_cell(qx, qy);
    } else {
      for (int dx = -r; dx <= r; ++dx) {
        scan_cell(qx + dx, qy - r);
        scan_cell(qx + dx, qy + r);
      }
      for (int dy = -r + 1; dy <= r - 1; ++dy) {
        scan_cell(qx - r, qy + dy);
        scan_cell(qx + r, qy + dy);
      }
    }
    // Unvisited points sit at least r cells away.
    if (heap.size() == static_cast<std::size_t>(k)) {
      const double bound = r * cell_;
      if (heap.front() <= bound * bound) break;
    }
  }
  return std::sqrt(heap.front());
}

std::optional<std::size_t> CentroidIndex::find(Point p, std::int64_t snapshot_index) const {
  const auto& pts = cloud_->points;
  if (pts.empty()) return std::nullopt;
  const std::size_t c = cell_of(col(p.x), row(p.y));
  for (std::size_t j = cell_start_[c]; j < cell_start_[c + 1]; ++j) {
    const auto& e = pts[cell_items_[j]];
    if (e.p == p && e.snapshot_index == snapshot_index) return cell_items_[j];
  }
  return std::nullopt;
}

std::optional<double> knn_distance(const CentroidCloud& cloud, Point query, int k) {
  const CentroidIndex index(cloud);
  std::optional<std::size_t> self;
  for (std::size_t i = 0; i < cloud.points.size() && !self; ++i)
    if (cloud.points[i].p == query) self = i;
  return index.knn_distance(query, k, self);
}

namespace {

template <typename Keep>
std::vector<DetectionRecord> filter_by_knn(std::span<const DetectionRecord> records, const CentroidCloud& cloud, int k,
                                           Keep keep) {
  const CentroidIndex index(cloud);
  std::vector<DetectionRecord> out;
  for (const auto& r : records) {
    const Point c = r.centroid();
    const auto d = index.knn_distance(c, k, index.find(c, r.snapshot_index));
    if (keep(d)) out.push_back(r);
  }
  return out;
}

void check_filter_args(std::string_view k_name, int k, std::string_view l_name, double l) {
  if (k < 1) throw Error(fmt::format("{} = {} must be >= 1", k_name, k));
  if (!(l > 0.0)) throw Error(fmt::format("{} = {} must be > 0", l_name, l));
}

}  // namespace

std::vector<DetectionRecord> filter_misclassified(std::span<const DetectionRecord> records, const CentroidCloud& cloud,
                                                  int k1, double l1) {
  check_filter_args("k1", k1, "l1", l1);
  return filter_by_knn(records, cloud, k1, [l1](std::optional<double> d) { return !d || *d > l1; });
}

std::vector<DetectionRecord> filter_misclassified(std::span<const DetectionRecord> records, int k1, double l1) {
  const auto cloud = CentroidCloud::from_records(records);
  return filter_misclassified(records, cloud, k1, l1);
}

std::vector<DetectionRecord> filter_slow(std::span<const DetectionRecord> records, const CentroidCloud& cloud, int k2,
                                         double l2) {
  check_filter_args("k2", k2, "l2", l2);
  return filter_by_knn(records, cloud, k2, [l2](std::optional<double> d) { return d && *d < l2; });
}

std::vector<DetectionRecord> filter_slow(std::span<const DetectionRecord> records, int k2, double l2) {
  const auto cloud = CentroidCloud::from_records(records);
  return filter_slow(records, cloud, k2, l2);
}

}  // namespace sentinel

#include "sentinel/candidates.hpp"

#include "sentinel/error.hpp"
#include "sentinel/frame_store.hpp"
#include "sentinel/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace sentinel {

bool SegmentationMask::is_road(Point p) const {
  return is_road(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)));
}

SegmentationMask load_mask(const std::filesystem::path& path, std::optional<int> expected_width,
                           std::optional<int> expected_height) {
  GrayImage img = read_pnm(path);
  if ((expected_width && *expected_width != img.width) || (expected_height && *expected_height != img.height))
    throw Error(fmt::format("mask {} is {}x{} but frames are {}x{}", path.string(), img.width, img.height,
                            expected_width.value_or(img.width), expected_height.value_or(img.height)));
  SegmentationMask mask{img.width, img.height, {}};
  mask.road.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto v = img.pixels[i];
    if (v != 0 && v != 255)
      throw Error(fmt::format("mask {} has non-binary value {} at pixel ({}, {})", path.string(), v,
                              i % static_cast<std::size_t>(img.width), i / static_cast<std::size_t>(img.width)));
    mask.road[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

void write_mask(const SegmentationMask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> pixels(mask.road.size());
  std::transform(mask.road.begin(), mask.road.end(), pixels.begin(),
                 [](std::uint8_t r) { return static_cast<std::uint8_t>(r ? 255 : 0); });
  write_pgm(path, mask.width, mask.height, pixels);
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double sq_dist(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

int nearest(Point p, std::span<const Point> centroids) {
  int best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    const double d = sq_dist(p, centroids[static_cast<std::size_t>(c)]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<Point> seed_plus_plus(std::span<const Point> points, int k, std::uint64_t seed) {
  RngStream rng(seed);
  const std::size_t n = points.size();
  std::vector<Point> centroids;
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  while (true) {
    centroids.push_back(points[pick]);
    chosen[pick] = true;
    if (static_cast<int>(centroids.size()) == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points[i], points[pick]));
      total += d2[i];
    }
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      std::size_t last_positive = 0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        last_positive = i;
        cum += d2[i];
        if (cum > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;
    } else {
      // Every point coincides with a centre already; take the first unused one.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const Point> points, int k, int max_iters, std::uint64_t seed) {
  if (k < 1) throw Error(fmt::format("kmeans: k = {} must be >= 1", k));
  if (static_cast<std::size_t>(k) > points.size())
    throw Error(fmt::format("kmeans: k = {} exceeds the {} points", k, points.size()));
  if (max_iters < 1) throw Error(fmt::format("kmeans: max_iters = {} must be >= 1", max_iters));

  KMeansResult result;
  result.centroids = seed_plus_plus(points, k, seed);
  const std::size_t n = points.size();
  std::vector<int> assignment(n, -1);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest(points[i], result.centroids);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<double> sx(static_cast<std::size_t>(k), 0.0), sy(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      sx[c] += points[i].x;
      sy[c] += points[i].y;
      ++count[c];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
      if (count[c] > 0) result.centroids[c] = {sx[c] / static_cast<double>(count[c]), sy[c] / static_cast<double>(count[c])};

    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += sq_dist(points[i], result.centroids[static_cast<std::size_t>(assignment[i])]);
    result.wcss_history.push_back(wcss);
    result.iterations = iter + 1;
  }
  result.assignment = std::move(assignment);
  result.wcss = result.wcss_history.empty() ? 0.0 : result.wcss_history.back();
  return result;
}

KMeansResult kmeans_best_of(std::span<const Point> points, int k, int restarts, int max_iters, std::uint64_t seed) {
  const CounterRng seeds(seed);
  std::optional<KMeansResult> best;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto run = kmeans(points, k, max_iters, seeds.at(static_cast<std::uint64_t>(r)));
    if (!best || run.wcss < best->wcss) best = std::move(run);
  }
  return std::move(*best);
}

ElbowResult elbow(std::span<const Point> points, const ElbowOptions& options) {
  if (points.empty()) throw Error("elbow selection needs at least one point");
  if (options.k_max < 1) throw Error(fmt::format("k_max = {} must be >= 1", options.k_max));

  ElbowResult result;
  const int k_top = std::min<int>(options.k_max, static_cast<int>(points.size()));
  for (int k = 1; k <= k_top; ++k)
    result.wcss.push_back(kmeans_best_of(points, k, options.restarts, options.max_iters, options.seed).wcss);

  result.k = 1;
  if (points.size() <= 2 || k_top < 2) return result;
  const double spread = std::sqrt(result.wcss.front() / static_cast<double>(points.size()));
  if (spread <= options.min_spread) return result;
  const double drop = result.wcss.front() - result.wcss.back();
  if (!(drop > 0.0)) return result;

  // With the chord normalized to run from (0,1) to (1,0), the perpendicular
  // distance is proportional to 1 - x - y.
  double best_score = 0.0;
  for (int k = 2; k < k_top; ++k) {
    const double x = static_cast<double>(k - 1) / (k_top - 1);
    const double y = (result.wcss[static_cast<std::size_t>(k - 1)] - result.wcss.back()) / drop;
    const double score = 1.0 - x - y;
    if (score > best_score) {
      best_score = score;
      result.k = k;
    }
  }
  return result;
}

int select_k_elbow(std::span<const Point> points, int k_max, std::uint64_t seed) {
  ElbowOptions options;
  options.k_max = k_max;
  options.seed = seed;
  return elbow(points, options).k;
}

std::vector<CandidateRegion> build_candidates(std::span<const DetectionRecord> records, const SegmentationMask& mask,
                                              const CandidateOptions& options) {
  if (!(options.roi_margin >= 0.0)) throw Error(fmt::format("roi_margin = {} must be >= 0", options.roi_margin));
  if (records.empty()) return {};

  std::vector<Point> points;
  points.reserve(records.size());
  for (const auto& r : records) points.push_back(r.centroid());

  const int k = elbow(points, options.elbow).k;
  const auto clusters =
      kmeans_best_of(points, k, options.elbow.restarts, options.elbow.max_iters, options.elbow.seed);

  std::vector<CandidateRegion> regions;
  for (int c = 0; c < k; ++c) {
    CandidateRegion region;
    region.centroid = clusters.centroids[static_cast<std::size_t>(c)];
    region.first_seen_snapshot = std::numeric_limits<std::int64_t>::max();
    double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
    double x1 = -x0, y1 = -x0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (clusters.assignment[i] != c) continue;
      const auto& r = records[i];
      region.members.push_back(r);
      region.first_seen_snapshot = std::min(region.first_seen_snapshot, r.snapshot_index);
      x0 = std::min(x0, r.box.x);
      y0 = std::min(y0, r.box.y);
      x1 = std::max(x1, r.box.right());
      y1 = std::max(y1, r.box.bottom());
    }
    if (region.members.empty()) continue;
    if (!mask.is_road(region.centroid)) continue;

    const double left = std::clamp(std::floor(x0 - options.roi_margin), 0.0, static_cast<double>(mask.width));
    const double top = std::clamp(std::floor(y0 - options.roi_margin), 0.0, static_cast<double>(mask.height));
    const double right = std::clamp(std::ceil(x1 + options.roi_margin), 0.0, static_cast<double>(mask.width));
    const double bottom = std::clamp(std::ceil(y1 + options.roi_margin), 0.0, static_cast<double>(mask.height));
    region.roi = {left, top, right - left, bottom - top};
    regions.push_back(std::move(region));
  }
  std::sort(regions.begin(), regions.end(), [](const CandidateRegion& a, const CandidateRegion& b) {
    return std::tie(a.first_seen_snapshot, a.centroid.x, a.centroid.y) <
           std::tie(b.first_seen_snapshot, b.centroid.x, b.centroid.y);
  });
  return regions;
}

}  // namespace sentinel

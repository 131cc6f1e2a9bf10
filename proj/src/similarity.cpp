#include "sentinel/similarity.hpp"

#include "sentinel/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace sentinel {

std::vector<double> SimilaritySeries::values() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.value);
  return out;
}

void SsimConstants::validate() const {
  if (!(k1 > 0.0) || !(k2 > 0.0) || !(dynamic_range > 0.0))
    throw Error("ssim constants k1, k2 and dynamic_range must be positive");
  if (window < 4) throw Error(fmt::format("ssim window {} must be >= 4", window));
}

PatchView PatchView::of(std::span<const std::uint8_t> pixels, int width, int height) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) throw Error("patch size does not match pixel count");
  return {pixels.data(), width, height, width};
}

PatchView PatchView::crop(const Frame& frame, const Box& roi) {
  const auto x = static_cast<int>(roi.x), y = static_cast<int>(roi.y);
  const auto w = static_cast<int>(roi.w), h = static_cast<int>(roi.h);
  if (x != roi.x || y != roi.y || w != roi.w || h != roi.h)
    throw Error(fmt::format("roi ({}, {}, {}, {}) is not pixel aligned", roi.x, roi.y, roi.w, roi.h));
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > frame.width || y + h > frame.height)
    throw Error(fmt::format("roi ({}, {}, {}, {}) outside the {}x{} frame", x, y, w, h, frame.width, frame.height));
  return {frame.luminance.data() + static_cast<std::size_t>(y) * frame.width + x, w, h, frame.width};
}

namespace {

// Summed-area tables of a, b, a^2, b^2 and ab in exact integer arithmetic.
struct MomentTables {
  int w1;
  std::vector<std::int64_t> a, b, aa, bb, ab;

  MomentTables(const PatchView& pa, const PatchView& pb) : w1(pa.width + 1) {
    const std::size_t size = static_cast<std::size_t>(pa.width + 1) * (pa.height + 1);
    a.assign(size, 0);
    b.assign(size, 0);
    aa.assign(size, 0);
    bb.assign(size, 0);
    ab.assign(size, 0);
    for (int y = 0; y < pa.height; ++y) {
      std::int64_t ra = 0, rb = 0, raa = 0, rbb = 0, rab = 0;
      for (int x = 0; x < pa.width; ++x) {
        const std::int64_t va = pa.at(x, y), vb = pb.at(x, y);
        ra += va;
        rb += vb;
        raa += va * va;
        rbb += vb * vb;
        rab += va * vb;
        const std::size_t i = idx(x + 1, y + 1), up = idx(x + 1, y);
        a[i] = a[up] + ra;
        b[i] = b[up] + rb;
        aa[i] = aa[up] + raa;
        bb[i] = bb[up] + rbb;
        ab[i] = ab[up] + rab;
      }
    }
  }

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w1 + x; }

  std::int64_t box(const std::vector<std::int64_t>& t, int x, int y, int n) const {
    return t[idx(x + n, y + n)] - t[idx(x, y + n)] - t[idx(x + n, y)] + t[idx(x, y)];
  }
};

}  // namespace

double ssim(const PatchView& a, const PatchView& b, const SsimConstants& consts) {
  consts.validate();
  if (a.width != b.width || a.height != b.height)
    throw Error(fmt::format("ssim patches differ in size: {}x{} vs {}x{}", a.width, a.height, b.width, b.height));
  const int n = consts.window;
  if (a.width < n || a.height < n)
    throw Error(fmt::format("ssim patch {}x{} smaller than the {}-pixel window", a.width, a.height, n));

  const MomentTables t(a, b);
  const std::int64_t count = static_cast<std::int64_t>(n) * n;
  const double c1 = consts.c1(), c2 = consts.c2();
  const double n2 = static_cast<double>(count) * static_cast<double>(count);
  double total = 0.0;
  for (int y = 0; y + n <= a.height; ++y) {
    for (int x = 0; x + n <= a.width; ++x) {
      const std::int64_t sa = t.box(t.a, x, y, n), sb = t.box(t.b, x, y, n);
      const double mu_a = static_cast<double>(sa) / count;
      const double mu_b = static_cast<double>(sb) / count;
      const double var_a = static_cast<double>(count * t.box(t.aa, x, y, n) - sa * sa) / n2;
      const double var_b = static_cast<double>(count * t.box(t.bb, x, y, n) - sb * sb) / n2;
      const double cov = static_cast<double>(count * t.box(t.ab, x, y, n) - sa * sb) / n2;
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
  }
  const double positions = static_cast<double>(a.width - n + 1) * (a.height - n + 1);
  return std::clamp(total / positions, -1.0, 1.0);
}

SimilaritySeries roi_series(const FrameManifest& manifest, const Box& roi, std::size_t reference_position, int stride,
                            const SsimConstants& consts) {
  if (stride < 1) throw Error(fmt::format("backtracking stride {} must be >= 1", stride));
  if (reference_position >= manifest.size())
    throw Error(fmt::format("reference position {} is not in the manifest", reference_position));
  const Frame reference = read_frame_at(manifest, reference_position);
  const PatchView ref_patch = PatchView::crop(reference, roi);

  SimilaritySeries series;
  for (std::size_t t = 0; t <= reference_position; t += static_cast<std::size_t>(stride)) {
    const Frame frame = t == reference_position ? reference : read_frame_at(manifest, t);
    series.samples.push_back({frame.frame_index, frame.timestamp_s, ssim(PatchView::crop(frame, roi), ref_patch, consts)});
  }
  return series;
}

// ---------------------------------------------------------------------------
// Savitzky-Golay via Gram polynomials

namespace {

// a (a-1) ... (a-b+1)
double generalized_factorial(int a, int b) {
  double out = 1.0;
  for (int j = a - b + 1; j <= a; ++j) out *= j;
  return out;
}

// Gram polynomial of degree k over the 2m+1 points -m..m, evaluated at i.
double gram(int i, int m, int k) {
  if (k < 0) return 0.0;
  double prev = 0.0, cur = 1.0;
  for (int j = 1; j <= k; ++j) {
    const double denom = j * (2.0 * m - j + 1);
    const double next = (4.0 * j - 2.0) / denom * i * cur - ((j - 1.0) * (2.0 * m + j)) / denom * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

void check_savgol_args(int window, int order) {
  if (window < 1 || window % 2 == 0) throw Error(fmt::format("savgol window {} must be odd and positive", window));
  if (order < 0 || order >= window)
    throw Error(fmt::format("savgol order {} must be in [0, window) for window {}", order, window));
}

}  // namespace

std::vector<double> savgol_coefficients(int window, int order, int offset) {
  check_savgol_args(window, order);
  const int m = window / 2;
  if (offset < -m || offset > m) throw Error(fmt::format("savgol offset {} outside [-{}, {}]", offset, m, m));
  std::vector<double> h(static_cast<std::size_t>(window), 0.0);
  for (int i = -m; i <= m; ++i) {
    double sum = 0.0;
    for (int k = 0; k <= order; ++k)
      sum += (2.0 * k + 1.0) * generalized_factorial(2 * m, k) / generalized_factorial(2 * m + k + 1, k + 1) *
             gram(i, m, k) * gram(offset, m, k);
    h[static_cast<std::size_t>(i + m)] = sum;
  }
  return h;
}

SmoothedSeries savgol(const SimilaritySeries& series, int window, int order) {
  check_savgol_args(window, order);
  const std::size_t len = series.size();
  if (len < static_cast<std::size_t>(window)) return {series, true};

  const int m = window / 2;
  std::vector<std::vector<double>> edge(static_cast<std::size_t>(window));
  for (int t = -m; t <= m; ++t) edge[static_cast<std::size_t>(t + m)] = savgol_coefficients(window, order, t);
  const auto& centre = edge[static_cast<std::size_t>(m)];

  const auto values = series.values();
  auto apply = [&](const std::vector<double>& h, std::size_t centre_pos) {
    double acc = 0.0;
    for (int i = -m; i <= m; ++i)
      acc += h[static_cast<std::size_t>(i + m)] * values[centre_pos + static_cast<std::size_t>(i + m) - static_cast<std::size_t>(m)];
    return acc;
  };

  SmoothedSeries out{series, false};
  const std::size_t um = static_cast<std::size_t>(m);
  for (std::size_t p = 0; p < len; ++p) {
    double v;
    if (p < um)
      v = apply(edge[p], um);
    else if (p + um >= len)
      v = apply(edge[p - (len - 1 - um) + um], len - 1 - um);
    else
      v = apply(centre, p);
    out.series.samples[p].value = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

std::optional<Onset> backtrack_onset(const SimilaritySeries& series, double threshold, int persistence) {
  if (persistence < 1) throw Error(fmt::format("persistence {} must be >= 1", persistence));
  int run = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    run = series.samples[i].value > threshold ? run + 1 : 0;
    if (run == persistence) {
      const std::size_t first = i + 1 - static_cast<std::size_t>(persistence);
      return Onset{first, series.samples[first].timestamp_s};
    }
  }
  return std::nullopt;
}

}  // namespace sentinel

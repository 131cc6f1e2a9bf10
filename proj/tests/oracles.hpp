#pragma once

// Slow, direct implementations used as references by the tests. None of them
// share code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

// Mean SSIM over all window positions, population statistics, plain sums.
inline double ssim(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b, int w, int h, int win,
                   double c1, double c2) {
  double total = 0.0;
  int count = 0;
  const double n = static_cast<double>(win) * win;
  for (int y0 = 0; y0 + win <= h; ++y0) {
    for (int x0 = 0; x0 + win <= w; ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + win; ++y)
        for (int x = x0; x < x0 + win; ++x) {
          ma += a[y * w + x];
          mb += b[y * w + x];
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + win; ++y)
        for (int x = x0; x < x0 + win; ++x) {
          const double da = a[y * w + x] - ma, db = b[y * w + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

// Least-squares polynomial of the given order through (xs, ys), evaluated at x0.
inline double polyfit_eval(const std::vector<double>& xs, const std::vector<double>& ys, int order, double x0) {
  const int m = order + 1;
  std::vector<std::vector<long double>> a(m, std::vector<long double>(m + 1, 0.0L));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<long double> pw(2 * m, 1.0L);
    for (int k = 1; k < 2 * m; ++k) pw[k] = pw[k - 1] * xs[i];
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) a[r][c] += pw[r + c];
      a[r][m] += pw[r] * ys[i];
    }
  }
  for (int c = 0; c < m; ++c) {
    int piv = c;
    for (int r = c + 1; r < m; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (int r = 0; r < m; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (int k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
    }
  }
  long double v = 0.0L, p = 1.0L;
  for (int k = 0; k < m; ++k) {
    v += a[k][m] / a[k][k] * p;
    p *= x0;
  }
  return static_cast<double>(v);
}

// Savitzky-Golay by refitting every window. Edge samples use the first or
// last full window. Local coordinates keep the fit well conditioned.
inline std::vector<double> savgol(const std::vector<double>& y, int window, int order) {
  const int n = static_cast<int>(y.size());
  const int half = window / 2;
  if (n < window) return y;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int start = std::clamp(i - half, 0, n - window);
    std::vector<double> xs, ys;
    for (int j = start; j < start + window; ++j) {
      xs.push_back(j - (start + half));
      ys.push_back(y[j]);
    }
    out[i] = std::clamp(polyfit_eval(xs, ys, order, i - (start + half)), -1.0, 1.0);
  }
  return out;
}

// k-th smallest distance from points[self] to the other points.
inline std::optional<double> knn(const std::vector<std::pair<double, double>>& pts, std::size_t self, int k) {
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (i != self) d.push_back(std::hypot(pts[i].first - pts[self].first, pts[i].second - pts[self].second));
  if (static_cast<int>(d.size()) < k) return std::nullopt;
  std::sort(d.begin(), d.end());
  return d[k - 1];
}

struct Rect {
  double x, y, w, h;
};

inline double iou(const Rect& a, const Rect& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// Indices kept by greedy NMS: a box survives when no higher-ranked survivor
// overlaps it by more than the threshold. rank(i) < rank(j) means i first.
inline std::vector<std::size_t> nms(const std::vector<Rect>& boxes, const std::vector<double>& conf, double thresh) {
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (conf[a] != conf[b]) return conf[a] > conf[b];
    const auto& p = boxes[a];
    const auto& q = boxes[b];
    return std::tie(p.x, p.y, p.w, p.h) < std::tie(q.x, q.y, q.w, q.h);
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t j : kept) suppressed = suppressed || iou(boxes[i], boxes[j]) > thresh;
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

// One MOG update in double precision, full renormalization and full sort.
struct Gauss {
  double mean, var, weight;
};

inline void mog_update(std::vector<Gauss>& c, double x, double alpha, double var_init, double var_floor,
                       double match_sq, std::size_t max_components) {
  if (c.empty()) {
    c.push_back({x, var_init, 1.0});
    return;
  }
  int best = -1;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = x - c[i].mean;
    if (d * d < match_sq * c[i].var && (best < 0 || c[i].weight > c[best].weight)) best = static_cast<int>(i);
  }
  for (auto& g : c) g.weight *= 1.0 - alpha;
  if (best >= 0) {
    auto& m = c[best];
    m.weight += alpha;
    const double rho = std::min(1.0, alpha / m.weight);
    const double d = x - m.mean;
    m.mean += rho * d;
    m.var = std::max(var_floor, m.var + rho * (d * d - m.var));
  } else if (c.size() < max_components) {
    c.push_back({x, var_init, alpha});
  } else {
    std::size_t low = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
      if (c[i].weight <= c[low].weight) low = i;
    c[low] = {x, var_init, alpha};
  }
  double sum = 0;
  for (auto& g : c) sum += g.weight;
  for (auto& g : c) g.weight /= sum;
  std::stable_sort(c.begin(), c.end(), [](const Gauss& a, const Gauss& b) {
    return a.weight / std::sqrt(a.var) > b.weight / std::sqrt(b.var);
  });
}

// Nearest-rank percentile: the ceil(p*n)-th smallest value.
inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()) - 1e-9));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

// Maximum bipartite matching size (Kuhn's augmenting paths).
inline std::size_t max_matching(std::size_t left, std::size_t right,
                                const std::function<bool(std::size_t, std::size_t)>& edge) {
  std::vector<int> owner(right, -1);
  std::size_t size = 0;
  for (std::size_t l = 0; l < left; ++l) {
    std::vector<bool> seen(right, false);
    std::function<bool(std::size_t)> augment = [&](std::size_t u) {
      for (std::size_t r = 0; r < right; ++r) {
        if (!edge(u, r) || seen[r]) continue;
        seen[r] = true;
        if (owner[r] < 0 || augment(static_cast<std::size_t>(owner[r]))) {
          owner[r] = static_cast<int>(u);
          return true;
        }
      }
      return false;
    };
    if (augment(l)) ++size;
  }
  return size;
}

// Area under (alpha, precision) points on [0,1] with flat extension to both ends.
inline double apd(std::vector<std::pair<double, double>> pts) {
  if (pts.empty()) return 0.0;
  std::sort(pts.begin(), pts.end());
  double area = pts.front().first * pts.front().second;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  area += (1.0 - pts.back().first) * pts.back().second;
  return area;
}

// CUSUM statistic by folding the recursion.
inline std::vector<double> cusum(const std::vector<double>& e, double gamma, double s0 = 0.0) {
  std::vector<double> out;
  double s = s0;
  for (double v : e) {
    s = std::max(0.0, s + v - gamma);
    out.push_back(s);
  }
  return out;
}

}  // namespace oracle

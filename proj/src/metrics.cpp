#include "sentinel/metrics.hpp"

#include "text_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <tuple>

namespace sentinel {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content, std::string_view what) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write {}: {}", what, path.string()));
  f << content;
  if (!f) throw Error(fmt::format("cannot write {}: {}", what, path.string()));
}

// `<video_id> <time> [extra]` lines.
template <typename Make>
auto load_events(const fs::path& path, std::string_view what, Make make) {
  const std::string source = path.string();
  const std::string content = text::read_file(path, what);
  std::vector<decltype(make(std::string_view{}, 0.0, std::optional<double>{}, 0))> out;
  for (const auto& line : text::lines(content)) {
    const auto f = text::split_ws(line.content);
    if (f.size() < 2 || f.size() > 3) throw ParseError(source, line.number, "expected `<video_id> <seconds> [value]`");
    double t = 0.0;
    if (!text::parse_number(f[1], t) || !std::isfinite(t) || t < 0.0)
      throw ParseError(source, line.number, "bad time");
    std::optional<double> extra;
    if (f.size() == 3) {
      double v = 0.0;
      if (!text::parse_number(f[2], v) || !std::isfinite(v)) throw ParseError(source, line.number, "bad value");
      extra = v;
    }
    out.push_back(make(f[0], t, extra, line.number));
  }
  return out;
}

}  // namespace

std::vector<GroundTruthEvent> load_ground_truth(const fs::path& path) {
  const std::string source = path.string();
  return load_events(path, "ground truth file",
                     [&](std::string_view id, double t, std::optional<double> end, int line) {
                       if (end && !(*end > t)) throw ParseError(source, line, "end_s must exceed start_s");
                       return GroundTruthEvent{std::string(id), t, end};
                     });
}

std::vector<PredictedEvent> load_predictions(const fs::path& path) {
  return load_events(path, "predictions file", [](std::string_view id, double t, std::optional<double> score, int) {
    return PredictedEvent{std::string(id), t, score};
  });
}

void write_ground_truth(std::span<const GroundTruthEvent> events, const fs::path& path) {
  std::string out = "# video_id start_s [end_s]\n";
  for (const auto& e : events) {
    out += fmt::format("{} {}", e.video_id, e.start_s);
    if (e.end_s) out += fmt::format(" {}", *e.end_s);
    out += '\n';
  }
  write_text(path, out, "ground truth");
}

void write_predictions(std::span<const PredictedEvent> events, const fs::path& path) {
  std::string out = "# video_id predicted_start_s [score]\n";
  for (const auto& e : events) {
    out += fmt::format("{} {}", e.video_id, e.predicted_start_s);
    if (e.score) out += fmt::format(" {}", *e.score);
    out += '\n';
  }
  write_text(path, out, "predictions");
}

Matching match_events(std::span<const PredictedEvent> preds, std::span<const GroundTruthEvent> gts, double window_s) {
  if (!(window_s >= 0.0)) throw Error(fmt::format("window_s = {} must be >= 0", window_s));
  struct Candidate {
    double gap;
    double gt_start;
    double pred_start;
    std::size_t gt;
    std::size_t pred;
  };
  std::map<std::string_view, std::vector<std::size_t>> gts_by_video;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_video[gts[g].video_id].push_back(g);

  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    auto it = gts_by_video.find(preds[p].video_id);
    if (it == gts_by_video.end()) continue;
    for (std::size_t g : it->second) {
      const double gap = std::abs(preds[p].predicted_start_s - gts[g].start_s);
      if (gap <= window_s) candidates.push_back({gap, gts[g].start_s, preds[p].predicted_start_s, g, p});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.gap, a.gt_start, a.pred_start, a.gt, a.pred) <
           std::tie(b.gap, b.gt_start, b.pred_start, b.gt, b.pred);
  });

  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  Matching m;
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    m.tp.push_back({c.pred, c.gt, c.gap});
  }
  for (std::size_t p = 0; p < preds.size(); ++p)
    if (!pred_used[p]) m.fp.push_back(p);
  for (std::size_t g = 0; g < gts.size(); ++g)
    if (!gt_used[g]) m.fn.push_back(g);
  return m;
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn, Warnings* warnings) {
  if (tp + fp + fn == 0) {
    warn(warnings, "F1 undefined with no events; reported as 0");
    return 0.0;
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fn + fp);
}

double rmse(std::span<const double> delays_s) {
  if (delays_s.empty()) return 0.0;
  double sum = 0.0;
  for (double d : delays_s) sum += d * d;
  return std::sqrt(sum / static_cast<double>(delays_s.size()));
}

double nrmse(std::span<const double> delays_s, double cap_s, Warnings* warnings) {
  if (!(cap_s > 0.0)) throw Error(fmt::format("NRMSE cap {} must be > 0", cap_s));
  if (delays_s.empty()) {
    warn(warnings, "no true positives; NRMSE reported as 1");
    return 1.0;
  }
  return std::min(rmse(delays_s), cap_s) / cap_s;
}

double s4(double f1_value, double nrmse_value) {
  if (!(f1_value >= 0.0 && f1_value <= 1.0)) throw Error(fmt::format("F1 {} outside [0,1]", f1_value));
  if (!(nrmse_value >= 0.0 && nrmse_value <= 1.0)) throw Error(fmt::format("NRMSE {} outside [0,1]", nrmse_value));
  return f1_value * (1.0 - nrmse_value);
}

EvalReport evaluate(std::span<const PredictedEvent> preds, std::span<const GroundTruthEvent> gts, double window_s,
                    double cap_s) {
  EvalReport r;
  r.matching = match_events(preds, gts, window_s);
  r.tp = r.matching.tp.size();
  r.fp = r.matching.fp.size();
  r.fn = r.matching.fn.size();
  std::vector<double> delays;
  for (const auto& pair : r.matching.tp) delays.push_back(pair.delay_s);
  r.f1 = f1(r.tp, r.fp, r.fn, &r.warnings);
  r.rmse_s = rmse(delays);
  r.nrmse = nrmse(delays, cap_s, &r.warnings);
  r.s4 = s4(r.f1, r.nrmse);
  if (std::abs(r.s4 - r.f1 * (1.0 - r.nrmse)) > 1e-9) throw Error("inconsistent S4 in evaluation report");
  return r;
}

std::string format_report(const EvalReport& r, std::span<const PredictedEvent> preds,
                          std::span<const GroundTruthEvent> gts) {
  std::string out;
  out += fmt::format("TP {}  FP {}  FN {}\n", r.tp, r.fp, r.fn);
  out += fmt::format("F1     {:.4f}\nRMSE   {:.4f} s\nNRMSE  {:.6f}\nS4     {:.4f}\n", r.f1, r.rmse_s, r.nrmse, r.s4);
  for (const auto& w : r.warnings) out += fmt::format("warning: {}\n", w);
  out += "\nmatches\n";
  out += fmt::format("{:<16} {:>12} {:>12} {:>10}\n", "video_id", "predicted_s", "truth_s", "delay_s");
  for (const auto& m : r.matching.tp)
    out += fmt::format("{:<16} {:>12.3f} {:>12.3f} {:>10.3f}\n", preds[m.pred].video_id, preds[m.pred].predicted_start_s,
                       gts[m.gt].start_s, m.delay_s);
  for (std::size_t p : r.matching.fp)
    out += fmt::format("{:<16} {:>12.3f} {:>12} {:>10}\n", preds[p].video_id, preds[p].predicted_start_s, "-", "FP");
  for (std::size_t g : r.matching.fn)
    out += fmt::format("{:<16} {:>12} {:>12.3f} {:>10}\n", gts[g].video_id, "-", gts[g].start_s, "FN");
  out += "\n# csv\ntp,fp,fn,f1,rmse_s,nrmse,s4\n";
  out += fmt::format("{},{},{},{},{},{},{}\n", r.tp, r.fp, r.fn, r.f1, r.rmse_s, r.nrmse, r.s4);
  return out;
}

PrecisionDelayCurve precision_delay_curve(std::span<const OperatingRun> runs, std::span<const GroundTruthEvent> gts,
                                          double window_s, double delay_cap_s, Warnings* warnings) {
  if (!(delay_cap_s > 0.0)) throw Error(fmt::format("delay_cap_s = {} must be > 0", delay_cap_s));
  if (runs.empty()) throw Error("precision-delay curve needs at least one operating point");
  PrecisionDelayCurve curve;
  curve.delay_cap_s = delay_cap_s;
  std::vector<CurvePoint> points;
  for (const auto& run : runs) {
    if (run.preds.empty()) {
      warn(warnings, fmt::format("operating point h={} raised no alarms and adds no curve point", run.h));
      continue;
    }
    const Matching m = match_events(run.preds, gts, window_s);
    const double precision = static_cast<double>(m.tp.size()) / static_cast<double>(m.tp.size() + m.fp.size());
    double alpha = 1.0;
    if (!m.tp.empty()) {
      double total = 0.0;
      for (const auto& pair : m.tp) total += pair.delay_s;
      alpha = std::min(total / static_cast<double>(m.tp.size()), delay_cap_s) / delay_cap_s;
    }
    points.push_back({alpha, precision, run.h});
  }
  std::stable_sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    if (a.alpha_delay != b.alpha_delay) return a.alpha_delay < b.alpha_delay;
    return a.precision > b.precision;
  });
  for (const auto& p : points)
    if (curve.points.empty() || curve.points.back().alpha_delay != p.alpha_delay) curve.points.push_back(p);
  curve.apd = curve.points.empty() ? 0.0 : apd(curve);
  return curve;
}

double apd(const PrecisionDelayCurve& curve) {
  const auto& pts = curve.points;
  if (pts.empty()) throw Error("APD of an empty precision-delay curve");
  double area = pts.front().precision * pts.front().alpha_delay;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += 0.5 * (pts[i].precision + pts[i - 1].precision) * (pts[i].alpha_delay - pts[i - 1].alpha_delay);
  area += pts.back().precision * (1.0 - pts.back().alpha_delay);
  return std::clamp(area, 0.0, 1.0);
}

std::string format_curve_csv(const PrecisionDelayCurve& curve) {
  std::string out = "alpha,precision\n";
  for (const auto& p : curve.points) out += fmt::format("{},{}\n", p.alpha_delay, p.precision);
  return out;
}

}  // namespace sentinel

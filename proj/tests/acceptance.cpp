// Acceptance suite. Prints one PASS/FAIL line per criterion with its runtime
// and limit; exits nonzero when any criterion fails.

#include "oracles.hpp"
#include "sentinel/background.hpp"
#include "sentinel/candidates.hpp"
#include "sentinel/detections.hpp"
#include "sentinel/metrics.hpp"
#include "sentinel/pipeline.hpp"
#include "sentinel/rng.hpp"
#include "sentinel/sequential.hpp"
#include "sentinel/similarity.hpp"
#include "sentinel/synth.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

using namespace sentinel;
using support::TempDir;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void expect(bool condition, const std::string& what) {
    if (!condition && ok) detail = what;
    ok = ok && condition;
  }
};

int failures = 0;

void criterion(const char* id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = fmt::format("exception: {}", e.what());
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = elapsed < limit_s;
  const bool pass = o.ok && in_time;
  if (!pass) ++failures;
  std::string note = o.detail;
  if (!in_time) note = fmt::format("too slow{}{}", note.empty() ? "" : "; ", note);
  fmt::print("{} {} {}  [{:.3f} s / limit {} s]{}{}\n", pass ? "PASS" : "FAIL", id, title, elapsed, limit_s,
             note.empty() ? "" : "  ", note);
  std::fflush(stdout);
}

SimilaritySeries series_of(const std::vector<double>& values) {
  SimilaritySeries s;
  s.samples.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    s.samples.push_back({static_cast<std::int64_t>(i), static_cast<double>(i), values[i]});
  return s;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
  Outcome o;
  const double score = s4(0.9157, 8.4027 / 300.0);
  o.expect(std::fabs(score - 0.8900) < 5e-4, fmt::format("S4 = {}", score));
  o.expect(nrmse(std::vector<double>{8.4027}) == 8.4027 / 300.0, "NRMSE of a single delay");
  return o;
}

Outcome ac2() {
  Outcome o;
  RngStream rng(CounterRng(2));
  for (int i = 0; i < 10000 && o.ok; ++i) {
    const std::size_t tp = rng.below(50), fp = rng.below(50), fn = rng.below(50);
    const double f = f1(tp, fp, fn);
    std::vector<double> delays;
    const std::size_t n = 1 + rng.below(20);
    for (std::size_t k = 0; k < n; ++k) delays.push_back(rng.uniform(0, 600));
    const double cap = rng.uniform(1, 400);
    const double nr = nrmse(delays, cap);
    const double s = s4(f, nr);
    o.expect(f >= 0 && f <= 1, fmt::format("F1 = {}", f));
    o.expect(nr >= 0 && nr <= 1, fmt::format("NRMSE = {}", nr));
    o.expect(s >= 0 && s <= 1, fmt::format("S4 = {}", s));
    const double f_hi = rng.uniform(f, 1), nr_lo = rng.uniform(0, nr);
    o.expect(s4(f_hi, nr) >= s, "S4 not monotone in F1");
    o.expect(s4(f, nr_lo) >= s, "S4 not monotone in -NRMSE");
    // One more delay far beyond the cap can only raise NRMSE.
    auto longer = delays;
    longer.push_back(cap * 2);
    o.expect(nrmse(longer, cap) >= nr || nr == 1.0, "NRMSE fell after adding a capped delay");
  }
  return o;
}

// Shoulder stalls on an 800x410 road with two lanes of passing traffic.
synth::SceneSpec ac3_scene(int index, bool noisy) {
  RngStream rng(CounterRng(3000 + static_cast<std::uint64_t>(index)));
  synth::SceneSpec s;
  s.video_id = fmt::format("acc{:02d}", index);
  s.width = 800;
  s.height = 410;
  s.duration_s = 900;
  s.seed = 100 + static_cast<std::uint64_t>(index);
  s.road = {{0, 140, 800, 160}};
  // Low-contrast asphalt, patterned vehicles, moderate sensor noise.
  s.texture_amplitude = 5;
  s.vehicle_texture = 50;
  s.noise_sigma = 6;
  const int tracks = 4 + static_cast<int>(rng.below(5));
  for (int i = 0; i < tracks; ++i) {
    const bool east = rng.below(2) == 0;
    const double speed = rng.uniform(8, 16);
    const double enter = rng.uniform(60, 700);
    synth::VehicleTrack t;
    t.w = 36;
    t.h = 18;
    t.y0 = east ? 190 : 235;
    t.x0 = east ? 0 : 800 - t.w;
    t.vx = east ? speed : -speed;
    t.enter_s = enter;
    t.exit_s = enter + (800 - t.w - 1) / speed;
    t.luminance = static_cast<std::uint8_t>(rng.uniform(180, 235));
    s.tracks.push_back(t);
  }
  std::vector<double> slots{60, 370, 680};
  for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.below(i)]);
  const std::size_t stalls = 1 + rng.below(3);
  for (std::size_t i = 0; i < stalls; ++i) {
    synth::StallEvent e;
    const bool top = rng.below(2) == 0;
    e.box = {slots[i] + rng.uniform(-20, 20), top ? 145.0 : 275.0, 44, 20};
    // Late enough to leave a clean background, early enough for four detector snapshots.
    e.onset_s = std::round(rng.uniform(150, 330));
    e.luminance = static_cast<std::uint8_t>(rng.uniform(200, 240));
    s.stalls.push_back(e);
  }
  if (noisy) s.detector_sim = {0.1, 3.0, 0.05, 0.8, 0.99};
  return s;
}

Outcome ac3() {
  Outcome o;
  const PipelineConfig cfg;
  const double tolerance = std::max(2.0 * cfg.stride, static_cast<double>(cfg.snapshot_interval));
  std::vector<PredictedEvent> clean_preds, noisy_preds;
  std::vector<GroundTruthEvent> gts;
  for (int i = 0; i < 20; ++i) {
    TempDir dir;
    const auto spec = ac3_scene(i, false);
    const auto scene = synth::generate(spec, dir.path());
    const auto prepared = prepare_video(load_manifest(scene.manifest_path), cfg);
    const auto mask = load_mask(scene.mask_path, spec.width, spec.height);
    const auto clean = analyze(prepared, spec.video_id, scene.detections, mask, cfg, {});
    const auto noisy = analyze(prepared, spec.video_id, synth::simulate_detections(ac3_scene(i, true)), mask, cfg, {});
    clean_preds.insert(clean_preds.end(), clean.predictions.begin(), clean.predictions.end());
    noisy_preds.insert(noisy_preds.end(), noisy.predictions.begin(), noisy.predictions.end());
    gts.insert(gts.end(), scene.truth.begin(), scene.truth.end());
  }
  const auto clean = match_events(clean_preds, gts, tolerance);
  const auto noisy = match_events(noisy_preds, gts, tolerance);
  const double clean_f1 = f1(clean.tp.size(), clean.fp.size(), clean.fn.size());
  const double noisy_f1 = f1(noisy.tp.size(), noisy.fp.size(), noisy.fn.size());
  o.expect(clean_f1 == 1.0, fmt::format("zero-noise F1 = {:.4f} (TP {} FP {} FN {})", clean_f1, clean.tp.size(),
                                        clean.fp.size(), clean.fn.size()));
  o.expect(noisy_f1 >= 0.9, fmt::format("noisy F1 = {:.4f} (TP {} FP {} FN {})", noisy_f1, noisy.tp.size(),
                                        noisy.fp.size(), noisy.fn.size()));
  if (o.ok)
    o.detail = fmt::format("{} stalls; F1 {:.4f} clean, {:.4f} noisy", gts.size(), clean_f1, noisy_f1);
  return o;
}

Outcome ac4() {
  Outcome o;
  RngStream rng(CounterRng(4));
  const std::size_t n = 1'000'000;
  std::vector<double> e(n);
  for (auto& v : e) v = rng.uniform(0, 1);
  const double gamma = 0.5;
  const auto series = series_of(e);
  const auto batch = cusum_trace(series, gamma);
  o.expect(batch == oracle::cusum(e, gamma), "batch trace differs from the fold");
  CusumState state;
  bool same = batch.size() == n;
  for (std::size_t i = 0; i < n && same; ++i) {
    state = cusum_step(state, e[i], gamma);
    same = state.s == batch[i];
  }
  o.expect(same && state.t == n, "streaming steps differ from the batch trace");
  // Chunked resume over uneven cuts.
  CusumConfig cfg{gamma, 1e300};
  CusumState resume;
  std::size_t at = 0;
  bool chunks_same = true;
  while (at < n) {
    const std::size_t len = std::min<std::size_t>(n - at, 1 + rng.below(50000));
    const auto run = detect_run(series_of({e.begin() + static_cast<std::ptrdiff_t>(at),
                                           e.begin() + static_cast<std::ptrdiff_t>(at + len)}),
                                cfg, resume);
    chunks_same = chunks_same && !run.alarm &&
                  std::equal(run.trace.begin(), run.trace.end(), batch.begin() + static_cast<std::ptrdiff_t>(at));
    resume = run.state;
    at += len;
  }
  o.expect(chunks_same && resume == state, "chunked resume differs from the batch trace");

  // Zero drift: evidence never above gamma keeps the statistic at 0.
  std::vector<double> low(n);
  for (auto& v : low) v = rng.uniform(0, 0.4);
  const auto zero = cusum_trace(series_of(low), 0.4);
  o.expect(std::all_of(zero.begin(), zero.end(), [](double s) { return s == 0.0; }), "nonzero statistic under drift");

  // Isolated spikes before tau, a persistent shift after it.
  const std::size_t tau = 300;
  std::vector<double> v;
  for (std::size_t i = 0; i < 400; ++i) {
    if (i >= tau)
      v.push_back(rng.uniform(0.7, 0.95));
    else if (i % 40 == 20)
      v.push_back(rng.uniform(0.7, 0.95));
    else
      v.push_back(rng.uniform(0.0, 0.3));
  }
  const double g = 0.5, h = 1.0;
  std::size_t single_shot_false = 0;
  for (std::size_t i = 0; i < tau; ++i) single_shot_false += v[i] > g;
  o.expect(single_shot_false >= 1, "single-shot thresholding raised no false alarm");
  const auto alarm = detect(series_of(v), CusumConfig{g, h});
  o.expect(alarm.has_value(), "persistent change not detected");
  if (alarm) o.expect(alarm->sample >= tau, fmt::format("sequential false alarm at {}", alarm->sample));
  if (o.ok) o.detail = fmt::format("{} single-shot false alarms, CUSUM alarm {} samples after tau",
                                   single_shot_false, alarm->sample - tau);
  return o;
}

Outcome ac5() {
  Outcome o;
  RngStream rng(CounterRng(5));
  const SsimConstants k;
  double worst = 0, worst_sym = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = 8 + static_cast<int>(rng.below(25)), h = 8 + static_cast<int>(rng.below(25));
    std::vector<std::uint8_t> a(static_cast<std::size_t>(w) * h), b(a.size());
    const int mode = i % 3;
    for (std::size_t p = 0; p < a.size(); ++p) {
      a[p] = static_cast<std::uint8_t>(rng.below(256));
      if (mode == 0)
        b[p] = static_cast<std::uint8_t>(rng.below(256));
      else
        b[p] = static_cast<std::uint8_t>(std::clamp<int>(a[p] + static_cast<int>(rng.below(41)) - 20, 0, 255));
    }
    const auto pa = PatchView::of(a, w, h), pb = PatchView::of(b, w, h);
    const double got = ssim(pa, pb, k);
    worst = std::max(worst, std::fabs(got - oracle::ssim(a, b, w, h, k.window, k.c1(), k.c2())));
    worst_sym = std::max(worst_sym, std::fabs(got - ssim(pb, pa, k)));
    o.expect(ssim(pa, pa, k) == 1.0, "ssim(x,x) != 1");
  }
  o.expect(worst <= 1e-9, fmt::format("oracle error {}", worst));
  o.expect(worst_sym <= 1e-12, fmt::format("asymmetry {}", worst_sym));
  if (o.ok) o.detail = fmt::format("max oracle error {:.2e}", worst);
  return o;
}

Outcome ac6() {
  Outcome o;
  RngStream rng(CounterRng(6));
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const int window = 2 * (2 + static_cast<int>(rng.below(6))) + 1;  // 5..15
    const int order = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(window - 1, 5))));
    const int degree = static_cast<int>(rng.below(static_cast<std::uint64_t>(order + 1)));
    const int n = window + static_cast<int>(rng.below(40));
    std::vector<double> coef(static_cast<std::size_t>(degree) + 1);
    for (auto& c : coef) c = rng.uniform(-1, 1);
    // Scale so the polynomial stays inside [-1,1] on the sample range.
    std::vector<double> y(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      const double x = static_cast<double>(t) / (n - 1);
      double v = 0, p = 1;
      for (double c : coef) {
        v += c * p;
        p *= x;
      }
      y[static_cast<std::size_t>(t)] = v / static_cast<double>(coef.size());
    }
    const auto out = savgol(series_of(y), window, order);
    o.expect(!out.too_short, "series unexpectedly short");
    for (int t = 0; t < n; ++t)
      worst = std::max(worst, std::fabs(out.series.samples[static_cast<std::size_t>(t)].value - y[static_cast<std::size_t>(t)]));
  }
  o.expect(worst <= 1e-9, fmt::format("max reproduction error {}", worst));
  if (o.ok) o.detail = fmt::format("max reproduction error {:.2e}", worst);
  return o;
}

Outcome ac7() {
  Outcome o;
  // Constant scene against the closed-form recursion.
  const MixtureParams params;
  MixtureModel m(64, 48, params);
  for (int t = 1; t <= 50; ++t) {
    m.update(support::flat_frame(64, 48, 137, t));
    const double var = std::max(params.var_floor, params.var_init * std::pow(1.0 - params.learning_rate, t - 1));
    for (int y = 0; y < 48; y += 7)
      for (int x = 0; x < 64; x += 9) {
        const auto c = m.components(x, y);
        o.expect(c.size() == 1 && std::fabs(c[0].mean - 137.0) < 1e-4 && std::fabs(c[0].variance - var) <= 1e-4 * var,
                 fmt::format("recursion mismatch at frame {}", t));
      }
  }
  const auto bg = render_background(m);
  o.expect(std::all_of(bg.luminance.begin(), bg.luminance.end(), [](std::uint8_t v) { return std::abs(v - 137) <= 1; }),
           "background off by more than 1 after 50 frames");

  // Palindrome: forward snapshot k equals backward snapshot J-1-k exactly.
  TempDir dir;
  const auto manifest = support::synthetic_video(dir.path(), 40, 30, 240, [](int t, int x, int y) {
    const int u = std::min(t, 239 - t);
    return static_cast<std::uint8_t>((u * 29 + x * 7 + y * 13 + (u / 17) * 45) % 256);
  });
  for (int interval : {24, 40, 60, 120}) {
    const auto fwd = run_direction(manifest, Direction::forward, interval);
    const auto bwd = run_direction(manifest, Direction::backward, interval);
    o.expect(fwd.size() == bwd.size() && !fwd.empty(), "snapshot counts differ");
    for (std::size_t k = 0; k < fwd.size() && o.ok; ++k)
      o.expect(fwd[k].frame.luminance == bwd[fwd.size() - 1 - k].frame.luminance,
               fmt::format("palindrome asymmetry at interval {} slot {}", interval, k));
  }
  return o;
}

DetectionRecord record(RngStream& rng, double x, double y, double w, double h) {
  DetectionRecord r;
  r.snapshot_index = static_cast<std::int64_t>(rng.below(8));
  r.confidence = std::round(rng.uniform(0, 10)) / 10;
  r.box = {x - w / 2, y - h / 2, w, h};
  return r;
}

Outcome ac8() {
  Outcome o;
  RngStream rng(CounterRng(8));
  for (int trial = 0; trial < 100 && o.ok; ++trial) {
    // Cloud: a few tight clusters (static objects), a loose cluster and scattered points.
    std::vector<DetectionRecord> rs;
    const int clusters = 1 + static_cast<int>(rng.below(4));
    for (int c = 0; c < clusters; ++c) {
      const double cx = rng.uniform(50, 750), cy = rng.uniform(50, 360), spread = rng.uniform(0.5, 15);
      const int n = 3 + static_cast<int>(rng.below(40));
      for (int i = 0; i < n; ++i)
        rs.push_back(record(rng, cx + rng.uniform(-spread, spread), cy + rng.uniform(-spread, spread), 30, 16));
    }
    const int scattered = static_cast<int>(rng.below(60));
    for (int i = 0; i < scattered; ++i) rs.push_back(record(rng, rng.uniform(0, 800), rng.uniform(0, 410), 30, 16));

    const auto cloud = CentroidCloud::from_records(rs);
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rs) pts.emplace_back(r.centroid().x, r.centroid().y);
    const int k1 = 1 + static_cast<int>(rng.below(25)), k2 = 1 + static_cast<int>(rng.below(5));
    const double l1 = rng.uniform(1, 10), l2 = rng.uniform(5, 60);
    std::vector<DetectionRecord> want_miss, want_slow;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const auto d1 = oracle::knn(pts, i, k1);
      const auto d2 = oracle::knn(pts, i, k2);
      if (!d1 || *d1 > l1) want_miss.push_back(rs[i]);
      if (d2 && *d2 < l2) want_slow.push_back(rs[i]);
    }
    o.expect(filter_misclassified(rs, cloud, k1, l1) == want_miss, fmt::format("misclassification filter, cloud {}", trial));
    o.expect(filter_slow(rs, cloud, k2, l2) == want_slow, fmt::format("slow filter, cloud {}", trial));

    // NMS within one snapshot against the all-pairs oracle.
    std::vector<DetectionRecord> boxes;
    std::vector<oracle::Rect> rects;
    std::vector<double> conf;
    const int nb = 5 + static_cast<int>(rng.below(60));
    for (int i = 0; i < nb; ++i) {
      auto r = record(rng, rng.uniform(20, 200), rng.uniform(20, 200), rng.uniform(5, 50), rng.uniform(5, 50));
      r.snapshot_index = 0;
      boxes.push_back(r);
      rects.push_back({r.box.x, r.box.y, r.box.w, r.box.h});
      conf.push_back(r.confidence);
    }
    const double thresh = rng.uniform(0.1, 0.9);
    const auto expect = oracle::nms(rects, conf, thresh);
    const auto got = nms(boxes, thresh);
    bool same = got.size() == expect.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i] == boxes[expect[i]];
    o.expect(same, fmt::format("nms, cloud {}", trial));

    // k-means: wcss nonincreasing, same seed same result.
    std::vector<Point> ps;
    for (const auto& r : rs) ps.push_back(r.centroid());
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min<std::size_t>(ps.size(), 6))));
    const std::uint64_t seed = rng.next();
    const auto a = kmeans(ps, k, 100, seed), b = kmeans(ps, k, 100, seed);
    for (std::size_t i = 1; i < a.wcss_history.size(); ++i)
      o.expect(a.wcss_history[i] <= a.wcss_history[i - 1] * (1 + 1e-12), fmt::format("wcss rose, cloud {}", trial));
    o.expect(a.centroids == b.centroids && a.assignment == b.assignment && a.wcss == b.wcss,
             fmt::format("kmeans not deterministic, cloud {}", trial));
  }
  return o;
}

Outcome ac9() {
  Outcome o;
  RngStream rng(CounterRng(9));
  for (int trial = 0; trial < 200; ++trial) {
    PrecisionDelayCurve c;
    std::vector<std::pair<double, double>> pts;
    double a = 0;
    const int n = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) {
      a += rng.uniform(0.001, 0.12);
      const double p = rng.uniform(0, 1);
      c.points.push_back({a, p, 0});
      pts.emplace_back(a, p);
    }
    const double got = apd(c), want = oracle::apd(pts);
    o.expect(std::fabs(got - want) <= 1e-9, fmt::format("APD {} vs oracle {}", got, want));
  }
  PrecisionDelayCurve flat;
  flat.points = {{0.1, 0.7, 0}, {0.4, 0.7, 0}, {0.9, 0.7, 0}};
  o.expect(std::fabs(apd(flat) - 0.7) <= 1e-12, "constant precision");
  PrecisionDelayCurve line;
  line.points = {{0.0, 1.0, 0}, {1.0, 0.0, 0}};
  o.expect(std::fabs(apd(line) - 0.5) <= 1e-12, "(0,1)-(1,0) line");
  return o;
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const auto cmd = fmt::format("'{}' {} > '{}' 2>&1", support::cli_path(), args, log.string());
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome ac10() {
  Outcome o;
  TempDir dir;
  auto spec = ac3_scene(7, true);
  spec.video_id = "determinism";
  synth::generate(spec, dir / "scene");
  const auto scene = (dir / "scene").string();
  const auto log = dir / "log.txt";
  o.expect(run_cli(fmt::format("--workers 1 run '{}' --out '{}'", scene, (dir / "a").string()), log) == 0, "first run failed");
  o.expect(run_cli(fmt::format("--workers 1 run '{}' --out '{}'", scene, (dir / "b").string()), log) == 0, "second run failed");
  o.expect(run_cli(fmt::format("--workers 8 run '{}' --out '{}'", scene, (dir / "c").string()), log) == 0, "8-worker run failed");
  const auto a = support::read_text(dir / "a" / "predictions.txt");
  o.expect(!load_predictions(dir / "a" / "predictions.txt").empty(), "no predictions to compare");
  o.expect(a == support::read_text(dir / "b" / "predictions.txt"), "repeat run differs");
  o.expect(a == support::read_text(dir / "c" / "predictions.txt"), "1 vs 8 workers differ");
  return o;
}

}  // namespace

int main() {
  criterion("AC-1", "metric arithmetic reproduces S4 = 0.8900", 0.001, ac1);
  criterion("AC-2", "metric bounds and monotonicity, 10^4 cases", 5, ac2);
  criterion("AC-3", "end-to-end on 20 synthetic scenes", 300, ac3);
  criterion("AC-4", "CUSUM streaming equals batch on 10^6 samples; spikes vs persistent change", 30, ac4);
  criterion("AC-5", "SSIM equals the direct-summation oracle on 1000 pairs", 10, ac5);
  criterion("AC-6", "Savitzky-Golay reproduces polynomials", 5, ac6);
  criterion("AC-7", "background converges on a constant scene; palindrome symmetry", 30, ac7);
  criterion("AC-8", "kNN filters, NMS and k-means against oracles", 60, ac8);
  criterion("AC-9", "APD trapezoid oracle and closed forms", 1, ac9);
  criterion("AC-10", "run is byte-identical across repeats and worker counts", 120, ac10);
  fmt::print("{} of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include "sentinel/synth.hpp"

#include "sentinel/error.hpp"
#include "sentinel/rng.hpp"
#include "text_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

namespace sentinel::synth {

namespace fs = std::filesystem;

namespace {

// Substreams of the scene seed.
constexpr std::uint64_t kTextureStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kDetectorStream = 2;
constexpr std::uint64_t kVehicleStream = 3;

bool box_inside(const Box& b, int width, int height) {
  return b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0 && b.right() <= width && b.bottom() <= height;
}

std::string box_str(const Box& b) { return fmt::format("({}, {}, {}, {})", b.x, b.y, b.w, b.h); }

void fill_box(std::vector<std::uint8_t>& pixels, int width, int height, const Box& b, std::uint8_t value) {
  const int x0 = std::clamp(static_cast<int>(std::lround(b.x)), 0, width);
  const int x1 = std::clamp(static_cast<int>(std::lround(b.right())), 0, width);
  const int y0 = std::clamp(static_cast<int>(std::lround(b.y)), 0, height);
  const int y1 = std::clamp(static_cast<int>(std::lround(b.bottom())), 0, height);
  for (int y = y0; y < y1; ++y)
    std::fill(pixels.begin() + static_cast<std::ptrdiff_t>(y) * width + x0,
              pixels.begin() + static_cast<std::ptrdiff_t>(y) * width + x1, value);
}

// Box filled with `value` plus a pattern of 2x2 blocks anchored at the box's
// top-left corner, so the pattern travels with the vehicle.
void fill_vehicle(std::vector<std::uint8_t>& pixels, int width, int height, const Box& b, std::uint8_t value,
                  double amplitude, const CounterRng& pattern) {
  if (amplitude <= 0) {
    fill_box(pixels, width, height, b, value);
    return;
  }
  const long ox = std::lround(b.x), oy = std::lround(b.y);
  const int x0 = std::clamp(static_cast<int>(ox), 0, width);
  const int x1 = std::clamp(static_cast<int>(std::lround(b.right())), 0, width);
  const int y0 = std::clamp(static_cast<int>(oy), 0, height);
  const int y1 = std::clamp(static_cast<int>(std::lround(b.bottom())), 0, height);
  const auto cols = static_cast<std::uint64_t>(std::ceil(b.w / 2.0)) + 1;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const auto block = static_cast<std::uint64_t>((y - oy) / 2) * cols + static_cast<std::uint64_t>((x - ox) / 2);
      const double v = value + (pattern.uniform(block) - 0.5) * 2.0 * amplitude;
      pixels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
}

}  // namespace

std::int64_t SceneSpec::frame_count() const {
  return static_cast<std::int64_t>(std::floor(duration_s * effective_fps + 1e-9));
}

bool SceneSpec::corrupted(double t) const {
  return std::any_of(corrupted_windows.begin(), corrupted_windows.end(),
                     [t](const CorruptedWindow& w) { return t >= w.start_s && t < w.end_s; });
}

void SceneSpec::validate() const {
  if (width < kMinFrameSide || height < kMinFrameSide)
    throw Error(fmt::format("scene size {}x{} below the {}-pixel minimum", width, height, kMinFrameSide));
  if (!(duration_s > 0) || !(effective_fps > 0)) throw Error("duration_s and effective_fps must be positive");
  if (frame_count() < 1) throw Error("scene has no frames");
  if (snapshot_interval < 1) throw Error("snapshot_interval must be >= 1");
  if (static_level < 0 || static_level > 255) throw Error("static_level outside [0,255]");
  if (!(noise_sigma >= 0 && noise_sigma <= 40)) throw Error("noise_sigma outside [0,40]");
  if (!(texture_amplitude >= 0 && texture_amplitude <= 127)) throw Error("texture_amplitude outside [0,127]");
  if (!(vehicle_texture >= 0 && vehicle_texture <= 127)) throw Error("vehicle_texture outside [0,127]");
  for (const auto& t : tracks) {
    if (!(t.exit_s > t.enter_s)) throw Error("track exit_s must exceed enter_s");
    if (!box_inside(t.box_at(t.enter_s), width, height) || !box_inside(t.box_at(t.exit_s), width, height))
      throw Error(fmt::format("track starting at {} leaves the frame", box_str(t.box_at(t.enter_s))));
  }
  for (const auto& s : stalls) {
    if (!box_inside(s.box, width, height)) throw Error(fmt::format("stall box {} outside the frame", box_str(s.box)));
    if (!(s.onset_s >= 0 && s.onset_s < duration_s)) throw Error(fmt::format("stall onset {} outside the video", s.onset_s));
    if (s.release_s && !(*s.release_s > s.onset_s)) throw Error("stall release_s must exceed onset_s");
  }
  const auto& d = detector_sim;
  auto rate = [](double v) { return v >= 0 && v <= 1; };
  if (!rate(d.miss_rate) || !rate(d.false_positive_rate)) throw Error("detector rates must lie in [0,1]");
  if (!(d.jitter_px >= 0)) throw Error("detector jitter must be >= 0");
  if (!(0 <= d.confidence_lo && d.confidence_lo <= d.confidence_hi && d.confidence_hi <= 1))
    throw Error("detector confidence bounds must satisfy 0 <= lo <= hi <= 1");
  for (const auto& w : corrupted_windows)
    if (!(w.end_s > w.start_s)) throw Error("corrupted window end must exceed start");
  for (const auto& r : road)
    if (!box_inside(r, width, height)) throw Error(fmt::format("road rectangle {} outside the frame", box_str(r)));
}

// ---------------------------------------------------------------------------
// Scene grammar

namespace {

std::vector<double> numbers(std::string_view value, std::size_t min_count, std::size_t max_count,
                            const std::string& source, int line) {
  std::vector<double> out;
  for (auto f : text::split(value, ',')) {
    double v = 0;
    if (!text::parse_number(f, v) || !std::isfinite(v)) throw ParseError(source, line, fmt::format("bad number `{}`", f));
    out.push_back(v);
  }
  if (out.size() < min_count || out.size() > max_count)
    throw ParseError(source, line, fmt::format("expected {} to {} comma-separated numbers", min_count, max_count));
  return out;
}

std::uint8_t luminance_arg(double v, const std::string& source, int line) {
  if (!(v >= 0 && v <= 255)) throw ParseError(source, line, "luminance outside [0,255]");
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace

SceneSpec parse_scene_spec(std::string_view content, const std::string& source) {
  SceneSpec spec;
  for (const auto& line : text::lines(content)) {
    const auto eq = line.content.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line.number, "expected key=value");
    const auto key = text::trim(line.content.substr(0, eq));
    const auto value = text::trim(line.content.substr(eq + 1));
    auto one = [&]() { return numbers(value, 1, 1, source, line.number)[0]; };
    auto integer = [&]() {
      const double v = one();
      if (v != std::floor(v)) throw ParseError(source, line.number, fmt::format("{} must be an integer", key));
      return static_cast<long long>(v);
    };
    if (key == "video_id") {
      if (value.empty() || value.find_first_of(" \t") != std::string_view::npos)
        throw ParseError(source, line.number, "video_id must be a single word");
      spec.video_id = std::string(value);
    } else if (key == "width") {
      spec.width = static_cast<int>(integer());
    } else if (key == "height") {
      spec.height = static_cast<int>(integer());
    } else if (key == "duration_s") {
      spec.duration_s = one();
    } else if (key == "effective_fps") {
      spec.effective_fps = one();
    } else if (key == "snapshot_interval") {
      spec.snapshot_interval = static_cast<int>(integer());
    } else if (key == "static_layer") {
      if (value == "flat")
        spec.static_layer = StaticLayer::flat;
      else if (value == "gradient")
        spec.static_layer = StaticLayer::gradient;
      else if (value == "texture")
        spec.static_layer = StaticLayer::texture;
      else
        throw ParseError(source, line.number, fmt::format("unknown static_layer `{}`", value));
    } else if (key == "static_level") {
      spec.static_level = static_cast<int>(integer());
    } else if (key == "texture_amplitude") {
      spec.texture_amplitude = one();
    } else if (key == "vehicle_texture") {
      spec.vehicle_texture = one();
    } else if (key == "noise_sigma") {
      spec.noise_sigma = one();
    } else if (key == "seed") {
      const long long v = integer();
      if (v < 0) throw ParseError(source, line.number, "seed must be >= 0");
      spec.seed = static_cast<std::uint64_t>(v);
    } else if (key == "road") {
      const auto v = numbers(value, 4, 4, source, line.number);
      spec.road.push_back({v[0], v[1], v[2], v[3]});
    } else if (key == "corrupted") {
      const auto v = numbers(value, 2, 2, source, line.number);
      spec.corrupted_windows.push_back({v[0], v[1]});
    } else if (key == "track") {
      const auto v = numbers(value, 8, 9, source, line.number);
      VehicleTrack t{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], 220};
      if (v.size() == 9) t.luminance = luminance_arg(v[8], source, line.number);
      spec.tracks.push_back(t);
    } else if (key == "stall") {
      const auto v = numbers(value, 5, 7, source, line.number);
      StallEvent s;
      s.box = {v[0], v[1], v[2], v[3]};
      s.onset_s = v[4];
      // A negative release means "until the end of the video".
      if (v.size() >= 6 && v[5] >= 0) s.release_s = v[5];
      if (v.size() == 7) s.luminance = luminance_arg(v[6], source, line.number);
      spec.stalls.push_back(s);
    } else if (key == "detector") {
      const auto v = numbers(value, 5, 5, source, line.number);
      spec.detector_sim = {v[0], v[1], v[2], v[3], v[4]};
    } else {
      throw ParseError(source, line.number, fmt::format("unknown key `{}`", key));
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
  return spec;
}

SceneSpec load_scene_spec(const fs::path& path) {
  return parse_scene_spec(text::read_file(path, "scene spec"), path.string());
}

// ---------------------------------------------------------------------------
// Rendering

std::vector<std::int8_t> noise_table(double sigma) {
  constexpr std::size_t kSize = 65536;
  std::vector<std::int8_t> table(kSize, 0);
  if (sigma <= 0) return table;
  // Standard normal CDF at the rounding boundary k + 1/2.
  auto cdf = [sigma](int k) { return 0.5 * std::erfc(-(k + 0.5) / (sigma * std::sqrt(2.0))); };
  int k = -127;
  for (std::size_t i = 0; i < kSize; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / kSize;
    while (k < 127 && cdf(k) <= u) ++k;
    table[i] = static_cast<std::int8_t>(k);
  }
  return table;
}

std::vector<std::uint8_t> render_static_layer(const SceneSpec& spec) {
  const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
  std::vector<std::uint8_t> layer(n, static_cast<std::uint8_t>(spec.static_level));
  if (spec.static_layer == StaticLayer::gradient) {
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const double v = spec.static_level - 40.0 + 80.0 * x / std::max(1, spec.width - 1) + 10.0 * y / spec.height;
        layer[static_cast<std::size_t>(y) * spec.width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  } else if (spec.static_layer == StaticLayer::texture) {
    // Asphalt-like texture: independent values on 2x2 blocks around the level.
    const CounterRng rng = CounterRng(spec.seed).split(kTextureStream);
    const int bw = (spec.width + 1) / 2;
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        const auto block = static_cast<std::uint64_t>((y / 2) * bw + x / 2);
        const double v = spec.static_level + (rng.uniform(block) - 0.5) * 2.0 * spec.texture_amplitude;
        layer[static_cast<std::size_t>(y) * spec.width + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
  }
  return layer;
}

Frame render_frame(const SceneSpec& spec, std::int64_t frame_index, const std::vector<std::uint8_t>& static_layer) {
  Frame f;
  f.width = spec.width;
  f.height = spec.height;
  f.frame_index = frame_index;
  f.timestamp_s = spec.timestamp(frame_index);
  const double t = f.timestamp_s;
  if (spec.corrupted(t)) {
    f.luminance.assign(static_layer.size(), 0);
    return f;
  }
  f.luminance = static_layer;
  const CounterRng patterns = CounterRng(spec.seed).split(kVehicleStream);
  for (std::size_t i = 0; i < spec.tracks.size(); ++i) {
    const auto& track = spec.tracks[i];
    if (t >= track.enter_s && t < track.exit_s)
      fill_vehicle(f.luminance, f.width, f.height, track.box_at(t), track.luminance, spec.vehicle_texture,
                   patterns.split(i));
  }
  for (std::size_t i = 0; i < spec.stalls.size(); ++i) {
    const auto& stall = spec.stalls[i];
    if (stall.active(t))
      fill_vehicle(f.luminance, f.width, f.height, stall.box, stall.luminance, spec.vehicle_texture,
                   patterns.split(spec.tracks.size() + i));
  }

  if (spec.noise_sigma > 0) {
    static thread_local double cached_sigma = -1;
    static thread_local std::vector<std::int8_t> table;
    if (cached_sigma != spec.noise_sigma) {
      table = noise_table(spec.noise_sigma);
      cached_sigma = spec.noise_sigma;
    }
    const CounterRng rng = CounterRng(spec.seed).split(kNoiseStream).split(static_cast<std::uint64_t>(frame_index));
    auto& px = f.luminance;
    for (std::size_t i = 0; i < px.size(); i += 4) {
      const std::uint64_t r = rng.at(i / 4);
      for (std::size_t lane = 0; lane < 4 && i + lane < px.size(); ++lane) {
        const int noisy = px[i + lane] + table[(r >> (16 * lane)) & 0xFFFF];
        px[i + lane] = static_cast<std::uint8_t>(std::clamp(noisy, 0, 255));
      }
    }
  }
  return f;
}

SegmentationMask render_mask(const SceneSpec& spec) {
  SegmentationMask mask{spec.width, spec.height, {}};
  const std::size_t n = static_cast<std::size_t>(spec.width) * spec.height;
  if (spec.road.empty()) {
    mask.road.assign(n, 1);
    return mask;
  }
  mask.road.assign(n, 0);
  for (const auto& r : spec.road) fill_box(mask.road, spec.width, spec.height, r, 1);
  return mask;
}

std::vector<DetectionRecord> simulate_detections(const SceneSpec& spec) {
  // Slots follow the background stage: consecutive runs of snapshot_interval
  // frames among the frames that survive corrupted-window filtering.
  std::vector<double> times;
  for (std::int64_t i = 0; i < spec.frame_count(); ++i)
    if (!spec.corrupted(spec.timestamp(i))) times.push_back(spec.timestamp(i));
  const std::size_t interval = static_cast<std::size_t>(spec.snapshot_interval);
  const std::size_t slots = times.size() / interval;

  RngStream rng(CounterRng(spec.seed).split(kDetectorStream));
  const auto& noise = spec.detector_sim;
  std::vector<DetectionRecord> out;
  auto emit = [&](std::int64_t slot, Box box) {
    const Point c = box.center();
    // Keep the centroid inside the frame.
    box.x += std::clamp(c.x, 0.0, std::nextafter(static_cast<double>(spec.width), 0.0)) - c.x;
    box.y += std::clamp(c.y, 0.0, std::nextafter(static_cast<double>(spec.height), 0.0)) - c.y;
    DetectionRecord r;
    r.snapshot_index = slot;
    r.class_id = std::max(box.w, box.h) >= 60 ? VehicleClass::truck : VehicleClass::car;
    r.confidence = rng.uniform(noise.confidence_lo, noise.confidence_hi);
    r.box = box;
    out.push_back(r);
  };

  for (std::size_t j = 0; j < slots; ++j) {
    const double first = times[j * interval];
    const double last = times[(j + 1) * interval - 1];
    for (const auto& stall : spec.stalls) {
      if (!(stall.active(first) && stall.active(last))) continue;
      if (rng.uniform() < noise.miss_rate) continue;
      Box b = stall.box;
      if (noise.jitter_px > 0) {
        b.x += noise.jitter_px * rng.normal();
        b.y += noise.jitter_px * rng.normal();
      }
      emit(static_cast<std::int64_t>(j), b);
    }
    if (rng.uniform() < noise.false_positive_rate) {
      const double w = rng.uniform(20, 50), h = rng.uniform(12, 30);
      emit(static_cast<std::int64_t>(j), {rng.uniform(0, spec.width - w), rng.uniform(0, spec.height - h), w, h});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const DetectionRecord& a, const DetectionRecord& b) {
    if (a.snapshot_index != b.snapshot_index) return a.snapshot_index < b.snapshot_index;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return std::tie(a.box.x, a.box.y, a.box.w, a.box.h) < std::tie(b.box.x, b.box.y, b.box.w, b.box.h);
  });
  return out;
}

std::vector<GroundTruthEvent> ground_truth(const SceneSpec& spec) {
  std::vector<GroundTruthEvent> out;
  for (const auto& s : spec.stalls) out.push_back({spec.video_id, s.onset_s, s.release_s});
  std::stable_sort(out.begin(), out.end(),
                   [](const GroundTruthEvent& a, const GroundTruthEvent& b) { return a.start_s < b.start_s; });
  return out;
}

GeneratedScene generate(const SceneSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "frames", ec);
  if (ec) throw Error(fmt::format("cannot create output directory {}: {}", out_dir.string(), ec.message()));

  GeneratedScene scene;
  auto& m = scene.manifest;
  m.base_dir = out_dir;
  m.effective_fps = spec.effective_fps;
  m.width = spec.width;
  m.height = spec.height;
  m.video_id = spec.video_id;

  const auto layer = render_static_layer(spec);
  for (std::int64_t i = 0; i < spec.frame_count(); ++i) {
    const Frame f = render_frame(spec, i, layer);
    const fs::path rel = fs::path("frames") / fmt::format("f_{:06d}.pgm", i);
    write_pgm(out_dir / rel, f.width, f.height, f.luminance);
    m.entries.push_back({rel, i, f.timestamp_s});
  }
  scene.manifest_path = out_dir / "manifest.txt";
  write_manifest(m, scene.manifest_path);

  scene.mask_path = out_dir / "mask.pgm";
  write_mask(render_mask(spec), scene.mask_path);

  scene.detections = simulate_detections(spec);
  scene.detections_path = out_dir / "detections.csv";
  write_detections(scene.detections, scene.detections_path);

  scene.truth = ground_truth(spec);
  scene.ground_truth_path = out_dir / "ground_truth.txt";
  write_ground_truth(scene.truth, scene.ground_truth_path);
  return scene;
}

}  // namespace sentinel::synth

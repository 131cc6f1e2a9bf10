#include "sentinel/background.hpp"

#include "sentinel/error.hpp"
#include "sentinel/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <utility>

namespace sentinel {

void MixtureParams::validate() const {
  auto fail = [](std::string_view field, auto value, std::string_view rule) {
    throw Error(fmt::format("mixture parameter {} = {} {}", field, value, rule));
  };
  if (max_components < 1 || max_components > kMaxMixtureComponents)
    fail("max_components", max_components, fmt::format("outside [1,{}]", kMaxMixtureComponents));
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) fail("learning_rate", learning_rate, "outside (0,1)");
  if (!(var_floor > 0.0)) fail("var_floor", var_floor, "must be positive");
  if (!(var_init >= var_floor)) fail("var_init", var_init, "must be >= var_floor");
  if (!(match_threshold_sq > 0.0)) fail("match_threshold_sq", match_threshold_sq, "must be positive");
  if (!(background_ratio > 0.0 && background_ratio < 1.0))
    fail("background_ratio", background_ratio, "outside (0,1)");
}

namespace {

struct UpdateConstants {
  float alpha;
  float decay;
  float var_init;
  float var_floor;
  float match_sq;
  int max_components;
};

// Sort key weight/sigma compared without square roots: w_a^2 / v_a > w_b^2 / v_b.
inline bool ranks_before(const GaussianComponent& a, const GaussianComponent& b) {
  return a.weight * a.weight * b.variance > b.weight * b.weight * a.variance;
}

inline void sort_components(GaussianComponent* c, int n) {
  for (int i = 1; i < n; ++i) {
    const GaussianComponent v = c[i];
    int j = i - 1;
    while (j >= 0 && ranks_before(v, c[j])) {
      c[j + 1] = c[j];
      --j;
    }
    c[j + 1] = v;
  }
}

// Moves c[i] to its rank position; the rest of c is already ordered.
inline void reposition(GaussianComponent* c, int n, int i) {
  const GaussianComponent v = c[i];
  int j = i;
  while (j > 0 && ranks_before(v, c[j - 1])) {
    c[j] = c[j - 1];
    --j;
  }
  if (j == i) {
    while (j + 1 < n && ranks_before(c[j + 1], v)) {
      c[j] = c[j + 1];
      ++j;
    }
  }
  c[j] = v;
}

inline void normalize_weights(GaussianComponent* c, int n) {
  float sum = 0.0f;
  for (int k = 0; k < n; ++k) sum += c[k].weight;
  if (sum > 0.0f) {
    const float inv = 1.0f / sum;
    for (int k = 0; k < n; ++k) c[k].weight *= inv;
  }
}

// Matched-component update for a pixel holding exactly N components. Returns
// false when no component is within the match radius.
template <int N>
inline bool update_matched(GaussianComponent* c, float x, const UpdateConstants& k) {
  // Among components within the match radius, the heaviest wins.
  int best = -1;
  float best_weight = -1.0f;
  for (int i = 0; i < N; ++i) {
    const float d = x - c[i].mean;
    const bool take = (d * d < k.match_sq * c[i].variance) & (c[i].weight > best_weight);
    best = take ? i : best;
    best_weight = take ? c[i].weight : best_weight;
  }
  if (best < 0) return false;

  // Decay scales every key w^2/var by the same factor, so only the matched
  // component can change rank.
  float sum = 0.0f;
  for (int i = 0; i < N; ++i) sum += (c[i].weight *= k.decay);
  GaussianComponent& m = c[best];
  m.weight += k.alpha;
  sum += k.alpha;
  const float rho = std::min(1.0f, k.alpha / m.weight);
  const float d = x - m.mean;
  m.mean += rho * d;
  m.variance = std::max(k.var_floor, m.variance + rho * (d * d - m.variance));
  const float inv = 1.0f / sum;
  for (int i = 0; i < N; ++i) c[i].weight *= inv;
  reposition(c, N, best);
  return true;
}

template <int... Ns>
inline bool dispatch_matched(int n, GaussianComponent* c, float x, const UpdateConstants& k,
                             std::integer_sequence<int, Ns...>) {
  bool matched = false;
  ((n == Ns + 1 ? (matched = update_matched<Ns + 1>(c, x, k), true) : false) || ...);
  return matched;
}

inline void update_pixel(GaussianComponent* c, std::uint8_t& count, float x, const UpdateConstants& k) {
  int n = count;
  if (n == 0) {
    c[0] = {x, k.var_init, 1.0f};
    count = 1;
    return;
  }
  if (dispatch_matched(n, c, x, k, std::make_integer_sequence<int, kMaxMixtureComponents>{})) return;

  for (int i = 0; i < n; ++i) c[i].weight *= k.decay;
  const GaussianComponent fresh{x, k.var_init, k.alpha};
  if (n < k.max_components) {
    c[n++] = fresh;
    count = static_cast<std::uint8_t>(n);
  } else {
    int lowest = 0;
    for (int i = 1; i < n; ++i)
      if (c[i].weight <= c[lowest].weight) lowest = i;
    c[lowest] = fresh;
  }
  normalize_weights(c, n);
  sort_components(c, n);
}

}  // namespace

MixtureModel::MixtureModel(int width, int height, MixtureParams params)
    : width_(width), height_(height), params_(params) {
  params_.validate();
  if (width < kMinFrameSide || height < kMinFrameSide)
    throw Error(fmt::format("model size {}x{} below the {}-pixel minimum", width, height, kMinFrameSide));
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  components_.resize(pixels * params_.max_components);
  counts_.assign(pixels, 0);
}

void MixtureModel::check_frame(const Frame& frame) const {
  if (frame.width != width_ || frame.height != height_)
    throw Error(fmt::format("frame {} is {}x{} but the background model is {}x{}", frame.frame_index, frame.width,
                            frame.height, width_, height_));
  validate_frame(frame);
}

void MixtureModel::update(const Frame& frame) {
  const Frame* one[] = {&frame};
  update_batch(one, 1);
}

void MixtureModel::update_range(std::span<const Frame* const> frames, std::size_t begin, std::size_t end) {
  const UpdateConstants k{static_cast<float>(params_.learning_rate),
                          static_cast<float>(1.0 - params_.learning_rate),
                          static_cast<float>(params_.var_init),
                          static_cast<float>(params_.var_floor),
                          static_cast<float>(params_.match_threshold_sq),
                          params_.max_components};
  const std::size_t stride = static_cast<std::size_t>(params_.max_components);
  // Pixels are independent: a small tile per frame keeps the tile in cache and
  // lets the per-pixel dependency chains overlap.
  constexpr std::size_t kTile = 64;
  for (std::size_t t0 = begin; t0 < end; t0 += kTile) {
    const std::size_t t1 = std::min(end, t0 + kTile);
    for (const Frame* f : frames) {
      const std::uint8_t* lum = f->luminance.data();
      for (std::size_t p = t0; p < t1; ++p)
        update_pixel(components_.data() + p * stride, counts_[p], static_cast<float>(lum[p]), k);
    }
  }
}

void MixtureModel::update_batch(std::span<const Frame* const> frames, int workers) {
  for (const Frame* f : frames) check_frame(*f);
  parallel_for(counts_.size(), workers,
               [&](std::size_t begin, std::size_t end) { update_range(frames, begin, end); });
}

std::span<const GaussianComponent> MixtureModel::components(int x, int y) const {
  const std::size_t p = static_cast<std::size_t>(y) * width_ + x;
  return {components_.data() + p * params_.max_components, counts_[p]};
}

void MixtureModel::set_components(int x, int y, std::span<const GaussianComponent> components) {
  if (components.size() > static_cast<std::size_t>(params_.max_components))
    throw Error("more components than max_components");
  const std::size_t p = static_cast<std::size_t>(y) * width_ + x;
  GaussianComponent* c = components_.data() + p * params_.max_components;
  std::copy(components.begin(), components.end(), c);
  const int n = static_cast<int>(components.size());
  counts_[p] = static_cast<std::uint8_t>(n);
  normalize_weights(c, n);
  sort_components(c, n);
}

Frame MixtureModel::render() const {
  Frame out;
  out.width = width_;
  out.height = height_;
  out.luminance.resize(counts_.size());
  const double ratio = params_.background_ratio;
  for (std::size_t p = 0; p < counts_.size(); ++p) {
    const GaussianComponent* c = components_.data() + p * params_.max_components;
    double cum_weight = 0.0;
    double weighted = 0.0;
    for (int k = 0; k < counts_[p]; ++k) {
      cum_weight += c[k].weight;
      weighted += static_cast<double>(c[k].weight) * c[k].mean;
      if (cum_weight > ratio) break;
    }
    const double value = cum_weight > 0.0 ? weighted / cum_weight : 0.0;
    out.luminance[p] = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
  }
  return out;
}

MixtureModel update(MixtureModel model, const Frame& frame) {
  model.update(frame);
  return model;
}

Frame render_background(const MixtureModel& model) { return model.render(); }

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::forward:
      return "forward";
    case Direction::backward:
      return "backward";
    case Direction::merged:
      return "merged";
  }
  return "unknown";
}

std::vector<BackgroundSnapshot> run_direction(const FrameManifest& manifest, Direction direction,
                                              int snapshot_interval, const MixtureParams& params, int workers) {
  if (snapshot_interval < 1) throw Error(fmt::format("snapshot_interval {} must be >= 1", snapshot_interval));
  if (manifest.empty()) throw Error("cannot model the background of an empty manifest");
  if (direction == Direction::merged) throw Error("run_direction needs forward or backward");

  const std::size_t n = manifest.size();
  const std::size_t interval = static_cast<std::size_t>(snapshot_interval);
  const std::size_t slots = n / interval;
  const bool forward = direction == Direction::forward;

  // Batches never straddle an emission point; the batch size bounds memory.
  constexpr std::size_t kMaxBatch = 16;

  auto position_at = [&](std::size_t step) { return forward ? step : n - 1 - step; };
  auto emits_after = [&](std::size_t pos) -> bool {
    if (forward) return (pos + 1) % interval == 0 && (pos + 1) / interval <= slots;
    return pos % interval == 0 && pos / interval < slots;
  };

  std::vector<BackgroundSnapshot> snapshots;
  std::optional<MixtureModel> model;
  std::vector<Frame> batch;
  std::vector<const Frame*> pointers;

  // Decode the next batch while the current one is applied.
  auto load_batch = [&](std::size_t first_step) {
    std::vector<Frame> frames;
    for (std::size_t step = first_step; step < n && frames.size() < kMaxBatch; ++step) {
      const std::size_t pos = position_at(step);
      frames.push_back(read_frame_at(manifest, pos));
      if (emits_after(pos)) break;
    }
    return frames;
  };

  std::size_t step = 0;
  auto pending = std::async(std::launch::deferred, load_batch, step);
  while (step < n) {
    batch = pending.get();
    const std::size_t next_step = step + batch.size();
    if (next_step < n)
      pending = std::async(workers > 1 ? std::launch::async : std::launch::deferred, load_batch, next_step);
    if (!model) model.emplace(batch.front().width, batch.front().height, params);
    pointers.clear();
    for (const auto& f : batch) pointers.push_back(&f);
    model->update_batch(pointers, workers);

    const std::size_t last_pos = position_at(next_step - 1);
    if (emits_after(last_pos)) {
      BackgroundSnapshot snap;
      snap.frame = model->render();
      snap.frame.frame_index = manifest.entries[last_pos].frame_index;
      snap.frame.timestamp_s = manifest.entries[last_pos].timestamp_s;
      snap.snapshot_index = static_cast<std::int64_t>(forward ? (last_pos + 1) / interval - 1 : last_pos / interval);
      snap.source_frame_index = manifest.entries[last_pos].frame_index;
      snap.source_position = last_pos;
      snap.direction = direction;
      snapshots.push_back(std::move(snap));
    }
    step = next_step;
  }
  if (!forward) std::reverse(snapshots.begin(), snapshots.end());
  return snapshots;
}

std::vector<BackgroundSnapshot> merge(std::span<const BackgroundSnapshot> forward,
                                      std::span<const BackgroundSnapshot> backward) {
  if (forward.size() != backward.size())
    throw Error(fmt::format("cannot merge {} forward snapshots with {} backward snapshots", forward.size(),
                            backward.size()));
  const std::size_t slots = forward.size();
  std::vector<BackgroundSnapshot> out;
  out.reserve(slots);
  for (std::size_t j = 0; j < slots; ++j) {
    if (forward[j].snapshot_index != static_cast<std::int64_t>(j) ||
        backward[j].snapshot_index != static_cast<std::int64_t>(j))
      throw Error(fmt::format("snapshot lists are misaligned at slot {}", j));
    // Integer half: with a single slot the forward pass wins.
    BackgroundSnapshot s = j < slots / 2 ? backward[j] : forward[j];
    s.direction = Direction::merged;
    out.push_back(std::move(s));
  }
  return out;
}

void write_snapshots(std::span<const BackgroundSnapshot> snapshots, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create snapshot directory " + out_dir.string() + ": " + ec.message());
  for (const auto& s : snapshots) {
    const auto name = fmt::format("bg_{}_{}.pgm", to_string(s.direction), s.snapshot_index);
    write_pgm(out_dir / name, s.frame.width, s.frame.height, s.frame.luminance);
  }
}

}  // namespace sentinel

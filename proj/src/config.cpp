#include "sentinel/config.hpp"

#include "sentinel/error.hpp"
#include "text_util.hpp"

#include <fmt/format.h>

#include <cmath>
#include <functional>
#include <map>

namespace sentinel {

namespace {

template <typename T>
T parse_value(std::string_view key, std::string_view value) {
  T out{};
  if (!text::parse_number(value, out)) throw Error(fmt::format("config key {}: bad value `{}`", key, value));
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(out)) throw Error(fmt::format("config key {}: value must be finite", key));
  return out;
}

void require(bool ok, std::string_view key, auto value, std::string_view rule) {
  if (!ok) throw Error(fmt::format("config key {} = {} {}", key, value, rule));
}

}  // namespace

void PipelineConfig::set(std::string_view key, std::string_view value) {
  using Setter = std::function<void(PipelineConfig&, std::string_view, std::string_view)>;
  auto real = [](double PipelineConfig::*field) -> Setter {
    return [field](PipelineConfig& c, std::string_view k, std::string_view v) { c.*field = parse_value<double>(k, v); };
  };
  auto whole = [](int PipelineConfig::*field) -> Setter {
    return [field](PipelineConfig& c, std::string_view k, std::string_view v) { c.*field = parse_value<int>(k, v); };
  };
  auto mix_real = [](double MixtureParams::*field) -> Setter {
    return [field](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.mixture.*field = parse_value<double>(k, v);
    };
  };
  static const std::map<std::string, Setter, std::less<>> setters = {
      {"mean_threshold", real(&PipelineConfig::mean_threshold)},
      {"sample_period_s", real(&PipelineConfig::sample_period_s)},
      {"snapshot_interval", whole(&PipelineConfig::snapshot_interval)},
      {"max_components",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.mixture.max_components = parse_value<int>(k, v); }},
      {"learning_rate", mix_real(&MixtureParams::learning_rate)},
      {"var_init", mix_real(&MixtureParams::var_init)},
      {"var_floor", mix_real(&MixtureParams::var_floor)},
      {"match_threshold_sq", mix_real(&MixtureParams::match_threshold_sq)},
      {"background_ratio", mix_real(&MixtureParams::background_ratio)},
      {"iou_thresh", real(&PipelineConfig::iou_thresh)},
      {"k1", whole(&PipelineConfig::k1)},
      {"l1", real(&PipelineConfig::l1)},
      {"k2", whole(&PipelineConfig::k2)},
      {"l2", real(&PipelineConfig::l2)},
      {"k_max", whole(&PipelineConfig::k_max)},
      {"elbow_restarts", whole(&PipelineConfig::elbow_restarts)},
      {"elbow_min_spread", real(&PipelineConfig::elbow_min_spread)},
      {"roi_margin", real(&PipelineConfig::roi_margin)},
      {"kmeans_max_iters", whole(&PipelineConfig::kmeans_max_iters)},
      {"ssim_window", whole(&PipelineConfig::ssim_window)},
      {"savgol_window", whole(&PipelineConfig::savgol_window)},
      {"savgol_order", whole(&PipelineConfig::savgol_order)},
      {"stride", whole(&PipelineConfig::stride)},
      {"persistence", whole(&PipelineConfig::persistence)},
      {"ssim_threshold", real(&PipelineConfig::ssim_threshold)},
      {"alpha_sig", real(&PipelineConfig::alpha_sig)},
      {"h", real(&PipelineConfig::h)},
      {"g", [](PipelineConfig& c, std::string_view k, std::string_view v) { c.g = parse_value<double>(k, v); }},
      {"window_s", real(&PipelineConfig::window_s)},
      {"delay_cap_s", real(&PipelineConfig::delay_cap_s)},
      {"seed",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.seed = parse_value<std::uint64_t>(k, v); }},
      {"workers", whole(&PipelineConfig::workers)},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw Error(fmt::format("unknown config key `{}`", key));
  it->second(*this, key, value);
}

void PipelineConfig::validate() const {
  require(mean_threshold >= 0 && mean_threshold <= 255, "mean_threshold", mean_threshold, "outside [0,255]");
  require(sample_period_s > 0, "sample_period_s", sample_period_s, "must be > 0");
  require(snapshot_interval >= 1, "snapshot_interval", snapshot_interval, "must be >= 1");
  try {
    mixture.validate();
  } catch (const Error& e) {
    throw Error(fmt::format("config: {}", e.what()));
  }
  require(iou_thresh > 0 && iou_thresh < 1, "iou_thresh", iou_thresh, "outside (0,1)");
  require(k1 >= 1, "k1", k1, "must be >= 1");
  require(l1 > 0, "l1", l1, "must be > 0");
  require(k2 >= 1, "k2", k2, "must be >= 1");
  require(l2 > 0, "l2", l2, "must be > 0");
  require(k_max >= 1, "k_max", k_max, "must be >= 1");
  require(elbow_restarts >= 1, "elbow_restarts", elbow_restarts, "must be >= 1");
  require(elbow_min_spread >= 0, "elbow_min_spread", elbow_min_spread, "must be >= 0");
  require(roi_margin >= 0, "roi_margin", roi_margin, "must be >= 0");
  require(kmeans_max_iters >= 1, "kmeans_max_iters", kmeans_max_iters, "must be >= 1");
  require(ssim_window >= 4, "ssim_window", ssim_window, "must be >= 4");
  require(savgol_window >= 1 && savgol_window % 2 == 1, "savgol_window", savgol_window, "must be odd and positive");
  require(savgol_order >= 0 && savgol_order < savgol_window, "savgol_order", savgol_order,
          "must be in [0, savgol_window)");
  require(stride >= 1, "stride", stride, "must be >= 1");
  require(persistence >= 1, "persistence", persistence, "must be >= 1");
  require(ssim_threshold >= -1 && ssim_threshold <= 1, "ssim_threshold", ssim_threshold, "outside [-1,1]");
  require(alpha_sig > 0 && alpha_sig < 1, "alpha_sig", alpha_sig, "outside (0,1)");
  require(h > 0, "h", h, "must be > 0");
  if (g) require(*g >= 0 && *g <= 1, "g", *g, "outside [0,1]");
  require(window_s >= 0, "window_s", window_s, "must be >= 0");
  require(delay_cap_s > 0, "delay_cap_s", delay_cap_s, "must be > 0");
  require(workers >= 1, "workers", workers, "must be >= 1");
}

SsimConstants PipelineConfig::ssim_constants() const {
  SsimConstants c;
  c.window = ssim_window;
  return c;
}

CandidateOptions PipelineConfig::candidate_options() const {
  CandidateOptions o;
  o.elbow.k_max = k_max;
  o.elbow.seed = seed;
  o.elbow.restarts = elbow_restarts;
  o.elbow.max_iters = kmeans_max_iters;
  o.elbow.min_spread = elbow_min_spread;
  o.roi_margin = roi_margin;
  return o;
}

PipelineConfig parse_config(std::string_view content, const std::string& source) {
  PipelineConfig cfg;
  for (const auto& line : text::lines(content)) {
    auto body = line.content;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = text::trim(body.substr(0, hash));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line.number, "expected `key = value`");
    try {
      cfg.set(text::trim(body.substr(0, eq)), text::trim(body.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, line.number, e.what());
    }
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(text::read_file(path, "config file"), path.string());
}

}  // namespace sentinel

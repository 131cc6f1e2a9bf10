#include "sentinel/sequential.hpp"

#include "text_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace sentinel {

void CusumConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(fmt::format("gamma = {} outside [0,1]", gamma));
  if (!(h > 0.0)) throw Error(fmt::format("h = {} must be > 0", h));
  if (!(g >= 0.0 && g <= 1.0)) throw Error(fmt::format("g = {} outside [0,1]", g));
  if (!(alpha_sig > 0.0 && alpha_sig < 1.0)) throw Error(fmt::format("alpha_sig = {} outside (0,1)", alpha_sig));
}

double Calibration::normalize(double raw) const {
  if (!(norm_max > norm_min)) return raw >= norm_max ? 1.0 : 0.0;
  return std::clamp((raw - norm_min) / (norm_max - norm_min), 0.0, 1.0);
}

Calibration calibrate_gamma(std::span<const double> training_scores, double alpha_sig, Warnings* warnings,
                            std::span<const double> range_scores) {
  if (!(alpha_sig > 0.0 && alpha_sig < 1.0)) throw Error(fmt::format("alpha_sig = {} outside (0,1)", alpha_sig));
  if (training_scores.empty()) throw Error("calibration needs at least one training score");
  const auto [lo_it, hi_it] = std::minmax_element(training_scores.begin(), training_scores.end());
  double lo = *lo_it, hi = *hi_it;
  for (double v : range_scores) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  Calibration cal;
  cal.alpha = alpha_sig;
  cal.norm_min = lo;
  cal.norm_max = hi;
  if (lo == hi) {
    if (hi == 0.0) throw Error("calibration scores are all zero");
    cal.gamma = 1.0;
    cal.degenerate = true;
    warn(warnings, "calibration scores are constant; gamma set to 1");
    return cal;
  }

  std::vector<double> nonzero;
  nonzero.reserve(training_scores.size());
  for (double v : training_scores) {
    const double n = (v - lo) / (hi - lo);
    if (n != 0.0) nonzero.push_back(n);
  }
  if (nonzero.empty()) throw Error("calibration scores all sit at the bottom of the normalization range");
  std::sort(nonzero.begin(), nonzero.end());
  const double p = 1.0 - alpha_sig;
  // Nearest rank ceil(p n); the slack absorbs representation error in p n.
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(nonzero.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, nonzero.size());
  cal.gamma = nonzero[rank - 1];
  if (rank == nonzero.size())
    warn(warnings, fmt::format("only {} nonzero calibration scores; gamma is the largest of them, collect at least {}",
                               nonzero.size(), static_cast<std::size_t>(std::ceil(1.0 / alpha_sig - 1e-9)) + 1));
  return cal;
}

void write_calibration(const Calibration& c, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write calibration: " + path.string());
  f << fmt::format("gamma={}\nnorm_min={}\nnorm_max={}\nalpha={}\n", c.gamma, c.norm_min, c.norm_max, c.alpha);
  if (!f) throw Error("cannot write calibration: " + path.string());
}

Calibration load_calibration(const std::filesystem::path& path) {
  const std::string source = path.string();
  const std::string content = text::read_file(path, "calibration file");
  std::map<std::string, double, std::less<>> values;
  for (const auto& line : text::lines(content)) {
    const auto eq = line.content.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line.number, "expected key=value");
    const auto key = text::trim(line.content.substr(0, eq));
    double v = 0.0;
    if (!text::parse_number(text::trim(line.content.substr(eq + 1)), v) || !std::isfinite(v))
      throw ParseError(source, line.number, fmt::format("bad value for {}", key));
    values[std::string(key)] = v;
  }
  auto need = [&](std::string_view key) {
    auto it = values.find(key);
    if (it == values.end()) throw ParseError(source, 0, fmt::format("missing {}", key));
    return it->second;
  };
  Calibration c;
  c.gamma = need("gamma");
  c.norm_min = need("norm_min");
  c.norm_max = need("norm_max");
  c.alpha = need("alpha");
  c.degenerate = c.norm_min == c.norm_max;
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ParseError(source, 0, fmt::format("gamma = {} outside [0,1]", c.gamma));
  if (c.norm_max < c.norm_min) throw ParseError(source, 0, "norm_max < norm_min");
  return c;
}

CusumState cusum_step(CusumState state, double evidence, double gamma) {
  if (!(evidence >= 0.0 && evidence <= 1.0)) throw Error(fmt::format("evidence {} outside [0,1]", evidence));
  return {std::max(0.0, state.s + evidence - gamma), state.t + 1};
}

CusumRun detect_run(const SimilaritySeries& series, const CusumConfig& config, CusumState start) {
  config.validate();
  CusumRun run;
  run.state = start;
  run.trace.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    run.state = cusum_step(run.state, series.samples[i].value, config.gamma);
    run.trace.push_back(run.state.s);
    if (run.state.s >= config.h) {
      run.alarm = Detection{i, series.samples[i].timestamp_s};
      break;
    }
  }
  return run;
}

std::optional<Detection> detect(const SimilaritySeries& series, const CusumConfig& config) {
  return detect_run(series, config).alarm;
}

std::vector<double> cusum_trace(const SimilaritySeries& series, double gamma) {
  std::vector<double> trace;
  trace.reserve(series.size());
  CusumState state;
  for (const auto& s : series.samples) {
    state = cusum_step(state, s.value, gamma);
    trace.push_back(state.s);
  }
  return trace;
}

Localization localize(const SimilaritySeries& series, std::span<const double> trace, std::size_t alarm_sample,
                      double g) {
  if (alarm_sample >= series.size() || alarm_sample >= trace.size())
    throw Error(fmt::format("alarm sample {} is not in the series", alarm_sample));
  const std::size_t last = std::min(series.size(), trace.size()) - 1;

  Localization out;
  out.decrease_offset = last - alarm_sample;
  for (std::size_t p = alarm_sample; p + kDecreaseRun <= last; ++p) {
    bool falling = true;
    for (int d = 0; d < kDecreaseRun && falling; ++d) falling = trace[p + d + 1] < trace[p + d];
    if (falling) {
      out.decrease_offset = p - alarm_sample;
      break;
    }
  }
  for (std::size_t p = alarm_sample; p <= alarm_sample + out.decrease_offset; ++p)
    if (series.samples[p].value > g) out.frames.push_back(series.samples[p].frame_index);
  return out;
}

}  // namespace sentinel

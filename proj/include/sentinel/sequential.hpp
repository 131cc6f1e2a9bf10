#pragma once

#include "sentinel/error.hpp"
#include "sentinel/similarity.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sentinel {

struct CusumConfig {
  double gamma = 0.5;      // evidence baseline
  double h = 1.0;          // alarm threshold
  double g = 0.5;          // localization threshold
  double alpha_sig = 0.05; // calibration significance level

  void validate() const;
};

/// Accumulated CUSUM statistic after `t` samples.
struct CusumState {
  double s = 0.0;
  std::int64_t t = 0;

  bool operator==(const CusumState&) const = default;
};

/// Result of calibrating the evidence baseline on nominal scores.
struct Calibration {
  double gamma = 1.0;
  double norm_min = 0.0;
  double norm_max = 1.0;
  double alpha = 0.05;
  bool degenerate = false;  // training scores had min == max

  /// Min-max normalizes a raw score with the stored constants, clamped to [0,1].
  double normalize(double raw) const;
};

/// Min-max normalizes the scores to [0,1], drops exact zeros and returns the
/// nearest-rank (1 - alpha_sig) percentile of what is left. When range_scores
/// is non-empty the normalization constants span both sets, so test evidence
/// above the nominal range keeps its scale instead of clamping at 1.
Calibration calibrate_gamma(std::span<const double> training_scores, double alpha_sig, Warnings* warnings = nullptr,
                            std::span<const double> range_scores = {});

void write_calibration(const Calibration& calibration, const std::filesystem::path& path);
Calibration load_calibration(const std::filesystem::path& path);

/// s' = max(0, s + e - gamma), t' = t + 1.
CusumState cusum_step(CusumState state, double evidence, double gamma);

struct Detection {
  std::size_t sample = 0;   // alarm sample T
  double timestamp_s = 0.0;
};

struct CusumRun {
  std::optional<Detection> alarm;
  std::vector<double> trace;  // s_t for every processed sample
  CusumState state;
};

/// Runs the recursion from `start` over the series and stops at the first
/// sample with s >= h. Without an alarm the whole series is consumed.
CusumRun detect_run(const SimilaritySeries& series, const CusumConfig& config, CusumState start = {});
std::optional<Detection> detect(const SimilaritySeries& series, const CusumConfig& config);

/// Number of consecutive strict decreases that mark the end of an alarm.
inline constexpr int kDecreaseRun = 2;

struct Localization {
  std::size_t decrease_offset = 0;  // M
  std::vector<std::int64_t> frames;
};

/// M is the offset from T of the first sample followed by kDecreaseRun strict
/// decreases of the statistic (the end of the trace when none). Returns the
/// frames in [T, T+M] whose evidence exceeds g.
Localization localize(const SimilaritySeries& series, std::span<const double> statistic_trace, std::size_t alarm_sample,
                      double g);

/// Full statistic trace over the whole series (no stopping at the alarm).
std::vector<double> cusum_trace(const SimilaritySeries& series, double gamma);

}  // namespace sentinel

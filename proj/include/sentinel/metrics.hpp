#pragma once

#include "sentinel/error.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sentinel {

struct GroundTruthEvent {
  std::string video_id;
  double start_s = 0.0;
  std::optional<double> end_s;

  bool operator==(const GroundTruthEvent&) const = default;
};

struct PredictedEvent {
  std::string video_id;
  double predicted_start_s = 0.0;
  std::optional<double> score;

  bool operator==(const PredictedEvent&) const = default;
};

std::vector<GroundTruthEvent> load_ground_truth(const std::filesystem::path& path);
std::vector<PredictedEvent> load_predictions(const std::filesystem::path& path);
void write_ground_truth(std::span<const GroundTruthEvent> events, const std::filesystem::path& path);
void write_predictions(std::span<const PredictedEvent> events, const std::filesystem::path& path);

struct MatchedPair {
  std::size_t pred = 0;  // index into the predictions
  std::size_t gt = 0;    // index into the ground truth
  double delay_s = 0.0;  // |predicted_start - start|
};

struct Matching {
  std::vector<MatchedPair> tp;
  std::vector<std::size_t> fp;  // unmatched predictions
  std::vector<std::size_t> fn;  // unmatched ground truth
};

/// Greedy one-to-one matching per video in ascending |t_pred - t_gt|; a pair
/// is admissible when the gap is at most window_s.
Matching match_events(std::span<const PredictedEvent> preds, std::span<const GroundTruthEvent> gts,
                      double window_s = 10.0);

/// 2TP / (2TP + FN + FP); 0 (with a warning) when all counts are zero.
double f1(std::size_t tp, std::size_t fp, std::size_t fn, Warnings* warnings = nullptr);
/// min(RMSE, cap) / cap over true-positive delays; 1 (with a warning) when empty.
double nrmse(std::span<const double> delays_s, double cap_s = 300.0, Warnings* warnings = nullptr);
double rmse(std::span<const double> delays_s);
/// F1 (1 - NRMSE).
double s4(double f1_value, double nrmse_value);

struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double f1 = 0.0;
  double rmse_s = 0.0;
  double nrmse = 1.0;
  double s4 = 0.0;
  Matching matching;
  Warnings warnings;
};

EvalReport evaluate(std::span<const PredictedEvent> preds, std::span<const GroundTruthEvent> gts,
                    double window_s = 10.0, double cap_s = 300.0);

/// Human-readable summary, the matching table and a CSV block.
std::string format_report(const EvalReport& report, std::span<const PredictedEvent> preds,
                          std::span<const GroundTruthEvent> gts);

struct CurvePoint {
  double alpha_delay = 0.0;
  double precision = 0.0;
  double h = 0.0;  // operating point that produced it

  bool operator==(const CurvePoint&) const = default;
};

struct PrecisionDelayCurve {
  std::vector<CurvePoint> points;  // ascending alpha_delay
  double apd = 0.0;
  double delay_cap_s = 300.0;
};

struct OperatingRun {
  double h = 0.0;
  std::vector<PredictedEvent> preds;
};

/// One point per run with at least one alarm: precision TP/(TP+FP) and
/// normalized delay min(mean TP delay, cap)/cap (1 when no alarm is a TP).
/// Points with equal alpha keep the highest precision. apd is filled in.
PrecisionDelayCurve precision_delay_curve(std::span<const OperatingRun> runs, std::span<const GroundTruthEvent> gts,
                                          double window_s = 10.0, double delay_cap_s = 300.0,
                                          Warnings* warnings = nullptr);

/// Trapezoidal area under the piecewise-linear precision-delay curve on
/// [0,1], holding the first and last precision constant out to the ends.
double apd(const PrecisionDelayCurve& curve);

std::string format_curve_csv(const PrecisionDelayCurve& curve);

}  // namespace sentinel

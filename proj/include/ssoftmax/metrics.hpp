#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace ssx {

struct MetricsBundle {
  double top1 = 0.0;
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> confusion;  // row-major N x N, rows = true
  std::vector<double> precision;         // per class, 0 when undefined
  std::vector<double> recall;

  std::uint64_t confusion_at(std::size_t t, std::size_t p) const {
    return confusion[t * n_classes + p];
  }
  nlohmann::json to_json() const;
};

double accuracy(std::span<const std::uint32_t> predictions,
                std::span<const std::uint32_t> labels);

std::vector<std::uint64_t> confusion(std::span<const std::uint32_t> predictions,
                                     std::span<const std::uint32_t> labels,
                                     std::size_t n_classes);

MetricsBundle compute_metrics(std::span<const std::uint32_t> predictions,
                              std::span<const std::uint32_t> labels,
                              std::size_t n_classes);

enum class CurveKind { Roc, Pr };

struct CurvePoint {
  double x;  // ROC: FPR, PR: recall
  double y;  // ROC: TPR, PR: precision
};

// One-vs-rest curve for `cls`, thresholds swept over the sorted distinct
// scores (predict positive when score >= threshold). ROC includes the (0,0)
// and (1,1) endpoints.
std::vector<CurvePoint> curve_points(CurveKind kind,
                                     std::span<const double> scores,
                                     std::span<const std::uint32_t> labels,
                                     std::uint32_t cls);

// Trapezoid rule over the emitted points.
double curve_auc(const std::vector<CurvePoint>& points);

struct DeclineRow {
  double p;
  double attacked_accuracy;
  double decline;  // clean - attacked
};

struct DeclineSummary {
  double clean_accuracy = 0.0;
  std::vector<DeclineRow> rows;
  bool monotone = true;  // declines non-decreasing in p; warning when false
  nlohmann::json to_json() const;
};

DeclineSummary decline_summary(
    double clean_accuracy,
    const std::vector<std::pair<double, double>>& attacked_by_p);

}  // namespace ssx

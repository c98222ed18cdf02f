#include "ssoftmax/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ssoftmax/error.hpp"

namespace ssx {

using nlohmann::json;

json MetricsBundle::to_json() const {
  json conf = json::array();
  for (std::size_t i = 0; i < n_classes; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < n_classes; ++j)
      row.push_back(confusion_at(i, j));
    conf.push_back(std::move(row));
  }
  return json{{"top1", top1},
              {"n_classes", n_classes},
              {"confusion", std::move(conf)},
              {"precision", precision},
              {"recall", recall}};
}

double accuracy(std::span<const std::uint32_t> predictions,
                std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("accuracy length mismatch: " +
                          std::to_string(predictions.size()) + " vs " +
                          std::to_string(labels.size()));
  }
  if (predictions.empty()) {
    throw ValidationError("accuracy of empty prediction set");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(predictions.size());
}

std::vector<std::uint64_t> confusion(std::span<const std::uint32_t> predictions,
                                     std::span<const std::uint32_t> labels,
                                     std::size_t n_classes) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("confusion length mismatch");
  }
  std::vector<std::uint64_t> m(n_classes * n_classes, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] >= n_classes || labels[i] >= n_classes) {
      throw ValidationError("class index out of range in confusion input");
    }
    ++m[labels[i] * n_classes + predictions[i]];
  }
  return m;
}

MetricsBundle compute_metrics(std::span<const std::uint32_t> predictions,
                              std::span<const std::uint32_t> labels,
                              std::size_t n_classes) {
  MetricsBundle b;
  b.n_classes = n_classes;
  b.confusion = confusion(predictions, labels, n_classes);
  b.top1 = accuracy(predictions, labels);
  b.precision.assign(n_classes, 0.0);
  b.recall.assign(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::uint64_t col = 0, row = 0;
    for (std::size_t i = 0; i < n_classes; ++i) {
      col += b.confusion_at(i, c);
      row += b.confusion_at(c, i);
    }
    const auto diag = static_cast<double>(b.confusion_at(c, c));
    if (col) b.precision[c] = diag / static_cast<double>(col);
    if (row) b.recall[c] = diag / static_cast<double>(row);
  }
  return b;
}

std::vector<CurvePoint> curve_points(CurveKind kind,
                                     std::span<const double> scores,
                                     std::span<const std::uint32_t> labels,
                                     std::uint32_t cls) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("curve input length mismatch or empty");
  }
  std::size_t pos = 0;
  for (std::uint32_t l : labels) pos += l == cls ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw ValidationError(
        "curve undefined: one-vs-rest split has a single class");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<CurvePoint> points;
  if (kind == CurveKind::Roc) points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[order[i]] == cls) ++tp;
    else ++fp;
    // emit one point per distinct threshold (score of sample i)
    if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) {
      continue;
    }
    if (kind == CurveKind::Roc) {
      points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                        static_cast<double>(tp) / static_cast<double>(pos)});
    } else {
      points.push_back(
          {static_cast<double>(tp) / static_cast<double>(pos),
           static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
  }
  if (kind == CurveKind::Roc) {
    const CurvePoint last = points.back();
    if (last.x != 1.0 || last.y != 1.0) points.push_back({1.0, 1.0});
  }
  return points;
}

double curve_auc(const std::vector<CurvePoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].x - points[i - 1].x) * 0.5 *
            (points[i].y + points[i - 1].y);
  }
  return area;
}

DeclineSummary decline_summary(
    double clean_accuracy,
    const std::vector<std::pair<double, double>>& attacked_by_p) {
  DeclineSummary s;
  s.clean_accuracy = clean_accuracy;
  double prev_decline = -std::numeric_limits<double>::infinity();
  double prev_p = -std::numeric_limits<double>::infinity();
  for (const auto& [p, acc] : attacked_by_p) {
    const double decline = clean_accuracy - acc;
    if (p > prev_p && decline < prev_decline) s.monotone = false;
    prev_decline = decline;
    prev_p = p;
    s.rows.push_back({p, acc, decline});
  }
  return s;
}

json DeclineSummary::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"p", r.p},
                         {"attacked_accuracy", r.attacked_accuracy},
                         {"decline", r.decline}});
  }
  json out{{"clean_accuracy", clean_accuracy}, {"rows", std::move(rows_json)}};
  if (!monotone) out["warning"] = "declines are not monotone in p";
  return out;
}

}  // namespace ssx

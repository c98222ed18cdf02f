#include "ssoftmax/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ssoftmax/error.hpp"

namespace ssx {

ScoreTable::ScoreTable(std::size_t g_levels) : g_(g_levels) {
  if (g_levels < 2) {
    throw ValidationError("score table needs at least 2 levels, got " +
                          std::to_string(g_levels));
  }
}

void ScoreMatrix::validate(double tol) const {
  if (cells.size() != n_classes * g_levels) {
    throw ValidationError("score matrix cell count mismatch");
  }
  for (std::size_t i = 0; i < n_classes; ++i) {
    double sum = 0.0;
    for (double v : row(i)) {
      if (v < 0.0 || v > 1.0) {
        throw ValidationError("score matrix entry outside [0,1] in row " +
                              std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ValidationError("score matrix row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("softmax of empty vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw ValidationError("label " + std::to_string(label) +
                          " out of range for " + std::to_string(probs.size()) +
                          " classes");
  }
  return -std::log(std::max(probs[label], 1e-12));
}

std::vector<double> smooth_labels(std::size_t label, std::size_t n_classes,
                                  double eps) {
  if (eps < 0.0 || eps >= 1.0) {
    throw ValidationError("label smoothing eps must lie in [0, 1), got " +
                          std::to_string(eps));
  }
  if (label >= n_classes) {
    throw ValidationError("label " + std::to_string(label) +
                          " out of range for " + std::to_string(n_classes) +
                          " classes");
  }
  std::vector<double> out(n_classes, eps / static_cast<double>(n_classes));
  out[label] += 1.0 - eps;
  return out;
}

ScoreMatrix grouped_softmax(std::span<const double> logits,
                            std::size_t n_classes, std::size_t g_levels) {
  if (logits.size() != n_classes * g_levels) {
    throw ValidationError("grouped softmax expects " +
                          std::to_string(n_classes * g_levels) +
                          " logits, got " + std::to_string(logits.size()));
  }
  ScoreMatrix s;
  s.n_classes = n_classes;
  s.g_levels = g_levels;
  s.cells.resize(logits.size());
  for (std::size_t i = 0; i < n_classes; ++i) {
    auto probs = softmax(logits.subspan(i * g_levels, g_levels));
    std::copy(probs.begin(), probs.end(), s.cells.begin() + i * g_levels);
  }
  return s;
}

std::vector<double> weighted_scores(const ScoreMatrix& scores,
                                    const ScoreTable& table) {
  if (scores.g_levels != table.g()) {
    throw ValidationError("score table has " + std::to_string(table.g()) +
                          " levels but matrix has " +
                          std::to_string(scores.g_levels));
  }
  std::vector<double> t(scores.n_classes, 0.0);
  for (std::size_t i = 0; i < scores.n_classes; ++i) {
    auto r = scores.row(i);
    for (std::size_t j = 0; j < scores.g_levels; ++j)
      t[i] += table.level(j) * r[j];
  }
  return t;
}

std::size_t predict(std::span<const double> class_scores) {
  if (class_scores.empty()) throw ValidationError("predict on empty scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < class_scores.size(); ++i) {
    if (class_scores[i] > class_scores[best]) best = i;  // ties -> lowest
  }
  return best;
}

std::vector<std::size_t> predict_topk(std::span<const double> class_scores,
                                      std::size_t k) {
  if (class_scores.empty()) throw ValidationError("predict on empty scores");
  std::vector<std::size_t> idx(class_scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return class_scores[a] > class_scores[b];
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

double score_loss(const ScoreMatrix& target, const ScoreMatrix& scores,
                  ScoreLossForm form) {
  if (target.n_classes != scores.n_classes ||
      target.g_levels != scores.g_levels) {
    throw ValidationError("score loss shape mismatch: " +
                          std::to_string(target.n_classes) + "x" +
                          std::to_string(target.g_levels) + " vs " +
                          std::to_string(scores.n_classes) + "x" +
                          std::to_string(scores.g_levels));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < target.cells.size(); ++i) {
    const double d = target.cells[i] - scores.cells[i];
    sq += d * d;
  }
  if (form == ScoreLossForm::Frobenius) return std::sqrt(sq + 1e-12);
  return sq / static_cast<double>(target.cells.size());
}

Tensor softmax_rows(const Tensor& logits, Tape* tape) {
  return block_softmax(logits, logits.shape().back(), tape);
}

Tensor grouped_softmax_rows(const Tensor& logits, std::size_t g_levels,
                            Tape* tape) {
  const std::size_t width = logits.shape().back();
  if (g_levels < 2 || width % g_levels != 0) {
    throw ValidationError("logit width " + std::to_string(width) +
                          " is not a multiple of G=" +
                          std::to_string(g_levels));
  }
  return block_softmax(logits, g_levels, tape);
}

Tensor weighted_scores_rows(const Tensor& scores, std::size_t n_classes,
                            std::size_t g_levels, Tape* tape) {
  const std::size_t width = scores.shape().back();
  if (width != n_classes * g_levels) {
    throw ValidationError("weighted scores expect row width " +
                          std::to_string(n_classes * g_levels) + ", got " +
                          std::to_string(width));
  }
  const std::size_t rows = scores.rank() == 2 ? scores.shape()[0] : 1;
  // Build the block-diagonal level matrix [N*G, N] once and reuse matmul's
  // backward rule: column i holds levels 1..G in rows of group i.
  std::vector<double> table(width * n_classes, 0.0);
  for (std::size_t i = 0; i < n_classes; ++i) {
    for (std::size_t j = 0; j < g_levels; ++j) {
      table[(i * g_levels + j) * n_classes + i] = static_cast<double>(j + 1);
    }
  }
  Tensor table_t({width, n_classes}, std::move(table));
  Tensor flat = scores;
  if (scores.rank() == 1) flat = reshape(scores, {rows, width}, tape);
  return matmul(flat, table_t, tape);
}

Tensor score_loss_tensor(const Tensor& target, const Tensor& scores,
                         ScoreLossForm form, Tape* tape) {
  if (target.shape() != scores.shape()) {
    throw ValidationError("score loss shape mismatch: " +
                          shape_to_string(target.shape()) + " vs " +
                          shape_to_string(scores.shape()));
  }
  Tensor diff = sub(target, scores, tape);
  Tensor sq = mul(diff, diff, tape);
  Tensor total = reduce_all(ReduceOp::Sum, sq, tape);
  if (form == ScoreLossForm::Frobenius) {
    return unary(UnaryOp::Sqrt, add_const(total, 1e-12, tape), tape);
  }
  return scale(total, 1.0 / static_cast<double>(target.size()), tape);
}

}  // namespace ssx

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssoftmax/tensor.hpp"

namespace ssx {

// Integer score levels 1..G used as the weights of the score head.
class ScoreTable {
 public:
  explicit ScoreTable(std::size_t g_levels);
  std::size_t g() const { return g_; }
  double level(std::size_t j) const { return static_cast<double>(j + 1); }

 private:
  std::size_t g_;
};

// N x G row-stochastic matrix of per-class score-weight distributions.
struct ScoreMatrix {
  std::size_t n_classes = 0;
  std::size_t g_levels = 0;
  std::vector<double> cells;  // row-major

  std::span<const double> row(std::size_t i) const {
    return {cells.data() + i * g_levels, g_levels};
  }
  std::span<double> row(std::size_t i) {
    return {cells.data() + i * g_levels, g_levels};
  }
  // Rows sum to 1 within tol, entries in [0, 1].
  void validate(double tol = 1e-6) const;
};

enum class ScoreLossForm { Frobenius, Squared };

// --- plain (non-recorded) forms used by evaluation and fusion ---

std::vector<double> softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> probs, std::size_t label);
std::vector<double> smooth_labels(std::size_t label, std::size_t n_classes,
                                  double eps);
ScoreMatrix grouped_softmax(std::span<const double> logits,
                            std::size_t n_classes, std::size_t g_levels);
std::vector<double> weighted_scores(const ScoreMatrix& scores,
                                    const ScoreTable& table);
std::size_t predict(std::span<const double> class_scores);
std::vector<std::size_t> predict_topk(std::span<const double> class_scores,
                                      std::size_t k);
double score_loss(const ScoreMatrix& target, const ScoreMatrix& scores,
                  ScoreLossForm form);

// --- differentiable forms (participate in a tape) ---

// Row softmax of a [B, N] (or [N]) logit tensor.
Tensor softmax_rows(const Tensor& logits, Tape* tape = nullptr);
// Per-group softmax of a [B, N*G] (or [N*G]) logit tensor.
Tensor grouped_softmax_rows(const Tensor& logits, std::size_t g_levels,
                            Tape* tape = nullptr);
// [B, N*G] score tensor -> [B, N] weighted level sums (t_i = sum_j j*s_ij).
Tensor weighted_scores_rows(const Tensor& scores, std::size_t n_classes,
                            std::size_t g_levels, Tape* tape = nullptr);
// score_loss between a predicted score tensor and a constant target tensor of
// the same shape. Squared form is Sum (y-s)^2 / #cells; Frobenius form is
// sqrt(Sum (y-s)^2 + 1e-12), the guard keeping the gradient finite at Y == S.
Tensor score_loss_tensor(const Tensor& target, const Tensor& scores,
                         ScoreLossForm form, Tape* tape = nullptr);

}  // namespace ssx

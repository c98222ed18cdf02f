#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssoftmax/rng.hpp"

namespace ssx {

// Hyperparameters of the dynamic supervision matrix. The true-class row is
// fixed at (mu = lambda_true * G, sigma_true); every false-class row draws
// lambda ~ U[lambda_false] and sigma ~ U[sigma_false] independently per row
// per call. Construction enforces lambda_true > lambda_false.max so the
// true-class mean dominates every false-class mean.
struct DgssConfig {
  std::size_t n_classes = 10;
  std::size_t g_levels = 5;
  double lambda_true = 0.8;
  double sigma_true = 0.2;
  double lambda_false_min = 0.0;
  double lambda_false_max = 0.5;
  double sigma_false_min = 0.6;
  double sigma_false_max = 1.0;

  void validate() const;  // throws ValidationError
};

// Named sweep ranges (low/middle/high score stages for lambda, and the three
// sigma stages used alongside them).
struct Range {
  double lo, hi;
};
Range dgss_lambda_stage(const std::string& name);  // "LS" | "MS" | "HS"
Range dgss_sigma_stage(int stage);                 // 1 | 2 | 3

// Per-sample N x G soft target; every row sums to 1 and the true-class row's
// weighted level score strictly exceeds each false-class row's.
struct SupervisionMatrix {
  std::size_t n_classes = 0;
  std::size_t g_levels = 0;
  std::size_t label = 0;
  std::vector<double> cells;  // row-major

  std::span<const double> row(std::size_t i) const {
    return {cells.data() + i * g_levels, g_levels};
  }
  void validate(double tol = 1e-9) const;
};

// Gaussian density evaluated at integer levels 1..G and renormalized to sum
// to 1. Evaluated in the log domain so sharp rows (sigma ~ 0.2) keep their
// far-tail cells at exact zeros instead of NaNs from 0/0.
std::vector<double> discrete_gaussian_row(double mu, double sigma,
                                          std::size_t g_levels);

SupervisionMatrix build_supervision(std::size_t label, const DgssConfig& cfg,
                                    Rng& rng);

enum class StaticPreset { Y1, Y2 };
StaticPreset static_preset_from_string(const std::string& name);

// Y1: hard two-dimensional target (true row one-hot at level G, false rows
// one-hot at level 1). Y2: fixed Gaussians (true mu=0.8G sigma=0.2, false
// mu=0.25G sigma=0.8). Both deterministic.
SupervisionMatrix build_static(std::size_t label, StaticPreset preset,
                               std::size_t n_classes, std::size_t g_levels);

std::vector<double> onehot_target(std::size_t label, std::size_t n_classes);

}  // namespace ssx

#pragma once

#include <cstdint>
#include <vector>

#include "ssoftmax/heads.hpp"

namespace ssx {

// Per-class (mu, sigma) pairs estimated from a score matrix. `grid` is the G
// of the source level grid, or kUnitScale once normalized to [0, 1].
struct GaussianMoments {
  static constexpr std::size_t kUnitScale = 0;

  std::vector<double> mu;
  std::vector<double> sigma;
  std::size_t grid = kUnitScale;

  std::size_t n_classes() const { return mu.size(); }
  bool unit_scale() const { return grid == kUnitScale; }
};

struct FusionConfig {
  std::size_t target_g = 0;   // 0 = max of the input grids
  double sigma_floor = 1e-3;  // unit scale
};

// Discrete mean and standard deviation of each row on the source grid:
// mu_i = sum_j j * s_ij, sigma_i^2 = sum_j (j - mu_i)^2 * s_ij.
GaussianMoments estimate_moments(const ScoreMatrix& scores);

// Affine map onto the unit interval: mu -> (mu-1)/(G-1), sigma -> sigma/(G-1).
GaussianMoments normalize_moments(const GaussianMoments& m);

// Mean of means and root-sum-square of sigmas across channels (sigma clamped
// below at sigma_floor). Channel order does not affect the result, bitwise:
// the per-class values are sorted before accumulation.
GaussianMoments fuse_moments(const std::vector<GaussianMoments>& channels,
                             double sigma_floor = 1e-3);

// Map unit-scale moments onto the target grid and rebuild each row as a
// normalized discrete Gaussian.
ScoreMatrix regenerate(const GaussianMoments& m, std::size_t target_g,
                       double sigma_floor = 1e-3);

// estimate -> normalize -> fuse -> regenerate, nothing else.
ScoreMatrix gaussian_fuse(const std::vector<ScoreMatrix>& matrices,
                          const FusionConfig& cfg = {});

// Cellwise mean; only defined when every channel shares the same G.
ScoreMatrix additive_fuse(const std::vector<ScoreMatrix>& matrices);

std::size_t fuse_predict(const std::vector<ScoreMatrix>& matrices,
                         const FusionConfig& cfg = {});

}  // namespace ssx

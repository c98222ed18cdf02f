#include "ssoftmax/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "ssoftmax/dgss.hpp"
#include "ssoftmax/error.hpp"

namespace ssx {

GaussianMoments estimate_moments(const ScoreMatrix& scores) {
  GaussianMoments m;
  m.grid = scores.g_levels;
  m.mu.resize(scores.n_classes);
  m.sigma.resize(scores.n_classes);
  for (std::size_t i = 0; i < scores.n_classes; ++i) {
    auto r = scores.row(i);
    double mu = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j)
      mu += static_cast<double>(j + 1) * r[j];
    double var = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double d = static_cast<double>(j + 1) - mu;
      var += d * d * r[j];
    }
    m.mu[i] = mu;
    // tiny negative rounding residue is possible for one-hot rows
    m.sigma[i] = std::sqrt(std::max(var, 0.0));
  }
  return m;
}

GaussianMoments normalize_moments(const GaussianMoments& m) {
  if (m.unit_scale()) {
    throw ValidationError("moments are already unit-scale");
  }
  if (m.grid < 2) throw ValidationError("moment grid must have G >= 2");
  const double span = static_cast<double>(m.grid - 1);
  GaussianMoments out;
  out.grid = GaussianMoments::kUnitScale;
  out.mu.resize(m.n_classes());
  out.sigma.resize(m.n_classes());
  for (std::size_t i = 0; i < m.n_classes(); ++i) {
    out.mu[i] = (m.mu[i] - 1.0) / span;
    out.sigma[i] = m.sigma[i] / span;
  }
  return out;
}

GaussianMoments fuse_moments(const std::vector<GaussianMoments>& channels,
                             double sigma_floor) {
  if (channels.empty()) {
    throw ValidationError("fuse_moments needs at least one channel");
  }
  const std::size_t n = channels.front().n_classes();
  for (const auto& c : channels) {
    if (!c.unit_scale()) {
      throw ValidationError("fuse_moments requires unit-scale channels");
    }
    if (c.n_classes() != n) {
      throw ValidationError("fuse_moments class count mismatch: " +
                            std::to_string(c.n_classes()) + " vs " +
                            std::to_string(n));
    }
  }
  GaussianMoments out;
  out.grid = GaussianMoments::kUnitScale;
  out.mu.resize(n);
  out.sigma.resize(n);
  const std::size_t k = channels.size();
  std::vector<double> scratch(k);
  for (std::size_t i = 0; i < n; ++i) {
    // Sorted accumulation keeps the result identical under any channel
    // permutation.
    for (std::size_t c = 0; c < k; ++c) scratch[c] = channels[c].mu[i];
    std::sort(scratch.begin(), scratch.end());
    double mu = 0.0;
    for (double v : scratch) mu += v;
    out.mu[i] = mu / static_cast<double>(k);

    for (std::size_t c = 0; c < k; ++c)
      scratch[c] = channels[c].sigma[i] * channels[c].sigma[i];
    std::sort(scratch.begin(), scratch.end());
    double ss = 0.0;
    for (double v : scratch) ss += v;
    out.sigma[i] = std::max(std::sqrt(ss), sigma_floor);
  }
  return out;
}

ScoreMatrix regenerate(const GaussianMoments& m, std::size_t target_g,
                       double sigma_floor) {
  if (!m.unit_scale()) {
    throw ValidationError("regenerate requires unit-scale moments");
  }
  if (target_g < 2) throw ValidationError("regenerate needs target G >= 2");
  const double span = static_cast<double>(target_g - 1);
  ScoreMatrix out;
  out.n_classes = m.n_classes();
  out.g_levels = target_g;
  out.cells.resize(out.n_classes * target_g);
  for (std::size_t i = 0; i < m.n_classes(); ++i) {
    const double mu = 1.0 + m.mu[i] * span;
    const double sigma = std::max(m.sigma[i], sigma_floor) * span;
    auto row = discrete_gaussian_row(mu, sigma, target_g);
    std::copy(row.begin(), row.end(), out.cells.begin() + i * target_g);
  }
  return out;
}

ScoreMatrix gaussian_fuse(const std::vector<ScoreMatrix>& matrices,
                          const FusionConfig& cfg) {
  if (matrices.size() < 2) {
    throw ValidationError("gaussian fusion needs at least 2 channels");
  }
  const std::size_t n = matrices.front().n_classes;
  std::size_t max_g = 0;
  for (const auto& s : matrices) {
    if (s.n_classes != n) {
      throw ValidationError("fusion class count mismatch: " +
                            std::to_string(s.n_classes) + " vs " +
                            std::to_string(n));
    }
    max_g = std::max(max_g, s.g_levels);
  }
  const std::size_t target_g = cfg.target_g ? cfg.target_g : max_g;
  std::vector<GaussianMoments> unit;
  unit.reserve(matrices.size());
  for (const auto& s : matrices) {
    unit.push_back(normalize_moments(estimate_moments(s)));
  }
  return regenerate(fuse_moments(unit, cfg.sigma_floor), target_g,
                    cfg.sigma_floor);
}

ScoreMatrix additive_fuse(const std::vector<ScoreMatrix>& matrices) {
  if (matrices.empty()) {
    throw ValidationError("additive fusion needs at least one channel");
  }
  const std::size_t n = matrices.front().n_classes;
  const std::size_t g = matrices.front().g_levels;
  for (const auto& s : matrices) {
    if (s.n_classes != n) {
      throw ValidationError("fusion class count mismatch");
    }
    if (s.g_levels != g) {
      throw ValidationError(
          "additive fusion undefined across score grids: G=" +
          std::to_string(g) + " vs G=" + std::to_string(s.g_levels));
    }
  }
  ScoreMatrix out;
  out.n_classes = n;
  out.g_levels = g;
  out.cells.assign(n * g, 0.0);
  for (const auto& s : matrices) {
    for (std::size_t i = 0; i < out.cells.size(); ++i)
      out.cells[i] += s.cells[i];
  }
  const double inv_k = 1.0 / static_cast<double>(matrices.size());
  for (double& v : out.cells) v *= inv_k;
  return out;
}

std::size_t fuse_predict(const std::vector<ScoreMatrix>& matrices,
                         const FusionConfig& cfg) {
  const ScoreMatrix fused = gaussian_fuse(matrices, cfg);
  const ScoreTable table(fused.g_levels);
  return predict(weighted_scores(fused, table));
}

}  // namespace ssx

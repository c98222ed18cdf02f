#include "ssoftmax/dgss.hpp"

#include <algorithm>
#include <cmath>

#include "ssoftmax/error.hpp"

namespace ssx {

void DgssConfig::validate() const {
  if (n_classes < 2) throw ValidationError("DGSS needs at least 2 classes");
  if (g_levels < 2) throw ValidationError("DGSS needs at least 2 levels");
  if (lambda_true <= 0.0 || lambda_true > 1.0) {
    throw ValidationError("lambda_true must lie in (0, 1], got " +
                          std::to_string(lambda_true));
  }
  if (sigma_true <= 0.0) {
    throw ValidationError("sigma_true must be positive");
  }
  if (lambda_false_min > lambda_false_max || lambda_false_min < 0.0 ||
      lambda_false_max > 1.0) {
    throw ValidationError("lambda_false range must be ordered within [0, 1]");
  }
  if (sigma_false_min > sigma_false_max || sigma_false_min <= 0.0) {
    throw ValidationError("sigma_false range must be ordered and positive");
  }
  if (lambda_true <= lambda_false_max) {
    throw ValidationError(
        "true-class mean must dominate false-class means: lambda_true=" +
        std::to_string(lambda_true) + " <= lambda_false_max=" +
        std::to_string(lambda_false_max));
  }
}

Range dgss_lambda_stage(const std::string& name) {
  if (name == "LS") return {0.0, 0.5};
  if (name == "MS") return {0.5, 0.75};
  if (name == "HS") return {0.75, 1.0};
  throw ValidationError("unknown lambda stage '" + name +
                        "' (expected LS, MS or HS)");
}

Range dgss_sigma_stage(int stage) {
  switch (stage) {
    case 1: return {0.2, 0.6};
    case 2: return {0.6, 1.0};
    case 3: return {1.0, 1.4};
  }
  throw ValidationError("sigma stage must be 1, 2 or 3");
}

void SupervisionMatrix::validate(double tol) const {
  if (cells.size() != n_classes * g_levels || label >= n_classes) {
    throw ValidationError("supervision matrix layout mismatch");
  }
  for (std::size_t i = 0; i < n_classes; ++i) {
    double sum = 0.0;
    for (double v : row(i)) {
      if (v < 0.0) {
        throw ValidationError("negative supervision cell in row " +
                              std::to_string(i));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ValidationError("supervision row " + std::to_string(i) +
                            " sums to " + std::to_string(sum));
    }
  }
}

std::vector<double> discrete_gaussian_row(double mu, double sigma,
                                          std::size_t g_levels) {
  if (sigma <= 0.0) {
    throw ValidationError("gaussian row sigma must be positive, got " +
                          std::to_string(sigma));
  }
  if (g_levels < 2) throw ValidationError("gaussian row needs G >= 2");
  if (!std::isfinite(mu)) throw ValidationError("gaussian row mu not finite");
  std::vector<double> row(g_levels);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g_levels; ++j) {
    const double d = (static_cast<double>(j + 1) - mu) / sigma;
    row[j] = -0.5 * d * d;
    max_log = std::max(max_log, row[j]);
  }
  double denom = 0.0;
  for (double& v : row) {
    v = std::exp(v - max_log);
    denom += v;
  }
  for (double& v : row) v /= denom;
  return row;
}

namespace {

double row_weighted_score(std::span<const double> row) {
  double t = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j)
    t += static_cast<double>(j + 1) * row[j];
  return t;
}

}  // namespace

SupervisionMatrix build_supervision(std::size_t label, const DgssConfig& cfg,
                                    Rng& rng) {
  cfg.validate();
  if (label >= cfg.n_classes) {
    throw ValidationError("label " + std::to_string(label) +
                          " out of range for " +
                          std::to_string(cfg.n_classes) + " classes");
  }
  SupervisionMatrix y;
  y.n_classes = cfg.n_classes;
  y.g_levels = cfg.g_levels;
  y.label = label;
  y.cells.resize(cfg.n_classes * cfg.g_levels);
  const double g = static_cast<double>(cfg.g_levels);
  for (std::size_t i = 0; i < cfg.n_classes; ++i) {
    double mu, sigma;
    if (i == label) {
      mu = cfg.lambda_true * g;
      sigma = cfg.sigma_true;
    } else {
      mu = rng.uniform(cfg.lambda_false_min, cfg.lambda_false_max) * g;
      sigma = rng.uniform(cfg.sigma_false_min, cfg.sigma_false_max);
    }
    auto row = discrete_gaussian_row(mu, sigma, cfg.g_levels);
    std::copy(row.begin(), row.end(), y.cells.begin() + i * cfg.g_levels);
  }
  // The construction invariant (lambda_true > lambda_false_max) should make
  // the true row's score dominate; verify on the realized matrix since
  // truncation to the grid shifts means toward the center.
  const double true_score = row_weighted_score(y.row(label));
  for (std::size_t i = 0; i < cfg.n_classes; ++i) {
    if (i != label && row_weighted_score(y.row(i)) >= true_score) {
      throw NumericError(
          "supervision dominance violated for false class " +
          std::to_string(i) + "; widen the lambda_true margin");
    }
  }
  return y;
}

StaticPreset static_preset_from_string(const std::string& name) {
  if (name == "Y1") return StaticPreset::Y1;
  if (name == "Y2") return StaticPreset::Y2;
  throw ValidationError("unknown static supervision preset '" + name +
                        "' (expected Y1 or Y2)");
}

SupervisionMatrix build_static(std::size_t label, StaticPreset preset,
                               std::size_t n_classes, std::size_t g_levels) {
  if (label >= n_classes) {
    throw ValidationError("label " + std::to_string(label) +
                          " out of range for " + std::to_string(n_classes) +
                          " classes");
  }
  if (n_classes < 2 || g_levels < 2) {
    throw ValidationError("static supervision needs N >= 2 and G >= 2");
  }
  SupervisionMatrix y;
  y.n_classes = n_classes;
  y.g_levels = g_levels;
  y.label = label;
  y.cells.assign(n_classes * g_levels, 0.0);
  const double g = static_cast<double>(g_levels);
  for (std::size_t i = 0; i < n_classes; ++i) {
    if (preset == StaticPreset::Y1) {
      y.cells[i * g_levels + (i == label ? g_levels - 1 : 0)] = 1.0;
    } else {
      const double mu = i == label ? 0.8 * g : 0.25 * g;
      const double sigma = i == label ? 0.2 : 0.8;
      auto row = discrete_gaussian_row(mu, sigma, g_levels);
      std::copy(row.begin(), row.end(), y.cells.begin() + i * g_levels);
    }
  }
  return y;
}

std::vector<double> onehot_target(std::size_t label, std::size_t n_classes) {
  if (label >= n_classes) {
    throw ValidationError("label " + std::to_string(label) +
                          " out of range for " + std::to_string(n_classes) +
                          " classes");
  }
  std::vector<double> out(n_classes, 0.0);
  out[label] = 1.0;
  return out;
}

}  // namespace ssx

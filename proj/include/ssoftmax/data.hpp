#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssoftmax/rng.hpp"

namespace ssx {

struct FeatureLayout {
  std::size_t signal_dims = 0;
  std::size_t background_dims = 0;
  std::size_t total() const { return signal_dims + background_dims; }
};

// Labeled sample collection. `ids` are stable per-sample identifiers assigned
// at generation time and preserved through splits, so score dumps from
// independent runs can be joined for fusion.
struct Dataset {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;  // row-major n_samples x dim
  std::vector<std::uint32_t> labels;
  std::vector<std::uint64_t> ids;
  FeatureLayout layout;
  nlohmann::json provenance;  // generator spec, seed, class counts, ranges

  std::span<const double> sample(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
  std::span<double> sample(std::size_t i) {
    return {features.data() + i * dim, dim};
  }
  void validate() const;
};

// Synthetic spurious-correlation generator. The signal block carries the
// class prototype plus Gaussian noise; the background block carries a clean,
// amplified prototype of a background token that agrees with the label with
// probability rho. rho_train != rho_test realizes train/test shift.
struct NoiseTrapSpec {
  std::size_t n_classes = 10;
  std::size_t signal_dims = 32;
  std::size_t background_dims = 32;
  double signal_noise = 0.6;     // sigma of the additive signal noise
  double background_gain = 3.0;  // makes the shortcut the louder feature
  double rho_train = 0.95;
  double rho_test = 0.1;
  std::size_t train_samples = 4000;
  std::size_t test_samples = 2000;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static NoiseTrapSpec from_json(const nlohmann::json& j);
};

struct TrainTestPair {
  Dataset train;
  Dataset test;
};

TrainTestPair gen_noise_trap(const NoiseTrapSpec& spec);

// Orthogonal ±1 prototype used by the generator and the background attack
// (Sylvester Hadamard row tiled across the block).
double prototype_entry(std::size_t class_index, std::size_t dim_index,
                       std::size_t period);
std::size_t prototype_period(std::size_t n_classes);

struct FeatureRanges {
  std::vector<double> lo, hi;
};
FeatureRanges feature_ranges(const Dataset& ds);
// Train-split ranges recorded in the provenance at generation time, when
// present; otherwise computed from the dataset itself.
FeatureRanges stored_or_computed_ranges(const Dataset& ds);

// Each feature independently replaced with probability p by the min or max
// (equiprobable) of that feature's range. The input dataset is untouched.
Dataset impulse_noise(const Dataset& ds, double p,
                      const FeatureRanges& ranges, Rng& rng);

// Overwrites every sample's background block with the fixed token prototype
// at the generator's gain. Requires a noise-trap provenance.
Dataset background_attack(const Dataset& ds, std::size_t token_class);

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

std::vector<Dataset> split(const Dataset& ds,
                           const std::vector<double>& fractions,
                           std::uint64_t seed);

// Versioned binary container (magic "SSDS"): JSON header followed by raw
// little-endian blocks. Byte-identical across reruns of the same generator.
void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace ssx

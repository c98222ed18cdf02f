#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "ssoftmax/data.hpp"
#include "ssoftmax/train.hpp"

namespace ssx {

// 64-bit FNV-1a over the canonical (sorted-key) dump; hex string.
std::string config_hash_hex(const nlohmann::json& config);

// Experiment file layout:
//   dataset: exactly one of
//     {"noise_trap": {...}} | {"train": path, "test": path} |
//     {"idx": {"images": path, "labels": path}}
//   model: hidden/head/g_levels (input_dim and n_classes infer from data)
//   train: TrainConfig fields incl. target
//   out_dir: default output directory
struct ExperimentConfig {
  nlohmann::json raw;
  std::string hash;

  std::optional<NoiseTrapSpec> noise_trap;
  std::string train_path, test_path;
  std::string idx_images, idx_labels;
  nlohmann::json model_json;
  nlohmann::json train_json;
  std::string out_dir;

  static ExperimentConfig parse(const std::string& config_text);
};

// Fills input_dim / n_classes from the dataset when the config omits them.
ModelSpec resolve_model_spec(const nlohmann::json& model_json,
                             const Dataset& train_set);

// Loads or generates the configured dataset pair.
TrainTestPair resolve_datasets(const ExperimentConfig& cfg);

}  // namespace ssx

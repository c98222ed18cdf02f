#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssoftmax/data.hpp"
#include "ssoftmax/dgss.hpp"
#include "ssoftmax/heads.hpp"
#include "ssoftmax/metrics.hpp"
#include "ssoftmax/tensor.hpp"

namespace ssx {

enum class HeadKind { Softmax, ScoreSoftmax };

std::string head_kind_name(HeadKind k);
HeadKind head_kind_from_string(const std::string& name);

// Multilayer perceptron over flattened features: hidden relu layers followed
// by a linear layer of width N (softmax head) or N*G (score head).
struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {256, 64};
  HeadKind head = HeadKind::ScoreSoftmax;
  std::size_t n_classes = 10;
  std::size_t g_levels = 5;  // score head only

  std::size_t output_width() const {
    return head == HeadKind::Softmax ? n_classes : n_classes * g_levels;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

enum class TargetKind { OneHot, Vls, Dgss, Static };

struct HeadTarget {
  TargetKind kind = TargetKind::Dgss;
  double vls_eps = 0.1;            // Vls
  DgssConfig dgss;                 // Dgss
  StaticPreset preset = StaticPreset::Y2;  // Static

  void validate(const ModelSpec& spec) const;
  nlohmann::json to_json() const;
  static HeadTarget from_json(const nlohmann::json& j);
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::vector<std::size_t> lr_decay_epochs = {2, 28};  // divide lr by 10
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-3;
  double augment_sigma = 0.05;  // additive feature jitter, train time only
  std::uint64_t seed = 1;
  HeadTarget target;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Model {
  ModelSpec spec;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  // provenance carried into every report derived from this model
  std::string config_hash;
  std::uint64_t seed = 0;

  Tensor forward(const Tensor& x, Tape* tape = nullptr) const;
  std::vector<Tensor> parameters() const;  // W1, b1, W2, b2, ...
  std::vector<std::string> parameter_names() const;
};

Model init_model(const ModelSpec& spec, Rng& rng);

struct OptimState {
  std::vector<std::vector<double>> m;  // parameter order of parameters()
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static OptimState for_model(const Model& model);
};

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double eps = 1e-8;
};

// Bias-corrected Adam step; weight decay enters as an additive lambda*w term
// on the gradient. Aborts with the parameter's name on NaN gradients.
void adam_step(Model& model, OptimState& state, const AdamParams& params);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double eval_accuracy = -1.0;  // -1 when no eval set was given
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  double final_loss = 0.0;
  nlohmann::json to_json() const;
};

// Algorithm loop: per epoch, seeded shuffle; per sample, fresh jitter and (for
// DGSS) a freshly sampled supervision matrix from a stream derived from
// (seed, epoch, sample id) — the batch partition does not affect the draw.
TrainLog train(Model& model, const Dataset& train_set,
               const Dataset* eval_set, const TrainConfig& cfg,
               OptimState* state = nullptr);

// Per-sample raw scores of one evaluated dataset: row width is N*G for the
// score head and N for the softmax head.
struct ScoresDump {
  HeadKind head = HeadKind::ScoreSoftmax;
  std::size_t n_classes = 0;
  std::size_t g_levels = 0;  // 0 for the softmax head
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> ids;
  std::vector<std::uint32_t> labels;
  std::vector<double> cells;

  std::size_t row_width() const {
    return head == HeadKind::Softmax ? n_classes : n_classes * g_levels;
  }
  ScoreMatrix matrix_at(std::size_t i) const;  // score head only
  nlohmann::json to_json() const;
  static ScoresDump from_json(const nlohmann::json& j);
};

void write_scores(const std::string& path, const ScoresDump& dump);
ScoresDump read_scores(const std::string& path);

struct EvalOutput {
  std::vector<std::uint32_t> predictions;
  std::vector<double> class_scores;  // row-major M x N: t_i or probability
  ScoresDump scores;
  MetricsBundle metrics;
};

EvalOutput evaluate(const Model& model, const Dataset& ds);

// Versioned checkpoint (magic "SSCK"): JSON header + raw little-endian f64
// parameter and optimizer blocks. Reload + resume reproduces an uninterrupted
// run bitwise.
struct Checkpoint {
  Model model;
  OptimState optim;
  std::uint64_t epoch = 0;
};

void write_checkpoint(const std::string& path, const Model& model,
                      const OptimState& optim, std::uint64_t epoch);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace ssx

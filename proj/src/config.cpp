#include "ssoftmax/config.hpp"

#include "ssoftmax/error.hpp"

namespace ssx {

using nlohmann::json;

std::string config_hash_hex(const json& config) {
  const std::string canonical = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig ExperimentConfig::parse(const std::string& config_text) {
  ExperimentConfig cfg;
  try {
    cfg.raw = json::parse(config_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") +
                          e.what());
  }
  cfg.hash = config_hash_hex(cfg.raw);

  if (!cfg.raw.contains("dataset")) {
    throw ValidationError("config is missing the 'dataset' section");
  }
  const json& ds = cfg.raw["dataset"];
  int sources = 0;
  if (ds.contains("noise_trap")) {
    cfg.noise_trap = NoiseTrapSpec::from_json(ds["noise_trap"]);
    ++sources;
  }
  if (ds.contains("train") || ds.contains("test")) {
    if (!ds.contains("train") || !ds.contains("test")) {
      throw ValidationError(
          "dataset paths need both 'train' and 'test' entries");
    }
    cfg.train_path = ds["train"].get<std::string>();
    cfg.test_path = ds["test"].get<std::string>();
    ++sources;
  }
  if (ds.contains("idx")) {
    cfg.idx_images = ds["idx"].at("images").get<std::string>();
    cfg.idx_labels = ds["idx"].at("labels").get<std::string>();
    ++sources;
  }
  if (sources != 1) {
    throw ValidationError(
        "config must declare exactly one dataset source "
        "(noise_trap, train/test paths, or idx)");
  }

  cfg.model_json = cfg.raw.value("model", json::object());
  cfg.train_json = cfg.raw.value("train", json::object());
  cfg.out_dir = cfg.raw.value("out_dir", std::string("."));
  return cfg;
}

ModelSpec resolve_model_spec(const json& model_json,
                             const Dataset& train_set) {
  json j = model_json;
  if (!j.contains("input_dim")) j["input_dim"] = train_set.dim;
  if (!j.contains("n_classes")) j["n_classes"] = train_set.n_classes;
  if (!j.contains("hidden")) j["hidden"] = json::array({256, 64});
  if (!j.contains("head")) j["head"] = "ssoftmax";
  if (!j.contains("g_levels")) j["g_levels"] = 5;
  ModelSpec spec = ModelSpec::from_json(j);
  if (spec.input_dim != train_set.dim) {
    throw ValidationError("model input_dim " +
                          std::to_string(spec.input_dim) +
                          " does not match dataset dim " +
                          std::to_string(train_set.dim));
  }
  if (spec.n_classes != train_set.n_classes) {
    throw ValidationError("model n_classes " +
                          std::to_string(spec.n_classes) +
                          " does not match dataset classes " +
                          std::to_string(train_set.n_classes));
  }
  return spec;
}

TrainTestPair resolve_datasets(const ExperimentConfig& cfg) {
  if (cfg.noise_trap) {
    return gen_noise_trap(*cfg.noise_trap);
  }
  if (!cfg.idx_images.empty()) {
    // IDX delivers a single labeled set; hold out a fixed tail as the test
    // split so eval has something to score.
    Dataset all = load_idx(cfg.idx_images, cfg.idx_labels);
    auto parts = split(all, {0.8, 0.2}, 0);
    return {std::move(parts[0]), std::move(parts[1])};
  }
  TrainTestPair pair;
  pair.train = read_dataset(cfg.train_path);
  pair.test = read_dataset(cfg.test_path);
  return pair;
}

}  // namespace ssx

#include "ssoftmax/ssoftmax.h"

#include <cstring>
#include <map>
#include <string>

#include <json.hpp>

#include "ssoftmax/config.hpp"
#include "ssoftmax/data.hpp"
#include "ssoftmax/error.hpp"
#include "ssoftmax/fusion.hpp"
#include "ssoftmax/gradcheck.hpp"
#include "ssoftmax/metrics.hpp"
#include "ssoftmax/train.hpp"

using nlohmann::json;

struct ssx_dataset {
  ssx::Dataset ds;
};

struct ssx_model {
  ssx::Model model;
  ssx::OptimState optim;
  std::uint64_t epoch = 0;
};

struct ssx_scores {
  ssx::ScoresDump dump;
};

namespace {

thread_local std::string g_last_error;

int code_of(const ssx::Error& e) {
  switch (e.code()) {
    case ssx::ErrorCode::Validation: return SSX_ERR_VALIDATION;
    case ssx::ErrorCode::Numeric: return SSX_ERR_NUMERIC;
    case ssx::ErrorCode::Io: return SSX_ERR_IO;
  }
  return SSX_ERR_VALIDATION;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return SSX_OK;
  } catch (const ssx::Error& e) {
    g_last_error = e.what();
    return code_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SSX_ERR_VALIDATION;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int require(bool cond, const char* msg) {
  if (!cond) {
    g_last_error = msg;
    return SSX_ERR_VALIDATION;
  }
  return SSX_OK;
}

json metrics_json(const ssx::Model& model, const ssx::EvalOutput& eval,
                  std::size_t n_samples, unsigned flags) {
  json out = eval.metrics.to_json();
  out["n_samples"] = n_samples;
  out["config_hash"] = model.config_hash;
  out["seed"] = model.seed;
  out["head"] = ssx::head_kind_name(model.spec.head);
  if (model.spec.head == ssx::HeadKind::ScoreSoftmax) {
    out["g_levels"] = model.spec.g_levels;
  }
  if (flags & SSX_EVAL_WITH_CURVES) {
    json roc = json::object(), pr = json::object(),
         auc = json::object();
    const std::size_t n = model.spec.n_classes;
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<double> per_class(n_samples);
      for (std::size_t i = 0; i < n_samples; ++i) {
        per_class[i] = eval.class_scores[i * n + c];
      }
      // one-vs-rest curves are undefined for classes absent from the split
      try {
        auto roc_pts = ssx::curve_points(ssx::CurveKind::Roc, per_class,
                                         eval.scores.labels,
                                         static_cast<std::uint32_t>(c));
        auto pr_pts = ssx::curve_points(ssx::CurveKind::Pr, per_class,
                                        eval.scores.labels,
                                        static_cast<std::uint32_t>(c));
        json rj = json::array(), pj = json::array();
        for (const auto& p : roc_pts) rj.push_back({p.x, p.y});
        for (const auto& p : pr_pts) pj.push_back({p.x, p.y});
        const std::string key = "class_" + std::to_string(c);
        roc[key] = std::move(rj);
        pr[key] = std::move(pj);
        auc[key] = json{{"roc", ssx::curve_auc(roc_pts)},
                        {"pr", ssx::curve_auc(pr_pts)}};
      } catch (const ssx::ValidationError&) {
      }
    }
    out["curves"] = json{{"roc", std::move(roc)},
                         {"pr", std::move(pr)},
                         {"auc", std::move(auc)}};
  }
  return out;
}

}  // namespace

extern "C" {

const char* ssx_version(void) { return "0.1.0"; }

const char* ssx_last_error(void) { return g_last_error.c_str(); }

void ssx_string_free(char* s) { delete[] s; }

int ssx_config_hash(const char* json_text, char** out_hash) {
  if (int rc = require(json_text && out_hash,
                       "null argument to ssx_config_hash"))
    return rc;
  return guarded([&] {
    json j;
    try {
      j = json::parse(json_text);
    } catch (const json::exception& e) {
      throw ssx::ValidationError(std::string("not valid JSON: ") + e.what());
    }
    *out_hash = dup_string(ssx::config_hash_hex(j));
  });
}

int ssx_dataset_generate(const char* spec_json, ssx_dataset** out_train,
                         ssx_dataset** out_test) {
  if (int rc = require(spec_json && out_train && out_test,
                       "null argument to ssx_dataset_generate"))
    return rc;
  return guarded([&] {
    json j;
    try {
      j = json::parse(spec_json);
    } catch (const json::exception& e) {
      throw ssx::ValidationError(std::string("spec is not valid JSON: ") +
                                 e.what());
    }
    auto pair = ssx::gen_noise_trap(ssx::NoiseTrapSpec::from_json(j));
    *out_train = new ssx_dataset{std::move(pair.train)};
    *out_test = new ssx_dataset{std::move(pair.test)};
  });
}

int ssx_dataset_read(const char* path, ssx_dataset** out) {
  if (int rc = require(path && out, "null argument to ssx_dataset_read"))
    return rc;
  return guarded([&] { *out = new ssx_dataset{ssx::read_dataset(path)}; });
}

int ssx_dataset_write(const ssx_dataset* ds, const char* path) {
  if (int rc = require(ds && path, "null argument to ssx_dataset_write"))
    return rc;
  return guarded([&] { ssx::write_dataset(path, ds->ds); });
}

int ssx_dataset_read_idx(const char* images_path, const char* labels_path,
                         ssx_dataset** out) {
  if (int rc = require(images_path && labels_path && out,
                       "null argument to ssx_dataset_read_idx"))
    return rc;
  return guarded(
      [&] { *out = new ssx_dataset{ssx::load_idx(images_path, labels_path)}; });
}

int ssx_dataset_info(const ssx_dataset* ds, char** out_json) {
  if (int rc = require(ds && out_json, "null argument to ssx_dataset_info"))
    return rc;
  return guarded([&] {
    const json info{{"n_samples", ds->ds.n_samples},
                    {"dim", ds->ds.dim},
                    {"n_classes", ds->ds.n_classes},
                    {"layout",
                     {{"signal_dims", ds->ds.layout.signal_dims},
                      {"background_dims", ds->ds.layout.background_dims}}},
                    {"provenance", ds->ds.provenance}};
    *out_json = dup_string(info.dump(2));
  });
}

void ssx_dataset_free(ssx_dataset* ds) { delete ds; }

int ssx_train(const char* config_json, const ssx_dataset* train_set,
              const ssx_dataset* eval_set, ssx_model** out_model,
              char** out_log_json) {
  if (int rc = require(config_json && train_set && out_model,
                       "null argument to ssx_train"))
    return rc;
  return guarded([&] {
    json raw;
    try {
      raw = json::parse(config_json);
    } catch (const json::exception& e) {
      throw ssx::ValidationError(std::string("config is not valid JSON: ") +
                                 e.what());
    }
    const std::string hash = ssx::config_hash_hex(raw);
    const ssx::ModelSpec spec = ssx::resolve_model_spec(
        raw.value("model", json::object()), train_set->ds);
    const ssx::TrainConfig cfg =
        ssx::TrainConfig::from_json(raw.value("train", json::object()));
    cfg.target.validate(spec);

    ssx::Rng init_rng = ssx::Rng::derive(cfg.seed, {0x696e6974});  // "init"
    ssx::Model model = ssx::init_model(spec, init_rng);
    model.config_hash = hash;
    model.seed = cfg.seed;
    ssx::OptimState optim = ssx::OptimState::for_model(model);
    const ssx::TrainLog log = ssx::train(
        model, train_set->ds, eval_set ? &eval_set->ds : nullptr, cfg, &optim);

    json log_json = log.to_json();
    log_json["config_hash"] = hash;
    log_json["seed"] = cfg.seed;
    log_json["head"] = ssx::head_kind_name(spec.head);
    if (out_log_json) *out_log_json = dup_string(log_json.dump(2));
    *out_model = new ssx_model{std::move(model), std::move(optim),
                               cfg.epochs};
  });
}

int ssx_model_read(const char* path, ssx_model** out) {
  if (int rc = require(path && out, "null argument to ssx_model_read"))
    return rc;
  return guarded([&] {
    ssx::Checkpoint ck = ssx::read_checkpoint(path);
    *out = new ssx_model{std::move(ck.model), std::move(ck.optim), ck.epoch};
  });
}

int ssx_model_write(const ssx_model* m, const char* path) {
  if (int rc = require(m && path, "null argument to ssx_model_write"))
    return rc;
  return guarded(
      [&] { ssx::write_checkpoint(path, m->model, m->optim, m->epoch); });
}

void ssx_model_free(ssx_model* m) { delete m; }

int ssx_evaluate(const ssx_model* m, const ssx_dataset* ds, unsigned flags,
                 char** out_metrics_json, ssx_scores** out_scores) {
  if (int rc = require(m && ds && out_metrics_json,
                       "null argument to ssx_evaluate"))
    return rc;
  return guarded([&] {
    ssx::EvalOutput eval = ssx::evaluate(m->model, ds->ds);
    const json out = metrics_json(m->model, eval, ds->ds.n_samples, flags);
    *out_metrics_json = dup_string(out.dump(2));
    if (out_scores) *out_scores = new ssx_scores{std::move(eval.scores)};
  });
}

int ssx_attack(const ssx_model* m, const ssx_dataset* ds,
               const char* attack_json, char** out_report_json) {
  if (int rc = require(m && ds && attack_json && out_report_json,
                       "null argument to ssx_attack"))
    return rc;
  return guarded([&] {
    json spec;
    try {
      spec = json::parse(attack_json);
    } catch (const json::exception& e) {
      throw ssx::ValidationError(std::string("attack spec: ") + e.what());
    }
    const auto p_list = spec.value("impulse_p", std::vector<double>{});
    const std::uint64_t seed = spec.value("seed", std::uint64_t{0});

    const double clean = ssx::evaluate(m->model, ds->ds).metrics.top1;
    const ssx::FeatureRanges ranges = ssx::stored_or_computed_ranges(ds->ds);
    std::vector<std::pair<double, double>> attacked;
    for (std::size_t i = 0; i < p_list.size(); ++i) {
      ssx::Rng rng = ssx::Rng::derive(seed, {0x696d70, i});  // "imp"
      ssx::Dataset corrupted =
          ssx::impulse_noise(ds->ds, p_list[i], ranges, rng);
      attacked.emplace_back(p_list[i],
                            ssx::evaluate(m->model, corrupted).metrics.top1);
    }
    json report = ssx::decline_summary(clean, attacked).to_json();
    if (spec.contains("background_token")) {
      const auto token = spec.at("background_token").get<std::size_t>();
      ssx::Dataset bg = ssx::background_attack(ds->ds, token);
      const double acc = ssx::evaluate(m->model, bg).metrics.top1;
      report["background"] = json{{"token", token},
                                  {"attacked_accuracy", acc},
                                  {"decline", clean - acc}};
    }
    report["config_hash"] = m->model.config_hash;
    report["seed"] = seed;
    report["model_seed"] = m->model.seed;
    *out_report_json = dup_string(report.dump(2));
  });
}

int ssx_scores_read(const char* path, ssx_scores** out) {
  if (int rc = require(path && out, "null argument to ssx_scores_read"))
    return rc;
  return guarded([&] { *out = new ssx_scores{ssx::read_scores(path)}; });
}

int ssx_scores_write(const ssx_scores* s, const char* path) {
  if (int rc = require(s && path, "null argument to ssx_scores_write"))
    return rc;
  return guarded([&] { ssx::write_scores(path, s->dump); });
}

void ssx_scores_free(ssx_scores* s) { delete s; }

int ssx_fuse(const ssx_scores* const* channels, size_t n_channels,
             const char* fusion_json, char** out_report_json) {
  if (int rc = require(channels && out_report_json && n_channels >= 2,
                       "fusion needs at least 2 score channels"))
    return rc;
  return guarded([&] {
    json spec = json::object();
    if (fusion_json && std::strlen(fusion_json) > 0) {
      try {
        spec = json::parse(fusion_json);
      } catch (const json::exception& e) {
        throw ssx::ValidationError(std::string("fusion spec: ") + e.what());
      }
    }
    const std::string method = spec.value("method", std::string("gf"));
    if (method != "gf" && method != "af") {
      throw ssx::ValidationError("fusion method must be 'gf' or 'af'");
    }
    ssx::FusionConfig fcfg;
    fcfg.target_g = spec.value("target_g", std::size_t{0});
    fcfg.sigma_floor = spec.value("sigma_floor", 1e-3);

    // Channels must describe the same sample set: identical id/label pairs.
    const ssx::ScoresDump& first = channels[0]->dump;
    const std::size_t n_samples = first.ids.size();
    std::map<std::uint64_t, std::size_t> id_index;
    for (std::size_t i = 0; i < n_samples; ++i) id_index[first.ids[i]] = i;
    if (id_index.size() != n_samples) {
      throw ssx::ValidationError("duplicate sample ids in score dump");
    }
    std::vector<std::vector<std::size_t>> channel_pos(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
      const ssx::ScoresDump& d = channels[c]->dump;
      if (d.head != ssx::HeadKind::ScoreSoftmax) {
        throw ssx::ValidationError(
            "fusion requires score-head dumps (channel " + std::to_string(c) +
            " is softmax)");
      }
      if (d.ids.size() != n_samples || d.n_classes != first.n_classes) {
        throw ssx::ValidationError("score channels do not cover the same "
                                   "sample set or class count");
      }
      channel_pos[c].resize(n_samples);
      for (std::size_t i = 0; i < n_samples; ++i) {
        auto it = id_index.find(d.ids[i]);
        if (it == id_index.end()) {
          throw ssx::ValidationError("sample id " + std::to_string(d.ids[i]) +
                                     " missing from the first channel");
        }
        if (d.labels[i] != first.labels[it->second]) {
          throw ssx::ValidationError("label mismatch for sample id " +
                                     std::to_string(d.ids[i]));
        }
        channel_pos[c][it->second] = i;
      }
    }

    // Per-branch accuracy on its own scores.
    json branches = json::array();
    for (std::size_t c = 0; c < n_channels; ++c) {
      const ssx::ScoresDump& d = channels[c]->dump;
      const ssx::ScoreTable table(d.g_levels);
      std::vector<std::uint32_t> preds(n_samples);
      for (std::size_t i = 0; i < n_samples; ++i) {
        auto t = ssx::weighted_scores(d.matrix_at(i), table);
        preds[i] = static_cast<std::uint32_t>(ssx::predict(t));
      }
      branches.push_back({{"g_levels", d.g_levels},
                          {"config_hash", d.config_hash},
                          {"seed", d.seed},
                          {"accuracy", ssx::accuracy(preds, d.labels)}});
    }

    std::vector<std::uint32_t> fused_preds(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
      std::vector<ssx::ScoreMatrix> mats;
      mats.reserve(n_channels);
      for (std::size_t c = 0; c < n_channels; ++c) {
        mats.push_back(channels[c]->dump.matrix_at(channel_pos[c][i]));
      }
      if (method == "gf") {
        fused_preds[i] =
            static_cast<std::uint32_t>(ssx::fuse_predict(mats, fcfg));
      } else {
        const ssx::ScoreMatrix fused = ssx::additive_fuse(mats);
        const ssx::ScoreTable table(fused.g_levels);
        fused_preds[i] = static_cast<std::uint32_t>(
            ssx::predict(ssx::weighted_scores(fused, table)));
      }
    }
    json report{{"method", method},
                {"n_samples", n_samples},
                {"branches", std::move(branches)},
                {"fused_accuracy", ssx::accuracy(fused_preds, first.labels)},
                {"config_hash", ssx::config_hash_hex(spec)},
                {"seed", spec.value("seed", std::uint64_t{0})}};
    if (method == "gf") {
      std::size_t max_g = 0;
      for (std::size_t c = 0; c < n_channels; ++c) {
        max_g = std::max(max_g, channels[c]->dump.g_levels);
      }
      report["target_g"] = fcfg.target_g ? fcfg.target_g : max_g;
    }
    *out_report_json = dup_string(report.dump(2));
  });
}

int ssx_grad_check(int negative_control, char** out_report_json) {
  if (int rc = require(out_report_json != nullptr,
                       "null argument to ssx_grad_check"))
    return rc;
  return guarded([&] {
    const json report = ssx::grad_check_report(negative_control != 0);
    *out_report_json = dup_string(report.dump(2));
    if (!ssx::grad_check_passed(report)) {
      throw ssx::NumericError("gradient checks failed");
    }
  });
}

}  // extern "C"

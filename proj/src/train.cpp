#include "ssoftmax/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ssoftmax/error.hpp"

namespace ssx {

using nlohmann::json;

namespace {

// stream tags for Rng::derive
constexpr std::uint64_t kTagShuffle = 0x73686600;  // "shf"
constexpr std::uint64_t kTagSample = 0x736d7000;   // "smp"
constexpr std::uint64_t kTagInit = 0x696e6900;     // "ini"

}  // namespace

std::string head_kind_name(HeadKind k) {
  return k == HeadKind::Softmax ? "softmax" : "ssoftmax";
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "softmax") return HeadKind::Softmax;
  if (name == "ssoftmax") return HeadKind::ScoreSoftmax;
  throw ValidationError("unknown head '" + name +
                        "' (expected softmax or ssoftmax)");
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ValidationError("model input_dim must be positive");
  if (n_classes < 2) throw ValidationError("model needs at least 2 classes");
  for (std::size_t h : hidden) {
    if (h == 0) throw ValidationError("hidden layer width must be positive");
  }
  if (head == HeadKind::ScoreSoftmax && g_levels < 2) {
    throw ValidationError("score head needs g_levels >= 2");
  }
}

json ModelSpec::to_json() const {
  return json{{"input_dim", input_dim},
              {"hidden", hidden},
              {"head", head_kind_name(head)},
              {"n_classes", n_classes},
              {"g_levels", g_levels}};
}

ModelSpec ModelSpec::from_json(const json& j) {
  ModelSpec s;
  try {
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    s.head = head_kind_from_string(j.at("head").get<std::string>());
    s.n_classes = j.at("n_classes").get<std::size_t>();
    if (j.contains("g_levels")) s.g_levels = j.at("g_levels").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model spec: ") + e.what());
  }
  s.validate();
  return s;
}

void HeadTarget::validate(const ModelSpec& spec) const {
  switch (kind) {
    case TargetKind::OneHot:
      if (spec.head != HeadKind::Softmax) {
        throw ValidationError("onehot target requires the softmax head");
      }
      break;
    case TargetKind::Vls:
      if (spec.head != HeadKind::Softmax) {
        throw ValidationError("vls target requires the softmax head");
      }
      if (vls_eps < 0.0 || vls_eps >= 1.0) {
        throw ValidationError("vls eps must lie in [0, 1)");
      }
      break;
    case TargetKind::Dgss: {
      if (spec.head != HeadKind::ScoreSoftmax) {
        throw ValidationError("dgss target requires the score head");
      }
      DgssConfig c = dgss;
      c.n_classes = spec.n_classes;
      c.g_levels = spec.g_levels;
      c.validate();
      break;
    }
    case TargetKind::Static:
      if (spec.head != HeadKind::ScoreSoftmax) {
        throw ValidationError("static target requires the score head");
      }
      break;
  }
}

json HeadTarget::to_json() const {
  switch (kind) {
    case TargetKind::OneHot: return json{{"kind", "onehot"}};
    case TargetKind::Vls: return json{{"kind", "vls"}, {"eps", vls_eps}};
    case TargetKind::Dgss:
      return json{{"kind", "dgss"},
                  {"lambda_true", dgss.lambda_true},
                  {"sigma_true", dgss.sigma_true},
                  {"lambda_false", {dgss.lambda_false_min, dgss.lambda_false_max}},
                  {"sigma_false", {dgss.sigma_false_min, dgss.sigma_false_max}}};
    case TargetKind::Static:
      return json{{"kind", "static"},
                  {"preset", preset == StaticPreset::Y1 ? "Y1" : "Y2"}};
  }
  throw ValidationError("unreachable target kind");
}

HeadTarget HeadTarget::from_json(const json& j) {
  HeadTarget t;
  std::string kind;
  try {
    kind = j.at("kind").get<std::string>();
    if (kind == "onehot") {
      t.kind = TargetKind::OneHot;
    } else if (kind == "vls") {
      t.kind = TargetKind::Vls;
      t.vls_eps = j.at("eps").get<double>();
    } else if (kind == "dgss") {
      t.kind = TargetKind::Dgss;
      if (j.contains("lambda_true"))
        t.dgss.lambda_true = j.at("lambda_true").get<double>();
      if (j.contains("sigma_true"))
        t.dgss.sigma_true = j.at("sigma_true").get<double>();
      if (j.contains("lambda_false")) {
        t.dgss.lambda_false_min = j.at("lambda_false").at(0).get<double>();
        t.dgss.lambda_false_max = j.at("lambda_false").at(1).get<double>();
      }
      if (j.contains("sigma_false")) {
        t.dgss.sigma_false_min = j.at("sigma_false").at(0).get<double>();
        t.dgss.sigma_false_max = j.at("sigma_false").at(1).get<double>();
      }
    } else if (kind == "static") {
      t.kind = TargetKind::Static;
      t.preset = static_preset_from_string(j.at("preset").get<std::string>());
    } else {
      throw ValidationError("unknown target kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("head target: ") + e.what());
  }
  return t;
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ValidationError("lr must be positive");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ValidationError("beta1/beta2 must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ValidationError("weight_decay must be >= 0");
  if (augment_sigma < 0.0) throw ValidationError("augment_sigma must be >= 0");
}

json TrainConfig::to_json() const {
  return json{{"epochs", epochs},
              {"batch_size", batch_size},
              {"lr", lr},
              {"lr_decay_epochs", lr_decay_epochs},
              {"beta1", beta1},
              {"beta2", beta2},
              {"weight_decay", weight_decay},
              {"augment_sigma", augment_sigma},
              {"seed", seed},
              {"target", target.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size"))
      c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("lr_decay_epochs"))
      c.lr_decay_epochs =
          j.at("lr_decay_epochs").get<std::vector<std::size_t>>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
    if (j.contains("weight_decay"))
      c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("augment_sigma"))
      c.augment_sigma = j.at("augment_sigma").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("target")) c.target = HeadTarget::from_json(j.at("target"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor Model::forward(const Tensor& x, Tape* tape) const {
  if (x.shape().back() != spec.input_dim) {
    throw ValidationError("model expects input dim " +
                          std::to_string(spec.input_dim) + ", got " +
                          shape_to_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = add(matmul(h, weights[l], tape), biases[l], tape);
    if (l + 1 < weights.size()) h = relu(h, tape);
  }
  return h;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back("layer " + std::to_string(l) + " weights");
    out.push_back("layer " + std::to_string(l) + " bias");
  }
  return out;
}

Model init_model(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Model m;
  m.spec = spec;
  std::vector<std::size_t> widths;
  widths.push_back(spec.input_dim);
  for (std::size_t h : spec.hidden) widths.push_back(h);
  widths.push_back(spec.output_width());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-limit, limit);
    m.weights.emplace_back(std::vector<std::size_t>{fan_in, fan_out},
                           std::move(w));
    m.biases.push_back(Tensor::zeros({fan_out}));
  }
  return m;
}

OptimState OptimState::for_model(const Model& model) {
  OptimState s;
  for (const Tensor& p : model.parameters()) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(Model& model, OptimState& state, const AdamParams& params) {
  auto tensors = model.parameters();
  const auto names = model.parameter_names();
  if (state.m.size() != tensors.size()) {
    throw ValidationError("optimizer state does not match parameter count");
  }
  state.step += 1;
  const double bc1 =
      1.0 - std::pow(params.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(params.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Tensor& p = tensors[t];
    if (!p.has_grad()) {
      throw ValidationError("parameter '" + names[t] +
                            "' has no gradient; run backward first");
    }
    const auto& g = p.grad();
    auto& w = p.mutable_values();
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (std::isnan(g[i])) {
        throw NumericError("NaN gradient in parameter '" + names[t] +
                           "' at index " + std::to_string(i));
      }
      const double grad = g[i] + params.weight_decay * w[i];
      m[i] = params.beta1 * m[i] + (1.0 - params.beta1) * grad;
      v[i] = params.beta2 * v[i] + (1.0 - params.beta2) * grad * grad;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= params.lr * mhat / (std::sqrt(vhat) + params.eps);
    }
  }
}

namespace {

// Per-sample training target rows appended to `cells`.
void append_target(const ModelSpec& spec, const HeadTarget& target,
                   std::uint32_t label, Rng& sample_rng,
                   std::vector<double>& cells) {
  switch (target.kind) {
    case TargetKind::OneHot: {
      auto t = onehot_target(label, spec.n_classes);
      cells.insert(cells.end(), t.begin(), t.end());
      break;
    }
    case TargetKind::Vls: {
      auto t = smooth_labels(label, spec.n_classes, target.vls_eps);
      cells.insert(cells.end(), t.begin(), t.end());
      break;
    }
    case TargetKind::Dgss: {
      DgssConfig cfg = target.dgss;
      cfg.n_classes = spec.n_classes;
      cfg.g_levels = spec.g_levels;
      auto y = build_supervision(label, cfg, sample_rng);
      cells.insert(cells.end(), y.cells.begin(), y.cells.end());
      break;
    }
    case TargetKind::Static: {
      auto y =
          build_static(label, target.preset, spec.n_classes, spec.g_levels);
      cells.insert(cells.end(), y.cells.begin(), y.cells.end());
      break;
    }
  }
}

}  // namespace

json TrainLog::to_json() const {
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    json row{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"lr", e.lr}};
    if (e.eval_accuracy >= 0.0) row["eval_accuracy"] = e.eval_accuracy;
    epochs_json.push_back(std::move(row));
  }
  return json{{"epochs", std::move(epochs_json)}, {"final_loss", final_loss}};
}

TrainLog train(Model& model, const Dataset& train_set,
               const Dataset* eval_set, const TrainConfig& cfg,
               OptimState* state) {
  cfg.validate();
  cfg.target.validate(model.spec);
  if (train_set.n_samples == 0) {
    throw ValidationError("training dataset is empty");
  }
  if (train_set.dim != model.spec.input_dim) {
    throw ValidationError("dataset dim " + std::to_string(train_set.dim) +
                          " does not match model input " +
                          std::to_string(model.spec.input_dim));
  }
  OptimState local = OptimState::for_model(model);
  OptimState& opt = state ? *state : local;

  TrainLog log;
  double lr = cfg.lr;
  const std::size_t target_width = model.spec.head == HeadKind::Softmax
                                       ? model.spec.n_classes
                                       : model.spec.output_width();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (std::find(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(),
                  epoch) != cfg.lr_decay_epochs.end()) {
      lr /= 10.0;
    }
    std::vector<std::size_t> order(train_set.n_samples);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = Rng::derive(cfg.seed, {kTagShuffle, epoch});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t bsz =
          std::min(cfg.batch_size, order.size() - start);
      std::vector<double> xbuf;
      xbuf.reserve(bsz * train_set.dim);
      std::vector<double> ybuf;
      ybuf.reserve(bsz * target_width);
      for (std::size_t b = 0; b < bsz; ++b) {
        const std::size_t idx = order[start + b];
        // One stream per (seed, epoch, sample): jitter first, then target
        // draws. Independent of how the epoch is batched.
        Rng sample_rng =
            Rng::derive(cfg.seed, {kTagSample, epoch, train_set.ids[idx]});
        auto row = train_set.sample(idx);
        for (double v : row) {
          xbuf.push_back(v + cfg.augment_sigma * sample_rng.normal());
        }
        append_target(model.spec, cfg.target, train_set.labels[idx],
                      sample_rng, ybuf);
      }
      try {
        Tape tape;
        Tensor x({bsz, train_set.dim}, std::move(xbuf));
        Tensor y({bsz, target_width}, std::move(ybuf));
        Tensor logits = model.forward(x, &tape);
        Tensor loss;
        if (model.spec.head == HeadKind::Softmax) {
          Tensor probs = softmax_rows(logits, &tape);
          loss = cross_entropy_mean(probs, y, &tape);
        } else {
          Tensor scores =
              grouped_softmax_rows(logits, model.spec.g_levels, &tape);
          loss = score_loss_tensor(y, scores, ScoreLossForm::Squared, &tape);
        }
        const double loss_value = loss.scalar_value();
        if (!std::isfinite(loss_value)) {
          throw NumericError("non-finite loss");
        }
        tape.backward(loss);
        adam_step(model, opt,
                  {lr, cfg.beta1, cfg.beta2, cfg.weight_decay, 1e-8});
        loss_sum += loss_value * static_cast<double>(bsz);
        seen += bsz;
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(start / cfg.batch_size) + ": " +
                           e.what());
      }
    }
    EpochLog el;
    el.epoch = epoch;
    el.mean_loss = loss_sum / static_cast<double>(seen);
    el.lr = lr;
    if (eval_set) el.eval_accuracy = evaluate(model, *eval_set).metrics.top1;
    log.epochs.push_back(el);
    log.final_loss = el.mean_loss;
  }
  return log;
}

ScoreMatrix ScoresDump::matrix_at(std::size_t i) const {
  if (head != HeadKind::ScoreSoftmax) {
    throw ValidationError("score matrices require a score-head dump");
  }
  ScoreMatrix s;
  s.n_classes = n_classes;
  s.g_levels = g_levels;
  const std::size_t w = row_width();
  s.cells.assign(cells.begin() + i * w, cells.begin() + (i + 1) * w);
  return s;
}

json ScoresDump::to_json() const {
  json samples = json::array();
  const std::size_t w = row_width();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    samples.push_back(
        {{"id", ids[i]},
         {"label", labels[i]},
         {"cells", std::vector<double>(cells.begin() + i * w,
                                       cells.begin() + (i + 1) * w)}});
  }
  return json{{"kind", "score_dump"},
              {"head", head_kind_name(head)},
              {"n_classes", n_classes},
              {"g_levels", g_levels},
              {"config_hash", config_hash},
              {"seed", seed},
              {"samples", std::move(samples)}};
}

ScoresDump ScoresDump::from_json(const json& j) {
  ScoresDump d;
  try {
    if (j.at("kind").get<std::string>() != "score_dump") {
      throw ValidationError("not a score dump file");
    }
    d.head = head_kind_from_string(j.at("head").get<std::string>());
    d.n_classes = j.at("n_classes").get<std::size_t>();
    d.g_levels = j.at("g_levels").get<std::size_t>();
    d.config_hash = j.value("config_hash", "");
    d.seed = j.value("seed", std::uint64_t{0});
    const std::size_t w = d.row_width();
    for (const auto& s : j.at("samples")) {
      d.ids.push_back(s.at("id").get<std::uint64_t>());
      d.labels.push_back(s.at("label").get<std::uint32_t>());
      const auto row = s.at("cells").get<std::vector<double>>();
      if (row.size() != w) {
        throw ValidationError("score dump row width mismatch");
      }
      d.cells.insert(d.cells.end(), row.begin(), row.end());
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("score dump: ") + e.what());
  }
  return d;
}

void write_scores(const std::string& path, const ScoresDump& dump) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << dump.to_json().dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

ScoresDump read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score dump " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("corrupt score dump " + path + ": " + e.what());
  }
  return ScoresDump::from_json(j);
}

EvalOutput evaluate(const Model& model, const Dataset& ds) {
  if (ds.dim != model.spec.input_dim) {
    throw ValidationError("dataset dim " + std::to_string(ds.dim) +
                          " does not match model input " +
                          std::to_string(model.spec.input_dim));
  }
  EvalOutput out;
  out.scores.head = model.spec.head;
  out.scores.n_classes = model.spec.n_classes;
  out.scores.g_levels =
      model.spec.head == HeadKind::Softmax ? 0 : model.spec.g_levels;
  out.scores.config_hash = model.config_hash;
  out.scores.seed = model.seed;
  out.scores.ids = ds.ids;
  out.scores.labels = ds.labels;
  const ScoreTable table(model.spec.head == HeadKind::ScoreSoftmax
                             ? model.spec.g_levels
                             : 2);

  constexpr std::size_t kEvalBatch = 256;
  const std::size_t n = model.spec.n_classes;
  for (std::size_t start = 0; start < ds.n_samples; start += kEvalBatch) {
    const std::size_t bsz = std::min(kEvalBatch, ds.n_samples - start);
    std::vector<double> xbuf(ds.features.begin() + start * ds.dim,
                             ds.features.begin() + (start + bsz) * ds.dim);
    Tensor x({bsz, ds.dim}, std::move(xbuf));
    Tensor logits = model.forward(x, nullptr);
    const auto& lv = logits.values();
    const std::size_t width = model.spec.output_width();
    for (std::size_t b = 0; b < bsz; ++b) {
      std::span<const double> row{lv.data() + b * width, width};
      if (model.spec.head == HeadKind::Softmax) {
        auto probs = softmax(row);
        out.predictions.push_back(
            static_cast<std::uint32_t>(predict(probs)));
        out.class_scores.insert(out.class_scores.end(), probs.begin(),
                                probs.end());
        out.scores.cells.insert(out.scores.cells.end(), probs.begin(),
                                probs.end());
      } else {
        ScoreMatrix s = grouped_softmax(row, n, model.spec.g_levels);
        auto t = weighted_scores(s, table);
        out.predictions.push_back(static_cast<std::uint32_t>(predict(t)));
        out.class_scores.insert(out.class_scores.end(), t.begin(), t.end());
        out.scores.cells.insert(out.scores.cells.end(), s.cells.begin(),
                                s.cells.end());
      }
    }
  }
  out.metrics = compute_metrics(out.predictions, ds.labels, n);
  return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_block(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_block(std::istream& in, std::vector<double>& v,
                const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint: " + path);
}

}  // namespace

void write_checkpoint(const std::string& path, const Model& model,
                      const OptimState& optim, std::uint64_t epoch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  const json header{{"spec", model.spec.to_json()},
                    {"config_hash", model.config_hash},
                    {"seed", model.seed},
                    {"epoch", epoch},
                    {"adam_step", optim.step}};
  const std::string header_str = header.dump();
  out.write(kCheckpointMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(len));
  for (const Tensor& p : model.parameters()) write_block(out, p.values());
  for (const auto& m : optim.m) write_block(out, m);
  for (const auto& v : optim.v) write_block(out, v);
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw IoError("not a checkpoint (bad magic): " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in || version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path);
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in) throw IoError("truncated checkpoint: " + path);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint: " + path);
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ck;
  ck.model.spec = ModelSpec::from_json(header.at("spec"));
  ck.model.config_hash = header.value("config_hash", "");
  ck.model.seed = header.value("seed", std::uint64_t{0});
  ck.epoch = header.value("epoch", std::uint64_t{0});

  std::vector<std::size_t> widths;
  widths.push_back(ck.model.spec.input_dim);
  for (std::size_t h : ck.model.spec.hidden) widths.push_back(h);
  widths.push_back(ck.model.spec.output_width());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::vector<double> w(widths[l] * widths[l + 1]);
    read_block(in, w, path);
    ck.model.weights.emplace_back(
        std::vector<std::size_t>{widths[l], widths[l + 1]}, std::move(w));
    std::vector<double> b(widths[l + 1]);
    read_block(in, b, path);
    ck.model.biases.emplace_back(std::vector<std::size_t>{widths[l + 1]},
                                 std::move(b));
  }
  ck.optim = OptimState::for_model(ck.model);
  ck.optim.step = header.value("adam_step", std::uint64_t{0});
  for (auto& m : ck.optim.m) read_block(in, m, path);
  for (auto& v : ck.optim.v) read_block(in, v, path);
  return ck;
}

}  // namespace ssx

// Command-line front end. Links only the C API (ssoftmax.h); config and
// report plumbing is local JSON handling.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssoftmax/ssoftmax.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

int exit_code_for(int status) {
  return status == SSX_ERR_NUMERIC ? kExitNumeric : kExitValidation;
}

[[noreturn]] void die(int status, const std::string& context) {
  std::cerr << "error: " << context << ": " << ssx_last_error() << "\n";
  std::exit(exit_code_for(status));
}

[[noreturn]] void die_msg(const std::string& msg, int code = kExitValidation) {
  std::cerr << "error: " << msg << "\n";
  std::exit(code);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die_msg("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) die_msg("cannot write " + path);
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
}

json parse_config(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    die_msg(std::string("config ") + path + " is not valid JSON: " + e.what());
  }
}

struct StringGuard {
  char* s = nullptr;
  ~StringGuard() { ssx_string_free(s); }
};

struct DatasetGuard {
  ssx_dataset* d = nullptr;
  ~DatasetGuard() { ssx_dataset_free(d); }
};

struct ModelGuard {
  ssx_model* m = nullptr;
  ~ModelGuard() { ssx_model_free(m); }
};

struct ScoresGuard {
  ssx_scores* s = nullptr;
  ~ScoresGuard() { ssx_scores_free(s); }
};

std::string out_dir_of(const json& config, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  return config.value("out_dir", std::string("."));
}

void apply_seed_override(json& config, const std::string& seed_str) {
  if (seed_str.empty()) return;
  const std::uint64_t seed = std::stoull(seed_str);
  if (config.contains("dataset") && config["dataset"].contains("noise_trap")) {
    config["dataset"]["noise_trap"]["seed"] = seed;
  }
  if (!config.contains("train")) config["train"] = json::object();
  config["train"]["seed"] = seed;
}

// Loads or generates the configured dataset pair through the C API.
void open_datasets(const json& config, DatasetGuard& train,
                   DatasetGuard& test) {
  if (!config.contains("dataset")) {
    die_msg("config is missing the 'dataset' section");
  }
  const json& ds = config["dataset"];
  if (ds.contains("noise_trap")) {
    const std::string spec = ds["noise_trap"].dump();
    if (int rc = ssx_dataset_generate(spec.c_str(), &train.d, &test.d)) {
      die(rc, "dataset generation");
    }
  } else if (ds.contains("train") && ds.contains("test")) {
    const std::string train_path = ds["train"].get<std::string>();
    const std::string test_path = ds["test"].get<std::string>();
    if (int rc = ssx_dataset_read(train_path.c_str(), &train.d)) {
      die(rc, "reading " + train_path);
    }
    if (int rc = ssx_dataset_read(test_path.c_str(), &test.d)) {
      die(rc, "reading " + test_path);
    }
  } else if (ds.contains("idx")) {
    const std::string images = ds["idx"]["images"].get<std::string>();
    const std::string labels = ds["idx"]["labels"].get<std::string>();
    if (int rc = ssx_dataset_read_idx(images.c_str(), labels.c_str(),
                                      &train.d)) {
      die(rc, "reading IDX pair");
    }
  } else {
    die_msg(
        "dataset section must contain noise_trap, train/test paths, or idx");
  }
}

std::string config_hash_of(const json& config) {
  StringGuard hash;
  const std::string text = config.dump();
  if (int rc = ssx_config_hash(text.c_str(), &hash.s)) {
    die(rc, "hashing config");
  }
  return hash.s;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 const std::string& seed_str) {
  json config = parse_config(config_path);
  apply_seed_override(config, seed_str);
  if (!config.contains("dataset") ||
      !config["dataset"].contains("noise_trap")) {
    die_msg("gen-data requires a dataset.noise_trap section");
  }
  const std::string dir = out_dir_of(config, out_dir);
  fs::create_directories(dir);

  DatasetGuard train, test;
  const std::string spec = config["dataset"]["noise_trap"].dump();
  if (int rc = ssx_dataset_generate(spec.c_str(), &train.d, &test.d)) {
    die(rc, "dataset generation");
  }
  const std::string train_path = dir + "/train.ssds";
  const std::string test_path = dir + "/test.ssds";
  if (int rc = ssx_dataset_write(train.d, train_path.c_str())) {
    die(rc, "writing " + train_path);
  }
  if (int rc = ssx_dataset_write(test.d, test_path.c_str())) {
    die(rc, "writing " + test_path);
  }
  StringGuard train_info, test_info;
  ssx_dataset_info(train.d, &train_info.s);
  ssx_dataset_info(test.d, &test_info.s);

  const json report{{"command", "gen-data"},
                    {"config_hash", config_hash_of(config)},
                    {"seed", config["dataset"]["noise_trap"].value("seed", 0)},
                    {"files", {{"train", train_path}, {"test", test_path}}},
                    {"train", json::parse(train_info.s)},
                    {"test", json::parse(test_info.s)}};
  write_file(dir + "/gen_report.json", report.dump(2));
  std::cout << "wrote " << train_path << ", " << test_path << "\n";
  return 0;
}

int run_single_train(const json& config, const std::string& dir) {
  DatasetGuard train, test;
  open_datasets(config, train, test);
  fs::create_directories(dir);

  ModelGuard model;
  StringGuard log_json;
  const std::string config_str = config.dump();
  const auto started = std::chrono::steady_clock::now();
  if (int rc = ssx_train(config_str.c_str(), train.d, test.d, &model.m,
                         &log_json.s)) {
    die(rc, "training");
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  const std::string ckpt = dir + "/checkpoint.ssck";
  if (int rc = ssx_model_write(model.m, ckpt.c_str())) {
    die(rc, "writing " + ckpt);
  }
  write_file(dir + "/train_log.json", log_json.s);
  // wall time goes to stderr, not into the (byte-reproducible) report
  std::cerr << "trained in " << wall << " s -> " << ckpt << "\n";
  return 0;
}

int cmd_train(const std::string& argv0, const std::string& config_path,
              const std::string& out_dir, const std::string& seed_str,
              unsigned jobs) {
  json config = parse_config(config_path);
  apply_seed_override(config, seed_str);
  const std::string dir = out_dir_of(config, out_dir);

  // A seeds array fans out one process per seed, at most `jobs` at a time.
  std::vector<std::uint64_t> seeds;
  if (config.contains("train") && config["train"].contains("seeds")) {
    seeds = config["train"]["seeds"].get<std::vector<std::uint64_t>>();
    config["train"].erase("seeds");
  }
  if (seeds.size() <= 1) {
    if (seeds.size() == 1) config["train"]["seed"] = seeds[0];
    return run_single_train(config, dir);
  }

  if (jobs == 0) jobs = 1;
  std::vector<pid_t> running;
  bool failed = false;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid > 0) {
      running.erase(std::remove(running.begin(), running.end(), pid),
                    running.end());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = true;
    }
  };
  for (std::uint64_t seed : seeds) {
    while (running.size() >= jobs) reap_one();
    const std::string child_dir = dir + "/seed_" + std::to_string(seed);
    const pid_t pid = fork();
    if (pid == 0) {
      const std::string seed_arg = std::to_string(seed);
      execl(argv0.c_str(), argv0.c_str(), "train", "--config",
            config_path.c_str(), "--seed", seed_arg.c_str(), "--out",
            child_dir.c_str(), static_cast<char*>(nullptr));
      std::perror("execl");
      _exit(127);
    }
    if (pid < 0) die_msg("fork failed");
    running.push_back(pid);
  }
  while (!running.empty()) reap_one();
  return failed ? kExitValidation : 0;
}

void write_confusion_csv(const json& metrics, const std::string& path) {
  std::ostringstream csv;
  for (const auto& row : metrics["confusion"]) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) csv << ',';
      csv << row[j].get<std::uint64_t>();
    }
    csv << '\n';
  }
  write_file(path, csv.str());
}

void write_curves_csv(const json& metrics, const std::string& dir) {
  if (!metrics.contains("curves")) return;
  char buf[64];
  for (const char* kind : {"roc", "pr"}) {
    for (const auto& [key, points] : metrics["curves"][kind].items()) {
      std::ostringstream csv;
      csv << (std::strcmp(kind, "roc") == 0 ? "fpr,tpr\n"
                                            : "recall,precision\n");
      for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g", p[0].get<double>(),
                      p[1].get<double>());
        csv << buf << '\n';
      }
      write_file(dir + "/" + kind + "_" + key + ".csv", csv.str());
    }
  }
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& out_dir, bool dump_scores, bool curves) {
  ModelGuard model;
  if (int rc = ssx_model_read(checkpoint.c_str(), &model.m)) {
    die(rc, "reading " + checkpoint);
  }
  DatasetGuard ds;
  if (int rc = ssx_dataset_read(dataset.c_str(), &ds.d)) {
    die(rc, "reading " + dataset);
  }
  StringGuard metrics;
  ScoresGuard scores;
  const unsigned flags = curves ? SSX_EVAL_WITH_CURVES : 0;
  if (int rc = ssx_evaluate(model.m, ds.d, flags, &metrics.s,
                            dump_scores ? &scores.s : nullptr)) {
    die(rc, "evaluation");
  }
  const std::string dir = out_dir.empty() ? "." : out_dir;
  write_file(dir + "/metrics.json", metrics.s);
  const json parsed = json::parse(metrics.s);
  write_confusion_csv(parsed, dir + "/confusion.csv");
  if (curves) write_curves_csv(parsed, dir);
  if (dump_scores) {
    const std::string path = dir + "/scores.json";
    if (int rc = ssx_scores_write(scores.s, path.c_str())) {
      die(rc, "writing " + path);
    }
  }
  std::cout << "top1 " << parsed["top1"].get<double>() << "\n";
  return 0;
}

int cmd_attack(const std::string& checkpoint, const std::string& dataset,
               const std::string& impulse_list, int background_token,
               const std::string& seed_str, const std::string& out_dir) {
  ModelGuard model;
  if (int rc = ssx_model_read(checkpoint.c_str(), &model.m)) {
    die(rc, "reading " + checkpoint);
  }
  DatasetGuard ds;
  if (int rc = ssx_dataset_read(dataset.c_str(), &ds.d)) {
    die(rc, "reading " + dataset);
  }
  json attack = json::object();
  if (!impulse_list.empty()) {
    std::vector<double> ps;
    std::stringstream ss(impulse_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        ps.push_back(std::stod(tok));
      } catch (const std::exception&) {
        die_msg("bad impulse probability '" + tok + "'");
      }
    }
    attack["impulse_p"] = ps;
  }
  if (background_token >= 0) attack["background_token"] = background_token;
  attack["seed"] = seed_str.empty() ? 0 : std::stoull(seed_str);

  StringGuard report;
  const std::string attack_str = attack.dump();
  if (int rc = ssx_attack(model.m, ds.d, attack_str.c_str(), &report.s)) {
    die(rc, "attack evaluation");
  }
  const std::string dir = out_dir.empty() ? "." : out_dir;
  write_file(dir + "/attack_report.json", report.s);
  std::cout << report.s << "\n";
  return 0;
}

int cmd_fuse(const std::vector<std::string>& score_paths,
             const std::string& method, unsigned target_g,
             const std::string& out_dir) {
  if (score_paths.size() < 2) die_msg("fuse needs at least 2 score files");
  std::vector<ScoresGuard> guards(score_paths.size());
  std::vector<const ssx_scores*> handles(score_paths.size());
  for (std::size_t i = 0; i < score_paths.size(); ++i) {
    if (int rc = ssx_scores_read(score_paths[i].c_str(), &guards[i].s)) {
      die(rc, "reading " + score_paths[i]);
    }
    handles[i] = guards[i].s;
  }
  const json spec{{"method", method}, {"target_g", target_g}};
  StringGuard report;
  const std::string spec_str = spec.dump();
  if (int rc = ssx_fuse(handles.data(), handles.size(), spec_str.c_str(),
                        &report.s)) {
    die(rc, "fusion");
  }
  const std::string dir = out_dir.empty() ? "." : out_dir;
  write_file(dir + "/fuse_report.json", report.s);
  std::cout << report.s << "\n";
  return 0;
}

int cmd_grad_check(bool negative_control, const std::string& out_dir) {
  StringGuard report;
  const int rc = ssx_grad_check(negative_control ? 1 : 0, &report.s);
  if (report.s == nullptr) die(rc, "grad-check");
  const json parsed = json::parse(report.s);
  for (const auto& check : parsed["checks"]) {
    std::printf("%-34s max_rel_err %.3e  %s\n",
                check["name"].get<std::string>().c_str(),
                check["max_rel_err"].get<double>(),
                check["pass"].get<bool>() ? "ok" : "FAIL");
  }
  if (!out_dir.empty()) {
    write_file(out_dir + "/gradcheck_report.json", report.s);
  }
  if (rc != SSX_OK) {
    std::cerr << "error: gradient checks failed\n";
    return kExitNumeric;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score-Softmax classifier toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seed_str;
  unsigned jobs = 1;

  auto* gen = app.add_subcommand("gen-data", "generate dataset containers");
  gen->add_option("--config", config_path, "experiment config")->required();
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", seed_str, "override the generator seed");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", config_path, "experiment config")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed_str, "override the training seed");
  train->add_option("--jobs", jobs, "parallel processes for a seeds array");

  std::string checkpoint, dataset;
  bool dump_scores = false, curves = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset container")->required();
  eval->add_option("--out", out_dir, "output directory");
  eval->add_flag("--dump-scores", dump_scores,
                 "write per-sample score matrices for fusion");
  eval->add_flag("--curves", curves, "emit ROC/PR points and CSVs");

  std::string impulse_list;
  int background_token = -1;
  auto* attack = app.add_subcommand("attack", "noise attack report");
  attack->add_option("--checkpoint", checkpoint, "checkpoint file")
      ->required();
  attack->add_option("--dataset", dataset, "dataset container")->required();
  attack->add_option("--impulse", impulse_list,
                     "comma-separated impulse probabilities");
  attack->add_option("--background-token", background_token,
                     "background attack token class");
  attack->add_option("--seed", seed_str, "attack noise seed");
  attack->add_option("--out", out_dir, "output directory");

  std::vector<std::string> score_paths;
  std::string method = "gf";
  unsigned target_g = 0;
  auto* fuse = app.add_subcommand("fuse", "fuse score dumps");
  fuse->add_option("--scores", score_paths, "score dump files")
      ->required()
      ->expected(-2);
  fuse->add_option("--method", method, "gf or af");
  fuse->add_option("--target-g", target_g, "fused grid (0 = max input G)");
  fuse->add_option("--out", out_dir, "output directory");

  bool negative_control = false;
  auto* grad = app.add_subcommand("grad-check", "finite-difference gate");
  grad->add_flag("--negative-control", negative_control,
                 "include a deliberately broken check (must fail)");
  grad->add_option("--out", out_dir, "write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) return cmd_gen_data(config_path, out_dir, seed_str);
  if (train->parsed()) {
    return cmd_train(argv[0], config_path, out_dir, seed_str, jobs);
  }
  if (eval->parsed()) {
    return cmd_eval(checkpoint, dataset, out_dir, dump_scores, curves);
  }
  if (attack->parsed()) {
    return cmd_attack(checkpoint, dataset, impulse_list, background_token,
                      seed_str, out_dir);
  }
  if (fuse->parsed()) {
    return cmd_fuse(score_paths, method, target_g, out_dir);
  }
  if (grad->parsed()) return cmd_grad_check(negative_control, out_dir);
  return kExitValidation;
}

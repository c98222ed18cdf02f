#include "ssoftmax/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "ssoftmax/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace ssx {

using nlohmann::json;

void Dataset::validate() const {
  if (features.size() != n_samples * dim || labels.size() != n_samples ||
      ids.size() != n_samples) {
    throw ValidationError("dataset buffer sizes do not match sample count");
  }
  if (layout.total() != 0 && layout.total() != dim) {
    throw ValidationError("feature layout does not cover the feature dim");
  }
  for (std::uint32_t l : labels) {
    if (l >= n_classes) {
      throw ValidationError("label " + std::to_string(l) +
                            " out of range for " + std::to_string(n_classes) +
                            " classes");
    }
  }
  for (double v : features) {
    if (!std::isfinite(v)) {
      throw ValidationError("dataset contains non-finite feature");
    }
  }
}

void NoiseTrapSpec::validate() const {
  if (n_classes < 2) throw ValidationError("noise trap needs >= 2 classes");
  if (signal_dims < n_classes) {
    throw ValidationError("signal_dims " + std::to_string(signal_dims) +
                          " < n_classes " + std::to_string(n_classes) +
                          ": prototypes need capacity");
  }
  if (rho_train < 0.0 || rho_train > 1.0 || rho_test < 0.0 ||
      rho_test > 1.0) {
    throw ValidationError("rho_train/rho_test must lie in [0, 1]");
  }
  if (background_gain <= 0.0) {
    throw ValidationError("background_gain must be positive");
  }
  if (signal_noise < 0.0) {
    throw ValidationError("signal_noise must be non-negative");
  }
  if (train_samples == 0 || test_samples == 0) {
    throw ValidationError("sample counts must be positive");
  }
}

json NoiseTrapSpec::to_json() const {
  return json{{"n_classes", n_classes},
              {"signal_dims", signal_dims},
              {"background_dims", background_dims},
              {"signal_noise", signal_noise},
              {"background_gain", background_gain},
              {"rho_train", rho_train},
              {"rho_test", rho_test},
              {"train_samples", train_samples},
              {"test_samples", test_samples},
              {"seed", seed}};
}

NoiseTrapSpec NoiseTrapSpec::from_json(const json& j) {
  NoiseTrapSpec s;
  try {
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.signal_dims = j.at("signal_dims").get<std::size_t>();
    s.background_dims = j.at("background_dims").get<std::size_t>();
    s.signal_noise = j.at("signal_noise").get<double>();
    s.background_gain = j.at("background_gain").get<double>();
    s.rho_train = j.at("rho_train").get<double>();
    s.rho_test = j.at("rho_test").get<double>();
    s.train_samples = j.at("train_samples").get<std::size_t>();
    s.test_samples = j.at("test_samples").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("noise trap spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::size_t prototype_period(std::size_t n_classes) {
  return std::bit_ceil(n_classes + 1);
}

double prototype_entry(std::size_t class_index, std::size_t dim_index,
                       std::size_t period) {
  // Row class_index+1 of the Sylvester Hadamard matrix H_period, tiled.
  // Rows are exactly orthogonal over any block whose width period divides.
  const std::size_t r = class_index + 1;
  const std::size_t c = dim_index % period;
  return std::popcount(r & c) % 2 == 0 ? 1.0 : -1.0;
}

namespace {

std::vector<std::uint32_t> balanced_labels(std::size_t count,
                                           std::size_t n_classes, Rng& rng) {
  std::vector<std::uint32_t> labels(count);
  for (std::size_t i = 0; i < count; ++i)
    labels[i] = static_cast<std::uint32_t>(i % n_classes);
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(labels[i - 1], labels[j]);
  }
  return labels;
}

Dataset gen_split(const NoiseTrapSpec& spec, std::size_t count, double rho,
                  std::uint64_t split_tag) {
  Dataset ds;
  ds.n_samples = count;
  ds.dim = spec.signal_dims + spec.background_dims;
  ds.n_classes = spec.n_classes;
  ds.layout = {spec.signal_dims, spec.background_dims};
  ds.features.resize(count * ds.dim);
  ds.ids.resize(count);
  const std::size_t period = prototype_period(spec.n_classes);

  Rng rng = Rng::derive(spec.seed, {split_tag});
  ds.labels = balanced_labels(count, spec.n_classes, rng);
  for (std::size_t i = 0; i < count; ++i) {
    ds.ids[i] = i;
    const std::uint32_t label = ds.labels[i];
    // background token: the label with probability rho, else a uniformly
    // random other class
    std::uint32_t token = label;
    if (rng.uniform() >= rho) {
      token = static_cast<std::uint32_t>(rng.below(spec.n_classes - 1));
      if (token >= label) ++token;
    }
    auto row = ds.sample(i);
    for (std::size_t d = 0; d < spec.signal_dims; ++d) {
      row[d] = prototype_entry(label, d, period) +
               spec.signal_noise * rng.normal();
    }
    for (std::size_t d = 0; d < spec.background_dims; ++d) {
      row[spec.signal_dims + d] =
          spec.background_gain * prototype_entry(token, d, period);
    }
  }
  return ds;
}

json class_counts_json(const Dataset& ds) {
  std::vector<std::size_t> counts(ds.n_classes, 0);
  for (std::uint32_t l : ds.labels) ++counts[l];
  return json(counts);
}

}  // namespace

TrainTestPair gen_noise_trap(const NoiseTrapSpec& spec) {
  spec.validate();
  TrainTestPair pair;
  pair.train = gen_split(spec, spec.train_samples, spec.rho_train, 1);
  pair.test = gen_split(spec, spec.test_samples, spec.rho_test, 2);

  const FeatureRanges train_ranges = feature_ranges(pair.train);
  for (Dataset* ds : {&pair.train, &pair.test}) {
    ds->provenance = json{{"generator", "noise_trap"},
                          {"spec", spec.to_json()},
                          {"seed", spec.seed},
                          {"split", ds == &pair.train ? "train" : "test"},
                          {"class_counts", class_counts_json(*ds)},
                          {"train_feature_min", train_ranges.lo},
                          {"train_feature_max", train_ranges.hi}};
  }
  return pair;
}

FeatureRanges feature_ranges(const Dataset& ds) {
  FeatureRanges r;
  r.lo.assign(ds.dim, std::numeric_limits<double>::infinity());
  r.hi.assign(ds.dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ds.n_samples; ++i) {
    auto row = ds.sample(i);
    for (std::size_t d = 0; d < ds.dim; ++d) {
      r.lo[d] = std::min(r.lo[d], row[d]);
      r.hi[d] = std::max(r.hi[d], row[d]);
    }
  }
  return r;
}

FeatureRanges stored_or_computed_ranges(const Dataset& ds) {
  if (ds.provenance.contains("train_feature_min") &&
      ds.provenance.contains("train_feature_max")) {
    FeatureRanges r;
    ds.provenance.at("train_feature_min").get_to(r.lo);
    ds.provenance.at("train_feature_max").get_to(r.hi);
    if (r.lo.size() == ds.dim && r.hi.size() == ds.dim) return r;
  }
  return feature_ranges(ds);
}

Dataset impulse_noise(const Dataset& ds, double p,
                      const FeatureRanges& ranges, Rng& rng) {
  if (p < 0.0 || p > 1.0) {
    throw ValidationError("impulse probability must lie in [0, 1], got " +
                          std::to_string(p));
  }
  if (ranges.lo.size() != ds.dim || ranges.hi.size() != ds.dim) {
    throw ValidationError("feature ranges do not match dataset dim");
  }
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    auto row = out.sample(i);
    for (std::size_t d = 0; d < out.dim; ++d) {
      if (rng.uniform() < p) {
        row[d] = (rng.next_u64() & 1) ? ranges.hi[d] : ranges.lo[d];
      }
    }
  }
  return out;
}

Dataset background_attack(const Dataset& ds, std::size_t token_class) {
  if (ds.layout.background_dims == 0) {
    throw ValidationError(
        "dataset layout declares no background block to attack");
  }
  if (!ds.provenance.contains("spec")) {
    throw ValidationError(
        "dataset provenance carries no generator spec for the attack token");
  }
  const NoiseTrapSpec spec = NoiseTrapSpec::from_json(ds.provenance["spec"]);
  if (token_class >= spec.n_classes) {
    throw ValidationError("attack token class out of range");
  }
  const std::size_t period = prototype_period(spec.n_classes);
  Dataset out = ds;
  for (std::size_t i = 0; i < out.n_samples; ++i) {
    auto row = out.sample(i);
    for (std::size_t d = 0; d < out.layout.background_dims; ++d) {
      row[out.layout.signal_dims + d] =
          spec.background_gain * prototype_entry(token_class, d, period);
    }
  }
  return out;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);

  if (read_be_u32(img, images_path) != 0x00000803u) {
    throw IoError("bad IDX image magic in " + images_path);
  }
  const std::uint32_t n_images = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);

  if (read_be_u32(lab, labels_path) != 0x00000801u) {
    throw IoError("bad IDX label magic in " + labels_path);
  }
  const std::uint32_t n_labels = read_be_u32(lab, labels_path);
  if (n_images != n_labels) {
    throw ValidationError("IDX count mismatch: " + std::to_string(n_images) +
                          " images vs " + std::to_string(n_labels) +
                          " labels");
  }

  Dataset ds;
  ds.n_samples = n_images;
  ds.dim = static_cast<std::size_t>(rows) * cols;
  ds.features.resize(ds.n_samples * ds.dim);
  ds.labels.resize(ds.n_samples);
  ds.ids.resize(ds.n_samples);
  ds.layout = {ds.dim, 0};

  std::vector<unsigned char> pixel_row(ds.dim);
  std::uint32_t max_label = 0;
  for (std::size_t i = 0; i < ds.n_samples; ++i) {
    img.read(reinterpret_cast<char*>(pixel_row.data()),
             static_cast<std::streamsize>(ds.dim));
    if (!img) throw IoError("truncated file: " + images_path);
    for (std::size_t d = 0; d < ds.dim; ++d) {
      ds.features[i * ds.dim + d] = pixel_row[d] / 255.0;
    }
    unsigned char l;
    lab.read(reinterpret_cast<char*>(&l), 1);
    if (!lab) throw IoError("truncated file: " + labels_path);
    ds.labels[i] = l;
    max_label = std::max(max_label, std::uint32_t(l));
    ds.ids[i] = i;
  }
  ds.n_classes = max_label + 1;
  ds.provenance = json{{"generator", "idx"},
                       {"images", images_path},
                       {"labels", labels_path},
                       {"seed", 0}};
  return ds;
}

std::vector<Dataset> split(const Dataset& ds,
                           const std::vector<double>& fractions,
                           std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw ValidationError("split fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-9) {
    throw ValidationError("split fractions sum to " + std::to_string(total) +
                          " > 1");
  }
  std::vector<std::size_t> order(ds.n_samples);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::derive(seed, {0x5354u});  // "ST"
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<Dataset> out;
  std::size_t cursor = 0;
  for (double f : fractions) {
    const auto count = static_cast<std::size_t>(
        std::llround(f * static_cast<double>(ds.n_samples)));
    Dataset part;
    part.n_samples = count;
    part.dim = ds.dim;
    part.n_classes = ds.n_classes;
    part.layout = ds.layout;
    part.features.resize(count * ds.dim);
    part.labels.resize(count);
    part.ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t src = order[cursor + i];
      std::copy_n(ds.features.begin() + src * ds.dim, ds.dim,
                  part.features.begin() + i * ds.dim);
      part.labels[i] = ds.labels[src];
      part.ids[i] = ds.ids[src];
    }
    part.provenance = ds.provenance;
    part.provenance["split_fraction"] = f;
    part.provenance["split_seed"] = seed;
    part.provenance["class_counts"] = class_counts_json(part);
    cursor += count;
    out.push_back(std::move(part));
  }
  return out;
}

namespace {

constexpr char kDatasetMagic[4] = {'S', 'S', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

void write_raw(std::ostream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data),
            static_cast<std::streamsize>(bytes));
}

void read_raw(std::istream& in, void* data, std::size_t bytes,
              const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("truncated container: " + path);
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& ds) {
  ds.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  const json header{{"n_samples", ds.n_samples},
                    {"dim", ds.dim},
                    {"n_classes", ds.n_classes},
                    {"layout",
                     {{"signal_dims", ds.layout.signal_dims},
                      {"background_dims", ds.layout.background_dims}}},
                    {"provenance", ds.provenance}};
  const std::string header_str = header.dump();
  write_raw(out, kDatasetMagic, 4);
  write_raw(out, &kDatasetVersion, 4);
  const std::uint64_t len = header_str.size();
  write_raw(out, &len, 8);
  write_raw(out, header_str.data(), header_str.size());
  write_raw(out, ds.features.data(), ds.features.size() * sizeof(double));
  write_raw(out, ds.labels.data(), ds.labels.size() * sizeof(std::uint32_t));
  write_raw(out, ds.ids.data(), ds.ids.size() * sizeof(std::uint64_t));
  if (!out) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path);
  char magic[4];
  read_raw(in, magic, 4, path);
  if (std::memcmp(magic, kDatasetMagic, 4) != 0) {
    throw IoError("not a dataset container (bad magic): " + path);
  }
  std::uint32_t version = 0;
  read_raw(in, &version, 4, path);
  if (version != kDatasetVersion) {
    throw IoError("unsupported dataset container version " +
                  std::to_string(version));
  }
  std::uint64_t len = 0;
  read_raw(in, &len, 8, path);
  std::string header_str(len, '\0');
  read_raw(in, header_str.data(), len, path);
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw IoError("corrupt dataset header in " + path + ": " + e.what());
  }
  Dataset ds;
  ds.n_samples = header.at("n_samples").get<std::size_t>();
  ds.dim = header.at("dim").get<std::size_t>();
  ds.n_classes = header.at("n_classes").get<std::size_t>();
  ds.layout.signal_dims =
      header.at("layout").at("signal_dims").get<std::size_t>();
  ds.layout.background_dims =
      header.at("layout").at("background_dims").get<std::size_t>();
  ds.provenance = header.at("provenance");
  ds.features.resize(ds.n_samples * ds.dim);
  ds.labels.resize(ds.n_samples);
  ds.ids.resize(ds.n_samples);
  read_raw(in, ds.features.data(), ds.features.size() * sizeof(double), path);
  read_raw(in, ds.labels.data(), ds.labels.size() * sizeof(std::uint32_t),
           path);
  read_raw(in, ds.ids.data(), ds.ids.size() * sizeof(std::uint64_t), path);
  ds.validate();
  return ds;
}

}  // namespace ssx

#include <cstdio>

#include "pgdrecon/cli.hpp"
#include "pgdrecon/io.hpp"
#include "pgdrecon/phantoms.hpp"

namespace pgdrecon::cli {

namespace {

std::string index_name(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

PhantomSpec base_spec(const ExperimentConfig& cfg) {
  json j = {{"kind", cfg.data.kind},
            {"size", cfg.data.size},
            {"n_ellipses", cfg.data.n_ellipses},
            {"intensity_range", {0.0, cfg.data.intensity_hi}}};
  return PhantomSpec::from_json(j);
}

std::vector<std::string> splits_for(const std::string& split) {
  if (split == "all") return {"train", "test"};
  if (split == "train" || split == "test") return {split};
  throw ConfigError("split must be train, test or all (got '" + split + "')");
}

}  // namespace

fs::path image_path(const fs::path& dataset, const std::string& split, std::size_t index) {
  return dataset / "phantoms" / split / (index_name(index) + ".f64");
}

fs::path sinogram_path(const fs::path& dir, const std::string& split, std::size_t index) {
  return dir / split / (index_name(index) + ".sino.f64");
}

fs::path clean_sinogram_path(const fs::path& dir, const std::string& split, std::size_t index) {
  return dir / split / (index_name(index) + ".clean.f64");
}

void write_phantom_dataset(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("phantom-gen: --out is required");
  const PhantomSpec spec = base_spec(cfg);
  spec.validate();
  const DatasetSeeds seeds = make_dataset_seeds(cfg.seed, cfg.data.n_train, cfg.data.n_test);
  const fs::path root(cfg.out);

  json manifest = {{"spec", spec.to_json()}, {"seed", cfg.seed}};
  manifest["spec"].erase("seed");
  for (const auto& [split, list] :
       {std::pair{std::string("train"), &seeds.train}, std::pair{std::string("test"), &seeds.test}}) {
    json entries = json::array();
    for (std::size_t i = 0; i < list->size(); ++i) {
      PhantomSpec s = spec;
      s.seed = (*list)[i];
      io::save_image(image_path(root, split, i), generate_phantom(s));
      entries.push_back({{"file", split + "/" + index_name(i) + ".f64"}, {"seed", s.seed}});
    }
    manifest[split] = entries;
  }
  io::write_json(root / "phantoms" / "manifest.json", manifest);
}

json load_manifest(const fs::path& dataset) {
  const fs::path p = dataset / "phantoms" / "manifest.json";
  if (!fs::exists(p)) throw ConfigError("dataset: missing " + p.string());
  return io::read_json(p);
}

std::vector<Image> load_split(const fs::path& dataset, const std::string& split) {
  const json manifest = load_manifest(dataset);
  if (!manifest.contains(split)) throw ConfigError("dataset: manifest has no '" + split + "' split");
  std::vector<Image> out;
  for (std::size_t i = 0; i < manifest[split].size(); ++i) {
    out.push_back(io::load_image(image_path(dataset, split, i)));
  }
  return out;
}

namespace {

std::uint64_t meas_seed(const ExperimentConfig& cfg, const std::string& split, std::size_t index) {
  return mix_seed(mix_seed(cfg.seed, split == "test" ? 1 : 0), index);
}

}  // namespace

Measurement simulate_image(const ExperimentConfig& cfg, const std::string& split, std::size_t index,
                           const Image& x) {
  MeasurementConfig m;
  m.n_views = cfg.geometry.n_views;
  m.n_offsets = cfg.geometry.n_offsets;
  m.angle_jitter_std_deg = cfg.geometry.jitter_std_deg;
  m.measurement_snr_db = cfg.geometry.snr_db;
  m.seed = meas_seed(cfg, split, index);
  return simulate_measurement(x, m);
}

void write_simulation(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("simulate: --out is required");
  if (cfg.dataset.empty()) throw ConfigError("simulate: --dataset is required");
  const fs::path out(cfg.out);
  json summary = {{"config", cfg.to_json()}};
  for (const auto& split : splits_for(cfg.split)) {
    const auto images = load_split(cfg.dataset, split);
    for (std::size_t i = 0; i < images.size(); ++i) {
      const Measurement meas = simulate_image(cfg, split, i, images[i]);
      io::save_sinogram(sinogram_path(out, split, i), meas.sinogram,
                        {{"jittered_angles_deg", meas.jittered_angles},
                         {"realized_snr_db", io::number_or_inf(meas.realized_snr_db)},
                         {"seed", meas_seed(cfg, split, i)}});
      io::write_f64(clean_sinogram_path(out, split, i), meas.clean);
    }
    summary[split] = images.size();
  }
  io::write_json(out / "simulation.json", summary);
}

LoadedMeasurements load_simulation(const fs::path& dir, const std::string& split, std::size_t n) {
  LoadedMeasurements m;
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = sinogram_path(dir, split, i);
    if (!fs::exists(p)) throw ConfigError("simulation: missing " + p.string());
    m.noisy.push_back(io::load_sinogram(p));
    m.clean.push_back(io::read_f64(clean_sinogram_path(dir, split, i)));
    if (m.clean.back().size() != m.noisy.back().values.size()) {
      throw ConfigError("simulation: clean and noisy sinograms differ in size for " + p.string());
    }
  }
  return m;
}

}  // namespace pgdrecon::cli

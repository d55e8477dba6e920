#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgdrecon/image.hpp"
#include "pgdrecon/phantoms.hpp"
#include "pgdrecon/training.hpp"

namespace pgdrecon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Method { FBP, BP, TV, Regressor, PGD, RPGD };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct DataSettings {
  std::string kind = "random-ellipses";
  std::size_t size = 32;
  std::size_t n_train = 475;
  std::size_t n_test = 25;
  std::size_t n_ellipses = 6;
  double intensity_hi = 350.0;
};

struct GeometrySettings {
  std::size_t n_views = 45;
  std::size_t n_offsets = 0;  // 0 = 1.5 x size
  double jitter_std_deg = 0.05;
  std::optional<double> snr_db;  // absent = noiseless
};

struct SolverSettings {
  /// Step sizes to try, as multiples of 1 / lambda_max. With more than one value the
  /// best mean regressed SNR over the test set wins (oracle tuning). Empty uses
  /// relaxed_step_size for RPGD and pgd_step_size for PGD.
  std::vector<double> gamma_factors;
  double alpha0 = 1.0;
  double c = 0.99;
  std::size_t max_iter = 300;
  double stop_tol = 1e-6;
  bool skip_first_gradient = true;
};

struct TvSettings {
  std::size_t n_grid = 20;
  std::size_t n_iter = 100;
  std::optional<double> lambda;  // fixed value instead of the grid search
  std::size_t cg_max_iter = 50;
};

struct TrainingSettings {
  TrainingSchedule schedule;
  double data_scale = 350.0;
  std::optional<double> noise_snr_db;
  double view_perturb_prob = 0.2;
  std::string resume;         // stage-1 model to continue from
  std::size_t n_train_use = 0;  // 0 = whole train split
};

struct ExperimentConfig {
  std::string dataset;
  std::string sinograms;
  std::string out;
  std::string model;
  std::string split = "test";
  std::vector<std::string> recon;
  Method method = Method::FBP;
  std::uint64_t seed = 0;
  DataSettings data;
  GeometrySettings geometry;
  SolverSettings solver;
  TvSettings tv;
  TrainingSettings training;

  json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const json& j);
};

/// Label used for table rows: "inf" or the SNR in dB.
std::string snr_label(const std::optional<double>& snr_db);

// Dataset layout helpers.
fs::path image_path(const fs::path& dataset, const std::string& split, std::size_t index);
fs::path sinogram_path(const fs::path& dir, const std::string& split, std::size_t index);
fs::path clean_sinogram_path(const fs::path& dir, const std::string& split, std::size_t index);

/// Writes phantoms/{train,test}/NNNN.f64 and phantoms/manifest.json under cfg.out.
void write_phantom_dataset(const ExperimentConfig& cfg);
std::vector<Image> load_split(const fs::path& dataset, const std::string& split);
json load_manifest(const fs::path& dataset);

/// Measurement for image `index` of `split`, seeded exactly as `simulate` seeds it.
Measurement simulate_image(const ExperimentConfig& cfg, const std::string& split, std::size_t index,
                           const Image& x);

/// Writes {split}/NNNN.sino.f64 (noisy, nominal angles) and NNNN.clean.f64 under cfg.out.
void write_simulation(const ExperimentConfig& cfg);

struct LoadedMeasurements {
  std::vector<Sinogram> noisy;
  std::vector<Vector> clean;
};
LoadedMeasurements load_simulation(const fs::path& dir, const std::string& split, std::size_t n);

// Subcommands. Each writes its artifacts under cfg.out.
void cmd_phantom_gen(const ExperimentConfig& cfg);
void cmd_simulate(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_reconstruct(const ExperimentConfig& cfg);
void cmd_evaluate(const ExperimentConfig& cfg);
void cmd_trace_export(const ExperimentConfig& cfg);

/// Entry point. Returns 0 on success, 2 on validation errors, 3 on numerical failures.
int run(int argc, char** argv);

}  // namespace pgdrecon::cli

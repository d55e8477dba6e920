#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgdrecon/classical.hpp"
#include "pgdrecon/convnet.hpp"

namespace pgdrecon {

struct TrainingSchedule {
  std::size_t t1 = 20;
  std::size_t t2 = 10;
  std::size_t t3 = 5;
  double lr_start = 1e-2;
  double lr_end = 1e-3;
  double momentum = 0.99;
  double grad_clip = 1e-2;  // per element
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Stage 1 decays geometrically from lr_start to lr_end over its epochs; later stages
  /// stay at lr_end. `epoch` counts from 0 within stage 1.
  double stage1_lr(std::size_t epoch) const;
  nlohmann::json to_json() const;
  static TrainingSchedule from_json(const nlohmann::json& j);
};

/// Measurement perturbations for the LinearRecon ensemble. Without an SNR the ensemble is
/// noiseless and uses the nominal operator. With an SNR, every epoch draws fresh noise and,
/// with probability view_perturb_prob, jitters each view of that sinogram.
struct NoiseConfig {
  std::optional<double> snr_db;
  double view_perturb_prob = 0.2;
  double jitter_std_deg = 0.05;

  nlohmann::json to_json() const;
};

struct PerturbationEnsemble {
  enum class Kind { Identity, LinearRecon, Dynamic };
  Kind kind = Kind::Identity;
  std::vector<TrainingPair> samples;
};

std::string to_string(PerturbationEnsemble::Kind k);

/// A applied to H x (or to a perturbed measurement when noise is configured).
std::vector<Image> linear_recon_inputs(const std::vector<Image>& images, const RadonOperator& op,
                                       const ReconstructorA& A, const NoiseConfig& noise,
                                       std::uint64_t seed);

/// Identity, LinearRecon and Dynamic ensembles for the current parameters, in that order.
std::vector<PerturbationEnsemble> build_ensembles(const std::vector<Image>& train_images,
                                                  const RadonOperator& op, const ReconstructorA& A,
                                                  const ConvNetParams& params_current,
                                                  const NoiseConfig& noise, std::uint64_t seed = 0);

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;     // global, from 0
  double lr = 0.0;
  double train_loss = 0.0;   // mean per-sample loss over the epoch's minibatches
  double linear_loss = 0.0;  // mean per-sample loss on the LinearRecon ensemble at epoch end
  std::size_t n_samples = 0;
  double seconds = 0.0;
};

struct TrainingOptions {
  double data_scale = 1.0;
  NoiseConfig noise;
  /// Starting point for stages 2 and 3; stage 1 is skipped and this becomes the
  /// stage-1 checkpoint.
  std::optional<ConvNetParams> resume_from_stage1;
  /// Held-out inputs whose idempotence defect is reported after training.
  std::vector<Image> held_out_inputs;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainingResult {
  ConvNetParams stage1;  // regressor checkpoint
  ConvNetParams final;   // projector
  std::vector<EpochRecord> curve;
  std::optional<double> idempotence_defect;  // mean ||P(P v) - P v|| / ||P v||

  std::string curve_csv() const;
};

/// Three-stage training: stage 1 on LinearRecon only, stage 2 adds Dynamic (rebuilt at each
/// epoch start), stage 3 adds Identity. SGD with momentum and per-element clipping.
/// Throws NumericalError on a non-finite loss.
TrainingResult train(const TrainingSchedule& schedule, const std::vector<Image>& train_images,
                     const RadonOperator& op, const ReconstructorA& A,
                     const TrainingOptions& options = {});

}  // namespace pgdrecon

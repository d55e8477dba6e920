#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "pgdrecon/linops.hpp"

namespace pgdrecon {

/// Ellipse in normalized coordinates: the image spans [-1, 1] on both axes, y up.
struct Ellipse {
  double value;
  double a;  // semi-axis along the rotated x direction
  double b;
  double x0;
  double y0;
  double phi_deg;
};

/// The modified (high-contrast) Shepp-Logan ellipse table with unit peak intensity.
const std::vector<Ellipse>& shepp_logan_ellipses();

struct PhantomSpec {
  enum class Kind { SheppLogan, RandomEllipses };
  Kind kind = Kind::RandomEllipses;
  std::size_t size = 32;
  std::size_t n_ellipses = 6;
  double intensity_lo = 0.0;
  double intensity_hi = 350.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static PhantomSpec from_json(const nlohmann::json& j);
};

/// Additive ellipse rendering sampled at pixel centers, clamped to [lo, hi].
Image render_ellipses(const std::vector<Ellipse>& ellipses, std::size_t size, double lo,
                      double hi);

/// Deterministic given the spec. Shepp-Logan is scaled so its peak equals intensity_hi.
/// Random ellipses: one body ellipse plus smaller additive features; ellipses thinner
/// than 1.5 pixels are rejected and redrawn.
Image generate_phantom(const PhantomSpec& spec);

struct MeasurementConfig {
  std::size_t n_views = 45;
  std::size_t n_offsets = 0;  // 0 = 1.5 x width
  double angle_jitter_std_deg = 0.05;
  std::optional<double> measurement_snr_db;
  std::uint64_t seed = 0;
};

struct Measurement {
  Sinogram sinogram;                  // noisy data tagged with the nominal angles
  std::vector<double> jittered_angles;  // angles the data was actually acquired at
  Vector clean;                       // jittered, noise-free projection
  double realized_snr_db = 0.0;       // +inf without noise
};

/// Projects x at independently jittered view angles (the true acquisition), then adds
/// white Gaussian noise rescaled so that 20 log10(||y|| / ||n||) equals the requested SNR.
/// Reconstruction is expected to use the nominal-angle operator.
Measurement simulate_measurement(const Image& x, const MeasurementConfig& cfg);

/// Scales `noise` in place to the norm implied by the target SNR relative to `signal`.
void scale_noise_to_snr(std::span<const double> signal, std::span<double> noise, double snr_db);

struct DatasetSeeds {
  std::vector<std::uint64_t> train;
  std::vector<std::uint64_t> test;
};

/// Per-image seeds for a train/test split. Throws if any seed is shared across splits.
DatasetSeeds make_dataset_seeds(std::uint64_t base_seed, std::size_t n_train, std::size_t n_test);

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace pgdrecon

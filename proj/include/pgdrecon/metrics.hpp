#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pgdrecon/linops.hpp"

namespace pgdrecon {

/// 20 log10(||x|| / ||x - x_hat||). Returns +inf when the error norm is below 1e-300.
double snr(std::span<const double> x_hat, std::span<const double> x);
double snr(const Image& x_hat, const Image& x);

struct RegressedSnr {
  double snr_db = 0.0;
  double a = 1.0;
  double b = 0.0;
};

/// SNR of the best affine fit a x_hat + b to x (closed-form least squares). A constant
/// x_hat yields a = 0, b = mean(x). A fit error below 1e-12 ||x|| (rounding of an exact
/// affine relation) gives +inf.
RegressedSnr regressed_snr(std::span<const double> x_hat, std::span<const double> x);
RegressedSnr regressed_snr(const Image& x_hat, const Image& x);

/// snr(H x_hat, y_clean): how consistent a reconstruction is with the measurements.
double sinogram_snr(const LinearOperator& op, const Image& x_hat, std::span<const double> y_clean);

struct EvalEntry {
  std::string name;
  double snr_db = 0.0;
  double regressed_snr_db = 0.0;
  double a = 1.0;
  double b = 0.0;
  double sinogram_snr_db = 0.0;
};

struct EvalReport {
  double snr_db = 0.0;
  double regressed_snr_db = 0.0;
  double a = 1.0;
  double b = 0.0;
  double sinogram_snr_db = 0.0;
  std::vector<EvalEntry> per_image;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

EvalEntry evaluate_image(std::string name, const Image& x_hat, const Image& truth,
                         const LinearOperator* op = nullptr, const Vector* y_clean = nullptr);
/// Means over the entries (a and b are averaged too).
EvalReport summarize(std::vector<EvalEntry> entries);

}  // namespace pgdrecon

#pragma once

#include <string>
#include <vector>

#include "pgdrecon/linops.hpp"

namespace pgdrecon {

/// Forward differences along columns then rows, zero at the last column/row (zero-gradient
/// boundary). Range layout: [horizontal differences (N), vertical differences (N)].
class GradientOperator final : public LinearOperator {
 public:
  GradientOperator(std::size_t width, std::size_t height);
  std::size_t domain_size() const override { return width_ * height_; }
  std::size_t range_size() const override { return 2 * width_ * height_; }
  void apply(std::span<const double> x, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  std::size_t width_;
  std::size_t height_;
};

struct TvConfig {
  double lambda = 1.0;
  double rho = 0.0;  // <= 0 means rho = lambda
  std::size_t n_iter = 100;
  bool nonneg = true;
  double cg_tol = 1e-8;          // relative to the right-hand side norm
  std::size_t cg_max_iter = 50;  // per x-update; warm-started

  double effective_rho() const { return rho > 0.0 ? rho : lambda; }
  void validate() const;
};

/// 1/2 ||H x - y||^2 + lambda ||D x||_1.
double tv_objective(const LinearOperator& op, std::span<const double> y, const Image& x,
                    double lambda);

struct TvResult {
  Image x;
  Vector objective;  // per iteration, evaluated at the returned (projected) iterate
  std::size_t cg_iterations = 0;
};

/// ADMM for min 1/2 ||Hx - y||^2 + lambda ||Dx||_1 s.t. x >= 0 with the split z1 = Dx and
/// z2 = x (z2 carries the constraint). The x-update solves
/// (H^T H + rho D^T D + rho I) x = rhs by conjugate gradients; z1 is soft-thresholded at
/// lambda / rho. Runs exactly n_iter iterations and returns max(x, 0) when nonneg is set.
TvResult tv_admm(const LinearOperator& op, std::span<const double> y, const TvConfig& cfg,
                 const Image& x0);

/// n log-spaced values over [1e-4, 1e1] * ||H^T y||_inf (a single value uses the lower end).
Vector tv_lambda_grid(const LinearOperator& op, std::span<const double> y, std::size_t n_grid);

struct TvGridResult {
  double best_lambda = 0.0;
  Image x;
  std::size_t best_index = 0;
  Vector lambdas;
  Vector regressed_snr_db;
};

/// Oracle tuning: runs tv_admm for each grid value from x0 and keeps the reconstruction with
/// the highest regressed SNR against the ground truth.
TvGridResult lambda_grid_search(const LinearOperator& op, std::span<const double> y,
                                const Image& ground_truth, std::size_t n_grid, const Image& x0,
                                const TvConfig& base = {});

}  // namespace pgdrecon

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pgdrecon/image.hpp"

namespace pgdrecon {

/// Matrix-free linear map with an exact adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::size_t domain_size() const = 0;
  virtual std::size_t range_size() const = 0;

  /// out = H x. `out` is overwritten.
  virtual void apply(std::span<const double> x, std::span<double> out) const = 0;
  /// out = H^T u. `out` is overwritten.
  virtual void apply_adjoint(std::span<const double> u, std::span<double> out) const = 0;

  Vector forward(std::span<const double> x) const;
  Vector adjoint(std::span<const double> u) const;
  /// H^T H x
  Vector normal(std::span<const double> x) const;

 protected:
  void check_domain(std::span<const double> x) const;
  void check_range(std::span<const double> u) const;
};

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(std::size_t n) : n_(n) {}
  std::size_t domain_size() const override { return n_; }
  std::size_t range_size() const override { return n_; }
  void apply(std::span<const double> x, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  std::size_t n_;
};

class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(Vector diagonal) : diag_(std::move(diagonal)) {}
  std::size_t domain_size() const override { return diag_.size(); }
  std::size_t range_size() const override { return diag_.size(); }
  void apply(std::span<const double> x, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> u, std::span<double> out) const override;

 private:
  Vector diag_;
};

/// Row-major dense matrix of shape rows x cols.
class DenseOperator final : public LinearOperator {
 public:
  DenseOperator(std::size_t rows, std::size_t cols, Vector row_major);
  std::size_t domain_size() const override { return cols_; }
  std::size_t range_size() const override { return rows_; }
  void apply(std::span<const double> x, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> u, std::span<double> out) const override;

  double entry(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  Vector a_;
};

/// Parallel-beam geometry. Ray (view v, offset j) is the line
/// x cos(theta_v) + y sin(theta_v) = first_offset + j * offset_spacing,
/// with the image centered at the origin.
struct SinogramGeometry {
  std::vector<double> angles_deg;
  std::size_t n_offsets = 0;
  double offset_spacing = 1.0;
  double first_offset = 0.0;

  std::size_t n_views() const { return angles_deg.size(); }
  double offset(std::size_t j) const { return first_offset + offset_spacing * double(j); }
  /// Throws ConfigError on an empty angle list, zero offsets, or non-finite values.
  void validate() const;
  Sinogram make_sinogram() const { return Sinogram(angles_deg, n_offsets); }
};

/// Evenly spaced angles 180*i/n_views in [0, 180).
std::vector<double> uniform_angles(std::size_t n_views);

/// Offsets span the image diagonal. n_offsets == 0 picks the default 1.5 x width.
SinogramGeometry parallel_geometry(std::size_t width, std::size_t height, double pixel_size,
                                   std::vector<double> angles_deg, std::size_t n_offsets = 0);
SinogramGeometry parallel_geometry(std::size_t width, std::size_t height, double pixel_size,
                                   std::size_t n_views, std::size_t n_offsets = 0);

/// Discrete Radon transform of a piecewise-constant pixel image. Each ray weight is the
/// exact intersection length of the ray with a pixel, so the adjoint is the literal
/// transpose. Weights are computed once at construction and stored in sparse form.
class RadonOperator final : public LinearOperator {
 public:
  RadonOperator(std::size_t width, std::size_t height, double pixel_size,
                SinogramGeometry geometry);

  std::size_t domain_size() const override { return width_ * height_; }
  std::size_t range_size() const override { return geometry_.n_views() * geometry_.n_offsets; }
  void apply(std::span<const double> x, std::span<double> out) const override;
  void apply_adjoint(std::span<const double> u, std::span<double> out) const override;

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  double pixel_size() const { return pixel_size_; }
  const SinogramGeometry& geometry() const { return geometry_; }
  std::size_t nonzeros() const { return weights_.size(); }

  Sinogram project(const Image& img) const;
  Image backproject(const Sinogram& sino) const;

 private:
  std::size_t width_;
  std::size_t height_;
  double pixel_size_;
  SinogramGeometry geometry_;
  // ray-major CSR
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> pixel_;
  std::vector<double> weights_;
  // pixel-major transpose of the same entries
  std::vector<std::size_t> col_start_;
  std::vector<std::uint32_t> ray_;
  std::vector<double> t_weights_;
};

/// Pixel intersection lengths of one line with the image grid, in traversal order.
struct RaySegment {
  std::size_t pixel;
  double length;
};
std::vector<RaySegment> trace_ray(std::size_t width, std::size_t height, double pixel_size,
                                  double angle_deg, double offset);

Sinogram radon_forward(const Image& img, const SinogramGeometry& geometry);
Image radon_adjoint(const Sinogram& sino, const SinogramGeometry& geometry, std::size_t width,
                    std::size_t height, double pixel_size = 1.0);

struct SpectralBounds {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  std::size_t iterations_used = 0;
  bool converged = false;
};

/// Power iteration on H^T H for the largest eigenvalue. The smallest eigenvalue is
/// taken as 0 when range_size < domain_size, otherwise estimated by power iteration on
/// (lambda_max I - H^T H). If `history` is given it receives the lambda_max estimate
/// after every iteration.
SpectralBounds estimate_spectral_bounds(const LinearOperator& op, double tol,
                                        std::size_t max_iter, std::uint64_t seed = 7,
                                        std::vector<double>* history = nullptr);

}  // namespace pgdrecon

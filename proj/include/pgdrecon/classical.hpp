#pragma once

#include <memory>

#include "pgdrecon/linops.hpp"

namespace pgdrecon {

/// Backprojection H^T y. Identical to RadonOperator::backproject.
Image backproject(const RadonOperator& op, const Sinogram& sino);

/// Ram-Lak filtered backprojection. Each view is filtered with the |omega| response
/// (zero at DC, zero-padded to a power of two), then backprojected pixel-by-pixel with
/// linear interpolation between offsets and scaled by pi / (2 n_views offset_spacing).
/// Uses the nominal angles of `geometry`, not those stored in `sino`.
Image fbp(const Sinogram& sino, const SinogramGeometry& geometry, std::size_t width,
          std::size_t height, double pixel_size = 1.0);

/// Ram-Lak response sampled on a length-`padded` DFT grid, normalized so that the
/// Nyquist bin is 1.
Vector ramp_filter_response(std::size_t padded);
std::size_t fbp_padded_length(std::size_t n_offsets);

/// The fixed linear reconstruction A used to initialize iterative solvers.
class ReconstructorA {
 public:
  enum class Kind { BP, FBP };

  ReconstructorA(Kind kind, std::shared_ptr<const RadonOperator> op);

  Image operator()(const Sinogram& sino) const;
  Image operator()(std::span<const double> measurements) const;

  Kind kind() const { return kind_; }
  const RadonOperator& op() const { return *op_; }

 private:
  Kind kind_;
  std::shared_ptr<const RadonOperator> op_;
};

}  // namespace pgdrecon

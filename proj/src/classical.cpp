#include "pgdrecon/classical.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

namespace pgdrecon {

namespace {

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RampFilter {
 public:
  RampFilter(std::size_t n_offsets)
      : n_(n_offsets),
        padded_(fbp_padded_length(n_offsets)),
        response_(ramp_filter_response(padded_)),
        real_(padded_),
        spectrum_(padded_ / 2 + 1) {
    std::lock_guard lock(planner_mutex());
    auto* cplx = reinterpret_cast<fftw_complex*>(spectrum_.data());
    forward_ = fftw_plan_dft_r2c_1d(int(padded_), real_.data(), cplx, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(int(padded_), cplx, real_.data(), FFTW_ESTIMATE);
  }
  ~RampFilter() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }
  RampFilter(const RampFilter&) = delete;
  RampFilter& operator=(const RampFilter&) = delete;

  void filter(std::span<const double> view, std::span<double> out) {
    std::fill(real_.begin(), real_.end(), 0.0);
    std::copy(view.begin(), view.end(), real_.begin());
    fftw_execute(forward_);
    for (std::size_t k = 0; k < spectrum_.size(); ++k) spectrum_[k] *= response_[k];
    fftw_execute(inverse_);
    const double norm = 1.0 / double(padded_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = real_[j] * norm;
  }

 private:
  std::size_t n_;
  std::size_t padded_;
  Vector response_;
  Vector real_;
  std::vector<std::complex<double>> spectrum_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace

Image backproject(const RadonOperator& op, const Sinogram& sino) { return op.backproject(sino); }

std::size_t fbp_padded_length(std::size_t n_offsets) {
  std::size_t p = 64;
  while (p < 2 * n_offsets) p *= 2;
  return p;
}

Vector ramp_filter_response(std::size_t padded) {
  Vector h(padded);
  for (std::size_t k = 0; k < padded; ++k) {
    const std::size_t f = std::min(k, padded - k);
    h[k] = 2.0 * double(f) / double(padded);
  }
  return h;
}

Image fbp(const Sinogram& sino, const SinogramGeometry& geometry, std::size_t width,
          std::size_t height, double pixel_size) {
  geometry.validate();
  if (geometry.n_views() < 2) throw ConfigError("fbp: at least two views are required");
  if (sino.n_views != geometry.n_views() || sino.n_offsets != geometry.n_offsets ||
      sino.values.size() != sino.n_views * sino.n_offsets) {
    throw ConfigError("fbp: sinogram shape does not match geometry");
  }
  if (width == 0 || height == 0) throw ConfigError("fbp: empty image");

  const std::size_t n_views = geometry.n_views();
  const std::size_t n_off = geometry.n_offsets;
  Vector filtered(sino.values.size());
  {
    RampFilter ramp(n_off);
    for (std::size_t v = 0; v < n_views; ++v) {
      ramp.filter(std::span(sino.values).subspan(v * n_off, n_off),
                  std::span(filtered).subspan(v * n_off, n_off));
    }
  }

  Image img(width, height, pixel_size);
  const double cx = 0.5 * (double(width) - 1.0);
  const double cy = 0.5 * (double(height) - 1.0);
  for (std::size_t v = 0; v < n_views; ++v) {
    const double theta = geometry.angles_deg[v] * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double* row = &filtered[v * n_off];
    for (std::size_t r = 0; r < height; ++r) {
      const double y = (cy - double(r)) * pixel_size;
      for (std::size_t col = 0; col < width; ++col) {
        const double x = (double(col) - cx) * pixel_size;
        const double t = (x * c + y * s - geometry.first_offset) / geometry.offset_spacing;
        const double fl = std::floor(t);
        const long i0 = static_cast<long>(fl);
        if (i0 < 0 || i0 >= long(n_off)) continue;
        const double frac = t - fl;
        double val = row[i0] * (1.0 - frac);
        if (i0 + 1 < long(n_off)) val += row[i0 + 1] * frac;
        img.at(r, col) += val;
      }
    }
  }
  const double scale = std::numbers::pi / (2.0 * double(n_views) * geometry.offset_spacing);
  for (auto& p : img.pixels) p *= scale;
  return img;
}

ReconstructorA::ReconstructorA(Kind kind, std::shared_ptr<const RadonOperator> op)
    : kind_(kind), op_(std::move(op)) {
  if (!op_) throw ConfigError("reconstructor: null operator");
  if (kind_ == Kind::FBP && op_->geometry().n_views() < 2) {
    throw ConfigError("reconstructor: FBP needs at least two views");
  }
}

Image ReconstructorA::operator()(const Sinogram& sino) const {
  if (kind_ == Kind::BP) return op_->backproject(sino);
  return fbp(sino, op_->geometry(), op_->width(), op_->height(), op_->pixel_size());
}

Image ReconstructorA::operator()(std::span<const double> measurements) const {
  Sinogram sino = op_->geometry().make_sinogram();
  if (measurements.size() != sino.values.size()) {
    throw ConfigError("reconstructor: measurement size does not match geometry");
  }
  std::copy(measurements.begin(), measurements.end(), sino.values.begin());
  return (*this)(sino);
}

}  // namespace pgdrecon

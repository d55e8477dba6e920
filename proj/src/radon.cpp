#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pgdrecon/linops.hpp"

namespace pgdrecon {

void SinogramGeometry::validate() const {
  if (angles_deg.empty()) throw ConfigError("geometry: empty angle list");
  if (n_offsets == 0) throw ConfigError("geometry: zero offsets");
  if (!(offset_spacing > 0.0) || !std::isfinite(offset_spacing) || !std::isfinite(first_offset)) {
    throw ConfigError("geometry: invalid offset spacing");
  }
  if (!all_finite(angles_deg)) throw ConfigError("geometry: non-finite angle");
}

std::vector<double> uniform_angles(std::size_t n_views) {
  std::vector<double> angles(n_views);
  for (std::size_t i = 0; i < n_views; ++i) angles[i] = 180.0 * double(i) / double(n_views);
  return angles;
}

SinogramGeometry parallel_geometry(std::size_t width, std::size_t height, double pixel_size,
                                   std::vector<double> angles_deg, std::size_t n_offsets) {
  if (width == 0 || height == 0) throw ConfigError("geometry: empty image");
  if (n_offsets == 0) n_offsets = std::max<std::size_t>(2, (3 * width + 1) / 2);
  const double diagonal = pixel_size * std::hypot(double(width), double(height));
  SinogramGeometry g;
  g.angles_deg = std::move(angles_deg);
  g.n_offsets = n_offsets;
  if (n_offsets == 1) {
    g.offset_spacing = diagonal;
    g.first_offset = 0.0;
  } else {
    g.offset_spacing = diagonal / double(n_offsets - 1);
    g.first_offset = -0.5 * diagonal;
  }
  g.validate();
  return g;
}

SinogramGeometry parallel_geometry(std::size_t width, std::size_t height, double pixel_size,
                                   std::size_t n_views, std::size_t n_offsets) {
  return parallel_geometry(width, height, pixel_size, uniform_angles(n_views), n_offsets);
}

std::vector<RaySegment> trace_ray(std::size_t width, std::size_t height, double pixel_size,
                                  double angle_deg, double offset) {
  constexpr double kParallel = 1e-15;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double nx = std::cos(theta);
  const double ny = std::sin(theta);
  // Unit direction along the line and the foot point closest to the origin.
  const double dx = -ny;
  const double dy = nx;
  const double px = offset * nx;
  const double py = offset * ny;

  const double xmin = -0.5 * double(width) * pixel_size;
  const double ymax = 0.5 * double(height) * pixel_size;
  const double xmax = -xmin;
  const double ymin = -ymax;

  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  auto clip = [&](double pos, double dir, double lo, double hi) {
    if (std::abs(dir) < kParallel) return pos >= lo && pos < hi;
    double ta = (lo - pos) / dir;
    double tb = (hi - pos) / dir;
    if (ta > tb) std::swap(ta, tb);
    t_enter = std::max(t_enter, ta);
    t_exit = std::min(t_exit, tb);
    return true;
  };
  if (!clip(px, dx, xmin, xmax) || !clip(py, dy, ymin, ymax)) return {};
  if (!(t_exit > t_enter)) return {};

  std::vector<double> ts;
  ts.reserve(width + height + 2);
  ts.push_back(t_enter);
  if (std::abs(dx) >= kParallel) {
    for (std::size_t k = 0; k <= width; ++k) {
      const double t = (xmin + double(k) * pixel_size - px) / dx;
      if (t > t_enter && t < t_exit) ts.push_back(t);
    }
  }
  if (std::abs(dy) >= kParallel) {
    for (std::size_t k = 0; k <= height; ++k) {
      const double t = (ymin + double(k) * pixel_size - py) / dy;
      if (t > t_enter && t < t_exit) ts.push_back(t);
    }
  }
  ts.push_back(t_exit);
  std::sort(ts.begin(), ts.end());

  std::vector<RaySegment> segments;
  const double min_length = 1e-12 * pixel_size;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double len = ts[i + 1] - ts[i];
    if (len <= min_length) continue;
    const double mid = 0.5 * (ts[i] + ts[i + 1]);
    const double mx = px + mid * dx;
    const double my = py + mid * dy;
    auto col = static_cast<long>(std::floor((mx - xmin) / pixel_size));
    auto row = static_cast<long>(std::floor((ymax - my) / pixel_size));
    col = std::clamp<long>(col, 0, long(width) - 1);
    row = std::clamp<long>(row, 0, long(height) - 1);
    const std::size_t pixel = std::size_t(row) * width + std::size_t(col);
    if (!segments.empty() && segments.back().pixel == pixel) {
      segments.back().length += len;
    } else {
      segments.push_back({pixel, len});
    }
  }
  return segments;
}

RadonOperator::RadonOperator(std::size_t width, std::size_t height, double pixel_size,
                             SinogramGeometry geometry)
    : width_(width), height_(height), pixel_size_(pixel_size), geometry_(std::move(geometry)) {
  if (width == 0 || height == 0) throw ConfigError("radon: empty image");
  if (!(pixel_size > 0.0)) throw ConfigError("radon: pixel size must be positive");
  geometry_.validate();

  const std::size_t n_rays = range_size();
  row_start_.reserve(n_rays + 1);
  row_start_.push_back(0);
  for (std::size_t v = 0; v < geometry_.n_views(); ++v) {
    for (std::size_t j = 0; j < geometry_.n_offsets; ++j) {
      for (const auto& seg :
           trace_ray(width, height, pixel_size, geometry_.angles_deg[v], geometry_.offset(j))) {
        pixel_.push_back(static_cast<std::uint32_t>(seg.pixel));
        weights_.push_back(seg.length);
      }
      row_start_.push_back(weights_.size());
    }
  }

  // Counting sort into pixel-major order; entries within a pixel stay in ray order.
  const std::size_t n_pixels = domain_size();
  col_start_.assign(n_pixels + 1, 0);
  for (auto p : pixel_) ++col_start_[p + 1];
  for (std::size_t i = 0; i < n_pixels; ++i) col_start_[i + 1] += col_start_[i];
  ray_.resize(weights_.size());
  t_weights_.resize(weights_.size());
  std::vector<std::size_t> cursor(col_start_.begin(), col_start_.end() - 1);
  for (std::size_t r = 0; r < n_rays; ++r) {
    for (std::size_t e = row_start_[r]; e < row_start_[r + 1]; ++e) {
      const std::size_t slot = cursor[pixel_[e]]++;
      ray_[slot] = static_cast<std::uint32_t>(r);
      t_weights_[slot] = weights_[e];
    }
  }
}

void RadonOperator::apply(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  check_range(out);
  const std::size_t n_rays = range_size();
  for (std::size_t r = 0; r < n_rays; ++r) {
    double s = 0.0;
    for (std::size_t e = row_start_[r]; e < row_start_[r + 1]; ++e) s += weights_[e] * x[pixel_[e]];
    out[r] = s;
  }
}

void RadonOperator::apply_adjoint(std::span<const double> u, std::span<double> out) const {
  check_range(u);
  check_domain(out);
  const std::size_t n_pixels = domain_size();
  for (std::size_t p = 0; p < n_pixels; ++p) {
    double s = 0.0;
    for (std::size_t e = col_start_[p]; e < col_start_[p + 1]; ++e) s += t_weights_[e] * u[ray_[e]];
    out[p] = s;
  }
}

Sinogram RadonOperator::project(const Image& img) const {
  if (img.width != width_ || img.height != height_) {
    throw ConfigError("radon: image shape does not match operator");
  }
  Sinogram sino = geometry_.make_sinogram();
  apply(img.pixels, sino.values);
  return sino;
}

Image RadonOperator::backproject(const Sinogram& sino) const {
  if (sino.n_views != geometry_.n_views() || sino.n_offsets != geometry_.n_offsets ||
      sino.values.size() != range_size()) {
    throw ConfigError("radon: sinogram shape does not match geometry");
  }
  Image img(width_, height_, pixel_size_);
  apply_adjoint(sino.values, img.pixels);
  return img;
}

Sinogram radon_forward(const Image& img, const SinogramGeometry& geometry) {
  if (img.empty()) throw ConfigError("radon: empty image");
  return RadonOperator(img.width, img.height, img.pixel_size, geometry).project(img);
}

Image radon_adjoint(const Sinogram& sino, const SinogramGeometry& geometry, std::size_t width,
                    std::size_t height, double pixel_size) {
  return RadonOperator(width, height, pixel_size, geometry).backproject(sino);
}

}  // namespace pgdrecon

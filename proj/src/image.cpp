#include "pgdrecon/image.hpp"

#include <cmath>

namespace pgdrecon {

Image::Image(std::size_t w, std::size_t h, double pixel)
    : width(w), height(h), pixel_size(pixel), pixels(w * h, 0.0) {}

Image::Image(std::size_t w, std::size_t h, Vector values, double pixel)
    : width(w), height(h), pixel_size(pixel), pixels(std::move(values)) {
  if (pixels.size() != w * h) {
    throw ConfigError("image: pixel count " + std::to_string(pixels.size()) +
                      " does not match " + std::to_string(w) + "x" + std::to_string(h));
  }
}

void Image::validate() const {
  if (pixels.size() != width * height) {
    throw ConfigError("image: pixel count does not match shape");
  }
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
    throw ConfigError("image: pixel size must be positive");
  }
  if (!all_finite(pixels)) {
    throw ConfigError("image: non-finite pixel value");
  }
}

Sinogram::Sinogram(std::vector<double> angles, std::size_t offsets)
    : n_views(angles.size()),
      n_offsets(offsets),
      angles_deg(std::move(angles)),
      values(n_views * n_offsets, 0.0) {}

void Sinogram::validate() const {
  if (angles_deg.size() != n_views) {
    throw ConfigError("sinogram: angle count does not match view count");
  }
  if (values.size() != n_views * n_offsets) {
    throw ConfigError("sinogram: value count does not match shape");
  }
  if (!all_finite(values)) {
    throw ConfigError("sinogram: non-finite value");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ConfigError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace pgdrecon

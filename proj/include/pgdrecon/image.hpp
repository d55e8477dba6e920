#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgdrecon {

using Vector = std::vector<double>;

/// Invalid input or configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or broke down. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 2D real-valued pixel grid, row-major, row 0 at the top.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  double pixel_size = 1.0;
  Vector pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, double pixel = 1.0);
  Image(std::size_t w, std::size_t h, Vector values, double pixel = 1.0);

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

  /// Zero image with the same shape and pixel size.
  Image zeros_like() const { return Image(width, height, pixel_size); }
  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }

  /// Throws ConfigError if the pixel count disagrees with the shape or an entry is non-finite.
  void validate() const;
};

/// View-major measurement grid: values[view * n_offsets + offset].
struct Sinogram {
  std::size_t n_views = 0;
  std::size_t n_offsets = 0;
  std::vector<double> angles_deg;
  Vector values;

  Sinogram() = default;
  Sinogram(std::vector<double> angles, std::size_t offsets);

  double& at(std::size_t view, std::size_t offset) { return values[view * n_offsets + offset]; }
  double at(std::size_t view, std::size_t offset) const {
    return values[view * n_offsets + offset];
  }

  void validate() const;
};

// Small dense-vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);
/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> a);

}  // namespace pgdrecon

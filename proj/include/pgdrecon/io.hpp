#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "pgdrecon/image.hpp"

namespace pgdrecon::io {

namespace fs = std::filesystem;
using nlohmann::json;

/// Raw little-endian float64 array, no header.
void write_f64(const fs::path& path, std::span<const double> values);
Vector read_f64(const fs::path& path);

/// `path` holds the raw pixels; `path` + ".json" holds shape and pixel size.
void save_image(const fs::path& path, const Image& img);
Image load_image(const fs::path& path);

/// Sidecar carries n_views, n_offsets, and the angle list. `extra` entries are merged
/// into the sidecar object.
void save_sinogram(const fs::path& path, const Sinogram& sino, const json& extra = json::object());
Sinogram load_sinogram(const fs::path& path);

fs::path sidecar_path(const fs::path& path);

/// Binary 16-bit PGM with a linear window [lo, hi] mapped to [0, 65535]. Without a
/// window the image min/max is used.
void write_pgm16(const fs::path& path, const Image& img, std::optional<double> lo = std::nullopt,
                 std::optional<double> hi = std::nullopt);

/// Serializes +inf as the string "inf" and other values as numbers.
json number_or_inf(double v);
double number_from_json(const json& j);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);
void write_text(const fs::path& path, const std::string& text);

}  // namespace pgdrecon::io

#include "pgdrecon/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace pgdrecon::io {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

void write_f64(const fs::path& path, std::span<const double> values) {
  auto out = open_out(path);
  for (double v : values) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

Vector read_f64(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path.string());
  const auto bytes = fs::file_size(path);
  if (bytes % 8 != 0) throw ConfigError("not a float64 array: " + path.string());
  Vector values(bytes / 8);
  for (auto& v : values) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    v = std::bit_cast<double>(to_little(bits));
  }
  if (!in) throw ConfigError("read failed: " + path.string());
  return values;
}

void save_image(const fs::path& path, const Image& img) {
  write_f64(path, img.pixels);
  write_json(sidecar_path(path), json{{"kind", "image"},
                                      {"width", img.width},
                                      {"height", img.height},
                                      {"pixel_size", img.pixel_size},
                                      {"dtype", "float64-le"}});
}

Image load_image(const fs::path& path) {
  const json meta = read_json(sidecar_path(path));
  Image img(meta.at("width").get<std::size_t>(), meta.at("height").get<std::size_t>(),
            read_f64(path), meta.value("pixel_size", 1.0));
  img.validate();
  return img;
}

void save_sinogram(const fs::path& path, const Sinogram& sino, const json& extra) {
  write_f64(path, sino.values);
  json meta = {{"kind", "sinogram"},
               {"n_views", sino.n_views},
               {"n_offsets", sino.n_offsets},
               {"angles_deg", sino.angles_deg},
               {"dtype", "float64-le"}};
  meta.update(extra);
  write_json(sidecar_path(path), meta);
}

Sinogram load_sinogram(const fs::path& path) {
  const json meta = read_json(sidecar_path(path));
  Sinogram sino(meta.at("angles_deg").get<std::vector<double>>(),
                meta.at("n_offsets").get<std::size_t>());
  sino.values = read_f64(path);
  sino.validate();
  return sino;
}

void write_pgm16(const fs::path& path, const Image& img, std::optional<double> lo,
                 std::optional<double> hi) {
  if (img.empty()) throw ConfigError("pgm: empty image");
  const auto [mn, mx] = std::minmax_element(img.pixels.begin(), img.pixels.end());
  const double a = lo.value_or(*mn);
  const double b = hi.value_or(*mx);
  const double span = b > a ? b - a : 1.0;
  auto out = open_out(path);
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (double v : img.pixels) {
    const double t = std::clamp((v - a) / span, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    // PGM samples wider than one byte are big-endian.
    const char bytes[2] = {static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
    out.write(bytes, 2);
  }
}

json number_or_inf(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  if (std::isinf(v)) return "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("expected number, got '" + s + "'");
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

}  // namespace pgdrecon::io

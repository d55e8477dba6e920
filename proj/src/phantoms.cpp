#include "pgdrecon/phantoms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace pgdrecon {

const std::vector<Ellipse>& shepp_logan_ellipses() {
  static const std::vector<Ellipse> table = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},          {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},  {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},     {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},     {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},   {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  return table;
}

void PhantomSpec::validate() const {
  if (size < 8) throw ConfigError("phantom: size must be at least 8");
  if (!(intensity_lo < intensity_hi)) throw ConfigError("phantom: empty intensity range");
  if (kind == Kind::RandomEllipses && n_ellipses == 0) {
    throw ConfigError("phantom: need at least one ellipse");
  }
}

nlohmann::json PhantomSpec::to_json() const {
  return {{"kind", kind == Kind::SheppLogan ? "shepp-logan" : "random-ellipses"},
          {"size", size},
          {"n_ellipses", n_ellipses},
          {"intensity_range", {intensity_lo, intensity_hi}},
          {"seed", seed}};
}

PhantomSpec PhantomSpec::from_json(const nlohmann::json& j) {
  PhantomSpec s;
  const auto kind = j.value("kind", std::string("random-ellipses"));
  if (kind == "shepp-logan") {
    s.kind = Kind::SheppLogan;
  } else if (kind == "random-ellipses") {
    s.kind = Kind::RandomEllipses;
  } else {
    throw ConfigError("phantom: unknown kind '" + kind + "'");
  }
  s.size = j.value("size", s.size);
  s.n_ellipses = j.value("n_ellipses", s.n_ellipses);
  if (j.contains("intensity_range")) {
    s.intensity_lo = j["intensity_range"].at(0).get<double>();
    s.intensity_hi = j["intensity_range"].at(1).get<double>();
  }
  s.seed = j.value("seed", s.seed);
  return s;
}

Image render_ellipses(const std::vector<Ellipse>& ellipses, std::size_t size, double lo,
                      double hi) {
  Image img(size, size);
  const double n = double(size);
  for (const auto& e : ellipses) {
    const double phi = e.phi_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    for (std::size_t r = 0; r < size; ++r) {
      const double y = 1.0 - (double(r) + 0.5) * 2.0 / n;
      for (std::size_t col = 0; col < size; ++col) {
        const double x = (double(col) + 0.5) * 2.0 / n - 1.0;
        const double u = (x - e.x0) * c + (y - e.y0) * s;
        const double v = -(x - e.x0) * s + (y - e.y0) * c;
        if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) img.at(r, col) += e.value;
      }
    }
  }
  for (auto& p : img.pixels) p = std::clamp(p, lo, hi);
  return img;
}

namespace {

std::vector<Ellipse> random_ellipses(const PhantomSpec& spec) {
  std::mt19937_64 rng(mix_seed(spec.seed, 0x9e11));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * unit(rng); };
  const double range = spec.intensity_hi - spec.intensity_lo;
  const double min_axis = 1.5 * 2.0 / double(spec.size);

  std::vector<Ellipse> out;
  out.reserve(spec.n_ellipses);
  // Body.
  out.push_back({spec.intensity_lo + range * uni(0.35, 0.6), uni(0.6, 0.88), uni(0.6, 0.88),
                 uni(-0.05, 0.05), uni(-0.05, 0.05), uni(0.0, 180.0)});
  while (out.size() < spec.n_ellipses) {
    Ellipse e{range * uni(-0.3, 0.45), uni(0.0, 0.35), uni(0.0, 0.35), 0.0, 0.0, uni(0.0, 180.0)};
    const double rad = 0.6 * std::sqrt(unit(rng));
    const double ang = uni(0.0, 2.0 * std::numbers::pi);
    e.x0 = rad * std::cos(ang);
    e.y0 = rad * std::sin(ang);
    if (e.a < min_axis || e.b < min_axis) continue;
    out.push_back(e);
  }
  return out;
}

}  // namespace

Image generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  if (spec.kind == PhantomSpec::Kind::SheppLogan) {
    auto table = shepp_logan_ellipses();
    const double scale = spec.intensity_hi - spec.intensity_lo;
    for (auto& e : table) e.value *= scale;
    Image img = render_ellipses(table, spec.size, 0.0, scale);
    for (auto& p : img.pixels) p += spec.intensity_lo;
    return img;
  }
  return render_ellipses(random_ellipses(spec), spec.size, spec.intensity_lo, spec.intensity_hi);
}

void scale_noise_to_snr(std::span<const double> signal, std::span<double> noise, double snr_db) {
  const double target = norm2(signal) / std::pow(10.0, snr_db / 20.0);
  const double current = norm2(noise);
  if (!(current > 0.0)) throw NumericalError("noise: zero noise realization");
  for (auto& v : noise) v *= target / current;
}

Measurement simulate_measurement(const Image& x, const MeasurementConfig& cfg) {
  if (cfg.n_views == 0) throw ConfigError("measurement: need at least one view");
  if (cfg.angle_jitter_std_deg < 0.0) throw ConfigError("measurement: negative jitter");
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5eed));

  const auto nominal = uniform_angles(cfg.n_views);
  Measurement m;
  m.jittered_angles = nominal;
  if (cfg.angle_jitter_std_deg > 0.0) {
    std::normal_distribution<double> jitter(0.0, cfg.angle_jitter_std_deg);
    for (auto& a : m.jittered_angles) a += jitter(rng);
  }
  const auto true_geometry =
      parallel_geometry(x.width, x.height, x.pixel_size, m.jittered_angles, cfg.n_offsets);
  const RadonOperator acquisition(x.width, x.height, x.pixel_size, true_geometry);
  m.clean = acquisition.forward(x.pixels);

  m.sinogram = Sinogram(nominal, true_geometry.n_offsets);
  m.sinogram.values = m.clean;
  m.realized_snr_db = std::numeric_limits<double>::infinity();
  if (cfg.measurement_snr_db) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector noise(m.clean.size());
    for (auto& v : noise) v = normal(rng);
    scale_noise_to_snr(m.clean, noise, *cfg.measurement_snr_db);
    for (std::size_t i = 0; i < noise.size(); ++i) m.sinogram.values[i] += noise[i];
    m.realized_snr_db = 20.0 * std::log10(norm2(m.clean) / norm2(noise));
  }
  return m;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

DatasetSeeds make_dataset_seeds(std::uint64_t base_seed, std::size_t n_train, std::size_t n_test) {
  DatasetSeeds seeds;
  for (std::size_t i = 0; i < n_train; ++i) seeds.train.push_back(mix_seed(base_seed, 2 * i));
  for (std::size_t i = 0; i < n_test; ++i) seeds.test.push_back(mix_seed(base_seed, 2 * i + 1));
  const std::set<std::uint64_t> train(seeds.train.begin(), seeds.train.end());
  for (auto s : seeds.test) {
    if (train.count(s)) throw ConfigError("dataset: train and test seeds overlap");
  }
  return seeds;
}

}  // namespace pgdrecon

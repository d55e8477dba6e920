#include "pgdrecon/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "pgdrecon/io.hpp"

namespace pgdrecon {

double snr(std::span<const double> x_hat, std::span<const double> x) {
  if (x_hat.size() != x.size()) throw ConfigError("snr: shape mismatch");
  const double err = distance(x_hat, x);
  if (err < 1e-300) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(norm2(x) / err);
}

double snr(const Image& x_hat, const Image& x) {
  if (!x_hat.same_shape(x)) throw ConfigError("snr: shape mismatch");
  return snr(std::span<const double>(x_hat.pixels), std::span<const double>(x.pixels));
}

RegressedSnr regressed_snr(std::span<const double> x_hat, std::span<const double> x) {
  if (x_hat.size() != x.size() || x.empty()) throw ConfigError("regressed snr: shape mismatch");
  const double n = double(x.size());
  double mh = 0.0;
  double mx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mh += x_hat[i];
    mx += x[i];
  }
  mh /= n;
  mx /= n;
  double cov = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dh = x_hat[i] - mh;
    cov += dh * (x[i] - mx);
    var += dh * dh;
  }
  RegressedSnr r;
  // Constant up to rounding of the mean.
  if (var <= 1e-28 * n * mh * mh) {
    r.a = 0.0;
    r.b = mx;
  } else {
    r.a = cov / var;
    r.b = mx - r.a * mh;
  }
  Vector fit(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fit[i] = r.a * x_hat[i] + r.b;
  // An exact affine relation leaves only rounding in the fit; report it as exact.
  if (distance(fit, x) <= 1e-12 * norm2(x)) {
    r.snr_db = std::numeric_limits<double>::infinity();
    return r;
  }
  r.snr_db = snr(fit, x);
  return r;
}

RegressedSnr regressed_snr(const Image& x_hat, const Image& x) {
  if (!x_hat.same_shape(x)) throw ConfigError("regressed snr: shape mismatch");
  return regressed_snr(std::span<const double>(x_hat.pixels), std::span<const double>(x.pixels));
}

double sinogram_snr(const LinearOperator& op, const Image& x_hat, std::span<const double> y_clean) {
  if (x_hat.size() != op.domain_size() || y_clean.size() != op.range_size()) {
    throw ConfigError("sinogram snr: shape mismatch");
  }
  return snr(std::span<const double>(op.forward(x_hat.pixels)), y_clean);
}

EvalEntry evaluate_image(std::string name, const Image& x_hat, const Image& truth,
                         const LinearOperator* op, const Vector* y_clean) {
  EvalEntry e;
  e.name = std::move(name);
  e.snr_db = snr(x_hat, truth);
  const auto reg = regressed_snr(x_hat, truth);
  e.regressed_snr_db = reg.snr_db;
  e.a = reg.a;
  e.b = reg.b;
  e.sinogram_snr_db = (op && y_clean) ? sinogram_snr(*op, x_hat, *y_clean)
                                      : std::numeric_limits<double>::quiet_NaN();
  return e;
}

EvalReport summarize(std::vector<EvalEntry> entries) {
  EvalReport r;
  const double n = double(std::max<std::size_t>(entries.size(), 1));
  r.snr_db = r.regressed_snr_db = r.a = r.b = r.sinogram_snr_db = 0.0;
  for (const auto& e : entries) {
    r.snr_db += e.snr_db / n;
    r.regressed_snr_db += e.regressed_snr_db / n;
    r.a += e.a / n;
    r.b += e.b / n;
    r.sinogram_snr_db += e.sinogram_snr_db / n;
  }
  r.per_image = std::move(entries);
  return r;
}

nlohmann::json EvalReport::to_json() const {
  using io::number_or_inf;
  nlohmann::json images = nlohmann::json::array();
  for (const auto& e : per_image) {
    images.push_back({{"name", e.name},
                      {"snr_db", number_or_inf(e.snr_db)},
                      {"regressed_snr_db", number_or_inf(e.regressed_snr_db)},
                      {"a", e.a},
                      {"b", e.b},
                      {"sinogram_snr_db", number_or_inf(e.sinogram_snr_db)}});
  }
  return {{"snr_db", number_or_inf(snr_db)},
          {"regressed_snr_db", number_or_inf(regressed_snr_db)},
          {"a", a},
          {"b", b},
          {"sinogram_snr_db", number_or_inf(sinogram_snr_db)},
          {"per_image", images}};
}

std::string EvalReport::to_csv() const {
  auto fmt = [](double v) {
    if (std::isinf(v)) return std::string(v > 0 ? "inf" : "-inf");
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  };
  std::ostringstream os;
  os << "name,snr_db,regressed_snr_db,a,b,sinogram_snr_db\n";
  for (const auto& e : per_image) {
    os << e.name << ',' << fmt(e.snr_db) << ',' << fmt(e.regressed_snr_db) << ',' << fmt(e.a)
       << ',' << fmt(e.b) << ',' << fmt(e.sinogram_snr_db) << '\n';
  }
  os << "mean," << fmt(snr_db) << ',' << fmt(regressed_snr_db) << ',' << fmt(a) << ',' << fmt(b)
     << ',' << fmt(sinogram_snr_db) << '\n';
  return os.str();
}

}  // namespace pgdrecon

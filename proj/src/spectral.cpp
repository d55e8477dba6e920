#include <algorithm>
#include <cmath>
#include <random>

#include "pgdrecon/linops.hpp"

namespace pgdrecon {

namespace {

struct PowerResult {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Power iteration on a symmetric positive semidefinite map. The Rayleigh quotient of
// successive normalized iterates is non-decreasing for such maps.
template <typename Apply>
PowerResult power_iterate(std::size_t n, Apply&& apply_map, double tol, std::size_t max_iter,
                          std::uint64_t seed, std::vector<double>* history) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (auto& e : v) e = normal(rng);
  double nv = norm2(v);
  for (auto& e : v) e /= nv;

  PowerResult res;
  Vector w(n);
  double previous = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    apply_map(v, w);
    const double rayleigh = dot(v, w);
    const double nw = norm2(w);
    res.value = rayleigh;
    res.iterations = it;
    if (history) history->push_back(rayleigh);
    if (nw == 0.0) {
      res.value = 0.0;
      res.converged = true;
      break;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= tol * std::abs(rayleigh)) {
      res.converged = true;
      break;
    }
    previous = rayleigh;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return res;
}

}  // namespace

SpectralBounds estimate_spectral_bounds(const LinearOperator& op, double tol,
                                        std::size_t max_iter, std::uint64_t seed,
                                        std::vector<double>* history) {
  if (!(tol > 0.0)) throw ConfigError("spectral bounds: tolerance must be positive");
  const std::size_t n = op.domain_size();
  Vector tmp(op.range_size());
  auto normal_map = [&](const Vector& v, Vector& out) {
    op.apply(v, tmp);
    op.apply_adjoint(tmp, out);
  };

  const PowerResult top = power_iterate(n, normal_map, tol, max_iter, seed, history);
  SpectralBounds bounds;
  bounds.lambda_max = std::max(top.value, 0.0);
  bounds.iterations_used = top.iterations;
  bounds.converged = top.converged;

  if (op.range_size() < n || bounds.lambda_max == 0.0) {
    bounds.lambda_min = 0.0;
    return bounds;
  }

  const double shift = bounds.lambda_max;
  auto shifted = [&](const Vector& v, Vector& out) {
    normal_map(v, out);
    for (std::size_t i = 0; i < n; ++i) out[i] = shift * v[i] - out[i];
  };
  const PowerResult bottom = power_iterate(n, shifted, tol, max_iter, seed + 1, nullptr);
  bounds.lambda_min = std::clamp(shift - bottom.value, 0.0, bounds.lambda_max);
  bounds.iterations_used += bottom.iterations;
  bounds.converged = bounds.converged && bottom.converged;
  return bounds;
}

}  // namespace pgdrecon

#include "pgdrecon/tv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pgdrecon/metrics.hpp"

namespace pgdrecon {

GradientOperator::GradientOperator(std::size_t width, std::size_t height)
    : width_(width), height_(height) {
  if (width == 0 || height == 0) throw ConfigError("gradient: empty image");
}

void GradientOperator::apply(std::span<const double> x, std::span<double> out) const {
  check_domain(x);
  check_range(out);
  const std::size_t n = width_ * height_;
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      const std::size_t i = r * width_ + c;
      out[i] = c + 1 < width_ ? x[i + 1] - x[i] : 0.0;
      out[n + i] = r + 1 < height_ ? x[i + width_] - x[i] : 0.0;
    }
  }
}

void GradientOperator::apply_adjoint(std::span<const double> u, std::span<double> out) const {
  check_range(u);
  check_domain(out);
  const std::size_t n = width_ * height_;
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) {
      const std::size_t i = r * width_ + c;
      if (c + 1 < width_) {
        out[i + 1] += u[i];
        out[i] -= u[i];
      }
      if (r + 1 < height_) {
        out[i + width_] += u[n + i];
        out[i] -= u[n + i];
      }
    }
  }
}

void TvConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("tv: lambda must be positive");
  if (!std::isfinite(rho)) throw ConfigError("tv: rho must be finite");
  if (n_iter == 0) throw ConfigError("tv: n_iter must be positive");
  if (!(cg_tol > 0.0)) throw ConfigError("tv: cg_tol must be positive");
  if (cg_max_iter == 0) throw ConfigError("tv: cg_max_iter must be positive");
}

double tv_objective(const LinearOperator& op, std::span<const double> y, const Image& x,
                    double lambda) {
  Vector r = op.forward(x.pixels);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  const GradientOperator D(x.width, x.height);
  double tv = 0.0;
  for (double d : D.forward(x.pixels)) tv += std::abs(d);
  return 0.5 * dot(r, r) + lambda * tv;
}

namespace {

class NormalMatrix {
 public:
  NormalMatrix(const LinearOperator& H, const GradientOperator& D, double rho)
      : H_(H), D_(D), rho_(rho), hx_(H.range_size()), dx_(D.range_size()), tmp_(H.domain_size()) {}

  void apply(std::span<const double> x, std::span<double> out) {
    H_.apply(x, hx_);
    H_.apply_adjoint(hx_, out);
    D_.apply(x, dx_);
    D_.apply_adjoint(dx_, tmp_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += rho_ * (tmp_[i] + x[i]);
  }

 private:
  const LinearOperator& H_;
  const GradientOperator& D_;
  double rho_;
  Vector hx_, dx_, tmp_;
};

// Warm-started CG on an SPD system. Returns the iteration count.
std::size_t conjugate_gradient(NormalMatrix& A, std::span<const double> b, Vector& x, double tol,
                               std::size_t max_iter, std::size_t outer) {
  const std::size_t n = x.size();
  Vector r(n), p(n), ap(n);
  A.apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  const double target = tol * std::max(norm2(b), 1e-300);
  double rr = dot(r, r);
  p = r;
  std::size_t it = 0;
  while (it < max_iter && std::sqrt(rr) > target) {
    A.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0) || !std::isfinite(pap)) {
      throw NumericalError("tv: conjugate gradient breakdown at ADMM iteration " +
                           std::to_string(outer) + ", CG iteration " + std::to_string(it) +
                           " (p^T A p = " + std::to_string(pap) + ")");
    }
    const double a = rr / pap;
    axpy(a, p, x);
    axpy(-a, ap, r);
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
    ++it;
  }
  return it;
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

TvResult tv_admm(const LinearOperator& op, std::span<const double> y, const TvConfig& cfg,
                 const Image& x0) {
  cfg.validate();
  if (x0.size() != op.domain_size() || y.size() != op.range_size()) {
    throw ConfigError("tv: shape mismatch between operator, data and initial image");
  }
  const double rho = cfg.effective_rho();
  const double thresh = cfg.lambda / rho;
  const std::size_t n = x0.size();
  const GradientOperator D(x0.width, x0.height);
  NormalMatrix A(op, D, rho);

  const Vector hty = op.adjoint(y);
  Vector x = x0.pixels;
  Vector z1 = D.forward(x), u1(2 * n, 0.0);
  Vector z2 = x, u2(n, 0.0);
  if (cfg.nonneg) {
    for (auto& v : z2) v = std::max(v, 0.0);
  }
  Vector rhs(n), dx(2 * n), tmp(n);

  TvResult res;
  res.objective.reserve(cfg.n_iter);
  Image out = x0;
  for (std::size_t k = 0; k < cfg.n_iter; ++k) {
    for (std::size_t i = 0; i < 2 * n; ++i) dx[i] = z1[i] - u1[i];
    D.apply_adjoint(dx, tmp);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = hty[i] + rho * (tmp[i] + z2[i] - u2[i]);
    res.cg_iterations += conjugate_gradient(A, rhs, x, cfg.cg_tol, cfg.cg_max_iter, k);

    D.apply(x, dx);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      z1[i] = soft(dx[i] + u1[i], thresh);
      u1[i] += dx[i] - z1[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i] + u2[i];
      z2[i] = cfg.nonneg ? std::max(v, 0.0) : v;
      u2[i] += x[i] - z2[i];
    }

    for (std::size_t i = 0; i < n; ++i) out.pixels[i] = cfg.nonneg ? std::max(x[i], 0.0) : x[i];
    res.objective.push_back(tv_objective(op, y, out, cfg.lambda));
    if (!std::isfinite(res.objective.back())) {
      throw NumericalError("tv: non-finite objective at ADMM iteration " + std::to_string(k));
    }
  }
  res.x = std::move(out);
  return res;
}

Vector tv_lambda_grid(const LinearOperator& op, std::span<const double> y, std::size_t n_grid) {
  if (n_grid == 0) throw ConfigError("tv: empty lambda grid");
  double scale = 0.0;
  for (double v : op.adjoint(y)) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0)) scale = 1.0;
  Vector grid(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double e = n_grid == 1 ? -4.0 : -4.0 + 5.0 * double(i) / double(n_grid - 1);
    grid[i] = scale * std::pow(10.0, e);
  }
  return grid;
}

TvGridResult lambda_grid_search(const LinearOperator& op, std::span<const double> y,
                                const Image& ground_truth, std::size_t n_grid, const Image& x0,
                                const TvConfig& base) {
  if (!ground_truth.same_shape(x0)) throw ConfigError("tv: ground truth shape mismatch");
  TvGridResult res;
  res.lambdas = tv_lambda_grid(op, y, n_grid);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.lambdas.size(); ++i) {
    TvConfig cfg = base;
    cfg.lambda = res.lambdas[i];
    cfg.rho = 0.0;
    TvResult r = tv_admm(op, y, cfg, x0);
    const double s = regressed_snr(r.x, ground_truth).snr_db;
    res.regressed_snr_db.push_back(s);
    if (i == 0 || s > best) {
      best = s;
      res.best_index = i;
      res.best_lambda = cfg.lambda;
      res.x = std::move(r.x);
    }
  }
  return res;
}

}  // namespace pgdrecon

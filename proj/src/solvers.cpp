#include "pgdrecon/solvers.hpp"

#include <cmath>
#include <sstream>

#include "pgdrecon/metrics.hpp"

namespace pgdrecon {

CSequence CSequence::constant(double c) {
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("c sequence: constant C must lie in (0, 1)");
  return CSequence({c}, true);
}

CSequence CSequence::custom(Vector values) {
  if (values.empty()) throw ConfigError("c sequence: empty list");
  for (double c : values) {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("c sequence: entries must be positive");
  }
  return CSequence(std::move(values), false);
}

double CSequence::at(std::size_t k) const {
  if (k == 0) throw ConfigError("c sequence: indices start at 1");
  return values_[std::min(k, values_.size()) - 1];
}

void SolverConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("solver: gamma must be positive");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw ConfigError("solver: alpha0 must lie in (0, 1]");
  if (!(stop_tol > 0.0)) throw ConfigError("solver: stop_tol must be positive");
  if (max_iter == 0) throw ConfigError("solver: max_iter must be positive");
}

double pgd_step_size(const SpectralBounds& b) {
  if (!(b.lambda_max > 0.0)) throw ConfigError("step size: lambda_max must be positive");
  return 2.0 / (b.lambda_max + b.lambda_min);
}

double relaxed_step_size(const SpectralBounds& b) {
  if (!(b.lambda_max > 0.0)) throw ConfigError("step size: lambda_max must be positive");
  return 0.9 * 2.0 / b.lambda_max;
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIter: return "max_iter";
    case SolverStatus::Diverged: return "diverged";
  }
  return "unknown";
}

std::string SolverTrace::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "k,step_norm,z_gap,alpha,c,adjusted,data_residual,snr_db,sinogram_snr_db\n";
  for (const auto& r : records) {
    os << r.k << ',' << r.step_norm << ',' << r.z_gap << ',' << r.alpha << ',' << r.c << ','
       << (r.adjusted ? 1 : 0) << ',' << r.data_residual << ',' << r.snr_db << ','
       << r.sinogram_snr_db << '\n';
  }
  return os.str();
}

namespace {

// Gradient step that also reports ||H x - y||.
Image landweber(const Image& x, const LinearOperator& op, std::span<const double> y, double gamma,
                double* residual_norm) {
  if (x.size() != op.domain_size() || y.size() != op.range_size()) {
    throw ConfigError("gradient step: shape mismatch");
  }
  Vector r = op.forward(x.pixels);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  if (residual_norm) *residual_norm = norm2(r);
  const Vector g = op.adjoint(r);
  Image out = x;
  axpy(-gamma, g, out.pixels);
  return out;
}

double residual_of(const Image& x, const LinearOperator& op, std::span<const double> y) {
  Vector r = op.forward(x.pixels);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return norm2(r);
}

void fill_quality(IterationRecord& rec, const Image& x, const LinearOperator& op,
                  const TraceOptions& opts) {
  if (opts.ground_truth) rec.snr_db = regressed_snr(x, *opts.ground_truth).snr_db;
  if (opts.clean_measurements) rec.sinogram_snr_db = sinogram_snr(op, x, *opts.clean_measurements);
}

// Shared loop for the PGD family: next(k, x, rec) returns x_{k+1} and fills rec.
template <typename Next>
SolverResult iterate(const LinearOperator& op, const SolverConfig& cfg, const Image& x0,
                     const TraceOptions& opts, Next&& next) {
  SolverResult res;
  Image x = x0;
  double first_step = -1.0;
  res.trace.status = SolverStatus::MaxIter;
  for (std::size_t k = 0; k < cfg.max_iter; ++k) {
    if (opts.observer) opts.observer(k, x);
    IterationRecord rec;
    rec.k = k;
    Image x_next = next(k, x, rec);
    rec.step_norm = distance(x_next.pixels, x.pixels);
    fill_quality(rec, x, op, opts);
    const double x_norm = norm2(x.pixels);
    res.trace.records.push_back(rec);

    if (!std::isfinite(rec.step_norm) || !all_finite(x_next.pixels)) {
      res.trace.status = SolverStatus::Diverged;
      break;
    }
    if (first_step < 0.0) first_step = rec.step_norm;
    if (first_step > 0.0 && rec.step_norm > cfg.divergence_factor * first_step) {
      x = std::move(x_next);
      res.trace.status = SolverStatus::Diverged;
      break;
    }
    x = std::move(x_next);
    if (rec.step_norm / (1.0 + x_norm) < cfg.stop_tol) {
      res.trace.status = SolverStatus::Converged;
      break;
    }
  }
  if (opts.observer) opts.observer(res.trace.records.size(), x);
  res.x = std::move(x);
  return res;
}

}  // namespace

Image gradient_step(const Image& x, const LinearOperator& op, std::span<const double> y,
                    double gamma) {
  return landweber(x, op, y, gamma, nullptr);
}

SolverResult pgd(const Projector& projector, const LinearOperator& op, std::span<const double> y,
                 const SolverConfig& cfg, const Image& x0, const TraceOptions& opts) {
  cfg.validate();
  return iterate(op, cfg, x0, opts, [&](std::size_t, const Image& x, IterationRecord& rec) {
    Image z = projector.apply(landweber(x, op, y, cfg.gamma, &rec.data_residual));
    rec.z_gap = distance(z.pixels, x.pixels);
    rec.alpha = 1.0;
    return z;
  });
}

SolverResult averaged_pgd(const Projector& projector, const LinearOperator& op,
                          std::span<const double> y, const SolverConfig& cfg, const Image& x0,
                          double alpha, const TraceOptions& opts) {
  cfg.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("averaged pgd: alpha must lie in (0, 1)");
  return iterate(op, cfg, x0, opts, [&](std::size_t, const Image& x, IterationRecord& rec) {
    const Image z = projector.apply(landweber(x, op, y, cfg.gamma, &rec.data_residual));
    rec.z_gap = distance(z.pixels, x.pixels);
    rec.alpha = alpha;
    Image out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.pixels[i] = (1.0 - alpha) * x.pixels[i] + alpha * z.pixels[i];
    }
    return out;
  });
}

SolverResult rpgd(const Projector& F, const LinearOperator& op, std::span<const double> y,
                  const Image& x0, const SolverConfig& cfg, const TraceOptions& opts) {
  cfg.validate();
  if (x0.size() != op.domain_size()) throw ConfigError("rpgd: x0 does not match operator");
  double alpha_prev = cfg.alpha0;
  double gap_prev = 0.0;
  return iterate(op, cfg, x0, opts, [&](std::size_t k, const Image& x, IterationRecord& rec) {
    Image z;
    if (k == 0 && cfg.skip_first_gradient) {
      rec.data_residual = residual_of(x, op, y);
      z = F.apply(x);
    } else {
      z = F.apply(landweber(x, op, y, cfg.gamma, &rec.data_residual));
    }
    if (!z.same_shape(x)) throw ConfigError("rpgd: operator F changed the image shape");
    const double gap = distance(z.pixels, x.pixels);
    double alpha = alpha_prev;
    if (k >= 1) {
      const double c = cfg.c.at(k);
      rec.c = c;
      // gap > c * gap_prev >= 0 guarantees a nonzero denominator.
      if (gap > c * gap_prev) {
        alpha = c * (gap_prev / gap) * alpha_prev;
        rec.adjusted = true;
      }
    }
    rec.z_gap = gap;
    rec.alpha = alpha;
    Image out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.pixels[i] = (1.0 - alpha) * x.pixels[i] + alpha * z.pixels[i];
    }
    gap_prev = gap;
    alpha_prev = alpha;
    return out;
  });
}

SolverResult rpgd(const Projector& F, const LinearOperator& op, std::span<const double> y,
                  const ReconstructorA& A, const SolverConfig& cfg, const TraceOptions& opts) {
  return rpgd(F, op, y, A(y), cfg, opts);
}

double certify_fixed_point(const Projector& F, const LinearOperator& op,
                           std::span<const double> y, const Image& x_star, double gamma) {
  const Image g = F.apply(gradient_step(x_star, op, y, gamma));
  return distance(g.pixels, x_star.pixels) / (1.0 + norm2(x_star.pixels));
}

MinimizerReport certify_local_minimizer(const Image& x_star, const LinearOperator& op,
                                        std::span<const double> y, const SetSampler& sampler,
                                        double epsilon, std::size_t n_samples,
                                        std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ConfigError("local minimizer: epsilon must be positive");
  if (sampler.dimension() != x_star.size()) throw ConfigError("local minimizer: shape mismatch");
  Rng rng(seed);
  MinimizerReport report;
  report.residual = residual_of(x_star, op, y);
  const double margin = 1e-10 * (1.0 + report.residual);
  for (std::size_t i = 0; i < n_samples; ++i) {
    auto z = sampler.sample_near(x_star.pixels, epsilon, rng);
    if (!z) continue;
    ++report.samples_tested;
    Image zi(x_star.width, x_star.height, std::move(*z), x_star.pixel_size);
    const double r = residual_of(zi, op, y);
    if (r < report.best_sampled_residual) report.best_sampled_residual = r;
    if (r < report.residual - margin) {
      report.is_local_minimizer = false;
      report.witness = std::move(zi);
      return report;
    }
  }
  if (report.samples_tested == 0) throw ConfigError("local minimizer: sampler produced no points");
  return report;
}

}  // namespace pgdrecon

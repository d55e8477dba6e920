#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pgdrecon/classical.hpp"
#include "pgdrecon/linops.hpp"
#include "pgdrecon/projectors.hpp"

namespace pgdrecon {

/// The relaxation sequence {c_k}, k >= 1. A custom list repeats its last value.
class CSequence {
 public:
  static CSequence constant(double c);
  static CSequence custom(Vector values);

  double at(std::size_t k) const;
  bool is_constant() const { return values_.size() == 1 && constant_; }
  const Vector& values() const { return values_; }

 private:
  CSequence(Vector values, bool constant) : values_(std::move(values)), constant_(constant) {}
  Vector values_;
  bool constant_;
};

struct SolverConfig {
  double gamma = 0.0;
  double alpha0 = 1.0;
  CSequence c = CSequence::constant(0.99);
  std::size_t max_iter = 1000;
  /// Stop once ||x_{k+1} - x_k|| / (1 + ||x_k||) < stop_tol.
  double stop_tol = 1e-6;
  /// Iteration 0 of RPGD applies F to x_0 directly.
  bool skip_first_gradient = false;
  /// A step larger than this multiple of the first step is reported as divergence.
  double divergence_factor = 1e6;

  void validate() const;
};

/// 2 / (lambda_max + lambda_min)
double pgd_step_size(const SpectralBounds& bounds);
/// 0.9 * 2 / lambda_max
double relaxed_step_size(const SpectralBounds& bounds);

enum class SolverStatus { Converged, MaxIter, Diverged };
std::string to_string(SolverStatus s);

struct IterationRecord {
  std::size_t k = 0;
  double step_norm = 0.0;      // ||x_{k+1} - x_k||
  double z_gap = 0.0;          // ||z_k - x_k||
  double alpha = 1.0;
  double c = std::numeric_limits<double>::quiet_NaN();
  bool adjusted = false;       // alpha was shrunk at this iteration
  double data_residual = 0.0;  // ||H x_k - y||
  double snr_db = std::numeric_limits<double>::quiet_NaN();           // regressed, vs truth
  double sinogram_snr_db = std::numeric_limits<double>::quiet_NaN();  // H x_k vs clean data
};

struct SolverTrace {
  std::vector<IterationRecord> records;
  SolverStatus status = SolverStatus::MaxIter;

  std::size_t iterations() const { return records.size(); }
  double final_alpha() const { return records.empty() ? 1.0 : records.back().alpha; }
  std::string to_csv() const;
};

struct SolverResult {
  Image x;
  SolverTrace trace;
};

struct TraceOptions {
  const Image* ground_truth = nullptr;
  const Vector* clean_measurements = nullptr;
  /// Called with (k, x_k) before every update and once with the final iterate.
  std::function<void(std::size_t, const Image&)> observer;
};

/// x - gamma H^T (H x - y)
Image gradient_step(const Image& x, const LinearOperator& op, std::span<const double> y,
                    double gamma);

/// x_{k+1} = P(x_k - gamma H^T (H x_k - y))
SolverResult pgd(const Projector& projector, const LinearOperator& op, std::span<const double> y,
                 const SolverConfig& cfg, const Image& x0, const TraceOptions& opts = {});

/// x_{k+1} = (1 - alpha) x_k + alpha G(x_k) with fixed alpha in (0, 1).
SolverResult averaged_pgd(const Projector& projector, const LinearOperator& op,
                          std::span<const double> y, const SolverConfig& cfg, const Image& x0,
                          double alpha, const TraceOptions& opts = {});

/// Relaxed projected gradient descent started from x0 = A y.
SolverResult rpgd(const Projector& F, const LinearOperator& op, std::span<const double> y,
                  const ReconstructorA& A, const SolverConfig& cfg, const TraceOptions& opts = {});
/// Same iteration from an explicit x0 (for operators without a reconstructor).
SolverResult rpgd(const Projector& F, const LinearOperator& op, std::span<const double> y,
                  const Image& x0, const SolverConfig& cfg, const TraceOptions& opts = {});

/// ||G(x*) - x*|| / (1 + ||x*||) with G(x) = F(x - gamma H^T (H x - y)).
double certify_fixed_point(const Projector& F, const LinearOperator& op,
                           std::span<const double> y, const Image& x_star, double gamma);

struct MinimizerReport {
  bool is_local_minimizer = true;
  std::optional<Image> witness;
  double residual = 0.0;          // ||H x* - y||
  double best_sampled_residual = std::numeric_limits<double>::infinity();
  std::size_t samples_tested = 0;
};

/// Samples z in S within epsilon of x* and looks for a strictly smaller data residual.
/// An improvement counts only if it exceeds 1e-10 (1 + ||H x* - y||).
MinimizerReport certify_local_minimizer(const Image& x_star, const LinearOperator& op,
                                        std::span<const double> y, const SetSampler& sampler,
                                        double epsilon, std::size_t n_samples,
                                        std::uint64_t seed = 17);

}  // namespace pgdrecon

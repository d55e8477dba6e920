#include <cmath>
#include <random>

#include "doctest.h"
#include "instances.hpp"
#include "pgdrecon/solvers.hpp"

using namespace pgdrecon;
using namespace testutil;

namespace {

double objective(const LinearOperator& op, const Vector& y, const Vector& x) {
  Vector r = op.forward(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return 0.5 * dot(r, r);
}

// Box-constrained least squares by enumerating which bound (if any) each coordinate sits on.
double box_ls_oracle(const Eigen::MatrixXd& h, const Eigen::VectorXd& y, Vector* arg) {
  const Eigen::Index n = h.cols();
  std::size_t patterns = 1;
  for (Eigen::Index i = 0; i < n; ++i) patterns *= 3;
  double best = INFINITY;
  for (std::size_t p = 0; p < patterns; ++p) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> free;
    std::size_t q = p;
    for (Eigen::Index i = 0; i < n; ++i, q /= 3) {
      if (q % 3 == 0) free.push_back(i);
      else x[i] = q % 3 == 1 ? 0.0 : 1.0;
    }
    if (!free.empty()) {
      Eigen::MatrixXd hf(h.rows(), Eigen::Index(free.size()));
      for (std::size_t j = 0; j < free.size(); ++j) hf.col(Eigen::Index(j)) = h.col(free[j]);
      const Eigen::VectorXd sol = hf.colPivHouseholderQr().solve(y - h * x);
      bool ok = true;
      for (std::size_t j = 0; j < free.size(); ++j) {
        if (sol[Eigen::Index(j)] < 0.0 || sol[Eigen::Index(j)] > 1.0) ok = false;
        x[free[j]] = sol[Eigen::Index(j)];
      }
      if (!ok) continue;
    }
    const double f = 0.5 * (h * x - y).squaredNorm();
    if (f < best) {
      best = f;
      if (arg) *arg = from_eigen(x);
    }
  }
  return best;
}

SolverConfig config(double gamma, std::size_t max_iter, double tol) {
  SolverConfig c;
  c.gamma = gamma;
  c.max_iter = max_iter;
  c.stop_tol = tol;
  return c;
}

}  // namespace

TEST_CASE("gradient step") {
  DiagonalOperator h({2.0, 1.0});
  const Image x = gradient_step(Image(2, 1, Vector{1.0, 1.0}), h, Vector{0.0, 0.0}, 0.1);
  CHECK(x.pixels[0] == doctest::Approx(0.6));
  CHECK(x.pixels[1] == doctest::Approx(0.9));
  const Image y = gradient_step(Image(2, 1, Vector{3.0, -1.0}), IdentityOperator(2), Vector{0.5, 2.0}, 1.0);
  CHECK(y.pixels == Vector{0.5, 2.0});
  const Image z = gradient_step(Image(2, 1, Vector{0.25, 2.0}), h, Vector{0.5, 2.0}, 0.3);
  CHECK(z.pixels == Vector{0.25, 2.0});
}

TEST_CASE("step size rules") {
  SpectralBounds b;
  b.lambda_max = 4.0;
  b.lambda_min = 1.0;
  CHECK(pgd_step_size(b) == doctest::Approx(0.4));
  CHECK(relaxed_step_size(b) == doctest::Approx(0.45));
  CHECK_THROWS_AS(pgd_step_size(SpectralBounds{}), ConfigError);
}

TEST_CASE("c sequence") {
  CHECK(CSequence::constant(0.9).at(5) == 0.9);
  const auto s = CSequence::custom({1.2, 0.8, 0.5});
  CHECK(s.at(1) == 1.2);
  CHECK(s.at(3) == 0.5);
  CHECK(s.at(100) == 0.5);
  CHECK_THROWS_AS(CSequence::constant(1.0), ConfigError);
  CHECK_THROWS_AS(s.at(0), ConfigError);
}

TEST_CASE("pgd with identity operator and a box") {
  const Box box{Vector(3, 0.0), Vector(3, 1.0)};
  ConvexProjector p(box);
  const Vector y{-0.3, 0.4, 1.7};
  const auto res = pgd(p, IdentityOperator(3), y, config(1.0, 50, 1e-12), Image(3, 1));
  CHECK(res.x.pixels == Vector{0.0, 0.4, 1.0});
  CHECK(res.trace.status == SolverStatus::Converged);
  CHECK(res.trace.records[1].step_norm == 0.0);
}

TEST_CASE("pgd on an affine subspace matches the constrained normal equations") {
  std::mt19937_64 rng(9);
  const std::size_t n = 16, d = 5;
  const auto inst = contraction_instance(n, 31);  // well-conditioned H
  Eigen::MatrixXd b = random_orthogonal(Eigen::Index(n), rng).leftCols(Eigen::Index(d));
  const Vector off = random_vector(n, rng);
  AffineSubspace s;
  for (Eigen::Index j = 0; j < Eigen::Index(d); ++j) s.basis.push_back(from_eigen(b.col(j)));
  s.offset = off;
  // x = off + B t, minimizing ||H (off + B t) - y||.
  const Eigen::MatrixXd hb = inst.h * b;
  const Eigen::VectorXd t = hb.colPivHouseholderQr().solve(to_eigen(inst.y) - inst.h * to_eigen(off));
  const Eigen::VectorXd oracle = to_eigen(off) + b * t;
  const auto res = pgd(ConvexProjector(s), *inst.H, inst.y, config(inst.gamma(), 20000, 1e-15), Image(n, 1));
  CHECK((to_eigen(res.x.pixels) - oracle).norm() <= 1e-8 * (1.0 + oracle.norm()));
}

TEST_CASE("pgd on a box matches the enumeration oracle") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 5; ++t) {
    DenseOperator h(8, 5, random_vector(40, rng));
    const Vector y = random_vector(8, rng, 2.0);
    const Eigen::MatrixXd hm = dense_matrix(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm.transpose() * hm);
    const double g = 2.0 / (es.eigenvalues().maxCoeff() + es.eigenvalues().minCoeff());
    Vector xo;
    const double fo = box_ls_oracle(hm, to_eigen(y), &xo);
    const Box box{Vector(5, 0.0), Vector(5, 1.0)};
    const auto res = pgd(ConvexProjector(box), h, y, config(g, 100000, 1e-14), Image(5, 1));
    const double f = objective(h, y, res.x.pixels);
    CHECK(std::abs(f - fo) <= 1e-6 * std::max(fo, 1e-12) + 1e-14);
    // Fixed point of G, and a local minimizer by sampling.
    CHECK(certify_fixed_point(ConvexProjector(box), h, y, res.x, g) < 1e-6);
    UnionSetSampler sampler({box}, 5, 1);
    CHECK(certify_local_minimizer(res.x, h, y, sampler, 0.05, 2000).is_local_minimizer);
  }
}

TEST_CASE("pgd on a two-point set picks the nearer point") {
  const std::vector<ConvexSetSpec> pts = {PointSet{{Vector{0.0, 0.0}}}, PointSet{{Vector{3.0, 1.0}}}};
  UnionProjector p(pts);
  const auto res = pgd(p, IdentityOperator(2), Vector{2.0, 0.9}, config(1.0, 20, 1e-12), Image(2, 1));
  CHECK(res.x.pixels == Vector{3.0, 1.0});
}

TEST_CASE("pgd contraction under the first fixed-point theorem") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = contraction_instance(12, seed);
    const double q = inst.rate();
    REQUIRE(q < 1.0);
    std::mt19937_64 rng(seed + 100);
    Vector finals[2];
    for (int init = 0; init < 2; ++init) {
      const Image x0(12, 1, random_vector(12, rng, 5.0));
      std::vector<Vector> iterates;
      TraceOptions opts;
      opts.observer = [&](std::size_t, const Image& x) { iterates.push_back(x.pixels); };
      const auto res = pgd(*inst.P, *inst.H, inst.y, config(inst.gamma(), 5000, 1e-14), x0, opts);
      CHECK(res.trace.status == SolverStatus::Converged);
      for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
        const double e0 = distance(iterates[k], inst.x_star);
        const double e1 = distance(iterates[k + 1], inst.x_star);
        if (e0 > 1e-9) CHECK(e1 / e0 <= q + 1e-9);
      }
      finals[init] = res.x.pixels;
    }
    CHECK(distance(finals[0], finals[1]) < 1e-8);
  }
}

TEST_CASE("averaged pgd on a rank-deficient problem") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto inst = box_instance(6, 10, seed);
    const double g = 1.9 / inst.lambda_max;
    ConvexProjector p(inst.box);
    std::mt19937_64 rng(seed);
    for (int init = 0; init < 2; ++init) {
      const Image x0(10, 1, random_vector(10, rng));
      const auto res = averaged_pgd(p, *inst.H, inst.y, config(g, 50000, 1e-10), x0, 0.5);
      CHECK(res.trace.status == SolverStatus::Converged);
      CHECK(certify_fixed_point(p, *inst.H, inst.y, res.x, g) < 1e-6);
    }
    // Starting at a fixed point changes nothing.
    const auto res = averaged_pgd(p, *inst.H, inst.y, config(g, 50000, 1e-13), Image(10, 1), 0.5);
    const auto again = averaged_pgd(p, *inst.H, inst.y, config(g, 10, 1e-6), res.x, 0.5);
    CHECK(again.trace.iterations() == 1);
    CHECK(again.trace.records[0].step_norm < 1e-9);
  }
  CHECK_THROWS_AS(averaged_pgd(*identity_projector(), IdentityOperator(1), Vector{1.0},
                               config(1.0, 1, 1e-6), Image(1, 1), 1.0),
                  ConfigError);
}

TEST_CASE("rpgd alpha update") {
  // Gaps 1 then 2 with c = 0.99 and alpha_0 = 1 give alpha_1 = 0.495.
  int calls = 0;
  FunctionProjector f(
      [&](const Image& x) {
        // x_0 = 0 and x_1 = 1, so returning 1 then 3 gives gaps 1 then 2.
        Image z = x;
        z.pixels[0] = ++calls == 1 ? 1.0 : 3.0;
        return z;
      },
      "scripted");
  SolverConfig cfg = config(1.0, 2, 1e-12);
  cfg.skip_first_gradient = true;
  cfg.c = CSequence::constant(0.99);
  const auto res = rpgd(f, IdentityOperator(1), Vector{0.0}, Image(1, 1), cfg);
  REQUIRE(res.trace.iterations() == 2);
  CHECK(res.trace.records[0].alpha == 1.0);
  CHECK(res.trace.records[1].alpha == doctest::Approx(0.495));
  CHECK(res.trace.records[1].adjusted);
}

TEST_CASE("rpgd with the identity converges to y") {
  SolverConfig cfg = config(1.0, 100, 1e-12);
  const auto res = rpgd(*identity_projector(), IdentityOperator(3), Vector{1.0, -2.0, 0.5},
                        Image(3, 1, Vector{9.0, 9.0, 9.0}), cfg);
  CHECK(res.x.pixels == Vector{1.0, -2.0, 0.5});
  CHECK(res.trace.status == SolverStatus::Converged);
}

TEST_CASE("rpgd with a box projector reaches a certified minimizer") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto inst = box_instance(6, 10, seed + 10);
    ConvexProjector p(inst.box);
    SolverConfig cfg = config(1.9 / inst.lambda_max, 100000, 1e-12);
    cfg.c = CSequence::constant(0.99);
    const auto res = rpgd(p, *inst.H, inst.y, Image(10, 1), cfg);
    CHECK(res.trace.status == SolverStatus::Converged);
    CHECK(alpha_non_increasing_positive(res.trace));
    CHECK(residual_bound_violations(res.trace) == 0);
    if (res.trace.final_alpha() >= 0.01) {
      CHECK(certify_fixed_point(p, *inst.H, inst.y, res.x, cfg.gamma) < 1e-5);
      UnionSetSampler sampler({inst.box}, 10, 1);
      CHECK(certify_local_minimizer(res.x, *inst.H, inst.y, sampler, 0.05, 2000).is_local_minimizer);
    }
  }
}

TEST_CASE("rpgd converges for an adversarial operator") {
  const auto inst = box_instance(6, 10, 77);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto F = adversarial_operator(seed);
    SolverConfig cfg = config(1.0 / inst.lambda_max, 100000, 1e-8);
    cfg.c = CSequence::constant(0.9);
    const auto res = rpgd(*F, *inst.H, inst.y, Image(10, 1), cfg);
    CHECK(res.trace.status == SolverStatus::Converged);
    CHECK(alpha_non_increasing_positive(res.trace));
    CHECK(residual_bound_violations(res.trace) == 0);
  }
}

TEST_CASE("certify_fixed_point is the relative displacement") {
  DiagonalOperator h({2.0, 1.0});
  const Image x(2, 1, Vector{1.0, 1.0});
  const Vector y{0.0, 0.0};
  // G(x) = (0.6, 0.9); displacement (0.4, 0.1).
  const double d = std::hypot(0.4, 0.1) / (1.0 + std::sqrt(2.0));
  CHECK(certify_fixed_point(*identity_projector(), h, y, x, 0.1) == doctest::Approx(d));
}

TEST_CASE("local minimizer certificates") {
  SUBCASE("interior non-optimal point") {
    const auto inst = box_instance(6, 10, 5);
    UnionSetSampler sampler({inst.box}, 10, 1);
    const auto rep = certify_local_minimizer(Image(10, 1, Vector(10, 0.5)), *inst.H, inst.y,
                                             sampler, 0.05, 2000);
    CHECK_FALSE(rep.is_local_minimizer);
    REQUIRE(rep.witness);
    CHECK(objective(*inst.H, inst.y, rep.witness->pixels) <
          objective(*inst.H, inst.y, Vector(10, 0.5)));
  }
  SUBCASE("best point of a point set") {
    const std::vector<ConvexSetSpec> pts = {PointSet{{Vector{0.0, 0.0}}}, PointSet{{Vector{1.0, 1.0}}},
                                            PointSet{{Vector{2.0, -1.0}}}};
    const Vector y{1.8, -0.7};
    Vector best;
    double bd = INFINITY;
    for (const auto& s : pts) {
      const Vector p = std::get<PointSet>(s).points[0];
      if (distance(p, y) < bd) {
        bd = distance(p, y);
        best = p;
      }
    }
    UnionSetSampler sampler(pts, 2, 1);
    CHECK(certify_local_minimizer(Image(2, 1, best), IdentityOperator(2), y, sampler, 5.0, 500)
              .is_local_minimizer);
    CHECK_FALSE(certify_local_minimizer(Image(2, 1, Vector{0.0, 0.0}), IdentityOperator(2), y,
                                        sampler, 5.0, 500)
                    .is_local_minimizer);
  }
}

TEST_CASE("divergence is recorded") {
  SolverConfig cfg = config(3.0, 200, 1e-12);
  const auto res = pgd(*identity_projector(), DiagonalOperator({1.0}), Vector{1.0}, cfg, Image(1, 1));
  CHECK(res.trace.status == SolverStatus::Diverged);
}

TEST_CASE("trace csv") {
  SolverConfig cfg = config(1.0, 3, 1e-12);
  const auto res = rpgd(*identity_projector(), IdentityOperator(1), Vector{1.0}, Image(1, 1), cfg);
  const std::string csv = res.trace.to_csv();
  CHECK(csv.rfind("k,step_norm,z_gap,alpha,c,adjusted,data_residual,snr_db,sinogram_snr_db\n", 0) == 0);
}

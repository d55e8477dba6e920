#include <cmath>
#include <random>

#include "doctest.h"
#include "pgdrecon/classical.hpp"
#include "pgdrecon/metrics.hpp"
#include "pgdrecon/phantoms.hpp"
#include "pgdrecon/tv.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace pgdrecon;
using testutil::random_vector;

namespace {

double run_tv(const LinearOperator& op, const Vector& y, std::size_t w, std::size_t h, double lambda,
              Image* out = nullptr) {
  TvConfig cfg;
  cfg.lambda = lambda;
  cfg.n_iter = 3000;
  const auto res = tv_admm(op, y, cfg, Image(w, h));
  if (out) *out = res.x;
  return tv_objective(op, y, res.x, lambda);
}

}  // namespace

TEST_CASE("worked two-pixel case") {
  IdentityOperator id(2);
  const Vector y{0.0, 2.0};
  Image x;
  const double obj = run_tv(id, y, 2, 1, 1.0, &x);
  CHECK(x.pixels[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(x.pixels[1] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(obj == doctest::Approx(1.0).epsilon(1e-6));
  const double oracle = testutil::tv_grid_oracle(Eigen::MatrixXd::Identity(2, 2), testutil::to_eigen(y), 2, 1, 1.0, 2.0);
  CHECK(std::abs(obj - oracle) <= 1e-3);
}

TEST_CASE("tiny problems match the grid oracle") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 3; ++t) {
    for (auto [w, h] : {std::pair<std::size_t, std::size_t>{2, 1}, {2, 2}}) {
      const std::size_t n = w * h;
      DenseOperator op(n + 1, n, random_vector((n + 1) * n, rng));
      const Vector y = random_vector(n + 1, rng, 2.0);
      const double lambda = 0.3 + 0.4 * t;
      const double obj = run_tv(op, y, w, h, lambda);
      const double oracle = testutil::tv_grid_oracle(testutil::dense_matrix(op), testutil::to_eigen(y), w, h, lambda, 6.0);
      CHECK(std::abs(obj - oracle) <= 1e-3);
    }
  }
}

TEST_CASE("vanishing regularization returns the clamped data") {
  IdentityOperator id(6);
  const Vector y{0.5, -1.0, 2.0, 0.1, -0.2, 3.0};
  TvConfig cfg;
  cfg.lambda = 1e-8;
  const auto res = tv_admm(id, y, cfg, Image(3, 2));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(res.x.pixels[i] - std::max(y[i], 0.0)) < 1e-4);
}

TEST_CASE("huge regularization returns the best nonnegative constant") {
  IdentityOperator id(6);
  // The constant c >= 0 minimizing sum (c - y_i)^2 is max(mean(y), 0).
  for (const Vector& y : {Vector{0.5, -1.0, 2.0, 0.1, -0.2, 3.0}, Vector{-0.5, -1.0, 2.0, 0.1, -0.2, -3.0}}) {
    double mean = 0.0;
    for (double v : y) mean += v / double(y.size());
    TvConfig cfg;
    cfg.lambda = 1e6;
    // With the default rho = lambda the data term moves x by O(1 / rho) per iteration.
    cfg.rho = 1.0;
    cfg.n_iter = 300;
    const auto res = tv_admm(id, y, cfg, Image(3, 2));
    for (double v : res.x.pixels) CHECK(std::abs(v - std::max(mean, 0.0)) < 1e-3);
  }
}

TEST_CASE("output is nonnegative and improves on the FBP start") {
  auto op = std::make_shared<RadonOperator>(32, 32, 1.0, parallel_geometry(32, 32, 1.0, 45));
  for (std::uint64_t s = 0; s < 3; ++s) {
    PhantomSpec spec;
    spec.seed = 50 + s;
    const Image x = generate_phantom(spec);
    const Sinogram y = op->project(x);
    const Image x0 = ReconstructorA(ReconstructorA::Kind::FBP, op)(y);
    for (double lambda : {1.0, 100.0}) {
      TvConfig cfg;
      cfg.lambda = lambda;
      cfg.n_iter = 30;
      const auto res = tv_admm(*op, y.values, cfg, x0);
      for (double v : res.x.pixels) CHECK(v >= 0.0);
      CHECK(res.objective.back() <= tv_objective(*op, y.values, x0, lambda));
      CHECK(res.objective.size() == 30);
    }
  }
}

TEST_CASE("lambda grid") {
  IdentityOperator id(3);
  const Vector y{1.0, -4.0, 2.0};
  const Vector g = tv_lambda_grid(id, y, 20);
  REQUIRE(g.size() == 20);
  CHECK(g.front() == doctest::Approx(4e-4));
  CHECK(g.back() == doctest::Approx(40.0));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] / g[i - 1] == doctest::Approx(g[1] / g[0]));
  CHECK(tv_lambda_grid(id, y, 1)[0] == doctest::Approx(4e-4));
}

TEST_CASE("grid search picks the best lambda and beats FBP") {
  auto op = std::make_shared<RadonOperator>(32, 32, 1.0, parallel_geometry(32, 32, 1.0, 45));
  PhantomSpec spec;
  spec.seed = 77;
  const Image x = generate_phantom(spec);
  const Sinogram y = op->project(x);
  const Image x0 = ReconstructorA(ReconstructorA::Kind::FBP, op)(y);
  TvConfig base;
  base.n_iter = 40;
  const auto res = lambda_grid_search(*op, y.values, x, 8, x0, base);
  REQUIRE(res.regressed_snr_db.size() == 8);
  for (double s : res.regressed_snr_db) CHECK(res.regressed_snr_db[res.best_index] >= s);
  CHECK(res.best_lambda == res.lambdas[res.best_index]);
  CHECK(regressed_snr(res.x, x).snr_db == doctest::Approx(res.regressed_snr_db[res.best_index]));
  CHECK(res.regressed_snr_db[res.best_index] > regressed_snr(x0, x).snr_db);

  const auto one = lambda_grid_search(*op, y.values, x, 1, x0, base);
  TvConfig cfg = base;
  cfg.lambda = one.lambdas[0];
  CHECK(one.x.pixels == tv_admm(*op, y.values, cfg, x0).x.pixels);
}

TEST_CASE("config validation") {
  TvConfig cfg;
  cfg.lambda = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TvConfig{};
  cfg.n_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(TvConfig{}.effective_rho() == 1.0);
  CHECK_THROWS_AS(tv_admm(IdentityOperator(3), Vector{1.0, 2.0}, TvConfig{}, Image(3, 1)), ConfigError);
}

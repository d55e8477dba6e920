#include <cmath>
#include <random>

#include "doctest.h"
#include "pgdrecon/projectors.hpp"
#include "test_util.hpp"

using namespace pgdrecon;
using testutil::random_vector;

namespace {

Image img2(double a, double b) { return Image(2, 1, Vector{a, b}); }

std::vector<ConvexSetSpec> two_points(double gap) {
  return {PointSet{{Vector{0.0, 0.0}}}, PointSet{{Vector{gap, 0.0}}}};
}

}  // namespace

TEST_CASE("box clamps") {
  const Box box{Vector(3, 0.0), Vector(3, 1.0)};
  const Vector p = project_convex(box, Vector{-0.5, 0.3, 2.0});
  CHECK(p == Vector{0.0, 0.3, 1.0});
}

TEST_CASE("l2 ball scales radially") {
  const Vector p = project_convex(L2Ball{{}, 1.0}, Vector{0.0, 4.0, 0.0});
  CHECK(p[1] == doctest::Approx(1.0));
  const Vector q = project_convex(L2Ball{{}, 1.0}, Vector{0.1, 0.2});
  CHECK(q == Vector{0.1, 0.2});
  const Vector c = project_convex(L2Ball{Vector{1.0, 1.0}, 2.0}, Vector{1.0, 5.0});
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(3.0));
}

TEST_CASE("affine subspace onto the diagonal") {
  const double r = 1.0 / std::sqrt(2.0);
  const Vector p = project_convex(AffineSubspace{{Vector{r, r}}, {}}, Vector{2.0, 0.0});
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(1.0));
  const Vector q = project_convex(AffineSubspace{{Vector{r, r}}, Vector{0.0, 1.0}}, Vector{0.0, 0.0});
  CHECK(q[0] == doctest::Approx(-0.5));
  CHECK(q[1] == doctest::Approx(0.5));
}

TEST_CASE("union picks the nearest member with lowest-index ties") {
  const auto pts = two_points(2.0);
  std::size_t chosen = 9;
  CHECK(project_union(pts, Vector{0.4, 0.3}, &chosen) == Vector{0.0, 0.0});
  CHECK(chosen == 0);
  CHECK(project_union(pts, Vector{1.6, -1.0}, &chosen) == Vector{2.0, 0.0});
  CHECK(chosen == 1);
  CHECK(project_union(pts, Vector{1.0, 5.0}, &chosen) == Vector{0.0, 0.0});
  CHECK(chosen == 0);
  // A single point set with two points breaks ties the same way.
  const PointSet ps{{Vector{1.0, 0.0}, Vector{-1.0, 0.0}}};
  CHECK(project_convex(ps, Vector{0.0, 3.0}) == Vector{1.0, 0.0});
}

TEST_CASE("union of two parallel segments matches brute force") {
  const std::vector<ConvexSetSpec> segs = {Box{Vector{0.0, 0.0}, Vector{1.0, 0.0}},
                                           Box{Vector{0.0, 1.0}, Vector{1.0, 1.0}}};
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_vector(2, rng, 1.5);
    Vector best;
    double bd = INFINITY;
    for (double yline : {0.0, 1.0}) {
      const Vector c{std::clamp(x[0], 0.0, 1.0), yline};
      const double d = distance(c, x);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    CHECK(project_union(segs, x) == best);
  }
}

TEST_CASE("analytic projectors are idempotent") {
  std::mt19937_64 rng(4);
  const std::size_t n = 6;
  Vector b1 = random_vector(n, rng), b2 = random_vector(n, rng);
  // Orthonormalize with Gram-Schmidt.
  const double n1 = norm2(b1);
  for (auto& v : b1) v /= n1;
  axpy(-dot(b1, b2), b1, b2);
  const double n2 = norm2(b2);
  for (auto& v : b2) v /= n2;
  const std::vector<ConvexSetSpec> specs = {
      Box{Vector(n, -0.5), Vector(n, 0.7)}, L2Ball{random_vector(n, rng), 0.8},
      AffineSubspace{{b1, b2}, random_vector(n, rng)}, PointSet{{random_vector(n, rng)}}};
  for (const auto& s : specs) {
    validate(s, n);
    ConvexProjector p(s);
    CHECK(check_idempotence(p, n, 1, 200, 1e-10));
    CHECK(estimate_lipschitz(p, n, 1, 500, 3.0) <= 1.0 + 1e-12);
    const auto back = convex_set_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
  }
  UnionProjector u(two_points(2.0));
  CHECK(check_idempotence(u, 2, 1, 200, 1e-10));
}

TEST_CASE("idempotence check rejects a shift") {
  FunctionProjector shift(
      [](const Image& x) {
        Image y = x;
        for (auto& v : y.pixels) v += 1.0;
        return y;
      },
      "shift");
  CHECK_FALSE(check_idempotence(shift, 4, 1, 10, 1e-6));
}

TEST_CASE("lipschitz estimates") {
  CHECK(estimate_lipschitz(*identity_projector(), 5, 1, 50, 1.0) == 1.0);
  FunctionProjector twice(
      [](const Image& x) {
        Image y = x;
        for (auto& v : y.pixels) v *= 2.0;
        return y;
      },
      "twice");
  CHECK(estimate_lipschitz(twice, 5, 1, 50, 1.0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate(Box{Vector{1.0}, Vector{0.0}}, 1), ConfigError);
  CHECK_THROWS_AS(validate(L2Ball{{}, -1.0}, 3), ConfigError);
  CHECK_THROWS_AS(validate(AffineSubspace{{Vector{1.0, 1.0}}, {}}, 2), ConfigError);
  CHECK_THROWS_AS(validate(PointSet{}, 2), ConfigError);
  CHECK_THROWS_AS(convex_set_from_json({{"kind", "torus"}}), ConfigError);
}

TEST_CASE("member gap") {
  const auto gap = min_member_gap(two_points(3.0), 2);
  REQUIRE(gap);
  CHECK(*gap == doctest::Approx(3.0));
  CHECK_FALSE(min_member_gap({Box{Vector(2, 0.0), Vector(2, 1.0)}, PointSet{{Vector{5.0, 5.0}}}}, 2));
  CHECK(*default_local_epsilon(two_points(3.0), 2) == doctest::Approx(0.75));
  CHECK_FALSE(default_local_epsilon({PointSet{{Vector{1.0, 1.0}}}}, 2));
  // The default radius is small enough for the union projector to pass.
  UnionProjector p(two_points(3.0));
  UnionSetSampler s(two_points(3.0), 2, 1);
  CHECK(check_local_condition(p, s, *default_local_epsilon(two_points(3.0), 2), 2000).satisfied);
}

TEST_CASE("local condition") {
  SUBCASE("box projector") {
    const Box box{Vector(4, 0.0), Vector(4, 1.0)};
    ConvexProjector p(box);
    UnionSetSampler s({box}, 4, 1);
    const auto rep = check_local_condition(p, s, 0.5, 10000);
    CHECK(rep.satisfied);
    CHECK(rep.samples_tested == 10000);
  }
  SUBCASE("two points with small epsilon") {
    UnionProjector p(two_points(2.0));
    UnionSetSampler s(two_points(2.0), 2, 1);
    CHECK(check_local_condition(p, s, 0.9, 10000).satisfied);
  }
  SUBCASE("biased projector") {
    const Box box{Vector(3, 0.0), Vector(3, 1.0)};
    FunctionProjector biased(
        [box](const Image& x) {
          Image y = project_convex(box, x);
          for (auto& v : y.pixels) v += 0.1;
          return y;
        },
        "biased box");
    UnionSetSampler s({box}, 3, 1);
    const auto rep = check_local_condition(biased, s, 1.0, 10000);
    CHECK_FALSE(rep.satisfied);
    REQUIRE(rep.witness);
    CHECK(rep.witness->inner_product > 0.0);
  }
}

TEST_CASE("global condition") {
  SUBCASE("box") {
    const Box box{Vector(3, -1.0), Vector(3, 1.0)};
    UnionSetSampler s({box}, 3, 1);
    CHECK(check_global_condition(ConvexProjector(box), s, 10000).satisfied);
  }
  SUBCASE("affine") {
    const double r = 1.0 / std::sqrt(2.0);
    const AffineSubspace a{{Vector{r, r, 0.0}}, Vector{0.0, 0.0, 1.0}};
    UnionSetSampler s({a}, 3, 1);
    CHECK(check_global_condition(ConvexProjector(a), s, 10000).satisfied);
  }
  SUBCASE("two-point set fails") {
    UnionProjector p(two_points(2.0));
    UnionSetSampler s(two_points(2.0), 2, 1);
    const auto rep = check_global_condition(p, s, 10000);
    CHECK_FALSE(rep.satisfied);
    REQUIRE(rep.witness);
    CHECK(rep.witness->inner_product > 0.0);
  }
  SUBCASE("explicit midpoint witness") {
    // x just left of the midpoint projects to a; z = b gives a positive inner product.
    UnionProjector p(two_points(2.0));
    const Image px = p(img2(0.9, 0.0));
    CHECK(px.pixels == Vector{0.0, 0.0});
    const double ip = (2.0 - 0.0) * (0.9 - 0.0) + 0.0;
    CHECK(ip > 0.0);
  }
}

TEST_CASE("samplers stay in the set") {
  const std::vector<ConvexSetSpec> m = {Box{Vector(3, 0.0), Vector(3, 1.0)},
                                        L2Ball{Vector{5.0, 5.0, 5.0}, 0.5}};
  UnionSetSampler s(m, 3, 1);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector z = s.sample(rng);
    CHECK(distance(project_union(m, z), z) < 1e-12);
    const auto near = s.sample_near(Vector{0.5, 0.5, 0.5}, 0.2, rng);
    REQUIRE(near);
    CHECK(distance(*near, Vector{0.5, 0.5, 0.5}) <= 0.2 + 1e-12);
    CHECK(distance(project_union(m, *near), *near) < 1e-12);
  }
}

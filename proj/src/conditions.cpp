#include <cmath>

#include "pgdrecon/projectors.hpp"

namespace pgdrecon {

namespace {

// Uniform draw from the l2 ball of the given radius around `center`.
Vector uniform_in_ball(std::span<const double> center, double radius, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = center.size();
  Vector dir(n);
  for (auto& d : dir) d = normal(rng);
  const double len = norm2(dir);
  const double r = radius * std::pow(unit(rng), 1.0 / double(n));
  Vector out(center.begin(), center.end());
  for (std::size_t i = 0; i < n; ++i) out[i] += r * dir[i] / len;
  return out;
}

double bcast(const Vector& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

Vector sample_member(const ConvexSetSpec& spec, std::size_t n, double extent, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (const auto* b = std::get_if<Box>(&spec)) {
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = bcast(b->lo, i);
      const double hi = bcast(b->hi, i);
      out[i] = lo + (hi - lo) * unit(rng);
    }
    return out;
  }
  if (const auto* b = std::get_if<L2Ball>(&spec)) {
    Vector c(n, 0.0);
    if (!b->center.empty()) {
      for (std::size_t i = 0; i < n; ++i) c[i] = bcast(b->center, i);
    }
    return uniform_in_ball(c, b->radius, rng);
  }
  if (const auto* a = std::get_if<AffineSubspace>(&spec)) {
    Vector out(n, 0.0);
    if (!a->offset.empty()) {
      for (std::size_t i = 0; i < n; ++i) out[i] = bcast(a->offset, i);
    }
    for (const auto& v : a->basis) axpy(extent * (2.0 * unit(rng) - 1.0), v, out);
    return out;
  }
  const auto& pts = std::get<PointSet>(spec).points;
  return pts[std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng)];
}

Image draw_test_point(const SetSampler& sampler, const SamplingConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = sampler.dimension();
  Vector x(n);
  if (unit(rng) < cfg.uniform_fraction) {
    for (auto& v : x) v = cfg.box_lo + (cfg.box_hi - cfg.box_lo) * unit(rng);
  } else {
    std::normal_distribution<double> noise(0.0, cfg.gaussian_sigma);
    x = sampler.sample(rng);
    for (auto& v : x) v += noise(rng);
  }
  return Image(sampler.width(), sampler.height(), std::move(x));
}

// A violation needs a clearly positive inner product, not rounding noise.
bool violates(double ip, double scale) { return ip > 1e-10 * scale + 1e-14; }

template <typename DrawZ>
ConditionReport run_check(const Projector& p, const SetSampler& sampler, std::size_t n_samples,
                          const SamplingConfig& cfg, double epsilon, DrawZ&& draw_z) {
  Rng rng(cfg.seed);
  ConditionReport report;
  report.epsilon = epsilon;
  for (std::size_t i = 0; i < n_samples; ++i) {
    Image x = draw_test_point(sampler, cfg, rng);
    const Image px = p.apply(x);
    if (!px.same_shape(x)) throw ConfigError("condition check: projector changed the shape");
    const std::optional<Vector> z = draw_z(px, rng);
    if (!z) continue;
    ++report.samples_tested;
    Vector zd(z->size());
    Vector xd(x.size());
    for (std::size_t k = 0; k < zd.size(); ++k) {
      zd[k] = (*z)[k] - px.pixels[k];
      xd[k] = x.pixels[k] - px.pixels[k];
    }
    const double ip = dot(zd, xd);
    if (violates(ip, norm2(zd) * norm2(xd))) {
      report.satisfied = false;
      Image zi(x.width, x.height, *z);
      report.witness = ConditionWitness{std::move(x), std::move(zi), ip};
      return report;
    }
  }
  if (report.samples_tested == 0) {
    throw ConfigError("condition check: sampler produced no points");
  }
  return report;
}

}  // namespace

UnionSetSampler::UnionSetSampler(std::vector<ConvexSetSpec> members, std::size_t width,
                                 std::size_t height, double extent)
    : SetSampler(width, height), members_(std::move(members)), extent_(extent) {
  if (members_.empty()) throw ConfigError("sampler: no members");
  for (const auto& m : members_) validate(m, dimension());
}

Vector UnionSetSampler::sample(Rng& rng) const {
  const auto k = std::uniform_int_distribution<std::size_t>(0, members_.size() - 1)(rng);
  return sample_member(members_[k], dimension(), extent_, rng);
}

std::optional<Vector> UnionSetSampler::sample_near(std::span<const double> center, double radius,
                                                   Rng& rng) const {
  constexpr int kAttempts = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const auto k = std::uniform_int_distribution<std::size_t>(0, members_.size() - 1)(rng);
    if (const auto* pts = std::get_if<PointSet>(&members_[k])) {
      std::vector<const Vector*> near;
      for (const auto& q : pts->points) {
        if (distance(q, center) <= radius) near.push_back(&q);
      }
      if (near.empty()) continue;
      return *near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
    }
    Vector u = uniform_in_ball(center, radius, rng);
    Vector z = project_convex(members_[k], u);
    if (distance(z, center) <= radius) return z;
  }
  return std::nullopt;
}

ConditionReport check_local_condition(const Projector& p, const SetSampler& sampler,
                                      double epsilon, std::size_t n_samples,
                                      const SamplingConfig& cfg) {
  if (!(epsilon > 0.0)) throw ConfigError("local condition: epsilon must be positive");
  return run_check(p, sampler, n_samples, cfg, epsilon, [&](const Image& px, Rng& rng) {
    return sampler.sample_near(px.pixels, epsilon, rng);
  });
}

ConditionReport check_global_condition(const Projector& p, const SetSampler& sampler,
                                       std::size_t n_samples, const SamplingConfig& cfg) {
  return run_check(p, sampler, n_samples, cfg, INFINITY, [&](const Image&, Rng& rng) {
    return std::optional<Vector>(sampler.sample(rng));
  });
}

double estimate_lipschitz(const Projector& p, std::size_t width, std::size_t height,
                          std::size_t n_pairs, double radius, std::uint64_t seed,
                          const Image* center) {
  if (n_pairs == 0) throw ConfigError("lipschitz: need at least one pair");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t n = width * height;
  double best = 0.0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    Image x(width, height);
    for (std::size_t k = 0; k < n; ++k) x.pixels[k] = (center ? center->pixels[k] : 0.0) + radius * unit(rng);
    Image z = x;
    const double step = radius * std::abs(unit(rng)) + 1e-3 * radius;
    Vector dir(n);
    for (auto& d : dir) d = unit(rng);
    const double len = norm2(dir);
    for (std::size_t k = 0; k < n; ++k) z.pixels[k] += step * dir[k] / len;
    const double dxz = distance(x.pixels, z.pixels);
    if (dxz == 0.0) continue;
    best = std::max(best, distance(p.apply(x).pixels, p.apply(z).pixels) / dxz);
  }
  return best;
}

bool check_idempotence(const Projector& p, std::size_t width, std::size_t height,
                       std::size_t n_samples, double tol, std::uint64_t seed, double radius,
                       const Image* center) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Image x(width, height);
    for (std::size_t k = 0; k < x.size(); ++k) {
      x.pixels[k] = (center ? center->pixels[k] : 0.0) + radius * unit(rng);
    }
    const Image px = p.apply(x);
    const Image ppx = p.apply(px);
    if (distance(ppx.pixels, px.pixels) > tol * (1.0 + norm2(px.pixels))) return false;
  }
  return true;
}

double idempotence_defect(const Projector& p, const std::vector<Image>& inputs) {
  if (inputs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& v : inputs) {
    const Image pv = p.apply(v);
    const Image ppv = p.apply(pv);
    const double denom = norm2(pv.pixels);
    total += denom > 0.0 ? distance(ppv.pixels, pv.pixels) / denom : 0.0;
  }
  return total / double(inputs.size());
}

}  // namespace pgdrecon

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pgdrecon/image.hpp"

namespace pgdrecon {

/// Nonlinear image-to-image operator. Analytic instances are idempotent; learned
/// ones are only approximately so.
class Projector {
 public:
  virtual ~Projector() = default;
  virtual Image apply(const Image& x) const = 0;
  virtual std::string describe() const = 0;
  Image operator()(const Image& x) const { return apply(x); }
};

// Closed convex sets in R^N. Vectors of length 1 broadcast to any N.

/// Componentwise lo <= x <= hi.
struct Box {
  Vector lo;
  Vector hi;
};

struct L2Ball {
  Vector center;  // empty means the origin
  double radius = 1.0;
};

/// offset + span(basis). Basis vectors must be orthonormal.
struct AffineSubspace {
  std::vector<Vector> basis;
  Vector offset;  // empty means the origin
};

/// A finite set of points. Convex only with a single point; several points make a
/// union of singletons.
struct PointSet {
  std::vector<Vector> points;
};

using ConvexSetSpec = std::variant<Box, L2Ball, AffineSubspace, PointSet>;

/// Throws ConfigError if the spec is malformed for dimension n.
void validate(const ConvexSetSpec& spec, std::size_t n);
/// Nearest point of the set in l2 (ties in a PointSet go to the lowest index).
Vector project_convex(const ConvexSetSpec& spec, std::span<const double> x);
Image project_convex(const ConvexSetSpec& spec, const Image& x);
/// Projects onto every member and keeps the closest; ties go to the lowest index.
Vector project_union(const std::vector<ConvexSetSpec>& members, std::span<const double> x,
                     std::size_t* chosen = nullptr);
Image project_union(const std::vector<ConvexSetSpec>& members, const Image& x);

nlohmann::json to_json(const ConvexSetSpec& spec);
ConvexSetSpec convex_set_from_json(const nlohmann::json& j);
std::string describe(const ConvexSetSpec& spec);

/// Smallest pairwise distance between union members when it is computable (members
/// that are points or point sets); nullopt otherwise.
std::optional<double> min_member_gap(const std::vector<ConvexSetSpec>& members, std::size_t n);

/// Default radius for local condition checks: a quarter of the member gap.
std::optional<double> default_local_epsilon(const std::vector<ConvexSetSpec>& members,
                                            std::size_t n);

class ConvexProjector final : public Projector {
 public:
  explicit ConvexProjector(ConvexSetSpec spec) : spec_(std::move(spec)) {}
  Image apply(const Image& x) const override { return project_convex(spec_, x); }
  std::string describe() const override { return pgdrecon::describe(spec_); }
  const ConvexSetSpec& spec() const { return spec_; }

 private:
  ConvexSetSpec spec_;
};

class UnionProjector final : public Projector {
 public:
  explicit UnionProjector(std::vector<ConvexSetSpec> members);
  Image apply(const Image& x) const override { return project_union(members_, x); }
  std::string describe() const override;
  const std::vector<ConvexSetSpec>& members() const { return members_; }

 private:
  std::vector<ConvexSetSpec> members_;
};

/// Wraps an arbitrary function; used for identity, linear maps, and test operators.
class FunctionProjector final : public Projector {
 public:
  using Fn = std::function<Image(const Image&)>;
  FunctionProjector(Fn fn, std::string descriptor)
      : fn_(std::move(fn)), descriptor_(std::move(descriptor)) {}
  Image apply(const Image& x) const override { return fn_(x); }
  std::string describe() const override { return descriptor_; }

 private:
  Fn fn_;
  std::string descriptor_;
};

std::shared_ptr<Projector> identity_projector();

// ---- condition checkers -------------------------------------------------------

using Rng = std::mt19937_64;

/// Draws points of a set S for the condition checkers. Images have the sampler's shape.
class SetSampler {
 public:
  SetSampler(std::size_t width, std::size_t height) : width_(width), height_(height) {}
  virtual ~SetSampler() = default;

  /// A point of S within `radius` of `center`, or nullopt if none was found.
  virtual std::optional<Vector> sample_near(std::span<const double> center, double radius,
                                            Rng& rng) const = 0;
  /// Any point of S.
  virtual Vector sample(Rng& rng) const = 0;

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t dimension() const { return width_ * height_; }

 private:
  std::size_t width_;
  std::size_t height_;
};

/// Samples a union of convex sets (a single member is the convex case). `extent` bounds
/// draws along unbounded directions (affine subspaces).
class UnionSetSampler final : public SetSampler {
 public:
  UnionSetSampler(std::vector<ConvexSetSpec> members, std::size_t width, std::size_t height,
                  double extent = 2.0);
  std::optional<Vector> sample_near(std::span<const double> center, double radius,
                                    Rng& rng) const override;
  Vector sample(Rng& rng) const override;

 private:
  std::vector<ConvexSetSpec> members_;
  double extent_;
};

/// Test points x: uniform on [box_lo, box_hi]^N with probability uniform_fraction,
/// otherwise a point of S plus isotropic Gaussian noise of std gaussian_sigma.
struct SamplingConfig {
  double box_lo = -2.0;
  double box_hi = 2.0;
  double gaussian_sigma = 0.5;
  double uniform_fraction = 0.5;
  std::uint64_t seed = 1234;
};

struct ConditionWitness {
  Image x;
  Image z;
  double inner_product = 0.0;
};

struct ConditionReport {
  bool satisfied = true;
  std::optional<ConditionWitness> witness;
  std::size_t samples_tested = 0;
  double epsilon = 0.0;  // +inf for the global condition
};

/// <z - P x, x - P x> <= 0 for z in S within epsilon of P x.
ConditionReport check_local_condition(const Projector& p, const SetSampler& sampler,
                                      double epsilon, std::size_t n_samples,
                                      const SamplingConfig& cfg = {});
/// <z - P x, x - P x> <= 0 for all z in S.
ConditionReport check_global_condition(const Projector& p, const SetSampler& sampler,
                                       std::size_t n_samples, const SamplingConfig& cfg = {});

/// Max of ||P x - P z|| / ||x - z|| over sampled pairs; a lower bound on the Lipschitz
/// constant. x is drawn uniformly within `radius` of `center` (origin when omitted).
double estimate_lipschitz(const Projector& p, std::size_t width, std::size_t height,
                          std::size_t n_pairs, double radius, std::uint64_t seed = 99,
                          const Image* center = nullptr);

/// True iff ||P(P x) - P x|| <= tol (1 + ||P x||) on every sample.
bool check_idempotence(const Projector& p, std::size_t width, std::size_t height,
                       std::size_t n_samples, double tol, std::uint64_t seed = 5,
                       double radius = 2.0, const Image* center = nullptr);

/// Mean of ||P(P v) - P v|| / ||P v|| over the given inputs.
double idempotence_defect(const Projector& p, const std::vector<Image>& inputs);

}  // namespace pgdrecon

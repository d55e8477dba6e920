#include "pgdrecon/projectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pgdrecon {

namespace {

double bcast(const Vector& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

bool broadcastable(const Vector& v, std::size_t n) { return v.size() == 1 || v.size() == n; }

double origin_or(const Vector& v, std::size_t i) { return v.empty() ? 0.0 : bcast(v, i); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

Vector json_vector(const nlohmann::json& j) {
  if (j.is_number()) return Vector{j.get<double>()};
  return j.get<Vector>();
}

std::string vec_str(const Vector& v) {
  std::ostringstream os;
  if (v.size() == 1) {
    os << v[0];
    return os.str();
  }
  os << '(';
  for (std::size_t i = 0; i < v.size() && i < 4; ++i) os << (i ? "," : "") << v[i];
  if (v.size() > 4) os << ",...";
  os << ')';
  return os.str();
}

}  // namespace

void validate(const ConvexSetSpec& spec, std::size_t n) {
  std::visit(
      overloaded{
          [n](const Box& b) {
            if (!broadcastable(b.lo, n) || !broadcastable(b.hi, n)) {
              throw ConfigError("box: bounds must have length 1 or " + std::to_string(n));
            }
            for (std::size_t i = 0; i < n; ++i) {
              if (!(bcast(b.lo, i) <= bcast(b.hi, i))) throw ConfigError("box: lo > hi");
            }
          },
          [n](const L2Ball& b) {
            if (!(b.radius > 0.0) || !std::isfinite(b.radius)) {
              throw ConfigError("l2 ball: radius must be positive");
            }
            if (!b.center.empty() && !broadcastable(b.center, n)) {
              throw ConfigError("l2 ball: center has wrong length");
            }
          },
          [n](const AffineSubspace& a) {
            if (!a.offset.empty() && !broadcastable(a.offset, n)) {
              throw ConfigError("affine subspace: offset has wrong length");
            }
            for (std::size_t i = 0; i < a.basis.size(); ++i) {
              if (a.basis[i].size() != n) throw ConfigError("affine subspace: basis length");
              for (std::size_t j = 0; j <= i; ++j) {
                const double expect = i == j ? 1.0 : 0.0;
                if (std::abs(dot(a.basis[i], a.basis[j]) - expect) > 1e-9) {
                  throw ConfigError("affine subspace: basis is not orthonormal");
                }
              }
            }
          },
          [n](const PointSet& p) {
            if (p.points.empty()) throw ConfigError("point set: no points");
            for (const auto& q : p.points) {
              if (q.size() != n) throw ConfigError("point set: point has wrong length");
            }
          },
      },
      spec);
}

Vector project_convex(const ConvexSetSpec& spec, std::span<const double> x) {
  const std::size_t n = x.size();
  validate(spec, n);
  return std::visit(
      overloaded{
          [&](const Box& b) {
            Vector out(n);
            for (std::size_t i = 0; i < n; ++i) {
              out[i] = std::clamp(x[i], bcast(b.lo, i), bcast(b.hi, i));
            }
            return out;
          },
          [&](const L2Ball& b) {
            Vector d(n);
            for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - origin_or(b.center, i);
            const double len = norm2(d);
            if (len <= b.radius) return Vector(x.begin(), x.end());
            Vector out(n);
            const double s = b.radius / len;
            for (std::size_t i = 0; i < n; ++i) out[i] = origin_or(b.center, i) + s * d[i];
            return out;
          },
          [&](const AffineSubspace& a) {
            Vector d(n);
            for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - origin_or(a.offset, i);
            Vector out(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = origin_or(a.offset, i);
            for (const auto& b : a.basis) axpy(dot(b, d), b, out);
            return out;
          },
          [&](const PointSet& p) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < p.points.size(); ++k) {
              const double d = distance(p.points[k], x);
              if (d < best_d) {
                best_d = d;
                best = k;
              }
            }
            return p.points[best];
          },
      },
      spec);
}

Image project_convex(const ConvexSetSpec& spec, const Image& x) {
  return Image(x.width, x.height, project_convex(spec, std::span<const double>(x.pixels)),
               x.pixel_size);
}

Vector project_union(const std::vector<ConvexSetSpec>& members, std::span<const double> x,
                     std::size_t* chosen) {
  if (members.empty()) throw ConfigError("union: no members");
  Vector best;
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    Vector p = project_convex(members[k], x);
    const double d = distance(p, x);
    if (d < best_d) {
      best_d = d;
      best = std::move(p);
      best_k = k;
    }
  }
  if (chosen) *chosen = best_k;
  return best;
}

Image project_union(const std::vector<ConvexSetSpec>& members, const Image& x) {
  return Image(x.width, x.height, project_union(members, std::span<const double>(x.pixels)),
               x.pixel_size);
}

nlohmann::json to_json(const ConvexSetSpec& spec) {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [](const Box& b) { return json{{"kind", "box"}, {"lo", b.lo}, {"hi", b.hi}}; },
          [](const L2Ball& b) {
            return json{{"kind", "l2ball"}, {"center", b.center}, {"radius", b.radius}};
          },
          [](const AffineSubspace& a) {
            return json{{"kind", "affine"}, {"basis", a.basis}, {"offset", a.offset}};
          },
          [](const PointSet& p) { return json{{"kind", "points"}, {"points", p.points}}; },
      },
      spec);
}

ConvexSetSpec convex_set_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "box") return Box{json_vector(j.at("lo")), json_vector(j.at("hi"))};
    if (kind == "l2ball") {
      return L2Ball{j.contains("center") ? json_vector(j.at("center")) : Vector{},
                    j.at("radius").get<double>()};
    }
    if (kind == "affine") {
      return AffineSubspace{j.at("basis").get<std::vector<Vector>>(),
                            j.contains("offset") ? json_vector(j.at("offset")) : Vector{}};
    }
    if (kind == "points") return PointSet{j.at("points").get<std::vector<Vector>>()};
    throw ConfigError("unknown convex set kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("convex set spec: ") + e.what());
  }
}

std::string describe(const ConvexSetSpec& spec) {
  return std::visit(
      overloaded{
          [](const Box& b) { return "Box[" + vec_str(b.lo) + ", " + vec_str(b.hi) + "]"; },
          [](const L2Ball& b) {
            std::ostringstream os;
            os << "L2Ball(center " << (b.center.empty() ? "0" : vec_str(b.center))
               << ", radius " << b.radius << ")";
            return os.str();
          },
          [](const AffineSubspace& a) {
            return "AffineSubspace(dim " + std::to_string(a.basis.size()) + ")";
          },
          [](const PointSet& p) {
            return "PointSet(" + std::to_string(p.points.size()) + " points)";
          },
      },
      spec);
}

std::optional<double> min_member_gap(const std::vector<ConvexSetSpec>& members, std::size_t n) {
  std::vector<Vector> atoms;
  for (const auto& m : members) {
    if (const auto* p = std::get_if<PointSet>(&m)) {
      atoms.insert(atoms.end(), p->points.begin(), p->points.end());
    } else if (const auto* b = std::get_if<Box>(&m)) {
      Vector point(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (bcast(b->lo, i) != bcast(b->hi, i)) return std::nullopt;
        point[i] = bcast(b->lo, i);
      }
      atoms.push_back(std::move(point));
    } else {
      return std::nullopt;
    }
  }
  if (atoms.size() < 2) return std::nullopt;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    for (std::size_t j = i + 1; j < atoms.size(); ++j) gap = std::min(gap, distance(atoms[i], atoms[j]));
  }
  return gap;
}

std::optional<double> default_local_epsilon(const std::vector<ConvexSetSpec>& members,
                                            std::size_t n) {
  const auto gap = min_member_gap(members, n);
  if (!gap) return std::nullopt;
  return 0.25 * *gap;
}

UnionProjector::UnionProjector(std::vector<ConvexSetSpec> members) : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("union: no members");
}

std::string UnionProjector::describe() const {
  std::string s = "Union{";
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (k) s += ", ";
    s += pgdrecon::describe(members_[k]);
  }
  return s + "}";
}

std::shared_ptr<Projector> identity_projector() {
  return std::make_shared<FunctionProjector>([](const Image& x) { return x; }, "Identity");
}

}  // namespace pgdrecon

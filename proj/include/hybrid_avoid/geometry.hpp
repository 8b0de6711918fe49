#pragma once

// Projection and reflection operators, and signed membership margins for the
// regions the controller is built from (balls, lines, half-spaces, cones,
// half-cones and helmets).

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>

#include <Eigen/Dense>

#include "hybrid_avoid/errors.hpp"

namespace hybrid_avoid {

// Positions, velocities and axes. The dimension is a runtime value (n >= 2 for
// the controller, but the operators below work for any n >= 1).
using VecN = Eigen::VectorXd;

inline bool all_finite(const VecN& v) { return v.allFinite(); }

inline void require_finite(const VecN& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

inline void require_same_dim(const VecN& a, const VecN& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "dimension " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

inline VecN make_vec(std::initializer_list<double> entries) {
  VecN v(static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (double e : entries) v[i++] = e;
  require_finite(v, "vector");
  return v;
}

namespace detail {
inline double checked_norm2(const VecN& z, const VecN& x) {
  require_same_dim(z, x);
  const double n2 = z.squaredNorm();
  if (!(n2 > 0.0)) throw Error(ErrorCode::ZeroDirection, "direction vector has zero norm");
  return n2;
}
}  // namespace detail

// (z^T x / |z|^2) z : projection of x onto the line spanned by z.
inline VecN par_proj_apply(const VecN& z, const VecN& x) {
  const double n2 = detail::checked_norm2(z, x);
  return (z.dot(x) / n2) * z;
}

// Projection of x onto the hyperplane orthogonal to z.
inline VecN orth_proj_apply(const VecN& z, const VecN& x) { return x - par_proj_apply(z, x); }

// Householder reflection of x about the hyperplane orthogonal to z.
inline VecN reflect_apply(const VecN& z, const VecN& x) { return x - 2.0 * par_proj_apply(z, x); }

// cos^2(theta) * orth_proj - sin^2(theta) * par_proj. Its quadratic form is the
// cone function: negative inside the cone of half-aperture theta about z.
inline VecN pi_theta_apply(const VecN& z, double theta, const VecN& x) {
  const VecN par = par_proj_apply(z, x);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return c * c * (x - par) - s * s * par;
}

// x^T pi_theta(z) x without forming the vector.
inline double cone_quadratic(const VecN& z, double theta, const VecN& x) {
  const double n2 = detail::checked_norm2(z, x);
  const double along2 = z.dot(x) * z.dot(x) / n2;
  const double c = std::cos(theta);
  return c * c * (x.squaredNorm() - along2) - (1.0 - c * c) * along2;
}

// arccos with the argument clamped into [-1, 1].
inline double safe_acos(double v) { return std::acos(std::clamp(v, -1.0, 1.0)); }

inline constexpr double kUnitTolerance = 1e-9;

// Great-circle distance between two unit vectors, in [0, pi].
inline double geodesic_dist(const VecN& u, const VecN& v) {
  require_same_dim(u, v);
  if (std::abs(u.norm() - 1.0) > kUnitTolerance || std::abs(v.norm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::NotUnit, "geodesic distance needs unit vectors");
  }
  return safe_acos(u.dot(v));
}

// Angle between two nonzero vectors.
inline double angle_between(const VecN& a, const VecN& b) {
  require_same_dim(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroDirection, "angle with zero vector");
  return safe_acos(a.dot(b) / (na * nb));
}

// Euclidean distance from x to the line through c with direction v.
inline double dist_to_line(const VecN& x, const VecN& c, const VecN& v) {
  require_same_dim(x, c);
  return orth_proj_apply(v, x - c).norm();
}

// ---------------------------------------------------------------------------
// Regions

// Comparison selector of the half-space and cone families.
enum class Cmp { Eq, Lt, Gt, Le, Ge };
// Half selector of the half-cone family (which side of the plane through the apex).
enum class Side { Lt, Gt, Le, Ge };

struct Ball {
  VecN center;
  double radius = 0.0;
};

struct Line {
  VecN point;
  VecN direction;
};

// {x : v^T (x - c) cmp 0}
struct HalfSpace {
  VecN point;
  VecN normal;
  Cmp cmp = Cmp::Le;
};

// {x : (x - c)^T pi_theta(v) (x - c) cmp 0}
struct Cone {
  VecN apex;
  VecN axis;
  double theta = 0.0;
  Cmp cmp = Cmp::Le;
};

struct HalfCone {
  Cone cone;
  Side side = Side::Le;
};

// Closed shell eps_in <= |x - c| <= eps_out with the ball B_{|mu c|}(mu c)
// carved out.
struct Helmet {
  VecN center;
  double eps_in = 0.0;
  double eps_out = 0.0;
  double mu = 0.0;
};

using Region = std::variant<Ball, Line, HalfSpace, Cone, HalfCone, Helmet>;

namespace detail {

inline void require_region_vec(const VecN& v, const char* what) {
  if (v.size() == 0 || !v.allFinite()) {
    throw Error(ErrorCode::MalformedRegion, std::string(what) + " must be a finite nonempty vector");
  }
}

inline void require_region_dir(const VecN& v, const char* what) {
  require_region_vec(v, what);
  if (!(v.squaredNorm() > 0.0)) throw Error(ErrorCode::MalformedRegion, std::string(what) + " must be nonzero");
}

inline void require_region_dims(const VecN& a, const VecN& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::MalformedRegion, "region vectors differ in dimension");
}

inline double apply_cmp(Cmp cmp, double le_margin) {
  switch (cmp) {
    case Cmp::Eq: return std::abs(le_margin);
    case Cmp::Lt:
    case Cmp::Le: return le_margin;
    case Cmp::Gt:
    case Cmp::Ge: return -le_margin;
  }
  return le_margin;
}

inline double apply_side(Side side, double le_margin) {
  return (side == Side::Lt || side == Side::Le) ? le_margin : -le_margin;
}

inline double margin_of(const Ball& b, const VecN& x) {
  require_region_vec(b.center, "ball center");
  if (!(b.radius >= 0.0) || !std::isfinite(b.radius)) throw Error(ErrorCode::MalformedRegion, "ball radius");
  require_same_dim(b.center, x);
  return (x - b.center).norm() - b.radius;
}

inline double margin_of(const Line& l, const VecN& x) {
  require_region_vec(l.point, "line point");
  require_region_dir(l.direction, "line direction");
  require_region_dims(l.point, l.direction);
  require_same_dim(l.point, x);
  return dist_to_line(x, l.point, l.direction);
}

inline double halfspace_le(const VecN& point, const VecN& normal, const VecN& x) {
  return normal.dot(x - point) / normal.norm();
}

inline double margin_of(const HalfSpace& p, const VecN& x) {
  require_region_vec(p.point, "half-space point");
  require_region_dir(p.normal, "half-space normal");
  require_region_dims(p.point, p.normal);
  require_same_dim(p.point, x);
  return apply_cmp(p.cmp, halfspace_le(p.point, p.normal, x));
}

inline double margin_of(const Cone& k, const VecN& x) {
  require_region_vec(k.apex, "cone apex");
  require_region_dir(k.axis, "cone axis");
  require_region_dims(k.apex, k.axis);
  if (!std::isfinite(k.theta)) throw Error(ErrorCode::MalformedRegion, "cone angle");
  require_same_dim(k.apex, x);
  return apply_cmp(k.cmp, cone_quadratic(k.axis, k.theta, x - k.apex));
}

inline double margin_of(const HalfCone& h, const VecN& x) {
  const double cone = margin_of(h.cone, x);
  const double side = apply_side(h.side, halfspace_le(h.cone.apex, h.cone.axis, x));
  return std::max(cone, side);
}

inline double margin_of(const Helmet& h, const VecN& x) {
  require_region_vec(h.center, "helmet center");
  if (!(h.eps_in > 0.0) || !(h.eps_out >= h.eps_in) || !std::isfinite(h.eps_out)) {
    throw Error(ErrorCode::MalformedRegion, "helmet needs 0 < eps <= eps'");
  }
  if (!(h.mu > 0.0) || !std::isfinite(h.mu)) throw Error(ErrorCode::MalformedRegion, "helmet needs mu > 0");
  require_same_dim(h.center, x);
  const double r = (x - h.center).norm();
  const double carve = h.mu * h.center.norm() - (x - h.mu * h.center).norm();
  return std::max({h.eps_in - r, r - h.eps_out, carve});
}

}  // namespace detail

// Continuous signed margin: <= 0 exactly on the closed variant of the region.
inline double region_margin(const Region& r, const VecN& x) {
  return std::visit([&](const auto& reg) { return detail::margin_of(reg, x); }, r);
}

inline bool region_contains(const Region& r, const VecN& x, double tol = 0.0) {
  if (!(tol >= 0.0)) throw Error(ErrorCode::MalformedRegion, "membership tolerance must be >= 0");
  return region_margin(r, x) <= tol;
}

}  // namespace hybrid_avoid

#pragma once

// Controller parameterization: derived bounds (mu_min, theta_max, psi_max),
// the auxiliary attractors p_1 / p_-1, and the gatekeeper that certifies a
// raw parameter set.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybrid_avoid/errors.hpp"
#include "hybrid_avoid/geometry.hpp"

namespace hybrid_avoid {

// Discrete controller mode: 0 = stabilization, +-1 = avoidance towards p_{+-1}.
enum class Mode : int { Minus = -1, Stabilize = 0, Plus = 1 };

constexpr int to_int(Mode m) { return static_cast<int>(m); }

inline Mode mode_from_int(int m) {
  switch (m) {
    case -1: return Mode::Minus;
    case 0: return Mode::Stabilize;
    case 1: return Mode::Plus;
    default: throw Error(ErrorCode::BadConfig, "mode must be -1, 0 or 1, got " + std::to_string(m));
  }
}

constexpr bool is_avoidance(Mode m) { return m != Mode::Stabilize; }

struct ObstacleSpec {
  VecN c;
  double epsilon = 0.0;

  double center_norm() const { return c.norm(); }
};

struct Gains {
  double k_minus = 1.0;
  double k0 = 1.0;
  double k_plus = 1.0;

  double operator[](Mode m) const {
    switch (m) {
      case Mode::Minus: return k_minus;
      case Mode::Stabilize: return k0;
      case Mode::Plus: return k_plus;
    }
    return k0;
  }
};

struct RawParams {
  ObstacleSpec obstacle;
  double eps_s = 0.0;
  double eps_h = 0.0;
  double mu = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  double psi_bar = 0.0;
  Gains gains;
  std::optional<VecN> w_hint;
};

// One violated interval constraint: actual value and the open interval (lo, hi)
// it should have been in.
struct Violation {
  std::string name;
  double actual = 0.0;
  double lo = 0.0;
  double hi = 0.0;

  std::string describe() const {
    std::ostringstream os;
    os.precision(8);
    os << name << " = " << actual << " not in (" << lo << ", " << hi << ")";
    return os.str();
  }
};

class ValidationFailure : public Error {
 public:
  explicit ValidationFailure(std::vector<Violation> violations)
      : Error(ErrorCode::ValidationFailure, summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& v) {
    std::string s = std::to_string(v.size()) + " violated constraint(s)";
    for (const auto& x : v) s += "; " + x.describe();
    return s;
  }

  std::vector<Violation> violations_;
};

// Upper end of the eps_h interval, sqrt(eps |c|).
inline double eps_h_upper(const ObstacleSpec& obs) { return std::sqrt(obs.epsilon * obs.center_norm()); }

namespace detail {

inline void require_obstacle(const ObstacleSpec& obs) {
  require_finite(obs.c, "obstacle center");
  const double nc = obs.center_norm();
  if (!(nc > 0.0)) throw Error(ErrorCode::ZeroCenter, "obstacle center is the origin");
  if (!(obs.epsilon > 0.0) || !(nc > obs.epsilon)) {
    throw Error(ErrorCode::InternalInfeasibility, "obstacle needs |c| > eps > 0");
  }
}

inline double mu_min_unchecked(const ObstacleSpec& obs, double eps_h) {
  const double nc = obs.center_norm();
  const double e = obs.epsilon;
  return 0.5 * (eps_h * eps_h + nc * nc - 2.0 * e * nc) / (nc * nc - e * nc);
}

inline double theta_max_ratio(const ObstacleSpec& obs, double eps_h, double mu) {
  const double nc = obs.center_norm();
  return (eps_h * eps_h + nc * nc * (1.0 - 2.0 * mu)) / (2.0 * obs.epsilon * nc * (1.0 - mu));
}

}  // namespace detail

inline double mu_min(const ObstacleSpec& obs, double eps_h) {
  detail::require_obstacle(obs);
  if (!(eps_h > obs.epsilon) || !(eps_h < eps_h_upper(obs))) {
    throw Error(ErrorCode::InfeasibleEpsH, "eps_h must lie in (eps, sqrt(eps |c|))");
  }
  return detail::mu_min_unchecked(obs, eps_h);
}

// Defined on the closed interval [mu_min, 1/2]; mu = mu_min gives 0.
inline double theta_max(const ObstacleSpec& obs, double eps_h, double mu) {
  const double lo = mu_min(obs, eps_h);
  if (!(mu >= lo - 1e-15) || !(mu <= 0.5)) throw Error(ErrorCode::InfeasibleMu, "mu must lie in (mu_min, 1/2)");
  const double ratio = detail::theta_max_ratio(obs, eps_h, mu);
  if (!(std::abs(ratio) <= 1.0 + 1e-12)) {
    throw Error(ErrorCode::InternalInfeasibility, "theta_max arccos argument outside [-1, 1]");
  }
  return safe_acos(ratio);
}

inline double psi_max(double theta) {
  if (!(theta > 0.0) || !(theta < std::numbers::pi / 2)) {
    throw Error(ErrorCode::InfeasibleTheta, "theta must lie in (0, pi/2)");
  }
  return std::min(theta, std::numbers::pi / 2 - theta);
}

// First standard basis vector not parallel to c.
inline VecN default_w_hint(const VecN& c) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    VecN e = VecN::Zero(c.size());
    e[i] = 1.0;
    if (orth_proj_apply(c, e).norm() > 1e-9) return e;
  }
  throw Error(ErrorCode::DegenerateHint, "no basis vector transverse to c (dimension < 2?)");
}

// p_1 = c - |c| (cos(theta) c_hat + sin(theta) w_hat), with w_hat the unit
// component of the hint orthogonal to c. Lies on the origin-facing nappe of the
// cone about c with half-aperture theta, at distance |c| from c.
inline VecN construct_p1(const ObstacleSpec& obs, double theta, const VecN& w_hint) {
  require_finite(obs.c, "obstacle center");
  require_finite(w_hint, "w_hint");
  require_same_dim(obs.c, w_hint);
  const double nc = obs.center_norm();
  if (!(nc > 0.0)) throw Error(ErrorCode::ZeroCenter, "obstacle center is the origin");
  const VecN w_perp = orth_proj_apply(obs.c, w_hint);
  if (!(w_perp.norm() > 1e-9 * w_hint.norm())) throw Error(ErrorCode::DegenerateHint, "w_hint is parallel to c");
  const VecN c_hat = obs.c / nc;
  const VecN w_hat = w_perp / w_perp.norm();
  VecN p1 = obs.c - nc * (std::cos(theta) * c_hat + std::sin(theta) * w_hat);

  const VecN d = p1 - obs.c;
  if (std::abs(cone_quadratic(obs.c, theta, d)) > 1e-9 * std::max(1.0, nc * nc) ||
      obs.c.dot(d) > 1e-12 * nc * nc) {
    throw Error(ErrorCode::InternalInfeasibility, "constructed p_1 is off the cone");
  }
  return p1;
}

// Certified parameter set. Only obtainable through validate() (or unchecked()
// for deliberate misconfiguration experiments); immutable afterwards.
class ValidatedParams {
 public:
  const RawParams& raw() const { return raw_; }
  const ObstacleSpec& obstacle() const { return raw_.obstacle; }
  const VecN& c() const { return raw_.obstacle.c; }
  double eps() const { return raw_.obstacle.epsilon; }
  double eps_s() const { return raw_.eps_s; }
  double eps_h() const { return raw_.eps_h; }
  double mu() const { return raw_.mu; }
  double theta() const { return raw_.theta; }
  double psi() const { return raw_.psi; }
  double psi_bar() const { return raw_.psi_bar; }
  double gain(Mode m) const { return raw_.gains[m]; }
  const VecN& w_hint() const { return w_hint_; }
  Eigen::Index dim() const { return raw_.obstacle.c.size(); }

  double mu_min() const { return mu_min_; }
  double theta_max() const { return theta_max_; }
  double psi_max() const { return psi_max_; }

  const VecN& p1() const { return p1_; }
  const VecN& p_minus1() const { return p_minus1_; }
  // Attractor of mode m; the origin for m = 0.
  const VecN& p(Mode m) const {
    switch (m) {
      case Mode::Plus: return p1_;
      case Mode::Minus: return p_minus1_;
      case Mode::Stabilize: return origin_;
    }
    return origin_;
  }

  // True when produced by validate(); false for unchecked() instances.
  bool certified() const { return certified_; }

  friend ValidatedParams validate(const RawParams& raw);

  // Builds the derived quantities without enforcing the interval constraints.
  // Throws only when p_1 itself cannot be constructed.
  static ValidatedParams unchecked(const RawParams& raw) {
    ValidatedParams p;
    p.raw_ = raw;
    p.fill_derived();
    p.certified_ = false;
    return p;
  }

 private:
  ValidatedParams() = default;

  void fill_derived() {
    const auto& obs = raw_.obstacle;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    const double nc = obs.center_norm();
    mu_min_ = (nc > obs.epsilon && obs.epsilon > 0.0) ? detail::mu_min_unchecked(obs, raw_.eps_h) : nan;
    const double ratio = detail::theta_max_ratio(obs, raw_.eps_h, raw_.mu);
    theta_max_ = std::abs(ratio) <= 1.0 + 1e-12 ? safe_acos(ratio) : nan;
    psi_max_ = std::min(raw_.theta, std::numbers::pi / 2 - raw_.theta);
    w_hint_ = raw_.w_hint ? *raw_.w_hint : default_w_hint(obs.c);
    p1_ = construct_p1(obs, raw_.theta, w_hint_);
    p_minus1_ = -reflect_apply(obs.c, p1_);
    origin_ = VecN::Zero(obs.c.size());
  }

  RawParams raw_;
  VecN w_hint_;
  double mu_min_ = 0.0;
  double theta_max_ = 0.0;
  double psi_max_ = 0.0;
  VecN p1_;
  VecN p_minus1_;
  VecN origin_;
  bool certified_ = false;
};

// One interval constraint on the tunable parameters, evaluated.
struct ConstraintCheck {
  std::string name;
  double actual = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool ok = false;
};

// The tunable-parameter constraints in dependency order. Assumes a valid
// obstacle (|c| > eps > 0).
inline std::vector<ConstraintCheck> interval_checks(const RawParams& raw) {
  std::vector<ConstraintCheck> out;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto& obs = raw.obstacle;
  auto open = [&](std::string name, double v, double lo, double hi) {
    out.push_back({std::move(name), v, lo, hi, v > lo && v < hi});
  };

  open("eps_h", raw.eps_h, obs.epsilon, eps_h_upper(obs));
  open("eps_s", raw.eps_s, obs.epsilon, raw.eps_h);
  open("mu", raw.mu, detail::mu_min_unchecked(obs, raw.eps_h), 0.5);

  const double ratio = detail::theta_max_ratio(obs, raw.eps_h, raw.mu);
  if (std::abs(ratio) <= 1.0 + 1e-12) {
    open("theta", raw.theta, 0.0, safe_acos(ratio));
  } else {
    out.push_back({"theta_max_argument", ratio, -1.0, 1.0, false});
  }

  const double pmax = std::min(raw.theta, std::numbers::pi / 2 - raw.theta);
  open("psi", raw.psi, 0.0, pmax);
  open("psi_bar", raw.psi_bar, raw.psi, pmax);

  if (raw.w_hint) {
    const double transverse = orth_proj_apply(obs.c, *raw.w_hint).norm();
    out.push_back({"w_hint_transverse", transverse, 1e-9 * raw.w_hint->norm(), inf,
                   transverse > 1e-9 * raw.w_hint->norm()});
  }
  return out;
}

// Checks every constraint, in the order eps_h, eps_s, mu, theta, psi, psi_bar,
// and reports all violations at once.
inline ValidatedParams validate(const RawParams& raw) {
  std::vector<Violation> bad;
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& obs = raw.obstacle;

  if (obs.c.size() < 2) {
    bad.push_back({"dimension", static_cast<double>(obs.c.size()), 1.0, inf});
    throw ValidationFailure(std::move(bad));
  }
  const bool finite = obs.c.allFinite() && std::isfinite(obs.epsilon) && std::isfinite(raw.eps_s) &&
                      std::isfinite(raw.eps_h) && std::isfinite(raw.mu) && std::isfinite(raw.theta) &&
                      std::isfinite(raw.psi) && std::isfinite(raw.psi_bar) && std::isfinite(raw.gains.k_minus) &&
                      std::isfinite(raw.gains.k0) && std::isfinite(raw.gains.k_plus) &&
                      (!raw.w_hint || (raw.w_hint->allFinite() && raw.w_hint->size() == obs.c.size()));
  if (!finite) {
    bad.push_back({"finite_inputs", nan, nan, nan});
    throw ValidationFailure(std::move(bad));
  }

  const double nc = obs.center_norm();
  if (!(obs.epsilon > 0.0)) bad.push_back({"eps", obs.epsilon, 0.0, nc});
  if (!(nc > obs.epsilon)) bad.push_back({"|c|", nc, obs.epsilon, inf});
  if (!(raw.gains.k_minus > 0.0)) bad.push_back({"k_-1", raw.gains.k_minus, 0.0, inf});
  if (!(raw.gains.k0 > 0.0)) bad.push_back({"k_0", raw.gains.k0, 0.0, inf});
  if (!(raw.gains.k_plus > 0.0)) bad.push_back({"k_1", raw.gains.k_plus, 0.0, inf});
  const bool obstacle_ok = obs.epsilon > 0.0 && nc > obs.epsilon;
  if (!obstacle_ok) throw ValidationFailure(std::move(bad));

  for (const auto& k : interval_checks(raw))
    if (!k.ok) bad.push_back({k.name, k.actual, k.lo, k.hi});
  if (!bad.empty()) throw ValidationFailure(std::move(bad));

  ValidatedParams p;
  p.raw_ = raw;
  p.fill_derived();
  p.certified_ = true;

  // p_-1 must sit on the same punctured cone nappe as p_1.
  const VecN d = p.p_minus1_ - obs.c;
  if (std::abs(cone_quadratic(obs.c, raw.theta, d)) > 1e-9 * std::max(1.0, nc * nc) ||
      obs.c.dot(d) > 1e-12 * nc * nc || !(d.norm() > 0.0)) {
    throw Error(ErrorCode::InternalInfeasibility, "p_-1 is off the cone");
  }
  return p;
}

}  // namespace hybrid_avoid

#include "pminv/prior.hpp"

#include <boost/math/distributions/normal.hpp>

namespace pminv {

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Mass of the untruncated law on the support, in the standardized coordinate.
double truncation_mass(double lo, double hi) {
  // Use the upper tail when both ends are positive so the difference stays accurate.
  if (lo > 0.0) return std_normal_cdf(-lo) - std_normal_cdf(-hi);
  return std_normal_cdf(hi) - std_normal_cdf(lo);
}

double truncated_std_normal_quantile(double lo, double hi, double u) {
  const double plo = std_normal_cdf(lo);
  const double phi = std_normal_cdf(hi);
  const double q = plo + u * (phi - plo);
  if (q <= 0.0) return lo;
  if (q >= 1.0) return hi;
  return std::clamp(boost::math::quantile(kStdNormal, q), lo, hi);
}

// d/dx log density for the unnormalized family.
double score(const ScalarPrior& s, double x) {
  switch (s.family) {
    case ScalarPrior::Family::Normal: return -(x - s.location) / (s.scale * s.scale);
    case ScalarPrior::Family::LogNormal:
      return -(std::log(x) - s.location) / (s.scale * s.scale * x) - 1.0 / x;
    default: return 0.0;
  }
}

}  // namespace

double ScalarPrior::log_density(double x) const {
  if (!support.contains(x)) return kNegInf;
  switch (family) {
    case Family::PointMass: return x == location ? 0.0 : kNegInf;
    case Family::Uniform: return -std::log(support.width());
    case Family::Normal: {
      const double z = (x - location) / scale;
      const double mass = truncation_mass((support.lower - location) / scale, (support.upper - location) / scale);
      return -0.5 * kLog2Pi - std::log(scale) - 0.5 * z * z - std::log(mass);
    }
    case Family::LogNormal: {
      if (!(x > 0.0)) return kNegInf;
      const double z = (std::log(x) - location) / scale;
      const double lo = support.lower > 0.0 ? (std::log(support.lower) - location) / scale : kNegInf;
      const double hi = (std::log(support.upper) - location) / scale;
      return -0.5 * kLog2Pi - std::log(scale * x) - 0.5 * z * z - std::log(truncation_mass(lo, hi));
    }
  }
  return kNegInf;
}

double ScalarPrior::sample(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  switch (family) {
    case Family::PointMass: return location;
    case Family::Uniform: return support.lower + support.width() * unif(rng);
    case Family::Normal: {
      const double z = truncated_std_normal_quantile((support.lower - location) / scale,
                                                     (support.upper - location) / scale, unif(rng));
      return std::clamp(location + scale * z, support.lower, support.upper);
    }
    case Family::LogNormal: {
      const double lo = support.lower > 0.0 ? (std::log(support.lower) - location) / scale : -40.0;
      const double hi = (std::log(support.upper) - location) / scale;
      const double z = truncated_std_normal_quantile(lo, hi, unif(rng));
      return std::clamp(std::exp(location + scale * z), support.lower, support.upper);
    }
  }
  return location;
}

double OmegaPrior::log_density(const Vector3d& w) const {
  if (point) return w == value ? 0.0 : kNegInf;
  if ((w.array() <= 0.0).any() || std::abs(w.sum() - 1.0) > 1e-12) return kNegInf;
  double lp = std::lgamma(alpha.sum());
  for (int k = 0; k < 3; ++k) lp += (alpha[k] - 1.0) * std::log(w[k]) - std::lgamma(alpha[k]);
  return lp;
}

Vector3d OmegaPrior::sample(Rng& rng) const {
  if (point) return value;
  Vector3d g;
  for (int k = 0; k < 3; ++k) {
    std::gamma_distribution<double> gam(alpha[k], 1.0);
    g[k] = gam(rng);
  }
  return g / g.sum();
}

PriorSpec PriorSpec::defaults(const ParamBounds& bounds, bool nu_uniform) {
  PriorSpec s;
  s.bounds = bounds;
  for (int i = static_cast<int>(Field::gamma10); i <= static_cast<int>(Field::gamma31); ++i)
    s.scalar[i] = ScalarPrior::normal(0.0, 1.0, bounds.interval[i]);
  for (Field f : {Field::mu1, Field::mu3}) s[f] = ScalarPrior::normal(0.0, 1.0, bounds[f]);
  for (Field f : {Field::lambda1, Field::kappa1, Field::sigma1, Field::sigma2, Field::sigma3})
    s[f] = ScalarPrior::lognormal(std::log(0.3), 0.7, bounds[f]);
  s[Field::tau3] = ScalarPrior::uniform(bounds[Field::tau3]);
  s[Field::nu] = nu_uniform ? ScalarPrior::uniform(bounds[Field::nu]) : ScalarPrior::point(5.0);
  // A degenerate bound pins the field regardless of family.
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i)
    if (bounds.interval[i].degenerate() && !s.scalar[i].is_point())
      s.scalar[i] = ScalarPrior::point(bounds.interval[i].lower);
  return s;
}

PriorSpec covering_prior(const ParamBounds& bounds) {
  PriorSpec s = PriorSpec::defaults(bounds, true);
  if (bounds[Field::omega1].degenerate() && bounds[Field::omega2].degenerate() && bounds[Field::omega3].degenerate()) {
    s.omega.point = true;
    s.omega.value = Vector3d(bounds[Field::omega1].lower, bounds[Field::omega2].lower, bounds[Field::omega3].lower);
  }
  return s;
}

PriorSpec PriorSpec::point_mass_at(const ModelParams& theta) {
  PriorSpec s;
  s.bounds = ParamBounds::point(theta);
  s.omega.point = true;
  s.omega.value = theta.omega;
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i)
    s.scalar[i] = ScalarPrior::point(field_value(theta, field_at(i)));
  return s;
}

ParamSpace PriorSpec::space() const {
  std::array<bool, kNumFields> free{};
  ModelParams anchor;
  anchor.omega = omega.point ? omega.value : Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3);
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i) {
    const ScalarPrior& sp = scalar[i];
    free[i] = !sp.is_point();
    field_ref(anchor, field_at(i)) = sp.is_point() ? sp.location : 0.5 * (sp.support.lower + sp.support.upper);
  }
  ParamBounds b = bounds;
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i) b.interval[i] = scalar[i].support;
  return ParamSpace(b, !omega.point, free, anchor);
}

void PriorSpec::validate() const {
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i) {
    const ScalarPrior& sp = scalar[i];
    const Interval& b = bounds.interval[i];
    const std::string name(field_name(field_at(i)));
    if (sp.support.lower < b.lower || sp.support.upper > b.upper)
      throw DomainError("prior: support of " + name + " escapes its bounds");
    if (sp.is_point() && !b.contains(sp.location)) throw DomainError("prior: point mass of " + name + " out of bounds");
    if ((sp.family == ScalarPrior::Family::Normal || sp.family == ScalarPrior::Family::LogNormal) &&
        !(sp.scale > 0.0))
      throw DomainError("prior: nonpositive scale for " + name);
    if (!sp.is_point() && sp.support.degenerate())
      throw DomainError("prior: continuous family on a degenerate interval for " + name);
  }
  if (!omega.point && (omega.alpha.array() <= 0.0).any()) throw DomainError("prior: Dirichlet alpha must be > 0");
}

ModelParams sample_prior(const PriorSpec& spec, Rng& rng) {
  ModelParams p;
  p.omega = spec.omega.sample(rng);
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i)
    field_ref(p, field_at(i)) = spec.scalar[i].sample(rng);
  return p;
}

double log_prior_density(const PriorSpec& spec, const ModelParams& theta) {
  double lp = spec.omega.log_density(theta.omega);
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields && lp != kNegInf; ++i)
    lp += spec.scalar[i].log_density(field_value(theta, field_at(i)));
  return lp;
}

double log_prior_density_unconstrained(const PriorSpec& spec, const ParamSpace& space, const VectorXd& z) {
  const ModelParams p = space.to_params(z);
  double lp = space.omega_free() ? spec.omega.log_density(p.omega) : 0.0;
  for (Field f : space.free_fields()) lp += spec[f].log_density(field_value(p, f));
  return lp + space.log_jacobian(z);
}

VectorXd log_prior_density_unconstrained_gradient(const PriorSpec& spec, const ParamSpace& space,
                                                  const VectorXd& z) {
  const ModelParams p = space.to_params(z);
  ParamGradient g = ParamGradient::Zero();
  if (space.omega_free())
    for (int k = 0; k < 3; ++k) g[k] = spec.omega.alpha[k] - 1.0;
  for (Field f : space.free_fields()) g[static_cast<int>(f)] = score(spec[f], field_value(p, f));
  return space.pullback(z, g) + space.log_jacobian_gradient(z);
}

}  // namespace pminv

#pragma once

#include "pminv/model.hpp"
#include "pminv/reparam.hpp"

#include <array>

namespace pminv {

/// Prior on one bounded scalar.  Every family is truncated to `support`.
struct ScalarPrior {
  enum class Family { PointMass, Uniform, Normal, LogNormal };
  Family family = Family::Uniform;
  double location = 0.0;  // mean (Normal), log-scale location (LogNormal), value (PointMass)
  double scale = 1.0;
  Interval support{};

  static ScalarPrior point(double x) { return {Family::PointMass, x, 0.0, {x, x}}; }
  static ScalarPrior uniform(Interval s) { return {Family::Uniform, 0.0, 0.0, s}; }
  static ScalarPrior normal(double mean, double sd, Interval s) { return {Family::Normal, mean, sd, s}; }
  static ScalarPrior lognormal(double loc, double sd, Interval s) { return {Family::LogNormal, loc, sd, s}; }

  bool is_point() const { return family == Family::PointMass; }
  double log_density(double x) const;
  double sample(Rng& rng) const;
};

/// Dirichlet(alpha) on omega, or a point mass.
struct OmegaPrior {
  bool point = false;
  Vector3d alpha{2.0, 2.0, 2.0};
  Vector3d value{1.0 / 3, 1.0 / 3, 1.0 / 3};

  /// Density with respect to Lebesgue measure on (omega_1, omega_2).
  double log_density(const Vector3d& omega) const;
  Vector3d sample(Rng& rng) const;
};

/// Product prior over ModelParams.
struct PriorSpec {
  OmegaPrior omega;
  /// Indexed by Field; entries omega1..omega3 are unused.
  std::array<ScalarPrior, kNumFields> scalar{};
  ParamBounds bounds = ParamBounds::defaults();

  ScalarPrior& operator[](Field f) { return scalar[static_cast<int>(f)]; }
  const ScalarPrior& operator[](Field f) const { return scalar[static_cast<int>(f)]; }

  /// Dirichlet(2,2,2) on omega; half-normal(1) on mu1, mu3; log-normal(log 0.3, 0.7)
  /// on lambda1, kappa1 and the scales; uniform tau3; N(0,1) gamma; nu fixed at 5
  /// unless `nu_uniform`.  All truncated to `bounds`.
  static PriorSpec defaults(const ParamBounds& bounds = ParamBounds::defaults(), bool nu_uniform = false);
  static PriorSpec point_mass_at(const ModelParams& theta);

  /// Free coordinates: non-point factors.  Fixed fields come from the point values.
  ParamSpace space() const;
  /// Throws DomainError if a factor's support escapes the bounds.
  void validate() const;
};

/// Prior whose support is the whole box: the default families with nu
/// uniform, and omega pinned when all three omega intervals are degenerate.
/// Used to seed searches and grids over ParamBounds.
PriorSpec covering_prior(const ParamBounds& bounds);

ModelParams sample_prior(const PriorSpec& spec, Rng& rng);

/// Sum of per-factor log densities; -inf outside the support.  Point masses
/// contribute 0 at their value.
double log_prior_density(const PriorSpec& spec, const ModelParams& theta);

/// Prior log density of the pushed-forward law on the unconstrained space
/// (includes the log Jacobian).
double log_prior_density_unconstrained(const PriorSpec& spec, const ParamSpace& space, const VectorXd& z);
VectorXd log_prior_density_unconstrained_gradient(const PriorSpec& spec, const ParamSpace& space,
                                                  const VectorXd& z);

}  // namespace pminv

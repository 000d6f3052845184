#include "pminv/vi.hpp"

#include "pminv/model.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <ostream>

namespace pminv {

namespace {

// The scalar part of the prior's unconstrained space; omega is handled by
// the Dirichlet factor.
ParamSpace scalar_space(const PriorSpec& prior) {
  const ParamSpace full = prior.space();
  std::array<bool, kNumFields> mask{};
  for (Field f : full.free_fields()) mask[static_cast<std::size_t>(f)] = true;
  return ParamSpace(full.bounds(), false, mask, full.anchor());
}

double prior_center(const ScalarPrior& sp) {
  const auto& s = sp.support;
  double c = 0.5 * (s.lower + s.upper);
  if (sp.family == ScalarPrior::Family::Normal) c = sp.location;
  if (sp.family == ScalarPrior::Family::LogNormal) c = std::exp(sp.location);
  // Keep the start strictly inside the box.
  const double margin = 0.05 * s.width();
  return std::clamp(c, s.lower + margin, s.upper - margin);
}

struct Draw {
  VectorXd eps;
  VectorXd z;
  Vector3d gamma_draw = Vector3d::Zero();
  Vector3d omega = Vector3d::Zero();
  ModelParams theta;
};

class ElboEngine {
 public:
  ElboEngine(const VectorXd& dx, const VectorXd& v, Outcome y, const PriorSpec& prior)
      : dx_(dx), v_(v), dxa_(dx.array()), va_(v.array()), lva_(v.array().log1p()), y_(y), prior_(prior),
        space_(scalar_space(prior)) {}

  const ParamSpace& space() const { return space_; }

  Draw draw(const VariationalParams& phi, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Draw d;
    const int n = phi.scalar_dim();
    d.eps.resize(n);
    for (int j = 0; j < n; ++j) d.eps[j] = normal(rng);
    d.z = phi.mean + (phi.log_scale.array().exp() * d.eps.array()).matrix();
    d.theta = space_.to_params(d.z);
    if (phi.has_omega) {
      for (int k = 0; k < 3; ++k) {
        // Inverse-CDF draw keeps u fixed under changes of the concentration.
        const double u = std::clamp(unif(rng), 1e-12, 1.0 - 1e-12);
        d.gamma_draw[k] = std::max(boost::math::gamma_p_inv(phi.concentration[k], u), 1e-300);
      }
      d.omega = d.gamma_draw / d.gamma_draw.sum();
      d.theta.omega = d.omega;
    }
    return d;
  }

  double log_likelihood(const ModelParams& theta) const {
    return MixtureDensity(theta).sum_log_density(y_, dxa_, va_, lva_);
  }

  double log_likelihood_grad(const ModelParams& theta, ParamGradient& g) const {
    const MixtureDensity f(theta);
    g.setZero();
    ParamGradient gt;
    double ll = 0.0;
    for (Eigen::Index t = 0; t < dx_.size(); ++t) {
      ll += f.log_density_grad(y_, dx_[t], v_[t], gt);
      g += gt;
    }
    return ll;
  }

  double log_prior_z(const VectorXd& z) const { return log_prior_density_unconstrained(prior_, space_, z); }
  VectorXd log_prior_z_grad(const VectorXd& z) const {
    return log_prior_density_unconstrained_gradient(prior_, space_, z);
  }

  double entropy(const VariationalParams& phi) const {
    return phi.log_scale.sum() + 0.5 * (1.0 + kLog2Pi) * phi.scalar_dim();
  }

  double omega_kl(const VariationalParams& phi) const {
    return phi.has_omega ? dirichlet_kl(phi.concentration, prior_.omega.alpha) : 0.0;
  }

 private:
  const VectorXd& dx_;
  const VectorXd& v_;
  Eigen::ArrayXd dxa_, va_, lva_;
  Outcome y_;
  const PriorSpec& prior_;
  ParamSpace space_;
};

}  // namespace

double dirichlet_kl(const Vector3d& a, const Vector3d& b) {
  using boost::math::digamma;
  const double a0 = a.sum();
  const double b0 = b.sum();
  double kl = std::lgamma(a0) - std::lgamma(b0);
  for (int k = 0; k < 3; ++k)
    kl += std::lgamma(b[k]) - std::lgamma(a[k]) + (a[k] - b[k]) * (digamma(a[k]) - digamma(a0));
  return kl;
}

VariationalParams initial_variational_params(const PriorSpec& prior) {
  const ParamSpace space = scalar_space(prior);
  VariationalParams phi;
  ModelParams center = space.anchor();
  for (Field f : space.free_fields()) field_ref(center, f) = prior_center(prior[f]);
  phi.mean = space.to_unconstrained(center);
  phi.log_scale = VectorXd::Constant(space.dim(), std::log(0.1));
  phi.has_omega = !prior.omega.point;
  phi.concentration = prior.omega.alpha;
  return phi;
}

VariationalParams prior_matched_params(const PriorSpec& prior) {
  VariationalParams phi = initial_variational_params(prior);
  phi.concentration = prior.omega.alpha;
  return phi;
}

double elbo_estimate(const VariationalParams& phi, Outcome y, const VectorXd& dx, const VectorXd& v,
                     const PriorSpec& prior, int samples, Rng& rng) {
  if (samples < 1) throw DomainError("elbo_estimate: need at least one sample");
  const ElboEngine eng(dx, v, y, prior);
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Draw d = eng.draw(phi, rng);
    const double ll = eng.log_likelihood(d.theta);
    if (!std::isfinite(ll)) throw NumericalError("elbo_estimate: non-finite likelihood draw");
    acc += ll + (phi.scalar_dim() > 0 ? eng.log_prior_z(d.z) : 0.0);
  }
  return acc / samples + eng.entropy(phi) - eng.omega_kl(phi);
}

ElboGradient elbo_gradient(const VariationalParams& phi, Outcome y, const VectorXd& dx, const VectorXd& v,
                           const PriorSpec& prior, int samples, Rng& rng) {
  using boost::math::digamma;
  using boost::math::trigamma;
  const ElboEngine eng(dx, v, y, prior);
  const int n = phi.scalar_dim();
  ElboGradient out;
  out.d_mean = VectorXd::Zero(n);
  out.d_log_scale = VectorXd::Zero(n);
  const VectorXd sigma = phi.log_scale.array().exp();
  double acc = 0.0;
  ParamGradient g;
  for (int s = 0; s < samples; ++s) {
    const Draw d = eng.draw(phi, rng);
    const double ll = eng.log_likelihood_grad(d.theta, g);
    if (!std::isfinite(ll)) throw NumericalError("elbo_gradient: non-finite likelihood draw");
    acc += ll;
    if (n > 0) {
      acc += eng.log_prior_z(d.z);
      const VectorXd dz = eng.space().pullback(d.z, g) + eng.log_prior_z_grad(d.z);
      out.d_mean += dz;
      out.d_log_scale += (dz.array() * d.eps.array() * sigma.array()).matrix();
    }
    if (phi.has_omega) {
      const double gsum = g[0] + g[1] + g[2];
      const double total = d.gamma_draw.sum();
      for (int k = 0; k < 3; ++k) {
        const double a = phi.concentration[k];
        const double x = d.gamma_draw[k];
        const double df_dx = g[k] / x - gsum / total;
        // Implicit reparameterization: dx/da = -(dP/da) / (dP/dx) at fixed u.
        const double h = 1e-5 * std::max(1.0, a);
        const double dp_da = (boost::math::gamma_p(a + h, x) - boost::math::gamma_p(a - h, x)) / (2.0 * h);
        const double dp_dx = boost::math::gamma_p_derivative(a, x);
        const double dx_da = dp_dx > 0.0 ? -dp_da / dp_dx : 0.0;
        out.d_log_concentration[k] += df_dx * dx_da * a;
      }
    }
  }
  out.d_mean /= samples;
  out.d_log_scale /= samples;
  out.d_log_scale.array() += 1.0;  // entropy
  out.d_log_concentration /= samples;
  if (phi.has_omega) {
    const Vector3d& a = phi.concentration;
    const Vector3d& b = prior.omega.alpha;
    const double a0 = a.sum();
    const double cross = (a - b).sum() * trigamma(a0);
    for (int k = 0; k < 3; ++k) {
      const double dkl = (a[k] - b[k]) * trigamma(a[k]) - cross;
      out.d_log_concentration[k] -= dkl * a[k];
    }
  }
  out.elbo = acc / samples + eng.entropy(phi) - eng.omega_kl(phi);
  return out;
}

ViResult fit_vi(Outcome y, const VectorXd& dx, const VectorXd& v, const PriorSpec& prior, const ViOptions& opts,
                Rng& rng) {
  if (opts.samples < 1 || opts.max_iterations < 0 || opts.window < 1 || !(opts.step_size > 0.0))
    throw DomainError("fit_vi: invalid options");
  if (dx.size() != v.size()) throw DomainError("fit_vi: increment and volume lengths differ");
  prior.validate();
  const std::uint64_t final_seed = rng();
  ViResult res;
  res.phi_star = initial_variational_params(prior);
  VariationalParams& phi = res.phi_star;
  const int n = phi.scalar_dim();
  const int dim = 2 * n + (phi.has_omega ? 3 : 0);

  if (dim > 0) {
    VectorXd m1 = VectorXd::Zero(dim), m2 = VectorXd::Zero(dim), grad(dim);
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const int w = opts.window;
    for (int it = 1; it <= opts.max_iterations; ++it) {
      const ElboGradient eg = elbo_gradient(phi, y, dx, v, prior, opts.samples, rng);
      if (std::isnan(eg.elbo)) throw NumericalError("fit_vi: ELBO diverged at iteration " + std::to_string(it));
      res.elbo_trace.push_back(eg.elbo);
      grad << eg.d_mean, eg.d_log_scale, (phi.has_omega ? VectorXd(eg.d_log_concentration) : VectorXd());
      m1 = b1 * m1 + (1.0 - b1) * grad;
      m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
      const VectorXd step = opts.step_size * (m1 / (1.0 - std::pow(b1, it))).array() /
                            ((m2 / (1.0 - std::pow(b2, it))).array().sqrt() + eps);
      phi.mean += step.head(n);
      phi.log_scale += step.segment(n, n);
      if (phi.has_omega) {
        for (int k = 0; k < 3; ++k)
          phi.concentration[k] = std::clamp(phi.concentration[k] * std::exp(step[2 * n + k]), 1e-3, 1e6);
      }
      res.iterations = it;
      const auto len = static_cast<int>(res.elbo_trace.size());
      if (len >= 2 * w && len % w == 0) {
        const auto last = Eigen::Map<const VectorXd>(res.elbo_trace.data() + len - w, w).mean();
        const auto prev = Eigen::Map<const VectorXd>(res.elbo_trace.data() + len - 2 * w, w).mean();
        if (last - prev < opts.tolerance) {
          res.converged = true;
          break;
        }
      }
    }
  } else {
    res.converged = true;
  }
  Rng final_rng(final_seed);
  res.elbo_star = elbo_estimate(phi, y, dx, v, prior, dim > 0 ? opts.final_samples : 1, final_rng);
  if (std::isnan(res.elbo_star)) throw NumericalError("fit_vi: final ELBO is NaN");
  return res;
}

ViBayesFactor vi_log_bf(const VectorXd& dx, const VectorXd& v, const PriorSpec& prior, const ViOptions& opts,
                        std::uint64_t seed) {
  ViBayesFactor out;
  Rng rng1(derive_seed(seed, 0x7669)), rng0(derive_seed(seed, 0x7669));
  out.fit1 = fit_vi(Outcome::Yes, dx, v, prior, opts, rng1);
  out.fit0 = fit_vi(Outcome::No, dx, v, prior, opts, rng0);
  out.approx_log_bf = out.fit1.elbo_star - out.fit0.elbo_star;
  return out;
}

void put_vi_result(KeyValues& kv, const ViResult& r, const std::string& prefix) {
  kv.set(prefix + "elbo_star", r.elbo_star);
  kv.set(prefix + "converged", std::string(r.converged ? "true" : "false"));
  kv.set(prefix + "iterations", static_cast<long long>(r.iterations));
  for (int j = 0; j < r.phi_star.scalar_dim(); ++j) {
    kv.set(prefix + "mean" + std::to_string(j), r.phi_star.mean[j]);
    kv.set(prefix + "log_scale" + std::to_string(j), r.phi_star.log_scale[j]);
  }
  if (r.phi_star.has_omega)
    for (int k = 0; k < 3; ++k) kv.set(prefix + "concentration" + std::to_string(k + 1), r.phi_star.concentration[k]);
}

void write_elbo_trace_csv(std::ostream& os, const ViResult& r) {
  os << "iteration,elbo\n";
  for (std::size_t i = 0; i < r.elbo_trace.size(); ++i) os << i + 1 << ',' << format_double(r.elbo_trace[i]) << '\n';
}

ModelParams variational_mean_params(const VariationalParams& phi, const PriorSpec& prior, int samples, Rng& rng) {
  const ParamSpace space = scalar_space(prior);
  ModelParams mean = space.anchor();
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd acc = VectorXd::Zero(static_cast<Eigen::Index>(space.free_fields().size()));
  VectorXd z(phi.scalar_dim());
  for (int s = 0; s < samples; ++s) {
    for (int j = 0; j < phi.scalar_dim(); ++j) z[j] = phi.mean[j] + std::exp(phi.log_scale[j]) * normal(rng);
    const ModelParams p = space.to_params(z);
    for (std::size_t j = 0; j < space.free_fields().size(); ++j)
      acc[static_cast<Eigen::Index>(j)] += field_value(p, space.free_fields()[j]);
  }
  for (std::size_t j = 0; j < space.free_fields().size(); ++j)
    field_ref(mean, space.free_fields()[j]) = acc[static_cast<Eigen::Index>(j)] / samples;
  if (phi.has_omega) mean.omega = phi.concentration / phi.concentration.sum();
  return mean;
}

}  // namespace pminv

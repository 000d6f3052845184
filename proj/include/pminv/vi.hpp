#pragma once

#include "pminv/kvfile.hpp"
#include "pminv/logodds.hpp"
#include "pminv/prior.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pminv {

/// Mean-field family: independent Gaussians on the unconstrained coordinate of
/// each free scalar (same reparameterization as the SMC sampler) and a
/// Dirichlet on omega when omega is free.
struct VariationalParams {
  VectorXd mean;
  VectorXd log_scale;
  bool has_omega = false;
  Vector3d concentration{2.0, 2.0, 2.0};

  int scalar_dim() const { return static_cast<int>(mean.size()); }
};

struct ViOptions {
  double step_size = 0.01;
  int samples = 8;  // S, draws per gradient step
  int max_iterations = 5000;
  int window = 50;
  double tolerance = 1e-3;
  /// Draws used for the reported ELBO at the optimum.
  int final_samples = 1000;
};

struct ViResult {
  VariationalParams phi_star;
  double elbo_star = 0.0;
  std::vector<double> elbo_trace;
  bool converged = false;
  int iterations = 0;
};

/// Gaussian factors initialized at the prior's center with scale 0.1; the
/// Dirichlet starts at the prior concentration.
VariationalParams initial_variational_params(const PriorSpec& prior);

/// Variational factors equal to the prior where the prior has a matching
/// family (omega only); Gaussian factors keep initial values.
VariationalParams prior_matched_params(const PriorSpec& prior);

struct ElboGradient {
  double elbo = 0.0;
  VectorXd d_mean;
  VectorXd d_log_scale;
  Vector3d d_log_concentration = Vector3d::Zero();
};

/// Monte Carlo ELBO with S reparameterized draws.  The Dirichlet KL is
/// closed form; the Gaussian-factor KL uses the analytic entropy and the same
/// draws for the cross term.
double elbo_estimate(const VariationalParams& phi, Outcome y, const VectorXd& dx, const VectorXd& v,
                     const PriorSpec& prior, int samples, Rng& rng);

/// ELBO estimate and its reparameterization gradient from one set of draws.
ElboGradient elbo_gradient(const VariationalParams& phi, Outcome y, const VectorXd& dx, const VectorXd& v,
                           const PriorSpec& prior, int samples, Rng& rng);

/// Closed-form KL(Dir(a) || Dir(b)).
double dirichlet_kl(const Vector3d& a, const Vector3d& b);

/// Stochastic gradient ascent (Adam-style per-coordinate steps).  Throws
/// NumericalError if the ELBO trace becomes NaN.
ViResult fit_vi(Outcome y, const VectorXd& dx, const VectorXd& v, const PriorSpec& prior, const ViOptions& opts,
                Rng& rng);

/// ELBO difference L*_1 - L*_0.  An approximation, not a bound on log BF.
struct ViBayesFactor {
  double approx_log_bf = 0.0;
  ViResult fit1, fit0;
};

/// Both outcome fits use the same sub-seed so their Monte Carlo noise is shared.
ViBayesFactor vi_log_bf(const VectorXd& dx, const VectorXd& v, const PriorSpec& prior, const ViOptions& opts,
                        std::uint64_t seed);

void put_vi_result(KeyValues& kv, const ViResult& r, const std::string& prefix = "");
void write_elbo_trace_csv(std::ostream& os, const ViResult& r);

/// E_q[theta] for each free scalar field, by `samples` draws.
ModelParams variational_mean_params(const VariationalParams& phi, const PriorSpec& prior, int samples, Rng& rng);

}  // namespace pminv

#include "pminv/smc.hpp"

namespace pminv {

double effective_sample_size(const VectorXd& log_weights) {
  return 1.0 / (2.0 * log_weights.array()).exp().sum();
}

std::vector<int> systematic_resample(const VectorXd& weights, int n, double u) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  const Eigen::Index m = weights.size();
  double cum = weights[0];
  Eigen::Index j = 0;
  for (int i = 0; i < n; ++i) {
    const double point = (u + i) / n;
    while (point > cum && j < m - 1) cum += weights[++j];
    idx[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return idx;
}

std::vector<int> systematic_resample(const VectorXd& weights, int n, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return systematic_resample(weights, n, unif(rng));
}

MatrixXd weighted_covariance(const MatrixXd& z, const VectorXd& weights) {
  const VectorXd mean = z * weights;
  const MatrixXd centered = z.colwise() - mean;
  return centered * weights.asDiagonal() * centered.transpose();
}

namespace {

// Prefix of the data set as aligned arrays for vectorized likelihoods.
struct PathArrays {
  Eigen::ArrayXd dx, v, log1p_v;
};

class Sampler {
 public:
  Sampler(const VectorXd& dx, const VectorXd& v, Outcome y, const PriorSpec& prior, const SmcOptions& opts,
          Rng& rng)
      : data_{dx.array(), v.array(), v.array().log1p()},
        dx_(dx), v_(v), y_(y), prior_(prior), space_(prior.space()), opts_(opts), rng_(rng) {}

  SmcResult run();

 private:
  double log_target(const VectorXd& z, double& loglik, int t) const;
  void rejuvenate(int t, const MatrixXd& proposal_chol);

  PathArrays data_;
  const VectorXd& dx_;
  const VectorXd& v_;
  Outcome y_;
  const PriorSpec& prior_;
  ParamSpace space_;
  SmcOptions opts_;
  Rng& rng_;

  MatrixXd z_;                            // d x N unconstrained coordinates
  std::vector<MixtureDensity> density_;   // per particle
  VectorXd loglik_;                       // sum_{s<=t} log f(dx_s | theta_i)
  VectorXd log_prior_z_;                  // prior density on the unconstrained space
  std::vector<int> accepted_, proposed_;
};

double Sampler::log_target(const VectorXd& z, double& loglik, int t) const {
  const double lp = log_prior_density_unconstrained(prior_, space_, z);
  if (!std::isfinite(lp)) return kNegInf;
  const MixtureDensity f(space_.to_params(z));
  loglik = f.sum_log_density(y_, data_.dx.head(t), data_.v.head(t), data_.log1p_v.head(t));
  if (std::isnan(loglik)) return kNegInf;
  return lp + loglik;
}

void Sampler::rejuvenate(int t, const MatrixXd& chol) {
  const int n = static_cast<int>(density_.size());
  const int d = space_.dim();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorXd eps(d);
  int acc = 0, prop = 0;
  for (int i = 0; i < n; ++i) {
    VectorXd z = z_.col(i);
    double ll = loglik_[i];
    double cur = log_prior_z_[i] + ll;
    for (int m = 0; m < opts_.rejuvenation_moves; ++m) {
      for (int k = 0; k < d; ++k) eps[k] = normal(rng_);
      const VectorXd zp = z + chol * eps;
      double llp = 0.0;
      const double prop_target = log_target(zp, llp, t);
      const double u = unif(rng_);
      ++prop;
      if (prop_target != kNegInf && std::log(u) < prop_target - cur) {
        z = zp;
        ll = llp;
        cur = prop_target;
        ++acc;
      }
    }
    z_.col(i) = z;
    loglik_[i] = ll;
    log_prior_z_[i] = cur - ll;
    density_[static_cast<std::size_t>(i)] = MixtureDensity(space_.to_params(z));
  }
  accepted_.push_back(acc);
  proposed_.push_back(prop);
}

SmcResult Sampler::run() {
  const int n = opts_.particles;
  const int d = space_.dim();
  const int T = static_cast<int>(dx_.size());
  SmcResult out;
  auto& ens = out.ensemble;
  auto& diag = out.diagnostics;

  z_.resize(d, n);
  density_.reserve(static_cast<std::size_t>(n));
  loglik_ = VectorXd::Zero(n);
  log_prior_z_.resize(n);
  std::vector<ModelParams> init(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const ModelParams p = sample_prior(prior_, rng_);
    if (d > 0) {
      z_.col(i) = space_.to_unconstrained(p);
      log_prior_z_[i] = log_prior_density_unconstrained(prior_, space_, z_.col(i));
    } else {
      log_prior_z_[i] = 0.0;
    }
    // Round-trip through the space so fixed fields are exact and cached params
    // agree with z.
    density_.emplace_back(d > 0 ? space_.to_params(z_.col(i)) : p);
  }

  VectorXd lw = VectorXd::Constant(n, -std::log(static_cast<double>(n)));
  VectorXd inc(n);
  double log_z = 0.0;
  diag.ess_min = n;

  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < n; ++i) inc[i] = density_[static_cast<std::size_t>(i)].log_density(y_, dx_[t], v_[t]);
    if (!inc.allFinite())
      throw NumericalError("smc: non-finite likelihood at step t=" + std::to_string(t + 1));
    loglik_ += inc;
    lw += inc;
    const double step = log_sum_exp(lw);
    log_z += step;
    lw.array() -= step;
    const double ess = effective_sample_size(lw);
    diag.ess_min = std::min(diag.ess_min, ess);
    if (opts_.record_trace) {
      diag.ess_trace.push_back(ess);
      diag.log_normalizer_trace.push_back(log_z);
    }
    if (ess < opts_.ess_fraction * n) {
      const VectorXd w = lw.array().exp();
      MatrixXd chol;
      if (d > 0) {
        const double c = 2.38 * 2.38 / d;
        const MatrixXd cov = c * weighted_covariance(z_, w) + 1e-6 * MatrixXd::Identity(d, d);
        chol = cov.llt().matrixL();
      }
      const std::vector<int> idx = systematic_resample(w, n, rng_);
      MatrixXd z_new(d, n);
      VectorXd ll_new(n), lp_new(n);
      std::vector<MixtureDensity> dens_new;
      dens_new.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int a = idx[static_cast<std::size_t>(i)];
        z_new.col(i) = z_.col(a);
        ll_new[i] = loglik_[a];
        lp_new[i] = log_prior_z_[a];
        dens_new.push_back(density_[static_cast<std::size_t>(a)]);
      }
      z_ = std::move(z_new);
      loglik_ = ll_new;
      log_prior_z_ = lp_new;
      density_ = std::move(dens_new);
      lw.setConstant(-std::log(static_cast<double>(n)));
      ++ens.resample_count;
      diag.resample_times.push_back(t + 1);
      if (d > 0 && opts_.rejuvenation_moves > 0) {
        rejuvenate(t + 1, chol);
        diag.acceptance_rates.push_back(static_cast<double>(accepted_.back()) / proposed_.back());
      }
    }
  }

  out.log_marginal = log_z;
  ens.log_normalizer = log_z;
  ens.t = T;
  ens.log_weights = lw;
  ens.particles.reserve(static_cast<std::size_t>(n));
  for (const auto& f : density_) ens.particles.push_back(f.params());
  long acc = 0, prop = 0;
  for (std::size_t k = 0; k < accepted_.size(); ++k) {
    acc += accepted_[k];
    prop += proposed_[k];
  }
  if (prop > 0) ens.rejuvenation_acceptance = static_cast<double>(acc) / prop;
  return out;
}

}  // namespace

SmcResult smc_log_marginal(const VectorXd& dx, const VectorXd& v, Outcome y, const PriorSpec& prior,
                           const SmcOptions& opts, Rng& rng) {
  if (opts.particles < 2) throw DomainError("smc: need at least 2 particles");
  if (dx.size() != v.size()) throw DomainError("smc: increment and volume lengths differ");
  prior.validate();
  Sampler s(dx, v, y, prior, opts, rng);
  return s.run();
}

}  // namespace pminv

#pragma once

#include "pminv/logodds.hpp"
#include "pminv/model.hpp"
#include "pminv/prior.hpp"

#include <vector>

namespace pminv {

struct SmcOptions {
  int particles = 1000;
  /// Resample when ESS < ess_fraction * N.
  double ess_fraction = 0.5;
  int rejuvenation_moves = 5;
  /// Keep per-step ESS and log-normalizer traces.
  bool record_trace = false;
};

/// Weighted particle approximation of the partial posterior Pi(theta | data_{1:t}, y).
struct ParticleEnsemble {
  std::vector<ModelParams> particles;
  /// Normalized: log_sum_exp(log_weights) == 0.
  VectorXd log_weights;
  double log_normalizer = 0.0;
  int t = 0;
  int resample_count = 0;
  /// Mean Metropolis acceptance over all rejuvenation moves (NaN if none).
  double rejuvenation_acceptance = std::numeric_limits<double>::quiet_NaN();

  Eigen::Index size() const { return log_weights.size(); }
};

struct SmcDiagnostics {
  double ess_min = 0.0;
  std::vector<double> ess_trace;            // after reweighting at each t
  std::vector<double> log_normalizer_trace;  // log m_y(h_{1:t})
  std::vector<int> resample_times;
  std::vector<double> acceptance_rates;     // one per rejuvenation event
};

struct SmcResult {
  double log_marginal = 0.0;
  ParticleEnsemble ensemble;
  SmcDiagnostics diagnostics;
};

/// 1 / sum(w^2) for normalized log weights.
double effective_sample_size(const VectorXd& log_weights);

/// Systematic resampling: ancestor indices for N offspring using the single
/// uniform offset u in [0, 1).  `weights` must sum to 1.
std::vector<int> systematic_resample(const VectorXd& weights, int n, double u);
std::vector<int> systematic_resample(const VectorXd& weights, int n, Rng& rng);

/// Adaptive SMC estimate of log m_y with resample-move rejuvenation.  The
/// weight recursion runs in log space.  Throws NumericalError naming the step
/// if an incremental likelihood is not finite.
SmcResult smc_log_marginal(const VectorXd& dx, const VectorXd& v, Outcome y, const PriorSpec& prior,
                           const SmcOptions& opts, Rng& rng);

inline SmcResult smc_log_marginal(const IncrementPath& inc, const VectorXd& v, Outcome y, const PriorSpec& prior,
                                  const SmcOptions& opts, Rng& rng) {
  return smc_log_marginal(inc.dx, v, y, prior, opts, rng);
}

/// Weighted sample covariance of the columns of `z` (one particle per column).
MatrixXd weighted_covariance(const MatrixXd& z, const VectorXd& weights);

}  // namespace pminv

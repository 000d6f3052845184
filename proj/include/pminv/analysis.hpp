#pragma once

#include "pminv/kvfile.hpp"
#include "pminv/logodds.hpp"
#include "pminv/model.hpp"
#include "pminv/posterior.hpp"
#include "pminv/simulate.hpp"

#include <cstdint>
#include <vector>

namespace pminv {

// --- Information gain ------------------------------------------------------

/// KL(Bern(post) || Bern(prior)) with 0 log 0 = 0.
double realized_ig(double post_p1, double prior_p1);

/// Realized IG as a function of the log Bayes factor u.  Its derivative is
/// u * pi(u) * (1 - pi(u)) with pi(u) = sigmoid(logit(prior) + u).
double ig_from_log_bf(double log_bf, double prior_p1);
double ig_derivative(double log_bf, double prior_p1);

struct IgEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> values;
};

/// Monte Carlo estimate of I(Y; dX_{1:T} | V = v): replication r draws
/// Y ~ Bernoulli(prior_p1), simulates under theta_star on the fixed volumes,
/// and infers with the SMC estimator, all from derive_seed(seed, r).
IgEstimate expected_ig(const ModelParams& theta_star, const VectorXd& v, double prior_p1, int reps,
                       const PriorSpec& prior, const SmcOptions& opts, std::uint64_t seed);

// --- Grid constants --------------------------------------------------------

/// Grids for the numerical suprema.  The theta grid is `theta_draws` draws
/// from a prior covering the bounds plus corner points (each omega vertex
/// paired with every scalar at its lower, or every scalar at its upper, bound).
struct GridSpec {
  int increments = 2001;
  int volumes = 200;
  int theta_draws = 512;
  bool corners = true;
  double fd_step = 1e-5;
  std::uint64_t seed = 0;
  int threads = 0;
};

/// The theta grid described by `grid`; duplicates are not removed.
std::vector<ModelParams> theta_grid(const ParamBounds& bounds, const GridSpec& grid);

struct LipschitzConstants {
  double lx = 0.0;
  double lv = 0.0;
  double R = 0.0;
  Interval v_range;
  GridSpec grid;
  int theta_points = 0;
};

/// Grid sup of |d log f_y / dx| and |d log f_y / dv| (central differences)
/// over x in [-R, R], v in v_range, the theta grid and both outcomes.  A grid
/// sup is a lower bound on the true sup.  The manipulator switch at tau3 is a
/// jump in v, so lv only covers the smooth parts.
LipschitzConstants lipschitz_constants(const ParamBounds& bounds, double R, Interval v_range, const GridSpec& grid);

/// Grid sup over theta, t and x in [-R, R] of
/// |log f_{y*}(x | v_t, theta*) - log f_{1-y*}(x | v_t, theta)|.
double lr_envelope(const ParamBounds& bounds, const ModelParams& theta_star, Outcome y_star, const VectorXd& v,
                   double R, const GridSpec& grid);

// --- Stability ---------------------------------------------------------------

/// lambda_x * sum |dx_t - dx'_t| + lambda_v * sum |v_t - v'_t|.
double history_distance(const History& h, const History& h_pert, double lambda_x = 1.0, double lambda_v = 1.0);

struct StabilityReport {
  double lx_R = 0.0;
  double lv_R = 0.0;
  double R = 0.0;
  double sum_abs_dx_diff = 0.0;
  double sum_abs_v_diff = 0.0;
  /// 2 (L_x sum|ddx| + L_v sum|dv|); only a bound when on_event.
  double bf_bound = 0.0;
  /// bf_bound / 4, reported even when it exceeds 1.
  double posterior_bound = 0.0;
  double observed_bf_diff = 0.0;
  bool on_event = false;

  bool contained() const { return observed_bf_diff <= bf_bound; }
};

StabilityReport stability_bound(const History& h, const History& h_pert, double R, double lx_R, double lv_R,
                                double observed_bf_diff = 0.0);

// --- Finite-sample bound -------------------------------------------------------

struct FiniteSampleInputs {
  double delta_T = 0.0;
  double epsilon = 0.0;
  double R = 0.0;
  double B_R = 0.0;
  int T = 0;
  double C_q = 0.0;
  double q = 0.0;

  void validate() const;
};

struct FiniteSampleBound {
  double tail_term = 0.0;   // exp(-T eps^2 / (2 B_R^2))
  double event_term = 0.0;  // T C_q R^-q
  double prob_bound = 0.0;  // tail + event
  /// exp(-T (delta_T - eps)) + prob_bound
  double expected_error_bound = 0.0;
};

FiniteSampleBound finite_sample_bound(const FiniteSampleInputs& inp);

struct MomentControl {
  double q = 0.0;
  double C_q = 0.0;
  double empirical_moment = 0.0;
  int samples = 0;
};

/// q = min(nu, 4) - 0.5 and C_q = 2 * the empirical q-th absolute moment of
/// `samples` increments simulated under (y, theta) with volumes from `design`.
MomentControl estimate_moment_control(Outcome y, const ModelParams& theta, const VolumeDesign& design, int samples,
                                      Rng& rng);

void put_stability_report(KeyValues& kv, const StabilityReport& r);
void put_lipschitz(KeyValues& kv, const LipschitzConstants& c);

}  // namespace pminv

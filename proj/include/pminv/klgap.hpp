#pragma once

#include "pminv/kvfile.hpp"
#include "pminv/model.hpp"
#include "pminv/prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace pminv {

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

/// Outcome and parameters of one conditional law.
struct Law {
  Outcome y = Outcome::Yes;
  ModelParams theta = ModelParams::defaults();
};

/// KL(N(m1, s1^2) || N(m2, s2^2)).
double gaussian_kl(double m1, double s1, double m2, double s2);

/// Monte Carlo KL(f_truth(. | v) || f_alt(. | v)) from M draws of the truth.
KlEstimate kl_per_step(const Law& truth, const Law& alt, double v, int M, Rng& rng);

/// Common-random-number objective: one fixed set of M truth draws per time
/// index, with the truth log-density cached.  Evaluation is const and safe
/// to share across threads.
class KlObjective {
 public:
  KlObjective(const Law& truth, const VectorXd& v, int M, Rng& rng);

  int horizon() const { return static_cast<int>(v_.size()); }
  int samples() const { return M_; }
  const Law& truth() const { return truth_; }

  /// (1/T) sum_t KL_t(truth || (y, theta)).
  double mean_kl(Outcome y, const ModelParams& theta) const;
  /// sum_t KL_t; equals T * mean_kl on the same sample sets.
  double path_kl(Outcome y, const ModelParams& theta) const;
  std::vector<KlEstimate> per_step(Outcome y, const ModelParams& theta) const;

 private:
  Law truth_;
  VectorXd v_;
  int M_;
  std::vector<Eigen::ArrayXd> draws_;
  std::vector<double> truth_mean_;  // mean truth log density per step
};

struct GapOptions {
  /// Search region for the wrong-outcome parameters.  Degenerate intervals
  /// pin a coordinate; all-degenerate bounds evaluate a single point.
  ParamBounds bounds = ParamBounds::defaults();
  int restarts = 20;
  int max_evaluations = 2000;
  /// Truth draws per time index used during the search.
  int search_samples = 2000;
  /// Fresh draws per time index for the reported estimate.
  int samples = 10000;
  /// Start the first restart at the truth parameters (projected into the
  /// bounds) instead of a prior draw.
  bool start_at_truth = true;
  int threads = 0;
};

struct GapDiagnostics {
  int restarts = 0;
  int evaluations = 0;
  int converged_restarts = 0;
  /// Best search objective per restart, in restart order.
  std::vector<double> restart_best;
  /// Running minimum over restarts.
  std::vector<double> best_trace;
  double search_objective = 0.0;
  /// Held-out objective of the selected candidate.
  double holdout_objective = 0.0;
};

struct GapResult {
  double delta_T = 0.0;
  /// sqrt(sum_t se_t^2) / T.
  double std_error = 0.0;
  ModelParams argmin_theta;
  std::vector<KlEstimate> per_step;
  GapDiagnostics diagnostics;
};

/// Approximates inf_theta (1/T) sum_t KL(f_{y*}(.|v_t, theta*) || f_{1-y*}(.|v_t, theta))
/// over the bounds by multi-start Nelder-Mead on a CRN objective.  Restart
/// optima and starts are ranked on held-out draws, and the reported gap is
/// re-estimated at the winner on fresh draws, so the search's selection does
/// not bias it downward.
GapResult projection_gap(const Law& truth, const VectorXd& v, const GapOptions& opts, Rng& rng);

struct NelderMeadResult {
  VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes f from x0 with initial simplex edges of length `step`.
template <class F>
NelderMeadResult nelder_mead(F&& f, const VectorXd& x0, double step, int max_evaluations, double tolerance = 1e-10);

void put_gap_result(KeyValues& kv, const GapResult& r);
void write_per_step_csv(std::ostream& os, const GapResult& r, const VectorXd& v);

// ---------------------------------------------------------------------------

template <class F>
NelderMeadResult nelder_mead(F&& f, const VectorXd& x0, double step, int max_evaluations, double tolerance) {
  const Eigen::Index n = x0.size();
  NelderMeadResult res;
  std::vector<VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)][i] += step;
  auto eval = [&](const VectorXd& x) {
    ++res.evaluations;
    const double y = f(x);
    return std::isnan(y) ? std::numeric_limits<double>::infinity() : y;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = eval(pts[i]);
  std::vector<std::size_t> order(pts.size());

  while (res.evaluations < max_evaluations && n > 0) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    double size = 0.0;
    for (const auto& p : pts) size = std::max(size, (p - pts[best]).cwiseAbs().maxCoeff());
    if (std::abs(val[worst] - val[best]) <= tolerance && size <= 1e-6) {
      res.converged = true;
      break;
    }
    VectorXd centroid = VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      const VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                : VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  res.x = pts[static_cast<std::size_t>(it - val.begin())];
  res.value = *it;
  if (n == 0) res.converged = true;
  return res;
}

}  // namespace pminv

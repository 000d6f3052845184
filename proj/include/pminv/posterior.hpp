#pragma once

#include "pminv/kvfile.hpp"
#include "pminv/logodds.hpp"
#include "pminv/smc.hpp"

#include <cstdint>

namespace pminv {

/// Outcome posterior assembled from two marginal likelihood estimates.
struct PosteriorSummary {
  double log_bf = 0.0;
  double posterior_p1 = 0.5;
  double prior_p1 = 0.5;
  double log_m1 = 0.0;
  double log_m0 = 0.0;
  double ess_min = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t seed_y1 = 0;
  std::uint64_t seed_y0 = 0;
  int particles = 0;
};

/// sigmoid(logit(prior_p1) + log_bf).
double posterior_probability(double prior_p1, double log_bf);

struct PosteriorRun {
  PosteriorSummary summary;
  SmcResult y1, y0;
};

/// Runs the SMC estimator for y=1 and y=0 on sub-seeds derive_seed(seed, y).
PosteriorRun posterior_run(const IncrementPath& inc, const VectorXd& v, const PriorSpec& prior, double prior_p1,
                           const SmcOptions& opts, std::uint64_t seed);
PosteriorSummary posterior_summary(const History& h, const PriorSpec& prior, double prior_p1,
                                   const SmcOptions& opts, std::uint64_t seed);

void put_summary(KeyValues& kv, const PosteriorSummary& s);
PosteriorSummary get_summary(const KeyValues& kv);

}  // namespace pminv

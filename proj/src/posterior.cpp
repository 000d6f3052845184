#include "pminv/posterior.hpp"

namespace pminv {

double posterior_probability(double prior_p1, double log_bf) { return sigmoid(logit(prior_p1) + log_bf); }

PosteriorRun posterior_run(const IncrementPath& inc, const VectorXd& v, const PriorSpec& prior, double prior_p1,
                           const SmcOptions& opts, std::uint64_t seed) {
  if (!(prior_p1 > 0.0 && prior_p1 < 1.0)) throw DomainError("posterior: prior_p1 must lie in (0,1)");
  PosteriorRun run;
  auto& s = run.summary;
  s.seed = seed;
  s.seed_y1 = derive_seed(seed, 1);
  s.seed_y0 = derive_seed(seed, 0);
  s.particles = opts.particles;
  s.prior_p1 = prior_p1;
  Rng rng1(s.seed_y1), rng0(s.seed_y0);
  run.y1 = smc_log_marginal(inc, v, Outcome::Yes, prior, opts, rng1);
  run.y0 = smc_log_marginal(inc, v, Outcome::No, prior, opts, rng0);
  s.log_m1 = run.y1.log_marginal;
  s.log_m0 = run.y0.log_marginal;
  s.log_bf = s.log_m1 - s.log_m0;
  s.posterior_p1 = posterior_probability(prior_p1, s.log_bf);
  s.ess_min = std::min(run.y1.diagnostics.ess_min, run.y0.diagnostics.ess_min);
  return run;
}

PosteriorSummary posterior_summary(const History& h, const PriorSpec& prior, double prior_p1,
                                   const SmcOptions& opts, std::uint64_t seed) {
  return posterior_run(to_increments(h), h.v, prior, prior_p1, opts, seed).summary;
}

void put_summary(KeyValues& kv, const PosteriorSummary& s) {
  kv.set("log_bf", s.log_bf);
  kv.set("posterior_p1", s.posterior_p1);
  kv.set("prior_p1", s.prior_p1);
  kv.set("log_m1", s.log_m1);
  kv.set("log_m0", s.log_m0);
  kv.set("ess_min", s.ess_min);
  kv.set("seed", std::to_string(s.seed));
  kv.set("seed_y1", std::to_string(s.seed_y1));
  kv.set("seed_y0", std::to_string(s.seed_y0));
  kv.set("particles", static_cast<long long>(s.particles));
}

PosteriorSummary get_summary(const KeyValues& kv) {
  PosteriorSummary s;
  s.log_bf = kv.get_double("log_bf");
  s.posterior_p1 = kv.get_double("posterior_p1");
  s.prior_p1 = kv.get_double("prior_p1");
  s.log_m1 = kv.get_double("log_m1");
  s.log_m0 = kv.get_double("log_m0");
  s.ess_min = kv.get_double("ess_min");
  s.seed = std::stoull(kv.get("seed"));
  s.seed_y1 = std::stoull(kv.get("seed_y1"));
  s.seed_y0 = std::stoull(kv.get("seed_y0"));
  s.particles = static_cast<int>(kv.get_int("particles"));
  return s;
}

}  // namespace pminv

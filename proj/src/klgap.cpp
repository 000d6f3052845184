#include "pminv/klgap.hpp"

#include "pminv/parallel.hpp"
#include "pminv/reparam.hpp"

#include <ostream>

namespace pminv {

double gaussian_kl(double m1, double s1, double m2, double s2) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw DomainError("gaussian_kl: scales must be positive");
  const double d = m1 - m2;
  return std::log(s2 / s1) + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5;
}

namespace {

KlEstimate estimate_from(const Eigen::ArrayXd& diff) {
  const auto M = static_cast<double>(diff.size());
  KlEstimate e;
  e.samples = static_cast<int>(diff.size());
  e.value = diff.mean();
  const double var = (diff - e.value).square().sum() / std::max(M - 1.0, 1.0);
  e.std_error = std::sqrt(var / M);
  return e;
}

Eigen::ArrayXd draw_truth(const Law& truth, double v, int M, Rng& rng) {
  Eigen::ArrayXd x(M);
  for (int i = 0; i < M; ++i) x[i] = sample_increment(truth.y, v, truth.theta, rng);
  return x;
}

}  // namespace

KlEstimate kl_per_step(const Law& truth, const Law& alt, double v, int M, Rng& rng) {
  if (M < 100) throw DomainError("kl_per_step: need at least 100 samples");
  const Eigen::ArrayXd x = draw_truth(truth, v, M, rng);
  Eigen::ArrayXd lt, la;
  MixtureDensity(truth.theta).log_density(truth.y, v, x, lt);
  MixtureDensity(alt.theta).log_density(alt.y, v, x, la);
  return estimate_from(lt - la);
}

KlObjective::KlObjective(const Law& truth, const VectorXd& v, int M, Rng& rng) : truth_(truth), v_(v), M_(M) {
  if (M < 100) throw DomainError("KlObjective: need at least 100 samples per step");
  const MixtureDensity f(truth.theta);
  draws_.reserve(static_cast<std::size_t>(v.size()));
  Eigen::ArrayXd lt;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    draws_.push_back(draw_truth(truth, v[t], M, rng));
    f.log_density(truth.y, v[t], draws_.back(), lt);
    truth_mean_.push_back(lt.mean());
  }
}

double KlObjective::path_kl(Outcome y, const ModelParams& theta) const {
  const MixtureDensity f(theta);
  Eigen::ArrayXd la;
  double sum = 0.0;
  for (std::size_t t = 0; t < draws_.size(); ++t) {
    f.log_density(y, v_[static_cast<Eigen::Index>(t)], draws_[t], la);
    sum += truth_mean_[t] - la.mean();
  }
  return sum;
}

double KlObjective::mean_kl(Outcome y, const ModelParams& theta) const {
  return draws_.empty() ? 0.0 : path_kl(y, theta) / static_cast<double>(draws_.size());
}

std::vector<KlEstimate> KlObjective::per_step(Outcome y, const ModelParams& theta) const {
  const MixtureDensity alt(theta), tru(truth_.theta);
  std::vector<KlEstimate> out;
  out.reserve(draws_.size());
  Eigen::ArrayXd lt, la;
  for (std::size_t t = 0; t < draws_.size(); ++t) {
    const double v = v_[static_cast<Eigen::Index>(t)];
    tru.log_density(truth_.y, v, draws_[t], lt);
    alt.log_density(y, v, draws_[t], la);
    out.push_back(estimate_from(lt - la));
  }
  return out;
}

namespace {

bool omega_pinned(const ParamBounds& b) {
  return b[Field::omega1].degenerate() && b[Field::omega2].degenerate() && b[Field::omega3].degenerate();
}

// Truth parameters moved into the search region, away from the simplex
// boundary so the log-ratio coordinates are finite.
ModelParams projected_start(const ModelParams& theta, const ParamBounds& b) {
  ModelParams p = theta;
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i) {
    const Interval& iv = b.interval[i];
    double& x = field_ref(p, field_at(i));
    x = std::clamp(x, iv.lower, iv.upper);
  }
  if (omega_pinned(b)) {
    p.omega = Vector3d(b[Field::omega1].lower, b[Field::omega2].lower, b[Field::omega3].lower);
  } else {
    p.omega = 0.98 * p.omega + Vector3d::Constant(0.02 / 3.0);
  }
  return p;
}

}  // namespace

GapResult projection_gap(const Law& truth, const VectorXd& v, const GapOptions& opts, Rng& rng) {
  if (v.size() == 0) throw DomainError("projection_gap: empty volume sequence");
  if (opts.restarts < 1 || opts.max_evaluations < 1) throw DomainError("projection_gap: invalid search settings");
  // The truth only has to define a proper law; it may sit outside the search region.
  const ValidationReport rep = validate_params(truth.theta, ParamBounds::defaults());
  using K = Violation::Kind;
  if (rep.has(K::Simplex) || rep.has(K::NonFinite) || rep.has(K::ScaleLowerBound))
    throw DomainError("projection_gap: invalid truth: " + rep.to_string());
  opts.bounds.validate();

  const Outcome wrong = flip(truth.y);
  const KlObjective search(truth, v, opts.search_samples, rng);

  std::array<bool, kNumFields> free{};
  free.fill(true);
  const ModelParams start = projected_start(truth.theta, opts.bounds);
  const ParamSpace space(opts.bounds, !omega_pinned(opts.bounds), free, start);

  const PriorSpec restart_prior = covering_prior(opts.bounds);
  std::vector<VectorXd> starts;
  for (int r = 0; r < opts.restarts; ++r) {
    if (r == 0 && opts.start_at_truth) {
      starts.push_back(space.to_unconstrained(start));
      continue;
    }
    ModelParams p = sample_prior(restart_prior, rng);
    if (!omega_pinned(opts.bounds)) p.omega = 0.98 * p.omega + Vector3d::Constant(0.02 / 3.0);
    starts.push_back(space.to_unconstrained(p));
  }

  auto objective = [&](const VectorXd& z) { return search.mean_kl(wrong, space.to_params(z)); };
  std::vector<NelderMeadResult> runs(static_cast<std::size_t>(opts.restarts));
  parallel_for(opts.restarts, opts.threads, [&](int r) {
    runs[static_cast<std::size_t>(r)] = nelder_mead(objective, starts[static_cast<std::size_t>(r)], 0.5,
                                                    opts.max_evaluations);
  });

  GapResult res;
  auto& diag = res.diagnostics;
  diag.restarts = opts.restarts;
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    diag.evaluations += runs[r].evaluations;
    diag.converged_restarts += runs[r].converged ? 1 : 0;
    diag.restart_best.push_back(runs[r].value);
    if (runs[r].value < runs[best].value) best = r;
    diag.best_trace.push_back(runs[best].value);
  }
  diag.search_objective = runs[best].value;

  // The search minimum overfits its own draws (by roughly dim / (2 T M)), so
  // every restart's optimum and start point is re-ranked on held-out draws.
  const KlObjective holdout(truth, v, opts.search_samples, rng);
  double best_holdout = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const VectorXd* z : {&runs[r].x, &starts[r]}) {
      const ModelParams cand = space.to_params(*z);
      const double h = holdout.mean_kl(wrong, cand);
      if (h < best_holdout) {
        best_holdout = h;
        res.argmin_theta = cand;
      }
    }
  }
  diag.holdout_objective = best_holdout;

  const KlObjective fresh(truth, v, opts.samples, rng);
  res.per_step = fresh.per_step(wrong, res.argmin_theta);
  double sum = 0.0, var = 0.0;
  for (const auto& e : res.per_step) {
    sum += e.value;
    var += e.std_error * e.std_error;
  }
  const auto T = static_cast<double>(res.per_step.size());
  res.delta_T = sum / T;
  res.std_error = std::sqrt(var) / T;
  return res;
}

void put_gap_result(KeyValues& kv, const GapResult& r) {
  kv.set("delta_T", r.delta_T);
  kv.set("std_error", r.std_error);
  kv.set("search_objective", r.diagnostics.search_objective);
  kv.set("holdout_objective", r.diagnostics.holdout_objective);
  kv.set("restarts", static_cast<long long>(r.diagnostics.restarts));
  kv.set("converged_restarts", static_cast<long long>(r.diagnostics.converged_restarts));
  kv.set("evaluations", static_cast<long long>(r.diagnostics.evaluations));
  for (int i = 0; i < kNumFields; ++i)
    kv.set("argmin." + std::string(field_name(field_at(i))), field_value(r.argmin_theta, field_at(i)));
}

void write_per_step_csv(std::ostream& os, const GapResult& r, const VectorXd& v) {
  os << "t,v,kl,std_error,samples\n";
  for (std::size_t t = 0; t < r.per_step.size(); ++t) {
    const auto& e = r.per_step[t];
    os << t + 1 << ',' << format_double(v[static_cast<Eigen::Index>(t)]) << ',' << format_double(e.value) << ','
       << format_double(e.std_error) << ',' << e.samples << '\n';
  }
}

}  // namespace pminv

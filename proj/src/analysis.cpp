#include "pminv/analysis.hpp"

#include "pminv/parallel.hpp"

#include <algorithm>

namespace pminv {

namespace {

double xlogx_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace

double realized_ig(double post_p1, double prior_p1) {
  if (!(prior_p1 > 0.0 && prior_p1 < 1.0)) throw DomainError("realized_ig: prior must lie in (0,1)");
  if (!(post_p1 >= 0.0 && post_p1 <= 1.0)) throw DomainError("realized_ig: posterior must lie in [0,1]");
  const double ig = xlogx_ratio(post_p1, prior_p1) + xlogx_ratio(1.0 - post_p1, 1.0 - prior_p1);
  return std::max(ig, 0.0);
}

double ig_from_log_bf(double log_bf, double prior_p1) {
  // Written in u directly so that large |u| keeps full precision.
  const double a = logit(prior_p1);
  const double pi = sigmoid(a + log_bf);
  // log(pi/pi0) = log_sigmoid(a+u) - log_sigmoid(a), likewise for 1-pi.
  auto log_sig = [](double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); };
  const double l1 = log_sig(a + log_bf) - log_sig(a);
  const double l0 = log_sig(-a - log_bf) - log_sig(-a);
  return std::max(pi * l1 + (1.0 - pi) * l0, 0.0);
}

double ig_derivative(double log_bf, double prior_p1) {
  const double pi = sigmoid(logit(prior_p1) + log_bf);
  return log_bf * pi * (1.0 - pi);
}

IgEstimate expected_ig(const ModelParams& theta_star, const VectorXd& v, double prior_p1, int reps,
                       const PriorSpec& prior, const SmcOptions& opts, std::uint64_t seed) {
  if (reps < 10) throw DomainError("expected_ig: need at least 10 replications");
  IgEstimate out;
  out.values.resize(static_cast<std::size_t>(reps));
  const std::vector<double> vol(v.data(), v.data() + v.size());
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    Rng rng(derive_seed(s, 0));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SimConfig cfg;
    cfg.T = static_cast<int>(v.size());
    cfg.y = unif(rng) < prior_p1 ? Outcome::Yes : Outcome::No;
    cfg.theta = theta_star;
    cfg.design = VolumeDesign::explicit_values(vol);
    cfg.seed = derive_seed(s, 1);
    const History h = simulate_history(cfg);
    const PosteriorSummary ps = posterior_summary(h, prior, prior_p1, opts, derive_seed(s, 2));
    out.values[static_cast<std::size_t>(r)] = realized_ig(ps.posterior_p1, prior_p1);
  }
  const Eigen::Map<const VectorXd> x(out.values.data(), reps);
  out.mean = x.mean();
  out.std_error = std::sqrt((x.array() - out.mean).square().sum() / (reps - 1) / reps);
  return out;
}

std::vector<ModelParams> theta_grid(const ParamBounds& bounds, const GridSpec& grid) {
  bounds.validate();
  const PriorSpec cover = covering_prior(bounds);
  Rng rng(derive_seed(grid.seed, 0x6772));
  std::vector<ModelParams> out;
  out.reserve(static_cast<std::size_t>(grid.theta_draws) + 6);
  for (int i = 0; i < grid.theta_draws; ++i) out.push_back(sample_prior(cover, rng));
  if (grid.corners) {
    std::vector<Vector3d> vertices;
    if (cover.omega.point) {
      vertices.push_back(cover.omega.value);
    } else {
      for (int k = 0; k < 3; ++k) vertices.push_back(Vector3d::Unit(k));
    }
    for (const Vector3d& w : vertices) {
      for (bool upper : {false, true}) {
        ModelParams p;
        p.omega = w;
        for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i)
          field_ref(p, field_at(i)) = upper ? bounds.interval[i].upper : bounds.interval[i].lower;
        out.push_back(p);
      }
    }
  }
  return out;
}

namespace {

Eigen::ArrayXd increment_grid(double R, int n) {
  if (n < 2) return Eigen::ArrayXd::Zero(1);
  return Eigen::ArrayXd::LinSpaced(n, -R, R);
}

double finite_abs_max(const Eigen::ArrayXd& a) {
  double m = 0.0;
  for (double x : a)
    if (std::isfinite(x)) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

LipschitzConstants lipschitz_constants(const ParamBounds& bounds, double R, Interval v_range, const GridSpec& grid) {
  if (!(R > 0.0)) throw DomainError("lipschitz_constants: R must be positive");
  if (!(v_range.lower >= 0.0) || v_range.upper < v_range.lower)
    throw DomainError("lipschitz_constants: invalid volume range");
  const std::vector<ModelParams> thetas = theta_grid(bounds, grid);
  const Eigen::ArrayXd xs = increment_grid(R, grid.increments);
  const Eigen::ArrayXd vs = v_range.degenerate() || grid.volumes < 2
                                ? Eigen::ArrayXd(Eigen::ArrayXd::Constant(1, v_range.lower))
                                : Eigen::ArrayXd(Eigen::ArrayXd::LinSpaced(grid.volumes, v_range.lower, v_range.upper));
  const double h = grid.fd_step;
  const Eigen::ArrayXd xp = xs + h, xm = xs - h;

  std::vector<double> lx(thetas.size(), 0.0), lv(thetas.size(), 0.0);
  parallel_for(static_cast<int>(thetas.size()), grid.threads, [&](int i) {
    const MixtureDensity f(thetas[static_cast<std::size_t>(i)]);
    Eigen::ArrayXd a, b;
    double mx = 0.0, mv = 0.0;
    for (Outcome y : {Outcome::No, Outcome::Yes}) {
      for (double v : vs) {
        f.log_density(y, v, xp, a);
        f.log_density(y, v, xm, b);
        mx = std::max(mx, finite_abs_max((a - b) / (2.0 * h)));
        // One-sided at v = 0.
        const double vlo = std::max(v - h, 0.0);
        f.log_density(y, v + h, xs, a);
        f.log_density(y, vlo, xs, b);
        mv = std::max(mv, finite_abs_max((a - b) / (v + h - vlo)));
      }
    }
    lx[static_cast<std::size_t>(i)] = mx;
    lv[static_cast<std::size_t>(i)] = mv;
  });

  LipschitzConstants c;
  c.lx = *std::max_element(lx.begin(), lx.end());
  c.lv = *std::max_element(lv.begin(), lv.end());
  c.R = R;
  c.v_range = v_range;
  c.grid = grid;
  c.theta_points = static_cast<int>(thetas.size());
  return c;
}

double lr_envelope(const ParamBounds& bounds, const ModelParams& theta_star, Outcome y_star, const VectorXd& v,
                   double R, const GridSpec& grid) {
  if (!(R > 0.0)) throw DomainError("lr_envelope: R must be positive");
  const std::vector<ModelParams> thetas = theta_grid(bounds, grid);
  const Eigen::ArrayXd xs = increment_grid(R, grid.increments);
  const MixtureDensity truth(theta_star);
  std::vector<Eigen::ArrayXd> lt(static_cast<std::size_t>(v.size()));
  for (Eigen::Index t = 0; t < v.size(); ++t) truth.log_density(y_star, v[t], xs, lt[static_cast<std::size_t>(t)]);

  const Outcome wrong = flip(y_star);
  std::vector<double> best(thetas.size(), 0.0);
  parallel_for(static_cast<int>(thetas.size()), grid.threads, [&](int i) {
    const MixtureDensity f(thetas[static_cast<std::size_t>(i)]);
    Eigen::ArrayXd la;
    double m = 0.0;
    for (Eigen::Index t = 0; t < v.size(); ++t) {
      f.log_density(wrong, v[t], xs, la);
      m = std::max(m, finite_abs_max(lt[static_cast<std::size_t>(t)] - la));
    }
    best[static_cast<std::size_t>(i)] = m;
  });
  return *std::max_element(best.begin(), best.end());
}

double history_distance(const History& h, const History& h_pert, double lambda_x, double lambda_v) {
  if (h.horizon() != h_pert.horizon()) throw DomainError("history_distance: horizons differ");
  const IncrementPath a = to_increments(h), b = to_increments(h_pert);
  return lambda_x * (a.dx - b.dx).cwiseAbs().sum() + lambda_v * (h.v - h_pert.v).cwiseAbs().sum();
}

StabilityReport stability_bound(const History& h, const History& h_pert, double R, double lx_R, double lv_R,
                                double observed_bf_diff) {
  if (h.horizon() != h_pert.horizon()) throw DomainError("stability_bound: horizons differ");
  if (!(R > 0.0) || lx_R < 0.0 || lv_R < 0.0) throw DomainError("stability_bound: invalid constants");
  const IncrementPath a = to_increments(h), b = to_increments(h_pert);
  StabilityReport r;
  r.lx_R = lx_R;
  r.lv_R = lv_R;
  r.R = R;
  r.sum_abs_dx_diff = (a.dx - b.dx).cwiseAbs().sum();
  r.sum_abs_v_diff = (h.v - h_pert.v).cwiseAbs().sum();
  r.bf_bound = 2.0 * (lx_R * r.sum_abs_dx_diff + lv_R * r.sum_abs_v_diff);
  r.posterior_bound = r.bf_bound / 4.0;
  r.observed_bf_diff = observed_bf_diff;
  const auto within = [R](const VectorXd& dx) { return dx.size() == 0 || dx.cwiseAbs().maxCoeff() <= R; };
  r.on_event = within(a.dx) && within(b.dx);
  return r;
}

void FiniteSampleInputs::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < delta_T)) throw DomainError("finite_sample_bound: need 0 < epsilon < delta_T");
  if (!(q > 2.0)) throw DomainError("finite_sample_bound: need q > 2");
  if (!(R > 0.0) || !(B_R > 0.0) || T < 1 || !(C_q > 0.0))
    throw DomainError("finite_sample_bound: R, B_R, T and C_q must be positive");
}

FiniteSampleBound finite_sample_bound(const FiniteSampleInputs& inp) {
  inp.validate();
  FiniteSampleBound b;
  b.tail_term = std::exp(-inp.T * inp.epsilon * inp.epsilon / (2.0 * inp.B_R * inp.B_R));
  b.event_term = inp.T * inp.C_q * std::pow(inp.R, -inp.q);
  b.prob_bound = b.tail_term + b.event_term;
  b.expected_error_bound = std::exp(-inp.T * (inp.delta_T - inp.epsilon)) + b.prob_bound;
  return b;
}

MomentControl estimate_moment_control(Outcome y, const ModelParams& theta, const VolumeDesign& design, int samples,
                                      Rng& rng) {
  if (samples < 1) throw DomainError("estimate_moment_control: need samples");
  MomentControl m;
  m.q = std::min(theta.nu, 4.0) - 0.5;
  if (!(m.q > 2.0)) throw DomainError("estimate_moment_control: tail index too small for q > 2");
  VectorXd v;
  if (design.kind == VolumeDesign::Kind::Explicit) {
    if (design.values.empty()) throw DomainError("estimate_moment_control: empty explicit design");
    v.resize(samples);
    for (int i = 0; i < samples; ++i) v[i] = design.values[static_cast<std::size_t>(i) % design.values.size()];
  } else {
    v = sample_volumes(design, samples, rng);
  }
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) acc += std::pow(std::abs(sample_increment(y, v[i], theta, rng)), m.q);
  m.samples = samples;
  m.empirical_moment = acc / samples;
  m.C_q = 2.0 * m.empirical_moment;
  return m;
}

void put_stability_report(KeyValues& kv, const StabilityReport& r) {
  kv.set("lx_R", r.lx_R);
  kv.set("lv_R", r.lv_R);
  kv.set("R", r.R);
  kv.set("sum_abs_dx_diff", r.sum_abs_dx_diff);
  kv.set("sum_abs_v_diff", r.sum_abs_v_diff);
  kv.set("bf_bound", r.bf_bound);
  kv.set("posterior_bound", r.posterior_bound);
  kv.set("observed_bf_diff", r.observed_bf_diff);
  kv.set("on_event", std::string(r.on_event ? "true" : "false"));
}

void put_lipschitz(KeyValues& kv, const LipschitzConstants& c) {
  kv.set("lx_R", c.lx);
  kv.set("lv_R", c.lv);
  kv.set("R", c.R);
  kv.set("v_lower", c.v_range.lower);
  kv.set("v_upper", c.v_range.upper);
  kv.set("grid.increments", static_cast<long long>(c.grid.increments));
  kv.set("grid.volumes", static_cast<long long>(c.grid.volumes));
  kv.set("grid.theta_draws", static_cast<long long>(c.grid.theta_draws));
  kv.set("grid.corners", std::string(c.grid.corners ? "true" : "false"));
  kv.set("grid.theta_points", static_cast<long long>(c.theta_points));
  kv.set("grid.fd_step", c.grid.fd_step);
  kv.set("grid.seed", static_cast<long long>(c.grid.seed));
  kv.set("note", std::string("grid supremum; a lower bound on the true supremum"));
}

}  // namespace pminv

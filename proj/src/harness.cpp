#include "pminv/harness.hpp"

#include "pminv/parallel.hpp"
#include "pminv/params_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace pminv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::pair<ExperimentKind, std::string_view>>& kind_table() {
  static const std::vector<std::pair<ExperimentKind, std::string_view>> t{
      {ExperimentKind::Concentration, "concentration"}, {ExperimentKind::Identifiability, "identifiability"},
      {ExperimentKind::Stability, "stability"},         {ExperimentKind::InfoGain, "infogain"},
      {ExperimentKind::KlGap, "klgap"},                 {ExperimentKind::Predicate, "predicate"}};
  return t;
}

}  // namespace

std::string_view kind_name(ExperimentKind k) {
  for (const auto& [kind, name] : kind_table())
    if (kind == k) return name;
  return "unknown";
}

ExperimentKind kind_from_name(std::string_view name) {
  for (const auto& [kind, n] : kind_table())
    if (n == name) return kind;
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

// --- Configuration -----------------------------------------------------------

void ExperimentConfig::apply_paper_scale() {
  replications = 1000;
  particles = 1000;
  T_grid = {10, 25, 50, 100, 200, 500};
  omega1_grid = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  sigma_grid = {0.01, 0.02, 0.05, 0.1, 0.2};
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (particles < 2) throw ConfigError("particles must be at least 2");
  if (T < 1) throw ConfigError("T must be positive");
  if (!(prior_p1 > 0.0 && prior_p1 < 1.0)) throw ConfigError("prior_p1 must lie in (0,1)");
  if (!(r_quantile > 0.0 && r_quantile <= 1.0)) throw ConfigError("r_quantile must lie in (0,1]");
  switch (kind) {
    case ExperimentKind::Concentration:
      if (T_grid.empty()) throw ConfigError("T_grid must be nonempty");
      for (int t : T_grid)
        if (t < 1) throw ConfigError("T_grid entries must be positive");
      break;
    case ExperimentKind::Identifiability:
    case ExperimentKind::KlGap:
    case ExperimentKind::Predicate:
      if (omega1_grid.empty()) throw ConfigError("omega1_grid must be nonempty");
      for (double w : omega1_grid)
        if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("omega1_grid entries must lie in [0,1]");
      break;
    case ExperimentKind::Stability:
      if (sigma_grid.empty()) throw ConfigError("sigma_grid must be nonempty");
      for (double s : sigma_grid)
        if (!(s >= 0.0)) throw ConfigError("sigma_grid entries must be nonnegative");
      break;
    case ExperimentKind::InfoGain:
      break;
  }
  if (kind == ExperimentKind::Predicate && !(rho_lb > 0.0 && m_lb > 0.0))
    throw ConfigError("rho_lb and m_lb must be positive");
  const ValidationReport rep = validate_params(theta_star, prior.bounds);
  if (!rep.ok()) throw ConfigError("theta_star: " + rep.to_string());
  try {
    design.validate();
    prior.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_double(xs[i]);
  return out;
}

bool known_key(const std::string& key) {
  static const std::set<std::string> plain{
      "kind",          "replications",        "T_grid",       "omega1_grid",     "sigma_grid",  "T",
      "prior_p1",      "particles",           "base_seed",    "output_dir",      "threads",     "paper_scale",
      "volume.shape",  "volume.scale",        "volume.constant", "prior.nu_uniform", "gap.restarts",
      "gap.max_evaluations", "gap.search_samples", "gap.samples", "reference_delta", "grid.increments",
      "grid.volumes",  "grid.theta_draws",    "grid.seed",    "r_quantile",      "rho_lb",      "m_lb"};
  if (plain.count(key)) return true;
  for (const std::string prefix : {"theta.", "bounds."}) {
    if (key.rfind(prefix, 0) == 0) {
      try {
        field_from_name(key.substr(prefix.size()));
        return true;
      } catch (const std::exception&) {
        return false;
      }
    }
  }
  return false;
}

}  // namespace

ExperimentConfig config_from_kv(const KeyValues& kv, std::optional<ExperimentKind> kind) {
  for (const auto& [key, value] : kv.entries())
    if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  ExperimentConfig c;
  try {
    if (kind) {
      c.kind = *kind;
    } else if (kv.has("kind")) {
      c.kind = kind_from_name(kv.get("kind"));
    }
    if (c.kind == ExperimentKind::InfoGain) c.T = 600;
    if (kv.has("paper_scale") && parse_bool("paper_scale", kv.get("paper_scale"))) c.apply_paper_scale();
    c.replications = static_cast<int>(kv.get_int("replications", c.replications));
    if (kv.has("T_grid")) {
      c.T_grid.clear();
      for (double t : kv.get_list("T_grid")) c.T_grid.push_back(static_cast<int>(t));
    }
    if (kv.has("omega1_grid")) c.omega1_grid = kv.get_list("omega1_grid");
    if (kv.has("sigma_grid")) c.sigma_grid = kv.get_list("sigma_grid");
    c.T = static_cast<int>(kv.get_int("T", c.T));
    c.prior_p1 = kv.get_double("prior_p1", c.prior_p1);
    c.particles = static_cast<int>(kv.get_int("particles", c.particles));
    c.base_seed = static_cast<std::uint64_t>(kv.get_int("base_seed", static_cast<long long>(c.base_seed)));
    c.output_dir = kv.get_string("output_dir", c.output_dir);
    c.threads = static_cast<int>(kv.get_int("threads", c.threads));
    c.theta_star = get_params(kv, c.theta_star, "theta.");

    if (kv.has("volume.constant")) {
      c.design = VolumeDesign::constant(kv.get_double("volume.constant"));
    } else {
      c.design = VolumeDesign::gamma_iid(kv.get_double("volume.shape", 2.0), kv.get_double("volume.scale", 0.5));
    }

    ParamBounds bounds = ParamBounds::defaults();
    for (int i = 0; i < kNumFields; ++i) {
      const std::string key = "bounds." + std::string(field_name(field_at(i)));
      if (!kv.has(key)) continue;
      const std::vector<double> lh = kv.get_list(key);
      if (lh.size() != 2) throw ConfigError(key + ": expected 'lower,upper'");
      bounds.interval[i] = {lh[0], lh[1]};
    }
    try {
      bounds.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    const bool nu_uniform = kv.has("prior.nu_uniform") && parse_bool("prior.nu_uniform", kv.get("prior.nu_uniform"));
    c.prior = PriorSpec::defaults(bounds, nu_uniform);
    c.gap.bounds = bounds;

    c.gap.restarts = static_cast<int>(kv.get_int("gap.restarts", c.gap.restarts));
    c.gap.max_evaluations = static_cast<int>(kv.get_int("gap.max_evaluations", c.gap.max_evaluations));
    c.gap.search_samples = static_cast<int>(kv.get_int("gap.search_samples", c.gap.search_samples));
    c.gap.samples = static_cast<int>(kv.get_int("gap.samples", c.gap.samples));
    if (kv.has("reference_delta")) c.reference_delta = kv.get_double("reference_delta");
    c.grid.increments = static_cast<int>(kv.get_int("grid.increments", c.grid.increments));
    c.grid.volumes = static_cast<int>(kv.get_int("grid.volumes", c.grid.volumes));
    c.grid.theta_draws = static_cast<int>(kv.get_int("grid.theta_draws", c.grid.theta_draws));
    c.grid.seed = static_cast<std::uint64_t>(kv.get_int("grid.seed", static_cast<long long>(c.grid.seed)));
    c.r_quantile = kv.get_double("r_quantile", c.r_quantile);
    c.rho_lb = kv.get_double("rho_lb", c.rho_lb);
    c.m_lb = kv.get_double("m_lb", c.m_lb);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

KeyValues config_to_kv(const ExperimentConfig& c) {
  KeyValues kv;
  kv.set("kind", std::string(kind_name(c.kind)));
  kv.set("replications", static_cast<long long>(c.replications));
  std::vector<double> tg(c.T_grid.begin(), c.T_grid.end());
  kv.set("T_grid", join(tg));
  kv.set("omega1_grid", join(c.omega1_grid));
  kv.set("sigma_grid", join(c.sigma_grid));
  kv.set("T", static_cast<long long>(c.T));
  kv.set("prior_p1", c.prior_p1);
  kv.set("particles", static_cast<long long>(c.particles));
  kv.set("base_seed", static_cast<long long>(c.base_seed));
  kv.set("output_dir", c.output_dir);
  kv.set("threads", static_cast<long long>(c.threads));
  put_params(kv, c.theta_star, "theta.");
  if (c.design.kind == VolumeDesign::Kind::Constant) {
    kv.set("volume.constant", c.design.value);
  } else {
    kv.set("volume.shape", c.design.shape);
    kv.set("volume.scale", c.design.scale);
  }
  kv.set("prior.nu_uniform", std::string(c.prior[Field::nu].is_point() ? "false" : "true"));
  for (int i = 0; i < kNumFields; ++i)
    kv.set("bounds." + std::string(field_name(field_at(i))),
           join({c.prior.bounds.interval[i].lower, c.prior.bounds.interval[i].upper}));
  kv.set("gap.restarts", static_cast<long long>(c.gap.restarts));
  kv.set("gap.max_evaluations", static_cast<long long>(c.gap.max_evaluations));
  kv.set("gap.search_samples", static_cast<long long>(c.gap.search_samples));
  kv.set("gap.samples", static_cast<long long>(c.gap.samples));
  if (c.reference_delta) kv.set("reference_delta", *c.reference_delta);
  kv.set("grid.increments", static_cast<long long>(c.grid.increments));
  kv.set("grid.volumes", static_cast<long long>(c.grid.volumes));
  kv.set("grid.theta_draws", static_cast<long long>(c.grid.theta_draws));
  kv.set("grid.seed", static_cast<long long>(c.grid.seed));
  kv.set("r_quantile", c.r_quantile);
  kv.set("rho_lb", c.rho_lb);
  kv.set("m_lb", c.m_lb);
  return kv;
}

// --- Records -------------------------------------------------------------------

const std::vector<std::string>& aux_columns(ExperimentKind k) {
  static const std::vector<std::string> concentration{"T", "log_one_minus_pi"};
  static const std::vector<std::string> identifiability{"omega1", "correct"};
  static const std::vector<std::string> stability{"sigma",          "R",           "lx_R",
                                                  "lv_R",           "sum_abs_dx_diff", "bf_bound",
                                                  "posterior_bound", "observed_bf_diff", "posterior_diff",
                                                  "on_event",       "contained"};
  static const std::vector<std::string> infogain{"t"};
  static const std::vector<std::string> klgap{"omega1", "delta_T", "std_error", "search_objective",
                                              "converged_restarts"};
  static const std::vector<std::string> predicate{"omega1", "fraction", "holds", "min_rho1", "min_separation"};
  switch (k) {
    case ExperimentKind::Concentration: return concentration;
    case ExperimentKind::Identifiability: return identifiability;
    case ExperimentKind::Stability: return stability;
    case ExperimentKind::InfoGain: return infogain;
    case ExperimentKind::KlGap: return klgap;
    case ExperimentKind::Predicate: return predicate;
  }
  return concentration;
}

std::string record_header(ExperimentKind k) {
  std::string h = "kind,replication,grid_point,seed,y_true,posterior_p1,log_bf,ig";
  for (const auto& c : aux_columns(k)) h += "," + c;
  return h;
}

std::vector<double> aggregate_quantiles(std::vector<double> values, const std::vector<double>& qs) {
  if (values.empty()) throw DomainError("aggregate_quantiles: empty input");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("aggregate_quantiles: level outside [0,1]");
    const double pos = q * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.push_back(frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]));
  }
  return out;
}

PredicateResult identifiability_predicate(const ModelParams& theta_star, const VectorXd& v, double rho_lb,
                                          double m_lb) {
  if (!(rho_lb > 0.0 && m_lb > 0.0)) throw DomainError("identifiability_predicate: constants must be positive");
  PredicateResult r;
  r.min_rho1 = std::numeric_limits<double>::infinity();
  r.min_separation = std::numeric_limits<double>::infinity();
  r.min_scale = std::numeric_limits<double>::infinity();
  r.max_scale = 0.0;
  for (Eigen::Index t = 0; t < v.size(); ++t) {
    const double rho1 = gate_weights(v[t], theta_star)[0];
    const double sep = std::abs(type_location(TraderType::Informed, Outcome::Yes, v[t], theta_star) -
                                type_location(TraderType::Informed, Outcome::No, v[t], theta_star));
    const bool manip_off = v[t] <= theta_star.tau3;
    if (rho1 >= rho_lb && sep >= m_lb && manip_off) {
      r.active.push_back(static_cast<int>(t) + 1);
      r.min_rho1 = std::min(r.min_rho1, rho1);
      r.min_separation = std::min(r.min_separation, sep);
      for (TraderType k : {TraderType::Informed, TraderType::Noise}) {
        const double s = type_scale(k, v[t], theta_star);
        r.min_scale = std::min(r.min_scale, s);
        r.max_scale = std::max(r.max_scale, s);
      }
    }
  }
  if (r.active.empty()) r.min_rho1 = r.min_separation = r.min_scale = 0.0;
  r.fraction = v.size() > 0 ? static_cast<double>(r.active.size()) / static_cast<double>(v.size()) : 0.0;
  r.holds = r.fraction > 0.0;
  return r;
}

// --- Running -------------------------------------------------------------------

namespace {

double log_one_minus(double prior_p1, double log_bf) {
  // log(1 - sigmoid(a)) = -log1p(exp(a)), written stably.
  const double a = logit(prior_p1) + log_bf;
  return a > 0.0 ? -a - std::log1p(std::exp(-a)) : -std::log1p(std::exp(a));
}

ModelParams with_omega1(ModelParams p, double w1) {
  p.omega = Vector3d(w1, 0.5 * (1.0 - w1), 0.5 * (1.0 - w1));
  return p;
}

History simulate(const ExperimentConfig& cfg, int T, Outcome y, const ModelParams& theta, std::uint64_t seed) {
  SimConfig s;
  s.T = T;
  s.y = y;
  s.theta = theta;
  s.design = cfg.design;
  s.seed = seed;
  return simulate_history(s);
}

SmcOptions smc_options(const ExperimentConfig& cfg) {
  SmcOptions o;
  o.particles = cfg.particles;
  return o;
}

ExperimentRecord base_record(const ExperimentConfig& cfg, int r, double grid_point, Outcome y) {
  ExperimentRecord rec;
  rec.kind = cfg.kind;
  rec.replication = r;
  rec.grid_point = grid_point;
  rec.seed = cfg.base_seed + static_cast<std::uint64_t>(r);
  rec.y_true = as_int(y);
  return rec;
}

void fill_posterior(ExperimentRecord& rec, const PosteriorSummary& s, double prior_p1) {
  rec.log_bf = s.log_bf;
  rec.posterior_p1 = s.posterior_p1;
  rec.ig = realized_ig(s.posterior_p1, prior_p1);
}

void mark_no_posterior(ExperimentRecord& rec) { rec.posterior_p1 = rec.log_bf = rec.ig = kNaN; }

// One slot per (grid index, replication); a failed slot stays empty.
struct Slots {
  int grid = 0, reps = 0;
  std::vector<std::vector<ExperimentRecord>> out;
  std::vector<char> failed;
  Slots(int g, int r) : grid(g), reps(r), out(static_cast<std::size_t>(g * r)), failed(static_cast<std::size_t>(g * r), 0) {}
};

template <class F>
void run_slots(const ExperimentConfig& cfg, Slots& slots, const std::vector<double>& grid_points, F&& task) {
  parallel_for(slots.grid * slots.reps, cfg.threads, [&](int idx) {
    const int g = idx / slots.reps, r = idx % slots.reps;
    try {
      slots.out[static_cast<std::size_t>(idx)] = task(g, r);
    } catch (const std::exception& e) {
      slots.failed[static_cast<std::size_t>(idx)] = 1;
      std::ostringstream msg;
      msg << "replication " << r << " (grid point " << format_double(grid_points[static_cast<std::size_t>(g)])
          << ", seed " << cfg.base_seed + static_cast<std::uint64_t>(r) << ") failed: " << e.what() << '\n';
      std::cerr << msg.str();
    }
  });
}

void collect(const Slots& slots, const std::vector<double>& grid_points, std::vector<ExperimentRecord>& records,
             std::vector<std::pair<double, int>>& failures) {
  for (int g = 0; g < slots.grid; ++g) {
    int failed = 0;
    for (int r = 0; r < slots.reps; ++r) {
      const auto idx = static_cast<std::size_t>(g * slots.reps + r);
      failed += slots.failed[idx];
      for (const auto& rec : slots.out[idx]) records.push_back(rec);
    }
    failures.emplace_back(grid_points[static_cast<std::size_t>(g)], failed);
  }
}

double reference_gap(const ExperimentConfig& cfg) {
  Rng rng(derive_seed(cfg.base_seed, 0x500));
  const VectorXd v = sample_volumes(cfg.design, cfg.T, rng);
  return projection_gap(Law{Outcome::Yes, cfg.theta_star}, v, cfg.gap, rng).delta_T;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult res;
  std::vector<std::pair<double, int>> failures;
  const int reps = cfg.replications;
  const SmcOptions opts = smc_options(cfg);
  double R = 0.0, lx = 0.0, lv = 0.0;

  switch (cfg.kind) {
    case ExperimentKind::Concentration: {
      const std::vector<double> gp(cfg.T_grid.begin(), cfg.T_grid.end());
      Slots slots(static_cast<int>(gp.size()), reps);
      run_slots(cfg, slots, gp, [&](int g, int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const int T = cfg.T_grid[static_cast<std::size_t>(g)];
        const History h = simulate(cfg, T, Outcome::Yes, cfg.theta_star, derive_seed(s, 0x100 + g));
        const PosteriorSummary ps = posterior_summary(h, cfg.prior, cfg.prior_p1, opts, derive_seed(s, 0x200 + g));
        ExperimentRecord rec = base_record(cfg, r, T, Outcome::Yes);
        fill_posterior(rec, ps, cfg.prior_p1);
        rec.aux = {static_cast<double>(T), log_one_minus(cfg.prior_p1, ps.log_bf)};
        return std::vector<ExperimentRecord>{rec};
      });
      collect(slots, gp, res.records, failures);
      break;
    }
    case ExperimentKind::Identifiability: {
      const std::vector<double>& gp = cfg.omega1_grid;
      Slots slots(static_cast<int>(gp.size()), reps);
      run_slots(cfg, slots, gp, [&](int g, int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const double w1 = gp[static_cast<std::size_t>(g)];
        const Outcome y = r % 2 == 0 ? Outcome::Yes : Outcome::No;
        const History h = simulate(cfg, cfg.T, y, with_omega1(cfg.theta_star, w1), derive_seed(s, 0x100 + g));
        const PosteriorSummary ps = posterior_summary(h, cfg.prior, cfg.prior_p1, opts, derive_seed(s, 0x200 + g));
        ExperimentRecord rec = base_record(cfg, r, w1, y);
        fill_posterior(rec, ps, cfg.prior_p1);
        // Ties count as incorrect.
        const bool correct = y == Outcome::Yes ? ps.posterior_p1 > 0.5 : ps.posterior_p1 < 0.5;
        rec.aux = {w1, correct ? 1.0 : 0.0};
        return std::vector<ExperimentRecord>{rec};
      });
      collect(slots, gp, res.records, failures);
      break;
    }
    case ExperimentKind::Stability: {
      // Baselines first: R comes from their empirical max-increment quantile.
      std::vector<History> base(static_cast<std::size_t>(reps));
      std::vector<double> base_bf(static_cast<std::size_t>(reps), kNaN);
      std::vector<char> base_ok(static_cast<std::size_t>(reps), 0);
      parallel_for(reps, cfg.threads, [&](int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        try {
          base[static_cast<std::size_t>(r)] = simulate(cfg, cfg.T, Outcome::Yes, cfg.theta_star, derive_seed(s, 0x300));
          base_bf[static_cast<std::size_t>(r)] =
              posterior_summary(base[static_cast<std::size_t>(r)], cfg.prior, cfg.prior_p1, opts, derive_seed(s, 0x301))
                  .log_bf;
          base_ok[static_cast<std::size_t>(r)] = 1;
        } catch (const std::exception& e) {
          std::ostringstream msg;
          msg << "baseline " << r << " (seed " << s << ") failed: " << e.what() << '\n';
          std::cerr << msg.str();
        }
      });
      std::vector<double> maxabs;
      double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
      for (int r = 0; r < reps; ++r) {
        if (!base_ok[static_cast<std::size_t>(r)]) continue;
        const History& h = base[static_cast<std::size_t>(r)];
        maxabs.push_back(to_increments(h).dx.cwiseAbs().maxCoeff());
        vmin = std::min(vmin, h.v.minCoeff());
        vmax = std::max(vmax, h.v.maxCoeff());
      }
      if (maxabs.empty()) throw NumericalError("stability: every baseline replication failed");
      R = aggregate_quantiles(maxabs, {cfg.r_quantile})[0];
      GridSpec grid = cfg.grid;
      grid.threads = cfg.threads;
      const LipschitzConstants lc = lipschitz_constants(cfg.prior.bounds, R, Interval{vmin, vmax}, grid);
      lx = lc.lx;
      lv = lc.lv;

      const std::vector<double>& gp = cfg.sigma_grid;
      Slots slots(static_cast<int>(gp.size()), reps);
      run_slots(cfg, slots, gp, [&](int g, int r) {
        if (!base_ok[static_cast<std::size_t>(r)]) throw NumericalError("baseline failed");
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const double sigma = gp[static_cast<std::size_t>(g)];
        const History& h = base[static_cast<std::size_t>(r)];
        Rng rng(derive_seed(s, 0x310 + g));
        const Perturbation pert = perturb_increments(h, sigma, rng);
        // Same SMC seed on both histories couples their Monte Carlo error.
        const PosteriorSummary ps =
            posterior_summary(pert.history, cfg.prior, cfg.prior_p1, opts, derive_seed(s, 0x301));
        const double observed = std::abs(ps.log_bf - base_bf[static_cast<std::size_t>(r)]);
        const StabilityReport sr = stability_bound(h, pert.history, R, lx, lv, observed);
        const double post_diff =
            std::abs(ps.posterior_p1 - posterior_probability(cfg.prior_p1, base_bf[static_cast<std::size_t>(r)]));
        ExperimentRecord rec = base_record(cfg, r, sigma, Outcome::Yes);
        fill_posterior(rec, ps, cfg.prior_p1);
        rec.aux = {sigma,          R,           lx,          lv,
                   sr.sum_abs_dx_diff, sr.bf_bound, sr.posterior_bound, observed,
                   post_diff,      sr.on_event ? 1.0 : 0.0, sr.contained() ? 1.0 : 0.0};
        return std::vector<ExperimentRecord>{rec};
      });
      collect(slots, gp, res.records, failures);
      break;
    }
    case ExperimentKind::InfoGain: {
      const std::vector<double> gp{static_cast<double>(cfg.T)};
      SmcOptions traced = opts;
      traced.record_trace = true;
      Slots slots(1, reps);
      run_slots(cfg, slots, gp, [&](int, int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const Outcome y = r % 2 == 0 ? Outcome::Yes : Outcome::No;
        const History h = simulate(cfg, cfg.T, y, cfg.theta_star, derive_seed(s, 0x100));
        const PosteriorRun run =
            posterior_run(to_increments(h), h.v, cfg.prior, cfg.prior_p1, traced, derive_seed(s, 0x200));
        const auto& z1 = run.y1.diagnostics.log_normalizer_trace;
        const auto& z0 = run.y0.diagnostics.log_normalizer_trace;
        std::vector<ExperimentRecord> rows;
        rows.reserve(z1.size());
        for (std::size_t t = 0; t < z1.size(); ++t) {
          ExperimentRecord rec = base_record(cfg, r, static_cast<double>(t + 1), y);
          rec.log_bf = z1[t] - z0[t];
          rec.posterior_p1 = posterior_probability(cfg.prior_p1, rec.log_bf);
          rec.ig = realized_ig(rec.posterior_p1, cfg.prior_p1);
          rec.aux = {static_cast<double>(t + 1)};
          rows.push_back(rec);
        }
        return rows;
      });
      collect(slots, gp, res.records, failures);
      // Rows are ordered by replication then t; regroup by t.
      std::stable_sort(res.records.begin(), res.records.end(),
                       [](const ExperimentRecord& a, const ExperimentRecord& b) { return a.grid_point < b.grid_point; });
      break;
    }
    case ExperimentKind::KlGap: {
      const std::vector<double>& gp = cfg.omega1_grid;
      GapOptions gap = cfg.gap;
      if (static_cast<int>(gp.size()) * reps > 1) gap.threads = 1;
      else gap.threads = cfg.threads;
      Slots slots(static_cast<int>(gp.size()), reps);
      run_slots(cfg, slots, gp, [&](int g, int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const double w1 = gp[static_cast<std::size_t>(g)];
        Rng rng(derive_seed(s, 0x400 + g));
        const VectorXd v = sample_volumes(cfg.design, cfg.T, rng);
        const GapResult gr = projection_gap(Law{Outcome::Yes, with_omega1(cfg.theta_star, w1)}, v, gap, rng);
        ExperimentRecord rec = base_record(cfg, r, w1, Outcome::Yes);
        mark_no_posterior(rec);
        rec.aux = {w1, gr.delta_T, gr.std_error, gr.diagnostics.search_objective,
                   static_cast<double>(gr.diagnostics.converged_restarts)};
        return std::vector<ExperimentRecord>{rec};
      });
      collect(slots, gp, res.records, failures);
      break;
    }
    case ExperimentKind::Predicate: {
      const std::vector<double>& gp = cfg.omega1_grid;
      Slots slots(static_cast<int>(gp.size()), reps);
      run_slots(cfg, slots, gp, [&](int g, int r) {
        const std::uint64_t s = cfg.base_seed + static_cast<std::uint64_t>(r);
        const double w1 = gp[static_cast<std::size_t>(g)];
        Rng rng(derive_seed(s, 0x600 + g));
        const VectorXd v = sample_volumes(cfg.design, cfg.T, rng);
        const PredicateResult pr = identifiability_predicate(with_omega1(cfg.theta_star, w1), v, cfg.rho_lb, cfg.m_lb);
        ExperimentRecord rec = base_record(cfg, r, w1, Outcome::Yes);
        mark_no_posterior(rec);
        rec.aux = {w1, pr.fraction, pr.holds ? 1.0 : 0.0, pr.min_rho1, pr.min_separation};
        return std::vector<ExperimentRecord>{rec};
      });
      collect(slots, gp, res.records, failures);
      break;
    }
  }

  res.summary = summarize(cfg, res.records, failures);
  res.summary.R = R;
  res.summary.lx = lx;
  res.summary.lv = lv;
  if (cfg.kind == ExperimentKind::Concentration)
    res.summary.reference_delta = cfg.reference_delta ? *cfg.reference_delta : reference_gap(cfg);
  return res;
}

ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<ExperimentRecord>& records,
                            const std::vector<std::pair<double, int>>& failures) {
  ExperimentSummary s;
  s.kind = cfg.kind;
  s.reference_delta = cfg.reference_delta;
  const auto cols = aux_columns(cfg.kind);
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin());
  };
  std::function<double(const ExperimentRecord&)> metric;
  switch (cfg.kind) {
    case ExperimentKind::Concentration:
      s.metric = "log_one_minus_pi";
      metric = [&](const ExperimentRecord& r) { return r.aux[col("log_one_minus_pi")]; };
      break;
    case ExperimentKind::Identifiability:
      s.metric = "posterior_of_truth";
      metric = [](const ExperimentRecord& r) { return r.y_true == 1 ? r.posterior_p1 : 1.0 - r.posterior_p1; };
      break;
    case ExperimentKind::Stability:
      s.metric = "observed_bf_diff";
      metric = [&](const ExperimentRecord& r) { return r.aux[col("observed_bf_diff")]; };
      break;
    case ExperimentKind::InfoGain:
      s.metric = "ig";
      metric = [](const ExperimentRecord& r) { return r.ig; };
      break;
    case ExperimentKind::KlGap:
      s.metric = "delta_T";
      metric = [&](const ExperimentRecord& r) { return r.aux[col("delta_T")]; };
      break;
    case ExperimentKind::Predicate:
      s.metric = "fraction";
      metric = [&](const ExperimentRecord& r) { return r.aux[col("fraction")]; };
      break;
  }

  std::vector<double> points;
  for (const auto& [gp, n] : failures) {
    points.push_back(gp);
    s.failures += n;
  }
  if (cfg.kind == ExperimentKind::InfoGain) {
    points.clear();
    for (const auto& r : records)
      if (points.empty() || points.back() != r.grid_point) points.push_back(r.grid_point);
  }
  std::size_t i = 0;
  for (double gp : points) {
    SummaryRow row;
    row.grid_point = gp;
    for (const auto& [fp, n] : failures)
      if (fp == gp) row.failures = n;
    std::vector<double> vals, rate_num, refs;
    for (; i < records.size() && records[i].grid_point == gp; ++i) {
      const ExperimentRecord& r = records[i];
      vals.push_back(metric(r));
      switch (cfg.kind) {
        case ExperimentKind::Identifiability: rate_num.push_back(r.aux[col("correct")]); break;
        case ExperimentKind::Stability:
          if (r.aux[col("on_event")] > 0.5) rate_num.push_back(r.aux[col("contained")]);
          refs.push_back(r.aux[col("bf_bound")]);
          break;
        case ExperimentKind::Predicate: rate_num.push_back(r.aux[col("holds")]); break;
        default: break;
      }
    }
    row.n = static_cast<int>(vals.size());
    if (!vals.empty()) {
      row.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      const auto q = aggregate_quantiles(vals, {0.5, 0.1, 0.9});
      row.median = q[0];
      row.q10 = q[1];
      row.q90 = q[2];
    } else {
      row.mean = row.median = row.q10 = row.q90 = kNaN;
    }
    row.rate = rate_num.empty() ? kNaN
                                : std::accumulate(rate_num.begin(), rate_num.end(), 0.0) /
                                      static_cast<double>(rate_num.size());
    row.reference = refs.empty() ? kNaN : aggregate_quantiles(refs, {0.5})[0];
    s.rows.push_back(row);
  }

  if (cfg.kind == ExperimentKind::Concentration) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& row : s.rows) {
      if (row.n == 0) continue;
      sx += row.grid_point;
      sy += row.median;
      sxx += row.grid_point * row.grid_point;
      sxy += row.grid_point * row.median;
      ++n;
    }
    const double den = n * sxx - sx * sx;
    s.median_slope = n >= 2 && den != 0.0 ? (n * sxy - sx * sy) / den : kNaN;
  }
  return s;
}

// --- Output --------------------------------------------------------------------

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& records, ExperimentKind kind) {
  os << record_header(kind) << '\n';
  for (const auto& r : records) {
    os << kind_name(kind) << ',' << r.replication << ',' << format_double(r.grid_point) << ',' << r.seed << ','
       << r.y_true << ',' << format_double(r.posterior_p1) << ',' << format_double(r.log_bf) << ','
       << format_double(r.ig);
    for (double a : r.aux) os << ',' << format_double(a);
    os << '\n';
  }
}

void write_summary_csv(std::ostream& os, const ExperimentSummary& s) {
  os << "grid_point,n,failures,mean,median,q10,q90,rate,reference\n";
  for (const auto& r : s.rows) {
    os << format_double(r.grid_point) << ',' << r.n << ',' << r.failures << ',' << format_double(r.mean) << ','
       << format_double(r.median) << ',' << format_double(r.q10) << ',' << format_double(r.q90) << ','
       << format_double(r.rate) << ',' << format_double(r.reference) << '\n';
  }
}

namespace {

std::string fmt(double x, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

struct Plot {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 420, L = 80, Rm = 30, Tm = 40, B = 60;
  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - Rm); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - Tm - B); }
};

}  // namespace

std::string render_svg(const ExperimentSummary& s) {
  const bool log_y = s.kind == ExperimentKind::Stability;
  auto tr = [&](double y) { return log_y ? std::log10(std::max(y, 1e-12)) : y; };
  const bool use_mean = s.kind == ExperimentKind::InfoGain;
  const bool use_rate = s.kind == ExperimentKind::Identifiability;

  std::vector<double> xs, mid, lo, hi, ref;
  for (const auto& r : s.rows) {
    if (r.n == 0) continue;
    xs.push_back(r.grid_point);
    mid.push_back(tr(use_rate ? r.rate : use_mean ? r.mean : r.median));
    lo.push_back(tr(use_rate ? r.rate : r.q10));
    hi.push_back(tr(use_rate ? r.rate : r.q90));
    if (s.kind == ExperimentKind::Stability) ref.push_back(tr(r.reference));
  }
  std::vector<std::pair<double, double>> dashed;
  if (s.kind == ExperimentKind::Concentration && s.reference_delta && !xs.empty()) {
    for (double x : {xs.front(), xs.back()}) dashed.emplace_back(x, mid.front() - *s.reference_delta * (x - xs.front()));
  } else if (s.kind == ExperimentKind::InfoGain && !xs.empty()) {
    dashed = {{xs.front(), std::log(2.0)}, {xs.back(), std::log(2.0)}};
  } else if (s.kind == ExperimentKind::Stability) {
    for (std::size_t i = 0; i < xs.size(); ++i) dashed.emplace_back(xs[i], ref[i]);
  }

  Plot p{0, 1, 0, 1};
  if (!xs.empty()) {
    p.x0 = xs.front();
    p.x1 = xs.back();
    if (p.x1 == p.x0) p.x1 = p.x0 + 1.0;
    p.y0 = *std::min_element(lo.begin(), lo.end());
    p.y1 = *std::max_element(hi.begin(), hi.end());
    for (const auto& [x, y] : dashed) {
      p.y0 = std::min(p.y0, y);
      p.y1 = std::max(p.y1, y);
    }
    if (s.kind == ExperimentKind::Identifiability) {
      p.y0 = 0.0;
      p.y1 = 1.0;
    }
    const double pad = p.y1 > p.y0 ? 0.05 * (p.y1 - p.y0) : 0.5;
    p.y0 -= pad;
    p.y1 += pad;
  }

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  o << "<rect width=\"640\" height=\"420\" fill=\"white\"/>\n";
  o << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << kind_name(s.kind) << "</text>\n";
  // Axes and ticks.
  o << "<line x1=\"" << fmt(Plot::L) << "\" y1=\"" << fmt(Plot::H - Plot::B) << "\" x2=\"" << fmt(Plot::W - Plot::Rm)
    << "\" y2=\"" << fmt(Plot::H - Plot::B) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << fmt(Plot::L) << "\" y1=\"" << fmt(Plot::Tm) << "\" x2=\"" << fmt(Plot::L) << "\" y2=\""
    << fmt(Plot::H - Plot::B) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = p.x0 + (p.x1 - p.x0) * k / 4.0, yv = p.y0 + (p.y1 - p.y0) * k / 4.0;
    o << "<text x=\"" << fmt(p.px(xv)) << "\" y=\"" << fmt(Plot::H - Plot::B + 18)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(xv, "%.4g") << "</text>\n";
    o << "<text x=\"" << fmt(Plot::L - 6) << "\" y=\"" << fmt(p.py(yv) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(yv, "%.4g") << "</text>\n";
  }
  const std::string xlabel = s.kind == ExperimentKind::Concentration   ? "T"
                             : s.kind == ExperimentKind::Stability     ? "sigma"
                             : s.kind == ExperimentKind::InfoGain      ? "t"
                                                                       : "omega1";
  const std::string ylabel = (log_y ? "log10 " : "") + (use_rate ? std::string("accuracy") : s.metric);
  o << "<text x=\"" << fmt((Plot::L + Plot::W - Plot::Rm) / 2) << "\" y=\"" << fmt(Plot::H - 18)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel << "</text>\n";
  o << "<text x=\"18\" y=\"" << fmt((Plot::Tm + Plot::H - Plot::B) / 2) << "\" transform=\"rotate(-90 18 "
    << fmt((Plot::Tm + Plot::H - Plot::B) / 2) << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"13\">" << ylabel << "</text>\n";

  if (!xs.empty() && !use_rate) {
    o << "<polygon class=\"band\" fill=\"#cfe0f5\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) o << fmt(p.px(xs[i])) << ',' << fmt(p.py(hi[i])) << ' ';
    for (std::size_t i = xs.size(); i-- > 0;) o << fmt(p.px(xs[i])) << ',' << fmt(p.py(lo[i])) << ' ';
    o << "\"/>\n";
  }
  if (!xs.empty()) {
    o << "<polyline class=\"center\" fill=\"none\" stroke=\"#1f4e9a\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) o << fmt(p.px(xs[i])) << ',' << fmt(p.py(mid[i])) << ' ';
    o << "\"/>\n";
    if (xs.size() <= 50)
      for (std::size_t i = 0; i < xs.size(); ++i)
        o << "<circle cx=\"" << fmt(p.px(xs[i])) << "\" cy=\"" << fmt(p.py(mid[i])) << "\" r=\"3\" fill=\"#1f4e9a\"/>\n";
  }
  if (!dashed.empty()) {
    o << "<polyline class=\"reference\" fill=\"none\" stroke=\"#b03030\" stroke-width=\"1.5\" "
         "stroke-dasharray=\"6 4\" points=\"";
    for (const auto& [x, y] : dashed) o << fmt(p.px(x)) << ',' << fmt(p.py(y)) << ' ';
    o << "\"/>\n";
    std::string label;
    if (s.kind == ExperimentKind::Concentration) label = "slope -" + fmt(*s.reference_delta, "%.4g");
    if (s.kind == ExperimentKind::InfoGain) label = "log 2";
    if (s.kind == ExperimentKind::Stability) label = "stability bound";
    o << "<text class=\"reference-label\" x=\"" << fmt(Plot::W - Plot::Rm - 4) << "\" y=\"" << fmt(Plot::Tm + 14)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#b03030\">" << label
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::string> emit_outputs(const ExperimentResult& result, const std::string& dir) {
  if (result.records.empty()) throw DomainError("emit_outputs: empty record set");
  const ExperimentKind kind = result.summary.kind;
  const std::string stem(kind_name(kind));

  std::ostringstream records, summary, meta;
  write_records_csv(records, result.records, kind);
  write_summary_csv(summary, result.summary);
  KeyValues kv;
  kv.set("kind", stem);
  kv.set("metric", result.summary.metric);
  kv.set("failures", static_cast<long long>(result.summary.failures));
  if (result.summary.reference_delta) kv.set("reference_delta", *result.summary.reference_delta);
  if (kind == ExperimentKind::Concentration) kv.set("median_slope", result.summary.median_slope);
  if (kind == ExperimentKind::Stability) {
    kv.set("R", result.summary.R);
    kv.set("lx_R", result.summary.lx);
    kv.set("lv_R", result.summary.lv);
    kv.set("note", std::string("constants are grid suprema (lower bounds on the true suprema)"));
  }
  kv.write(meta);

  const std::vector<std::pair<std::string, std::string>> files{{stem + "_records.csv", records.str()},
                                                               {stem + "_summary.csv", summary.str()},
                                                               {stem + "_meta.txt", meta.str()},
                                                               {stem + ".svg", render_svg(result.summary)}};
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  // Stage every file before renaming so a failure leaves no partial output.
  std::vector<std::string> written;
  for (const auto& [name, body] : files) {
    const fs::path tmp = fs::path(dir) / (name + ".tmp");
    std::ofstream f(tmp, std::ios::binary);
    f << body;
    f.close();
    if (!f) {
      for (const auto& [n2, b2] : files) fs::remove(fs::path(dir) / (n2 + ".tmp"));
      throw std::runtime_error("emit_outputs: cannot write " + tmp.string());
    }
  }
  for (const auto& [name, body] : files) {
    fs::rename(fs::path(dir) / (name + ".tmp"), fs::path(dir) / name);
    written.push_back((fs::path(dir) / name).string());
  }
  return written;
}

}  // namespace pminv

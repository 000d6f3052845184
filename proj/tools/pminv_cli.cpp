// Command-line front end: simulate, infer, klgap, experiment <kind>, validate.
// Exit codes: 0 success, 1 configuration or input error, 2 runtime failure.

#include "pminv/harness.hpp"
#include "pminv/params_io.hpp"
#include "pminv/vi.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace pminv;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> replications;
  std::optional<int> particles;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--out", c.out, "output path (file or directory, per subcommand)");
  app->add_option("--replications", c.replications, "replication count")->check(CLI::PositiveNumber);
  app->add_option("--particles", c.particles, "SMC particle count")->check(CLI::Range(2, 1 << 24));
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
}

ExperimentConfig load_config(const Common& c, std::optional<ExperimentKind> kind, bool paper_scale = false) {
  KeyValues kv = c.config.empty() ? KeyValues{} : KeyValues::read(c.config);
  if (paper_scale) kv.set("paper_scale", std::string("true"));
  if (c.seed) kv.set("base_seed", static_cast<long long>(*c.seed));
  if (c.replications) kv.set("replications", static_cast<long long>(*c.replications));
  if (c.particles) kv.set("particles", static_cast<long long>(*c.particles));
  if (c.threads) kv.set("threads", static_cast<long long>(*c.threads));
  if (!c.out.empty()) kv.set("output_dir", c.out);
  return config_from_kv(kv, kind);
}

Outcome parse_outcome(int y) {
  if (y != 0 && y != 1) throw ConfigError("outcome must be 0 or 1");
  return outcome_from_int(y);
}

// Writes to `path`, or stdout when empty.
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  write(f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outcome inference from prediction-market price and volume histories"};
  app.require_subcommand(1);

  // simulate
  Common sim_c;
  int sim_T = 100, sim_y = 1;
  double sim_p0 = 0.5;
  std::string sim_theta;
  auto* sim = app.add_subcommand("simulate", "simulate a price-volume history (CSV t,p,v,x)");
  add_common(sim, sim_c);
  sim->add_option("--T", sim_T, "horizon")->check(CLI::PositiveNumber);
  sim->add_option("--y", sim_y, "true outcome (0 or 1)");
  sim->add_option("--p0", sim_p0, "initial price");
  sim->add_option("--theta", sim_theta, "parameter file (all 18 fields)")->check(CLI::ExistingFile);

  // infer
  Common inf_c;
  std::string inf_history, inf_method = "smc";
  double inf_prior = 0.5;
  auto* inf = app.add_subcommand("infer", "posterior outcome probability for a history");
  add_common(inf, inf_c);
  inf->add_option("--history", inf_history, "history CSV")->required()->check(CLI::ExistingFile);
  inf->add_option("--prior-p1", inf_prior, "prior P(Y=1)");
  inf->add_option("--method", inf_method, "smc or vi")->check(CLI::IsMember({"smc", "vi"}));

  // klgap
  Common kl_c;
  int kl_y = 1;
  std::string kl_theta;
  auto* kl = app.add_subcommand("klgap", "estimate the KL projection gap at the configured truth");
  add_common(kl, kl_c);
  kl->add_option("--y", kl_y, "true outcome (0 or 1)");
  kl->add_option("--theta", kl_theta, "parameter file (all 18 fields)")->check(CLI::ExistingFile);

  // experiment
  Common exp_c;
  std::string exp_kind;
  bool exp_paper = false;
  auto* exp = app.add_subcommand("experiment", "run a synthetic experiment and write CSV and SVG outputs");
  add_common(exp, exp_c);
  exp->add_option("kind", exp_kind, "concentration|identifiability|stability|infogain|klgap|predicate")->required();
  exp->add_flag("--paper-scale", exp_paper, "1000 replications, N = 1000, full grids");

  // validate
  Common val_c;
  std::string val_theta, val_history;
  auto* val = app.add_subcommand("validate", "check a config, parameter file or history");
  add_common(val, val_c);
  val->add_option("--theta", val_theta, "parameter file")->check(CLI::ExistingFile);
  val->add_option("--history", val_history, "history CSV")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      ExperimentConfig cfg = load_config(sim_c, std::nullopt);
      SimConfig s;
      s.T = sim_T;
      s.y = parse_outcome(sim_y);
      s.p0 = sim_p0;
      s.theta = sim_theta.empty() ? cfg.theta_star : read_params_file(sim_theta);
      s.design = cfg.design;
      s.seed = cfg.base_seed;
      s.validate();
      const History h = simulate_history(s);
      with_output(sim_c.out, [&](std::ostream& os) { write_history_csv(os, h); });
    } else if (*inf) {
      ExperimentConfig cfg = load_config(inf_c, std::nullopt);
      const History h = read_history_csv(inf_history);
      KeyValues kv;
      if (inf_method == "smc") {
        SmcOptions o;
        o.particles = cfg.particles;
        put_summary(kv, posterior_summary(h, cfg.prior, inf_prior, o, cfg.base_seed));
      } else {
        const IncrementPath inc = to_increments(h);
        const ViBayesFactor bf = vi_log_bf(inc.dx, h.v, cfg.prior, ViOptions{}, cfg.base_seed);
        kv.set("approx_log_bf", bf.approx_log_bf);
        kv.set("posterior_p1", posterior_probability(inf_prior, bf.approx_log_bf));
        kv.set("prior_p1", inf_prior);
        put_vi_result(kv, bf.fit1, "y1.");
        put_vi_result(kv, bf.fit0, "y0.");
      }
      with_output(inf_c.out, [&](std::ostream& os) { kv.write(os); });
    } else if (*kl) {
      ExperimentConfig cfg = load_config(kl_c, std::nullopt);
      const Law truth{parse_outcome(kl_y), kl_theta.empty() ? cfg.theta_star : read_params_file(kl_theta)};
      Rng rng(cfg.base_seed);
      const VectorXd v = sample_volumes(cfg.design, cfg.T, rng);
      GapOptions g = cfg.gap;
      g.threads = cfg.threads;
      const GapResult r = projection_gap(truth, v, g, rng);
      KeyValues kv;
      put_gap_result(kv, r);
      if (kl_c.out.empty()) {
        kv.write(std::cout);
      } else {
        std::filesystem::create_directories(kl_c.out);
        kv.write((std::filesystem::path(kl_c.out) / "klgap.txt").string());
        with_output((std::filesystem::path(kl_c.out) / "klgap_per_step.csv").string(),
                    [&](std::ostream& os) { write_per_step_csv(os, r, v); });
      }
    } else if (*exp) {
      const ExperimentKind kind = kind_from_name(exp_kind);
      const ExperimentConfig cfg = load_config(exp_c, kind, exp_paper);
      const ExperimentResult res = run_experiment(cfg);
      for (const auto& f : emit_outputs(res, cfg.output_dir)) std::cout << f << '\n';
      if (res.summary.failures > 0) std::cerr << res.summary.failures << " replication(s) failed\n";
    } else if (*val) {
      const ExperimentConfig cfg = load_config(val_c, std::nullopt);
      bool ok = true;
      if (!val_theta.empty()) {
        const ValidationReport rep = validate_params(read_params_file(val_theta), cfg.prior.bounds);
        std::cout << "theta: " << (rep.ok() ? "ok" : rep.to_string()) << '\n';
        ok = ok && rep.ok();
      }
      if (!val_history.empty()) {
        read_history_csv(val_history).validate();
        std::cout << "history: ok\n";
      }
      std::cout << "config: ok\n";
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

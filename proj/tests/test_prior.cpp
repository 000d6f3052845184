#include <doctest.h>

#include "pminv/prior.hpp"

using namespace pminv;

TEST_SUITE("prior") {

TEST_CASE("point mass") {
  ModelParams t = ModelParams::defaults();
  t.mu1 = 1.3;
  t.omega = Vector3d(0.7, 0.2, 0.1);
  const PriorSpec pm = PriorSpec::point_mass_at(t);
  Rng rng(1);
  CHECK(sample_prior(pm, rng) == t);
  CHECK(log_prior_density(pm, t) == 0.0);
  ModelParams other = t;
  other.mu1 = 1.4;
  CHECK(log_prior_density(pm, other) == kNegInf);
  CHECK(pm.space().dim() == 0);
}

TEST_CASE("default draws are valid and have the Dirichlet mean") {
  const PriorSpec spec = PriorSpec::defaults();
  Rng rng(2);
  Vector3d mean = Vector3d::Zero();
  const int n = 10000;
  int bad = 0;
  for (int i = 0; i < n; ++i) {
    const ModelParams p = sample_prior(spec, rng);
    if (!validate_params(p, spec.bounds).ok()) ++bad;
    if (!std::isfinite(log_prior_density(spec, p))) ++bad;
    mean += p.omega;
  }
  CHECK(bad == 0);
  mean /= n;
  CHECK((mean - Vector3d::Constant(1.0 / 3)).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("factor densities") {
  const Interval tau{0.0, 10.0};
  CHECK(ScalarPrior::uniform(tau).log_density(3.0) == doctest::Approx(std::log(0.1)));
  CHECK(ScalarPrior::uniform(tau).log_density(11.0) == kNegInf);

  // ratio of two in-support points equals the ratio of unnormalized densities
  const ScalarPrior n = ScalarPrior::normal(0.0, 1.0, {0.0, 3.0});
  CHECK(n.log_density(0.5) - n.log_density(2.0) == doctest::Approx(-0.125 + 2.0));
  const ScalarPrior ln = ScalarPrior::lognormal(std::log(0.3), 0.7, {0.05, 3.0});
  auto unnorm = [](double x) { return -std::log(x) - std::pow(std::log(x) - std::log(0.3), 2) / (2 * 0.49); };
  CHECK(ln.log_density(0.2) - ln.log_density(1.1) == doctest::Approx(unnorm(0.2) - unnorm(1.1)).epsilon(1e-12));

  OmegaPrior d;
  // Dirichlet(2,2,2) density is 120 w1 w2 w3
  CHECK(d.log_density(Vector3d(0.2, 0.3, 0.5)) == doctest::Approx(std::log(120 * 0.2 * 0.3 * 0.5)));
}

TEST_CASE("truncated factors integrate to one") {
  const ScalarPrior ln = ScalarPrior::lognormal(std::log(0.3), 0.7, {0.05, 3.0});
  const int n = 200000;
  const double h = (3.0 - 0.05) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(ln.log_density(0.05 + (i + 0.5) * h)) * h;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("support stays inside the bounds") {
  CHECK_NOTHROW(PriorSpec::defaults().validate());
  PriorSpec s = PriorSpec::defaults();
  s[Field::tau3] = ScalarPrior::uniform({-1.0, 10.0});
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("unconstrained density includes the Jacobian") {
  const PriorSpec spec = PriorSpec::defaults();
  const ParamSpace sp = spec.space();
  Rng rng(4);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 5; ++i) {
    VectorXd z(sp.dim());
    for (int j = 0; j < sp.dim(); ++j) z[j] = n01(rng);
    CHECK(log_prior_density_unconstrained(spec, sp, z) ==
          doctest::Approx(log_prior_density(spec, sp.to_params(z)) + sp.log_jacobian(z)).epsilon(1e-12));
    const VectorXd g = log_prior_density_unconstrained_gradient(spec, sp, z);
    for (int j = 0; j < sp.dim(); ++j) {
      VectorXd a = z, b = z;
      a[j] += 1e-6;
      b[j] -= 1e-6;
      const double fd =
          (log_prior_density_unconstrained(spec, sp, a) - log_prior_density_unconstrained(spec, sp, b)) / 2e-6;
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-4).scale(1e-4));
    }
  }
}

TEST_CASE("reparameterization round trip") {
  const PriorSpec spec = PriorSpec::defaults();
  const ParamSpace sp = spec.space();
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const ModelParams p = sample_prior(spec, rng);
    const ModelParams back = sp.to_params(sp.to_unconstrained(p));
    CHECK((to_flat(back) - to_flat(p)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

}

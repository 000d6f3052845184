#include <doctest.h>

#include "pminv/simulate.hpp"

#include <numeric>

using namespace pminv;

TEST_SUITE("simulate") {

TEST_CASE("volume designs") {
  Rng rng(1);
  CHECK(sample_volumes(VolumeDesign::constant(2.0), 3, rng) == VectorXd::Constant(3, 2.0));
  CHECK(sample_volumes(VolumeDesign::explicit_values({1, 2, 3}), 3, rng) == (VectorXd(3) << 1, 2, 3).finished());
  CHECK_THROWS(sample_volumes(VolumeDesign::explicit_values({1, 2, 3}), 4, rng));
  CHECK_THROWS(VolumeDesign::gamma_iid(-1.0, 0.5).validate());
  CHECK_THROWS(VolumeDesign::explicit_values({1, -2}).validate());

  const VectorXd g = sample_volumes(VolumeDesign::gamma_iid(2.0, 0.5), 1000000, rng);
  CHECK(std::abs(g.mean() - 1.0) < 0.005);
  CHECK(g.minCoeff() >= 0.0);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.T = 0;
  CHECK_THROWS(c.validate());
  c.T = 10;
  c.p0 = 1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("zero-noise hook with zero drifts keeps the price flat") {
  SimConfig c;
  c.T = 50;
  c.p0 = 0.3;
  c.theta.mu1 = 0.0;
  c.theta.mu3 = 0.0;
  c.zero_noise = true;
  const History h = simulate_history(c);
  for (Eigen::Index t = 0; t < h.p.size(); ++t) CHECK(h.p[t] == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("determinism and reconstruction") {
  SimConfig c;
  c.T = 200;
  c.seed = 99;
  const History a = simulate_history(c), b = simulate_history(c);
  CHECK(a.p == b.p);
  CHECK(a.v == b.v);
  CHECK((reconstruct_prices(to_increments(a)) - a.p).cwiseAbs().maxCoeff() < 1e-12);
  c.seed = 100;
  CHECK(simulate_history(c).p != a.p);
}

TEST_CASE("terminal price drifts toward the truth") {
  SimConfig c;
  c.T = 500;
  double mean = 0.0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    c.seed = 1 + r;
    mean += simulate_history(c).p[c.T];
  }
  mean /= reps;
  CHECK(mean > 0.5);
}

TEST_CASE("increment mean matches the gate-weighted drift") {
  const ModelParams p = ModelParams::defaults();
  const double v = 2.0;
  const Vector3d w = gate_weights(v, p);
  double drift = 0.0;
  for (int k = 0; k < kNumTypes; ++k) drift += w[k] * type_location(static_cast<TraderType>(k), Outcome::Yes, v, p);

  SimConfig c;
  c.T = 100000;
  c.design = VolumeDesign::constant(v);
  c.seed = 5;
  // a long path drifts far in log-odds; increments are what matter here
  Rng rng(c.seed);
  VectorXd dx(c.T);
  for (int t = 0; t < c.T; ++t) dx[t] = sample_increment(Outcome::Yes, v, p, rng);
  const double m = dx.mean();
  const double se = std::sqrt((dx.array() - m).square().sum() / (c.T - 1) / c.T);
  CHECK(std::abs(m - drift) < 3 * se);
}

TEST_CASE("replication streams are uncorrelated") {
  // increments of replication r and r + 1 paired by time
  const int pairs = 10000;
  SimConfig a, b;
  a.T = b.T = pairs;
  a.design = b.design = VolumeDesign::constant(1.0);
  a.theta.mu1 = b.theta.mu1 = 0.0;
  a.seed = 10;
  b.seed = 11;
  a.p0 = b.p0 = 0.5;
  // keep the path inside the representable range: zero drift, modest T
  const VectorXd x = to_increments(simulate_history(a)).dx, y = to_increments(simulate_history(b)).dx;
  const double mx = x.mean(), my = y.mean();
  const double cov = ((x.array() - mx) * (y.array() - my)).mean();
  const double corr = cov / std::sqrt((x.array() - mx).square().mean() * (y.array() - my).square().mean());
  CHECK(std::abs(corr) < 4.0 / std::sqrt(pairs));
}

TEST_CASE("perturbation") {
  SimConfig c;
  c.T = 100;
  const History h = simulate_history(c);
  Rng rng(3);
  const Perturbation same = perturb_increments(h, 0.0, rng);
  CHECK(same.history.p == h.p);
  CHECK(same.history.v == h.v);
  CHECK_THROWS_AS(perturb_increments(h, -0.1, rng), DomainError);

  const IncrementPath base = to_increments(h);
  double total = 0.0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    const Perturbation pp = perturb_increments(h, 0.1, rng);
    CHECK(pp.history.v == h.v);
    CHECK(pp.history.p[0] == h.p[0]);
    total += (to_increments(pp.history).dx - base.dx).cwiseAbs().sum();
  }
  // E sum |N(0, 0.1^2)| over 100 steps = 100 * 0.1 * sqrt(2/pi)
  CHECK(total / trials == doctest::Approx(100 * 0.1 * std::sqrt(2.0 / M_PI)).epsilon(0.01));
}

}

#include <doctest.h>

#include "pminv/logodds.hpp"

#include <sstream>

using namespace pminv;

TEST_SUITE("logodds") {

TEST_CASE("logit examples") {
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(0.75) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(std::abs(sigmoid(logit(0.3)) - 0.3) < 1e-14);
  CHECK_THROWS_AS(logit(0.0), DomainError);
  CHECK_THROWS_AS(logit(1.0), DomainError);
  CHECK_THROWS_AS(logit(-0.2), DomainError);
  CHECK_THROWS_AS(logit(std::nan("")), DomainError);
}

TEST_CASE("sigmoid examples and stability") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0986123) == doctest::Approx(0.75).epsilon(1e-7));
  const double tiny = sigmoid(-50.0);
  CHECK(tiny > 0.0);
  CHECK(tiny == doctest::Approx(1.9287498479639178e-22).epsilon(1e-12));
  CHECK(sigmoid(700.0) <= 1.0);
  CHECK(sigmoid(-700.0) > 0.0);
  CHECK(std::isfinite(sigmoid(-700.0)));
  CHECK_THROWS_AS(sigmoid(std::numeric_limits<double>::infinity()), DomainError);
  CHECK_THROWS_AS(sigmoid(std::nan("")), DomainError);
}

TEST_CASE("logit and sigmoid are inverse on a log-spaced grid") {
  double worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double a = std::pow(10.0, -8.0 + 8.0 * i / 400.0) ;  // [1e-8, 1]
    for (double p : {a * 0.5, 1.0 - a * 0.5}) {
      if (!(p > 0.0 && p < 1.0)) continue;
      worst = std::max(worst, std::abs(sigmoid(logit(p)) - p));
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("increments") {
  History h;
  h.p = (VectorXd(3) << 0.5, 0.5, 0.5).finished();
  h.v = VectorXd::Constant(2, 1.0);
  CHECK(to_increments(h).dx.isZero(0.0));

  History h2;
  h2.p = (VectorXd(2) << 0.5, 0.75).finished();
  h2.v = VectorXd::Constant(1, 1.0);
  const IncrementPath inc = to_increments(h2);
  CHECK(inc.x0 == 0.0);
  CHECK(inc.dx[0] == doctest::Approx(1.0986123).epsilon(1e-7));
}

TEST_CASE("round trip and leading zero increment") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  History h;
  h.p.resize(51);
  h.v.resize(50);
  for (int i = 0; i <= 50; ++i) h.p[i] = u(rng);
  for (int i = 0; i < 50; ++i) h.v[i] = u(rng);
  const IncrementPath inc = to_increments(h);
  CHECK((reconstruct_prices(inc) - h.p).cwiseAbs().maxCoeff() < 1e-12);

  History pre;
  pre.p.resize(52);
  pre.p << h.p[0], h.p;
  pre.v.resize(51);
  pre.v << 1.0, h.v;
  const IncrementPath inc2 = to_increments(pre);
  CHECK(inc2.dx[0] == 0.0);
  CHECK((inc2.dx.tail(50) - inc.dx).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("history validation") {
  History h;
  h.p = (VectorXd(2) << 0.5, 1.0).finished();
  h.v = VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(h.validate(), DomainError);
  h.p[1] = 0.4;
  h.v[0] = -1.0;
  CHECK_THROWS_AS(h.validate(), DomainError);
  h.v.resize(2);
  CHECK_THROWS_AS(h.validate(), DomainError);
}

TEST_CASE("log-odds path survives prices that round to one") {
  IncrementPath inc;
  inc.x0 = 0.0;
  inc.dx = VectorXd::Constant(10, 6.0);
  const History h = history_from_increments(inc, VectorXd::Constant(10, 1.0));
  CHECK(h.p[10] == 1.0);
  CHECK_NOTHROW(h.validate());
  CHECK((to_increments(h).dx - inc.dx).cwiseAbs().maxCoeff() < 1e-12);

  std::stringstream ss;
  write_history_csv(ss, h);
  CHECK(ss.str().rfind("t,p,v,x\n", 0) == 0);
  const History back = read_history_csv(ss);
  CHECK(back.x == h.x);
  CHECK((to_increments(back).dx - inc.dx).cwiseAbs().maxCoeff() < 1e-12);

  inc.dx = VectorXd::Constant(10, 80.0);
  CHECK_THROWS_AS(history_from_increments(inc, VectorXd::Constant(10, 1.0)), DomainError);
}

TEST_CASE("history CSV round trip") {
  History h;
  h.p = (VectorXd(4) << 0.5, 0.1234567890123456789, 0.9, 1e-9).finished();
  h.v = (VectorXd(3) << 0.0, 2.5, 1.0 / 3.0).finished();
  std::stringstream ss;
  write_history_csv(ss, h);
  CHECK(ss.str().rfind("t,p,v\n0,0.5,\n", 0) == 0);
  const History back = read_history_csv(ss);
  CHECK(back.p == h.p);
  CHECK(back.v == h.v);
}

}

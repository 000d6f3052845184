#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace pminv {

using Rng = std::mt19937_64;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using Vector3d = Eigen::Vector3d;

/// Binary event outcome Y.
enum class Outcome : int { No = 0, Yes = 1 };

inline int as_int(Outcome y) { return static_cast<int>(y); }
/// 2y - 1, the orientation of outcome-dependent drifts.
inline double orientation(Outcome y) { return y == Outcome::Yes ? 1.0 : -1.0; }
inline Outcome flip(Outcome y) { return y == Outcome::Yes ? Outcome::No : Outcome::Yes; }
inline Outcome outcome_from_int(int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("outcome must be 0 or 1");
  return static_cast<Outcome>(y);
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Thrown for arguments outside a function's mathematical domain.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Thrown when a numerical procedure produces a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((x.derived().array() - m).exp().sum());
}

/// SplitMix64 finalizer; used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace pminv

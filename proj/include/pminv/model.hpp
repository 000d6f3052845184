#pragma once

#include "pminv/common.hpp"
#include "pminv/logodds.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace pminv {

/// Latent trader types of the three-type model.
enum class TraderType : int { Informed = 0, Noise = 1, Manipulator = 2 };
inline constexpr int kNumTypes = 3;

/// Nuisance parameters of the Gaussian latent-type model with softmax
/// log-volume gating.
struct ModelParams {
  Vector3d omega{0.4, 0.4, 0.2};
  /// Row k holds (gamma_{k,0}, gamma_{k,1}).
  Eigen::Matrix<double, 3, 2> gamma = Eigen::Matrix<double, 3, 2>::Zero();
  double mu1 = 0.5;
  double lambda1 = 0.1;
  double sigma1 = 0.3;
  double kappa1 = 0.05;
  double sigma2 = 0.5;
  double mu3 = 0.3;
  double tau3 = 5.0;
  double sigma3 = 0.4;
  double nu = 5.0;

  /// The synthetic-experiment defaults.
  static ModelParams defaults();
};

bool operator==(const ModelParams& a, const ModelParams& b);

/// Every scalar coordinate of ModelParams, in serialization order.
enum class Field : int {
  omega1, omega2, omega3,
  gamma10, gamma11, gamma20, gamma21, gamma30, gamma31,
  mu1, lambda1, sigma1, kappa1, sigma2, mu3, tau3, sigma3, nu,
};
inline constexpr int kNumFields = 18;

std::string_view field_name(Field f);
Field field_from_name(std::string_view name);
double& field_ref(ModelParams& p, Field f);
double field_value(const ModelParams& p, Field f);
inline Field field_at(int i) { return static_cast<Field>(i); }

/// Flat vector of all kNumFields coordinates.
Eigen::Matrix<double, kNumFields, 1> to_flat(const ModelParams& p);
ModelParams from_flat(const Eigen::Matrix<double, kNumFields, 1>& x);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const { return x >= lower && x <= upper; }
  bool degenerate() const { return lower == upper; }
  double width() const { return upper - lower; }
};

/// Closed box of admissible parameters.  omega additionally has to lie on
/// the simplex.
struct ParamBounds {
  std::array<Interval, kNumFields> interval{};

  Interval& operator[](Field f) { return interval[static_cast<int>(f)]; }
  const Interval& operator[](Field f) const { return interval[static_cast<int>(f)]; }

  /// mu in [0,3], lambda1, kappa1 in [1e-4, 5], scales in [0.05, 3],
  /// tau3 in [0, 10], nu in [3, 20], gamma in [-3, 3].
  static ParamBounds defaults();
  /// Degenerate box {p}.
  static ParamBounds point(const ModelParams& p);
  bool all_degenerate() const;
  /// Throws DomainError unless lower <= upper, scales > 0 and nu > 2.
  void validate() const;
};

struct Violation {
  enum class Kind { Simplex, Orientation, ScaleLowerBound, Bound, NonFinite };
  Kind kind;
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(Violation::Kind k) const;
  std::string to_string() const;
};

ValidationReport validate_params(const ModelParams& p, const ParamBounds& bounds);

// --- Per-type location and scale -----------------------------------------

double gate_logit(int k, double v, const ModelParams& p);
/// Softmax gate with base weights omega and log-volume logits.
Vector3d gate_weights(double v, const ModelParams& p);
/// Location m_{k,y}(v).
double type_location(TraderType k, Outcome y, double v, const ModelParams& p);
/// Scale s_k(v).
double type_scale(TraderType k, double v, const ModelParams& p);

double component_log_density(TraderType k, Outcome y, double dx, double v, const ModelParams& p);
double mixture_log_density(Outcome y, double dx, double v, const ModelParams& p);

/// Log density of the standard Student-t with nu degrees of freedom.
double student_t_log_density(double z, double nu);

/// Layout of the gradient returned by MixtureDensity::log_density_grad:
/// entries 0..2 are derivatives with respect to log(omega_k); the remaining
/// 15 follow Field order from gamma10 to nu.
using ParamGradient = Eigen::Matrix<double, kNumFields, 1>;

/// Mixture log-density with per-parameter constants cached.  Cheap to
/// construct; use it in loops over data points.
class MixtureDensity {
 public:
  explicit MixtureDensity(const ModelParams& p);

  double log_density(Outcome y, double dx, double v) const;
  /// Vectorized over increments at a fixed volume.
  void log_density(Outcome y, double v, const Eigen::ArrayXd& dx, Eigen::ArrayXd& out) const;
  double log_density_grad(Outcome y, double dx, double v, ParamGradient& grad) const;
  /// Sum of log densities over aligned arrays; `log1p_v` must equal log(1 + v).
  double sum_log_density(Outcome y, const Eigen::Ref<const Eigen::ArrayXd>& dx,
                         const Eigen::Ref<const Eigen::ArrayXd>& v,
                         const Eigen::Ref<const Eigen::ArrayXd>& log1p_v) const;

  const ModelParams& params() const { return p_; }

 private:
  ModelParams p_;
  Vector3d log_omega_;
  double t_const_;  // log normalizer of Student-t(nu)
};

double path_log_likelihood(Outcome y, const IncrementPath& inc, const VectorXd& v, const ModelParams& p);
double path_log_likelihood(Outcome y, const VectorXd& dx, const VectorXd& v, const ModelParams& p);

/// Draws a type from the gate, then an increment from that type's law.
double sample_increment(Outcome y, double v, const ModelParams& p, Rng& rng);

/// Gate-weighted signed drift separation between outcomes.
double effective_informativeness(double v, const ModelParams& p);

}  // namespace pminv

#include "pminv/model.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <sstream>

namespace pminv {

namespace {

constexpr std::array<std::string_view, kNumFields> kFieldNames = {
    "omega1",  "omega2", "omega3",  "gamma10", "gamma11", "gamma20", "gamma21", "gamma30", "gamma31",
    "mu1",     "lambda1", "sigma1", "kappa1",  "sigma2",  "mu3",     "tau3",    "sigma3",  "nu",
};

constexpr double kHalfLog2Pi = 0.5 * kLog2Pi;

double t_log_normalizer(double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI);
}

bool is_scale(Field f) { return f == Field::sigma1 || f == Field::sigma2 || f == Field::sigma3; }

}  // namespace

ModelParams ModelParams::defaults() {
  ModelParams p;
  p.gamma << 0.0, 0.5,
             0.0, 0.0,
             0.0, 0.3;
  return p;
}

bool operator==(const ModelParams& a, const ModelParams& b) { return to_flat(a) == to_flat(b); }

std::string_view field_name(Field f) { return kFieldNames[static_cast<int>(f)]; }

Field field_from_name(std::string_view name) {
  for (int i = 0; i < kNumFields; ++i)
    if (kFieldNames[i] == name) return field_at(i);
  throw std::invalid_argument("unknown parameter '" + std::string(name) + "'");
}

double& field_ref(ModelParams& p, Field f) {
  switch (f) {
    case Field::omega1: return p.omega[0];
    case Field::omega2: return p.omega[1];
    case Field::omega3: return p.omega[2];
    case Field::gamma10: return p.gamma(0, 0);
    case Field::gamma11: return p.gamma(0, 1);
    case Field::gamma20: return p.gamma(1, 0);
    case Field::gamma21: return p.gamma(1, 1);
    case Field::gamma30: return p.gamma(2, 0);
    case Field::gamma31: return p.gamma(2, 1);
    case Field::mu1: return p.mu1;
    case Field::lambda1: return p.lambda1;
    case Field::sigma1: return p.sigma1;
    case Field::kappa1: return p.kappa1;
    case Field::sigma2: return p.sigma2;
    case Field::mu3: return p.mu3;
    case Field::tau3: return p.tau3;
    case Field::sigma3: return p.sigma3;
    case Field::nu: return p.nu;
  }
  throw std::logic_error("bad field");
}

double field_value(const ModelParams& p, Field f) { return field_ref(const_cast<ModelParams&>(p), f); }

Eigen::Matrix<double, kNumFields, 1> to_flat(const ModelParams& p) {
  Eigen::Matrix<double, kNumFields, 1> x;
  for (int i = 0; i < kNumFields; ++i) x[i] = field_value(p, field_at(i));
  return x;
}

ModelParams from_flat(const Eigen::Matrix<double, kNumFields, 1>& x) {
  ModelParams p;
  for (int i = 0; i < kNumFields; ++i) field_ref(p, field_at(i)) = x[i];
  return p;
}

ParamBounds ParamBounds::defaults() {
  ParamBounds b;
  for (Field f : {Field::omega1, Field::omega2, Field::omega3}) b[f] = {0.0, 1.0};
  for (int i = static_cast<int>(Field::gamma10); i <= static_cast<int>(Field::gamma31); ++i)
    b.interval[i] = {-3.0, 3.0};
  b[Field::mu1] = {0.0, 3.0};
  b[Field::mu3] = {0.0, 3.0};
  b[Field::lambda1] = {1e-4, 5.0};
  b[Field::kappa1] = {1e-4, 5.0};
  b[Field::sigma1] = {0.05, 3.0};
  b[Field::sigma2] = {0.05, 3.0};
  b[Field::sigma3] = {0.05, 3.0};
  b[Field::tau3] = {0.0, 10.0};
  b[Field::nu] = {3.0, 20.0};
  return b;
}

ParamBounds ParamBounds::point(const ModelParams& p) {
  ParamBounds b;
  for (int i = 0; i < kNumFields; ++i) {
    const double x = field_value(p, field_at(i));
    b.interval[i] = {x, x};
  }
  return b;
}

bool ParamBounds::all_degenerate() const {
  for (const auto& iv : interval)
    if (!iv.degenerate()) return false;
  return true;
}

void ParamBounds::validate() const {
  for (int i = 0; i < kNumFields; ++i) {
    const Field f = field_at(i);
    const Interval& iv = interval[i];
    if (!(iv.lower <= iv.upper))
      throw DomainError("bounds: lower > upper for " + std::string(field_name(f)));
    if (is_scale(f) && !(iv.lower > 0.0))
      throw DomainError("bounds: sigma_min must be positive for " + std::string(field_name(f)));
  }
  if (!((*this)[Field::nu].lower > 2.0)) throw DomainError("bounds: nu_min must exceed 2");
}

bool ValidationReport::has(Violation::Kind k) const {
  for (const auto& v : violations)
    if (v.kind == k) return true;
  return false;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.field << ": " << v.message << '\n';
  return os.str();
}

ValidationReport validate_params(const ModelParams& p, const ParamBounds& bounds) {
  ValidationReport report;
  auto add = [&](Violation::Kind kind, Field f, std::string msg) {
    report.violations.push_back({kind, std::string(field_name(f)), std::move(msg)});
  };

  for (int i = 0; i < kNumFields; ++i) {
    const Field f = field_at(i);
    const double x = field_value(p, f);
    if (!std::isfinite(x)) {
      add(Violation::Kind::NonFinite, f, "not finite");
      continue;
    }
    if ((f == Field::mu1 || f == Field::mu3) && x < 0.0) {
      add(Violation::Kind::Orientation, f, "orientation constraint requires a nonnegative drift magnitude");
      continue;
    }
    const Interval& iv = bounds[f];
    if (is_scale(f) && x < iv.lower) {
      add(Violation::Kind::ScaleLowerBound, f, "scale below sigma_min = " + std::to_string(iv.lower));
      continue;
    }
    if (f == Field::nu && !(x > 2.0)) {
      add(Violation::Kind::Bound, f, "degrees of freedom must exceed 2");
      continue;
    }
    if (!iv.contains(x))
      add(Violation::Kind::Bound, f,
          "outside [" + std::to_string(iv.lower) + ", " + std::to_string(iv.upper) + "]");
  }
  const double s = p.omega.sum();
  if ((p.omega.array() < 0.0).any() || std::abs(s - 1.0) > 1e-12)
    add(Violation::Kind::Simplex, Field::omega1, "omega must be nonnegative and sum to 1");
  return report;
}

double gate_logit(int k, double v, const ModelParams& p) {
  return p.gamma(k, 0) + p.gamma(k, 1) * std::log1p(v);
}

Vector3d gate_weights(double v, const ModelParams& p) {
  Vector3d logits;
  for (int k = 0; k < kNumTypes; ++k)
    logits[k] = p.omega[k] > 0.0 ? std::log(p.omega[k]) + gate_logit(k, v, p) : kNegInf;
  const double m = logits.maxCoeff();
  // scalar exp: Eigen's packet exp clamps -inf to a denormal instead of 0
  Vector3d w;
  for (int k = 0; k < kNumTypes; ++k) w[k] = std::exp(logits[k] - m);
  return w / w.sum();
}

double type_location(TraderType k, Outcome y, double v, const ModelParams& p) {
  switch (k) {
    case TraderType::Informed: return p.mu1 * orientation(y) * (-std::expm1(-p.lambda1 * v));
    case TraderType::Noise: return 0.0;
    case TraderType::Manipulator: return v > p.tau3 ? -p.mu3 * orientation(y) : 0.0;
  }
  return 0.0;
}

double type_scale(TraderType k, double v, const ModelParams& p) {
  switch (k) {
    case TraderType::Informed: return p.sigma1 / std::sqrt(1.0 + p.kappa1 * v);
    case TraderType::Noise: return p.sigma2;
    case TraderType::Manipulator: return p.sigma3;
  }
  return 0.0;
}

double student_t_log_density(double z, double nu) {
  return t_log_normalizer(nu) - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double component_log_density(TraderType k, Outcome y, double dx, double v, const ModelParams& p) {
  const double m = type_location(k, y, v, p);
  const double s = type_scale(k, v, p);
  const double z = (dx - m) / s;
  if (k == TraderType::Manipulator) return -std::log(s) + student_t_log_density(z, p.nu);
  return -std::log(s) - kHalfLog2Pi - 0.5 * z * z;
}

double mixture_log_density(Outcome y, double dx, double v, const ModelParams& p) {
  return MixtureDensity(p).log_density(y, dx, v);
}

MixtureDensity::MixtureDensity(const ModelParams& p) : p_(p), t_const_(t_log_normalizer(p.nu)) {
  for (int k = 0; k < kNumTypes; ++k) log_omega_[k] = p.omega[k] > 0.0 ? std::log(p.omega[k]) : kNegInf;
}

double MixtureDensity::log_density(Outcome y, double dx, double v) const {
  const double lv = std::log1p(v);
  const double c = orientation(y);
  Vector3d gate;
  for (int k = 0; k < kNumTypes; ++k) gate[k] = log_omega_[k] + p_.gamma(k, 0) + p_.gamma(k, 1) * lv;
  const double gmax = gate.maxCoeff();
  const double gnorm =
      gmax + std::log(std::exp(gate[0] - gmax) + std::exp(gate[1] - gmax) + std::exp(gate[2] - gmax));

  const double m1 = p_.mu1 * c * (-std::expm1(-p_.lambda1 * v));
  const double s1 = p_.sigma1 / std::sqrt(1.0 + p_.kappa1 * v);
  const double z1 = (dx - m1) / s1;
  const double z2 = dx / p_.sigma2;
  const double m3 = v > p_.tau3 ? -p_.mu3 * c : 0.0;
  const double z3 = (dx - m3) / p_.sigma3;

  Vector3d l;
  l[0] = gate[0] - std::log(s1) - kHalfLog2Pi - 0.5 * z1 * z1;
  l[1] = gate[1] - std::log(p_.sigma2) - kHalfLog2Pi - 0.5 * z2 * z2;
  l[2] = gate[2] - std::log(p_.sigma3) + t_const_ - 0.5 * (p_.nu + 1.0) * std::log1p(z3 * z3 / p_.nu);
  const double lmax = l.maxCoeff();
  return lmax + std::log(std::exp(l[0] - lmax) + std::exp(l[1] - lmax) + std::exp(l[2] - lmax)) - gnorm;
}

void MixtureDensity::log_density(Outcome y, double v, const Eigen::ArrayXd& dx, Eigen::ArrayXd& out) const {
  const double lv = std::log1p(v);
  const double c = orientation(y);
  Vector3d gate;
  for (int k = 0; k < kNumTypes; ++k) gate[k] = log_omega_[k] + p_.gamma(k, 0) + p_.gamma(k, 1) * lv;
  const double gnorm = log_sum_exp(gate);

  const double m1 = p_.mu1 * c * (-std::expm1(-p_.lambda1 * v));
  const double s1 = p_.sigma1 / std::sqrt(1.0 + p_.kappa1 * v);
  const double m3 = v > p_.tau3 ? -p_.mu3 * c : 0.0;
  const double a1 = gate[0] - gnorm - std::log(s1) - kHalfLog2Pi;
  const double a2 = gate[1] - gnorm - std::log(p_.sigma2) - kHalfLog2Pi;
  const double a3 = gate[2] - gnorm - std::log(p_.sigma3) + t_const_;
  const double h3 = 0.5 * (p_.nu + 1.0);

  const Eigen::ArrayXd l1 = a1 - 0.5 * ((dx - m1) / s1).square();
  const Eigen::ArrayXd l2 = a2 - 0.5 * (dx / p_.sigma2).square();
  const Eigen::ArrayXd l3 = a3 - h3 * (1.0 + ((dx - m3) / p_.sigma3).square() / p_.nu).log();
  const Eigen::ArrayXd lmax = l1.max(l2).max(l3);
  out = lmax + ((l1 - lmax).exp() + (l2 - lmax).exp() + (l3 - lmax).exp()).log();
}

double MixtureDensity::sum_log_density(Outcome y, const Eigen::Ref<const Eigen::ArrayXd>& dx,
                                       const Eigen::Ref<const Eigen::ArrayXd>& v,
                                       const Eigen::Ref<const Eigen::ArrayXd>& log1p_v) const {
  using Eigen::ArrayXd;
  if (dx.size() == 0) return 0.0;
  const double c = orientation(y);
  const ArrayXd g1 = log_omega_[0] + p_.gamma(0, 0) + p_.gamma(0, 1) * log1p_v;
  const ArrayXd g2 = log_omega_[1] + p_.gamma(1, 0) + p_.gamma(1, 1) * log1p_v;
  const ArrayXd g3 = log_omega_[2] + p_.gamma(2, 0) + p_.gamma(2, 1) * log1p_v;
  const ArrayXd gmax = g1.max(g2).max(g3);
  const ArrayXd gnorm = gmax + ((g1 - gmax).exp() + (g2 - gmax).exp() + (g3 - gmax).exp()).log();

  const ArrayXd m1 = p_.mu1 * c * (1.0 - (-p_.lambda1 * v).exp());
  const ArrayXd q1 = 1.0 + p_.kappa1 * v;
  const ArrayXd z1sq = (dx - m1).square() * q1 / (p_.sigma1 * p_.sigma1);
  const ArrayXd m3 = (v > p_.tau3).select(ArrayXd::Constant(v.size(), -p_.mu3 * c), 0.0);
  const ArrayXd z3sq = ((dx - m3) / p_.sigma3).square();

  const ArrayXd l1 = g1 - std::log(p_.sigma1) + 0.5 * q1.log() - 0.5 * kLog2Pi - 0.5 * z1sq;
  const ArrayXd l2 = g2 - std::log(p_.sigma2) - 0.5 * kLog2Pi - 0.5 * (dx / p_.sigma2).square();
  const ArrayXd l3 = g3 - std::log(p_.sigma3) + t_const_ - 0.5 * (p_.nu + 1.0) * (1.0 + z3sq / p_.nu).log();
  const ArrayXd lmax = l1.max(l2).max(l3);
  return (lmax + ((l1 - lmax).exp() + (l2 - lmax).exp() + (l3 - lmax).exp()).log() - gnorm).sum();
}

double MixtureDensity::log_density_grad(Outcome y, double dx, double v, ParamGradient& grad) const {
  const double lv = std::log1p(v);
  const double c = orientation(y);
  Vector3d gate;
  for (int k = 0; k < kNumTypes; ++k) gate[k] = log_omega_[k] + p_.gamma(k, 0) + p_.gamma(k, 1) * lv;
  const double gnorm = log_sum_exp(gate);
  const Vector3d rho = (gate.array() - gnorm).exp();

  const double decay = std::exp(-p_.lambda1 * v);
  const double m1 = p_.mu1 * c * (1.0 - decay);
  const double q1 = 1.0 + p_.kappa1 * v;
  const double s1 = p_.sigma1 / std::sqrt(q1);
  const double z1 = (dx - m1) / s1;
  const double z2 = dx / p_.sigma2;
  const bool active3 = v > p_.tau3;
  const double m3 = active3 ? -p_.mu3 * c : 0.0;
  const double z3 = (dx - m3) / p_.sigma3;
  const double nu = p_.nu;
  const double u3 = z3 * z3 / nu;

  Vector3d l;
  l[0] = gate[0] - gnorm - std::log(s1) - kHalfLog2Pi - 0.5 * z1 * z1;
  l[1] = gate[1] - gnorm - std::log(p_.sigma2) - kHalfLog2Pi - 0.5 * z2 * z2;
  l[2] = gate[2] - gnorm - std::log(p_.sigma3) + t_const_ - 0.5 * (nu + 1.0) * std::log1p(u3);
  const double total = log_sum_exp(l);
  const Vector3d r = (l.array() - total).exp();  // responsibilities

  grad.setZero();
  // Gate: d log rho_k / d a_j = delta_kj - rho_j, so sum_k r_k (...) = r_j - rho_j.
  for (int j = 0; j < kNumTypes; ++j) {
    const double d = p_.omega[j] > 0.0 ? r[j] - rho[j] : 0.0;
    grad[j] = d;
    grad[static_cast<int>(Field::gamma10) + 2 * j] = d;
    grad[static_cast<int>(Field::gamma11) + 2 * j] = d * lv;
  }

  // Informed, Gaussian: d/dm = z/s, d/ds = (z^2 - 1)/s.
  const double dm1 = z1 / s1;
  const double ds1 = (z1 * z1 - 1.0) / s1;
  grad[static_cast<int>(Field::mu1)] = r[0] * dm1 * c * (1.0 - decay);
  grad[static_cast<int>(Field::lambda1)] = r[0] * dm1 * p_.mu1 * c * v * decay;
  grad[static_cast<int>(Field::sigma1)] = r[0] * ds1 * s1 / p_.sigma1;
  grad[static_cast<int>(Field::kappa1)] = r[0] * ds1 * (-0.5 * s1 * v / q1);

  grad[static_cast<int>(Field::sigma2)] = r[1] * (z2 * z2 - 1.0) / p_.sigma2;

  // Manipulator, Student-t.
  const double w3 = (nu + 1.0) / (nu + z3 * z3);
  if (active3) grad[static_cast<int>(Field::mu3)] = r[2] * (w3 * z3 / p_.sigma3) * (-c);
  grad[static_cast<int>(Field::sigma3)] = r[2] * (-1.0 + w3 * z3 * z3) / p_.sigma3;
  const double dnu = 0.5 * boost::math::digamma(0.5 * (nu + 1.0)) - 0.5 * boost::math::digamma(0.5 * nu) -
                     0.5 / nu - 0.5 * std::log1p(u3) + 0.5 * (nu + 1.0) * z3 * z3 / (nu * (nu + z3 * z3));
  grad[static_cast<int>(Field::nu)] = r[2] * dnu;
  // tau3 enters only through an indicator; its pathwise derivative is zero.
  return total;
}

double path_log_likelihood(Outcome y, const VectorXd& dx, const VectorXd& v, const ModelParams& p) {
  if (dx.size() != v.size()) throw DomainError("path_log_likelihood: increment and volume lengths differ");
  const MixtureDensity f(p);
  double ll = 0.0;
  for (Eigen::Index t = 0; t < dx.size(); ++t) ll += f.log_density(y, dx[t], v[t]);
  return ll;
}

double path_log_likelihood(Outcome y, const IncrementPath& inc, const VectorXd& v, const ModelParams& p) {
  return path_log_likelihood(y, inc.dx, v, p);
}

double sample_increment(Outcome y, double v, const ModelParams& p, Rng& rng) {
  const Vector3d w = gate_weights(v, p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  TraderType k = TraderType::Manipulator;
  if (u < w[0])
    k = TraderType::Informed;
  else if (u < w[0] + w[1])
    k = TraderType::Noise;
  const double m = type_location(k, y, v, p);
  const double s = type_scale(k, v, p);
  if (k == TraderType::Manipulator) {
    std::student_t_distribution<double> t(p.nu);
    return m + s * t(rng);
  }
  std::normal_distribution<double> n(0.0, 1.0);
  return m + s * n(rng);
}

double effective_informativeness(double v, const ModelParams& p) {
  const Vector3d w = gate_weights(v, p);
  double eta = 0.0;
  for (int k = 0; k < kNumTypes; ++k) {
    const auto type = static_cast<TraderType>(k);
    // sign(d) * |d| is d itself.
    eta += w[k] * (type_location(type, Outcome::Yes, v, p) - type_location(type, Outcome::No, v, p));
  }
  return eta;
}

}  // namespace pminv

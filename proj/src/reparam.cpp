#include "pminv/reparam.hpp"

#include <algorithm>

namespace pminv {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

ParamSpace::ParamSpace(const ParamBounds& bounds, bool omega_free, const std::array<bool, kNumFields>& field_free,
                       const ModelParams& anchor)
    : bounds_(bounds), anchor_(anchor), omega_free_(omega_free) {
  for (int i = static_cast<int>(Field::gamma10); i < kNumFields; ++i)
    if (field_free[i] && !bounds.interval[i].degenerate()) free_fields_.push_back(field_at(i));
  dim_ = scalar_offset() + static_cast<int>(free_fields_.size());
}

ModelParams ParamSpace::to_params(const VectorXd& z) const {
  ModelParams p = anchor_;
  if (omega_free_) {
    const double m = std::max({z[0], z[1], 0.0});
    Vector3d w(std::exp(z[0] - m), std::exp(z[1] - m), std::exp(-m));
    p.omega = w / w.sum();
  }
  const int off = scalar_offset();
  for (std::size_t j = 0; j < free_fields_.size(); ++j) {
    const Interval& iv = bounds_[free_fields_[j]];
    field_ref(p, free_fields_[j]) = iv.lower + iv.width() * stable_sigmoid(z[off + static_cast<int>(j)]);
  }
  return p;
}

VectorXd ParamSpace::to_unconstrained(const ModelParams& p) const {
  VectorXd z(dim_);
  if (omega_free_) {
    z[0] = std::log(p.omega[0] / p.omega[2]);
    z[1] = std::log(p.omega[1] / p.omega[2]);
  }
  const int off = scalar_offset();
  for (std::size_t j = 0; j < free_fields_.size(); ++j) {
    const Interval& iv = bounds_[free_fields_[j]];
    const double u = std::clamp((field_value(p, free_fields_[j]) - iv.lower) / iv.width(), 1e-15, 1.0 - 1e-15);
    z[off + static_cast<int>(j)] = std::log(u) - std::log1p(-u);
  }
  if (!z.allFinite()) throw DomainError("to_unconstrained: parameters on the boundary of the free space");
  return z;
}

double ParamSpace::log_jacobian(const VectorXd& z) const {
  double lj = 0.0;
  if (omega_free_) lj += to_params(z).omega.array().log().sum();
  const int off = scalar_offset();
  for (std::size_t j = 0; j < free_fields_.size(); ++j) {
    const double zj = z[off + static_cast<int>(j)];
    // log sigmoid(z) + log sigmoid(-z)
    const double a = std::abs(zj);
    lj += std::log(bounds_[free_fields_[j]].width()) - a - 2.0 * std::log1p(std::exp(-a));
  }
  return lj;
}

VectorXd ParamSpace::log_jacobian_gradient(const VectorXd& z) const {
  VectorXd g(dim_);
  if (omega_free_) {
    const Vector3d w = to_params(z).omega;
    g[0] = 1.0 - 3.0 * w[0];
    g[1] = 1.0 - 3.0 * w[1];
  }
  const int off = scalar_offset();
  for (std::size_t j = 0; j < free_fields_.size(); ++j)
    g[off + static_cast<int>(j)] = 1.0 - 2.0 * stable_sigmoid(z[off + static_cast<int>(j)]);
  return g;
}

VectorXd ParamSpace::pullback(const VectorXd& z, const ParamGradient& g) const {
  VectorXd out(dim_);
  if (omega_free_) {
    const Vector3d w = to_params(z).omega;
    const double gsum = g[0] + g[1] + g[2];
    out[0] = g[0] - w[0] * gsum;
    out[1] = g[1] - w[1] * gsum;
  }
  const int off = scalar_offset();
  for (std::size_t j = 0; j < free_fields_.size(); ++j) {
    const double s = stable_sigmoid(z[off + static_cast<int>(j)]);
    out[off + static_cast<int>(j)] =
        g[static_cast<int>(free_fields_[j])] * bounds_[free_fields_[j]].width() * s * (1.0 - s);
  }
  return out;
}

}  // namespace pminv

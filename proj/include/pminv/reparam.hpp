#pragma once

#include "pminv/model.hpp"

#include <array>
#include <vector>

namespace pminv {

/// Bijection between the free coordinates of ModelParams and R^d.
///
/// omega (when free) uses the additive log-ratio z_j = log(omega_j / omega_3),
/// j = 1, 2.  Every other free field is bounded, x = lo + (hi - lo) * sigmoid(z).
/// Fixed fields take their value from the anchor.
class ParamSpace {
 public:
  ParamSpace() = default;
  ParamSpace(const ParamBounds& bounds, bool omega_free, const std::array<bool, kNumFields>& field_free,
             const ModelParams& anchor);

  int dim() const { return dim_; }
  bool omega_free() const { return omega_free_; }
  /// Fields (gamma10..nu) that carry an unconstrained coordinate, in order.
  const std::vector<Field>& free_fields() const { return free_fields_; }
  const ModelParams& anchor() const { return anchor_; }
  const ParamBounds& bounds() const { return bounds_; }

  ModelParams to_params(const VectorXd& z) const;
  /// Points on a bound map to roughly +-34.5 (clamped at 1e-15 from the edge).
  VectorXd to_unconstrained(const ModelParams& p) const;

  /// log |d theta / d z|.
  double log_jacobian(const VectorXd& z) const;
  VectorXd log_jacobian_gradient(const VectorXd& z) const;

  /// Chain rule from a ParamGradient (log-omega convention) to dz.
  VectorXd pullback(const VectorXd& z, const ParamGradient& g) const;

  /// Offset of the first bounded-field coordinate in z (2 when omega is free).
  int scalar_offset() const { return omega_free_ ? 2 : 0; }

 private:
  ParamBounds bounds_;
  ModelParams anchor_;
  bool omega_free_ = false;
  std::vector<Field> free_fields_;
  int dim_ = 0;
};

}  // namespace pminv

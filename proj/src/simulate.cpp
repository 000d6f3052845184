#include "pminv/simulate.hpp"

namespace pminv {

void VolumeDesign::validate() const {
  switch (kind) {
    case Kind::GammaIid:
      if (!(shape > 0.0 && scale > 0.0)) throw DomainError("volume design: gamma shape and scale must be positive");
      break;
    case Kind::Constant:
      if (!(value >= 0.0) || !std::isfinite(value)) throw DomainError("volume design: constant must be >= 0");
      break;
    case Kind::Explicit:
      for (double x : values)
        if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("volume design: explicit values must be >= 0");
      break;
  }
}

void SimConfig::validate() const {
  if (T < 1) throw DomainError("simulation: T must be >= 1");
  if (!(p0 > 0.0 && p0 < 1.0)) throw DomainError("simulation: p0 must lie in (0,1)");
  design.validate();
}

VectorXd sample_volumes(const VolumeDesign& design, int T, Rng& rng) {
  if (T < 1) throw DomainError("sample_volumes: T must be >= 1");
  design.validate();
  VectorXd v(T);
  switch (design.kind) {
    case VolumeDesign::Kind::GammaIid: {
      std::gamma_distribution<double> g(design.shape, design.scale);
      for (int t = 0; t < T; ++t) v[t] = g(rng);
      break;
    }
    case VolumeDesign::Kind::Constant: v.setConstant(design.value); break;
    case VolumeDesign::Kind::Explicit:
      if (static_cast<int>(design.values.size()) != T)
        throw DomainError("sample_volumes: explicit design has " + std::to_string(design.values.size()) +
                          " values, horizon is " + std::to_string(T));
      v = Eigen::Map<const VectorXd>(design.values.data(), T);
      break;
  }
  return v;
}

History simulate_history(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  IncrementPath inc;
  const VectorXd v = sample_volumes(cfg.design, cfg.T, rng);
  inc.x0 = logit(cfg.p0);
  inc.dx.resize(cfg.T);
  double x = inc.x0;
  for (int t = 0; t < cfg.T; ++t) {
    if (cfg.zero_noise) {
      const Vector3d w = gate_weights(v[t], cfg.theta);
      double m = 0.0;
      for (int k = 0; k < kNumTypes; ++k) m += w[k] * type_location(static_cast<TraderType>(k), cfg.y, v[t], cfg.theta);
      inc.dx[t] = m;
    } else {
      inc.dx[t] = sample_increment(cfg.y, v[t], cfg.theta, rng);
    }
    x += inc.dx[t];
    if (!(std::abs(x) <= 700.0))
      throw NumericalError("simulation fault: log-odds left [-700, 700] at t=" + std::to_string(t + 1) +
                           " (seed " + std::to_string(cfg.seed) + ")");
  }
  return history_from_increments(inc, v);
}

Perturbation perturb_increments(const History& h, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw DomainError("perturb_increments: sigma must be >= 0");
  if (sigma == 0.0) return {h, 0};
  const IncrementPath base = to_increments(h);
  std::normal_distribution<double> noise(0.0, sigma);
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    IncrementPath pert = base;
    for (Eigen::Index t = 0; t < pert.horizon(); ++t) pert.dx[t] += noise(rng);
    try {
      History out = history_from_increments(pert, h.v);
      out.p[0] = h.p[0];
      if (h.x.size() != 0) out.x[0] = h.x[0];
      return {std::move(out), attempt};
    } catch (const DomainError&) {
      // degenerate price; redraw
    }
  }
  throw NumericalError("perturb_increments: no admissible perturbation after 10000 draws");
}

}  // namespace pminv

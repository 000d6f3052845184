#pragma once

#include "pminv/logodds.hpp"
#include "pminv/model.hpp"

#include <cstdint>
#include <vector>

namespace pminv {

/// How the volume design v_1..v_T is produced.
struct VolumeDesign {
  enum class Kind { GammaIid, Constant, Explicit };
  Kind kind = Kind::GammaIid;
  double shape = 2.0;
  double scale = 0.5;
  double value = 1.0;
  std::vector<double> values;

  static VolumeDesign gamma_iid(double shape, double scale) { return {Kind::GammaIid, shape, scale, 0.0, {}}; }
  static VolumeDesign constant(double v) { return {Kind::Constant, 0.0, 0.0, v, {}}; }
  static VolumeDesign explicit_values(std::vector<double> v) { return {Kind::Explicit, 0.0, 0.0, 0.0, std::move(v)}; }

  void validate() const;
};

struct SimConfig {
  int T = 100;
  Outcome y = Outcome::Yes;
  double p0 = 0.5;
  ModelParams theta = ModelParams::defaults();
  VolumeDesign design;
  std::uint64_t seed = 0;
  /// Test hook: draw every increment at its type location (no noise).
  bool zero_noise = false;

  void validate() const;
};

VectorXd sample_volumes(const VolumeDesign& design, int T, Rng& rng);

/// Volumes first, then increments, from one generator seeded with cfg.seed.
/// Throws NumericalError if the log-odds path leaves [-700, 700].
History simulate_history(const SimConfig& cfg);

struct Perturbation {
  History history;
  /// Number of rejected draws whose prices left (0,1).
  int resamples = 0;
};

/// Adds iid N(0, sigma^2) noise to each log-odds increment, keeping p_0 and
/// the volumes.  Draws producing degenerate prices are redrawn.
Perturbation perturb_increments(const History& h, double sigma, Rng& rng);

}  // namespace pminv

#pragma once

#include "pminv/analysis.hpp"
#include "pminv/klgap.hpp"
#include "pminv/kvfile.hpp"
#include "pminv/posterior.hpp"
#include "pminv/simulate.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pminv {

/// Invalid or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Concentration, Identifiability, Stability, InfoGain, KlGap, Predicate };

std::string_view kind_name(ExperimentKind k);
/// Throws ConfigError for unknown names.
ExperimentKind kind_from_name(std::string_view name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Concentration;
  int replications = 200;
  std::vector<int> T_grid{25, 100, 400};
  std::vector<double> omega1_grid{0.05, 0.5};
  std::vector<double> sigma_grid{0.01, 0.05, 0.2};
  /// Horizon for every kind except concentration.
  int T = 100;
  ModelParams theta_star = ModelParams::defaults();
  VolumeDesign design = VolumeDesign::gamma_iid(2.0, 0.5);
  PriorSpec prior = PriorSpec::defaults();
  double prior_p1 = 0.5;
  int particles = 500;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  int threads = 0;

  /// Projection-gap settings (klgap kind and the concentration reference).
  GapOptions gap;
  /// Reference gap for the concentration plot; computed when absent.
  std::optional<double> reference_delta;
  /// Grids for the stability constants.
  GridSpec grid;
  double r_quantile = 0.99;
  /// Predicate constants.
  double rho_lb = 0.2;
  double m_lb = 0.01;

  /// Paper-scale design: 1000 replications, N = 1000, full grids.
  void apply_paper_scale();
  /// Throws ConfigError.
  void validate() const;
};

/// Flat key-value form; keys mirror the field names (theta.*, gap.*, grid.*).
ExperimentConfig config_from_kv(const KeyValues& kv, std::optional<ExperimentKind> kind = std::nullopt);
KeyValues config_to_kv(const ExperimentConfig& cfg);

struct ExperimentRecord {
  ExperimentKind kind = ExperimentKind::Concentration;
  int replication = 0;
  double grid_point = 0.0;
  std::uint64_t seed = 0;
  int y_true = 1;
  double posterior_p1 = 0.0;
  double log_bf = 0.0;
  double ig = 0.0;
  /// Values for aux_columns(kind), in order.
  std::vector<double> aux;
};

/// Kind-specific columns after the shared ones.
const std::vector<std::string>& aux_columns(ExperimentKind k);
/// Full record CSV header for a kind.
std::string record_header(ExperimentKind k);

struct SummaryRow {
  double grid_point = 0.0;
  int n = 0;
  int failures = 0;
  double mean = 0.0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  /// Identifiability: fraction correct.  Stability: containment among on-event trials.
  double rate = 0.0;
  /// Stability: median bound.  Concentration: unused.
  double reference = 0.0;
};

struct ExperimentSummary {
  ExperimentKind kind = ExperimentKind::Concentration;
  /// Name of the summarized metric.
  std::string metric;
  std::vector<SummaryRow> rows;
  int failures = 0;
  /// Concentration: the gap whose negative is drawn as the reference slope.
  std::optional<double> reference_delta;
  /// Concentration: least-squares slope of the medians against T.
  double median_slope = 0.0;
  /// Stability: truncation radius and constants.
  double R = 0.0, lx = 0.0, lv = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRecord> records;
  ExperimentSummary summary;
};

/// Replication r uses seed base_seed + r for every grid point.  Replications
/// run in parallel; records are ordered by (grid point, replication), so the
/// result does not depend on the thread count.  Failed replications are
/// reported on stderr with their seed, skipped and counted.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

ExperimentSummary summarize(const ExperimentConfig& cfg, const std::vector<ExperimentRecord>& records,
                            const std::vector<std::pair<double, int>>& failures);

/// Linear-interpolation quantiles (type 7).  Throws DomainError on empty input
/// or a level outside [0, 1].
std::vector<double> aggregate_quantiles(std::vector<double> values, const std::vector<double>& qs);

struct PredicateResult {
  bool holds = false;
  double fraction = 0.0;
  std::vector<int> active;  // I_T, 1-based
  /// Inputs to the separation constant over I_T.
  double min_rho1 = 0.0;
  double min_separation = 0.0;
  double min_scale = 0.0;
  double max_scale = 0.0;
};

/// Per-period checks: informed gate rho_1(v) >= rho_lb, informed drift
/// separation >= m_lb, manipulator inactive (v <= tau3).  `holds` means a
/// positive fraction of periods qualifies.
PredicateResult identifiability_predicate(const ModelParams& theta_star, const VectorXd& v, double rho_lb,
                                          double m_lb);

/// Writes <kind>_records.csv, <kind>_summary.csv and <kind>.svg to `dir`.
/// Throws DomainError on an empty record set before creating any file.
std::vector<std::string> emit_outputs(const ExperimentResult& result, const std::string& dir);

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& records, ExperimentKind kind);
void write_summary_csv(std::ostream& os, const ExperimentSummary& s);
std::string render_svg(const ExperimentSummary& s);

}  // namespace pminv

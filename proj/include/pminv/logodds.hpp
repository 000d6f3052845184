#pragma once

#include "pminv/common.hpp"

#include <iosfwd>
#include <string>

namespace pminv {

/// Observed price-volume record: p_0..p_T in (0,1) and volumes v_1..v_T.
///
/// Simulated histories also carry the log-odds path x_0..x_T.  When present it
/// is authoritative: beyond |x| ~ 37 a double price rounds to 0 or 1, so the
/// prices alone would lose the path.
struct History {
  VectorXd p;  // length T+1
  VectorXd v;  // length T
  VectorXd x;  // empty, or length T+1 with p = sigmoid(x)

  Eigen::Index horizon() const { return v.size(); }
  /// Throws DomainError if lengths or ranges are inconsistent.
  void validate() const;
};

/// Log-odds representation of a price path.
struct IncrementPath {
  double x0 = 0.0;
  VectorXd dx;

  Eigen::Index horizon() const { return dx.size(); }
};

double logit(double p);
double sigmoid(double x);

IncrementPath to_increments(const History& h);

/// Inverse of to_increments: p_t = sigmoid(x0 + sum_{s<=t} dx_s).
VectorXd reconstruct_prices(const IncrementPath& inc);

/// Builds a History (with its log-odds path) from increments and volumes.
/// Throws DomainError when cumulative log-odds leave [-700, 700].
History history_from_increments(const IncrementPath& inc, const VectorXd& v);

// CSV with header `t,p,v`, or `t,p,v,x` when the log-odds path is present;
// the t=0 row has an empty volume field.
void write_history_csv(std::ostream& os, const History& h);
History read_history_csv(std::istream& is);
void write_history_csv(const std::string& path, const History& h);
History read_history_csv(const std::string& path);

}  // namespace pminv

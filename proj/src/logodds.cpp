#include "pminv/logodds.hpp"

#include "pminv/kvfile.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace pminv {

void History::validate() const {
  if (v.size() < 0 || p.size() != v.size() + 1)
    throw DomainError("history: len(p) must equal len(v) + 1");
  if (x.size() != 0) {
    if (x.size() != p.size()) throw DomainError("history: len(x) must equal len(p)");
    for (Eigen::Index t = 0; t < x.size(); ++t)
      if (!(std::abs(x[t]) <= 700.0))
        throw DomainError("history: x_" + std::to_string(t) + " outside [-700, 700]");
  } else {
    for (Eigen::Index t = 0; t < p.size(); ++t)
      if (!(p[t] > 0.0 && p[t] < 1.0))
        throw DomainError("history: p_" + std::to_string(t) + " outside (0,1)");
  }
  for (Eigen::Index t = 0; t < v.size(); ++t)
    if (!(v[t] >= 0.0) || !std::isfinite(v[t]))
      throw DomainError("history: v_" + std::to_string(t + 1) + " must be finite and >= 0");
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("logit: p must lie in (0,1)");
  return std::log(p) - std::log1p(-p);
}

double sigmoid(double x) {
  if (!std::isfinite(x)) throw DomainError("sigmoid: non-finite input");
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

IncrementPath to_increments(const History& h) {
  h.validate();
  IncrementPath inc;
  const Eigen::Index T = h.horizon();
  inc.dx.resize(T);
  if (h.x.size() != 0) {
    inc.x0 = h.x[0];
    for (Eigen::Index t = 1; t <= T; ++t) inc.dx[t - 1] = h.x[t] - h.x[t - 1];
    return inc;
  }
  double prev = logit(h.p[0]);
  inc.x0 = prev;
  for (Eigen::Index t = 1; t <= T; ++t) {
    const double cur = logit(h.p[t]);
    inc.dx[t - 1] = cur - prev;
    prev = cur;
  }
  return inc;
}

VectorXd reconstruct_prices(const IncrementPath& inc) {
  VectorXd p(inc.horizon() + 1);
  double x = inc.x0;
  p[0] = sigmoid(x);
  for (Eigen::Index t = 0; t < inc.horizon(); ++t) {
    x += inc.dx[t];
    p[t + 1] = sigmoid(x);
  }
  return p;
}

History history_from_increments(const IncrementPath& inc, const VectorXd& v) {
  if (v.size() != inc.horizon()) throw DomainError("history: volume length does not match increments");
  VectorXd x(inc.horizon() + 1);
  x[0] = inc.x0;
  for (Eigen::Index t = 0; t < inc.horizon(); ++t) {
    x[t + 1] = x[t] + inc.dx[t];
    if (!(std::abs(x[t + 1]) <= 700.0))
      throw DomainError("history: cumulative log-odds left [-700, 700] at t=" + std::to_string(t + 1));
  }
  History h{reconstruct_prices(inc), v, x};
  h.validate();
  return h;
}

void write_history_csv(std::ostream& os, const History& h) {
  h.validate();
  const bool with_x = h.x.size() != 0;
  os << (with_x ? "t,p,v,x\n" : "t,p,v\n");
  for (Eigen::Index t = 0; t <= h.horizon(); ++t) {
    os << t << ',' << format_double(h.p[t]) << ',';
    if (t > 0) os << format_double(h.v[t - 1]);
    if (with_x) os << ',' << format_double(h.x[t]);
    os << '\n';
  }
}

History read_history_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DomainError("history csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool with_x = line == "t,p,v,x";
  if (line != "t,p,v" && !with_x) throw DomainError("history csv: expected header 't,p,v' or 't,p,v,x'");
  const std::size_t width = with_x ? 4 : 3;
  std::vector<double> p, v, x;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == width - 1 && !with_x) cells.emplace_back();
    if (cells.size() != width) throw DomainError("history csv: malformed row '" + line + "'");
    const auto t = static_cast<std::size_t>(std::stoul(cells[0]));
    if (t != p.size()) throw DomainError("history csv: rows must be ordered t = 0, 1, ...");
    p.push_back(parse_double(cells[1]));
    if (with_x) x.push_back(parse_double(cells[3]));
    if (t == 0) {
      if (!cells[2].empty()) throw DomainError("history csv: t=0 row must have empty volume");
    } else {
      v.push_back(parse_double(cells[2]));
    }
  }
  if (p.empty()) throw DomainError("history csv: no rows");
  History h{Eigen::Map<VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())),
            Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
            Eigen::Map<VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))};
  h.validate();
  return h;
}

void write_history_csv(const std::string& path, const History& h) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_history_csv(os, h);
}

History read_history_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_history_csv(is);
}

}  // namespace pminv

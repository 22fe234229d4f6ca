#ifndef V2B_SOLVER_LP_FORMAT_HPP
#define V2B_SOLVER_LP_FORMAT_HPP

#include <cmath>
#include <ostream>
#include <string>

#include "v2b/solver/linear_program.hpp"

namespace v2b::solver {

/** \brief Writes the model in CPLEX LP text format for inspection with external tools. */
inline void write_lp_format(const LinearProgram& lp, std::ostream& os) {
  auto name = [&](int j) {
    return lp.names[j].empty() ? "x" + std::to_string(j) : lp.names[j];
  };
  auto term = [&](double v, const std::string& var, bool first) {
    std::string s;
    if (v < 0) s += first ? "-" : " - ";
    else if (!first) s += " + ";
    s += std::to_string(std::abs(v)) + " " + var;
    return s;
  };
  os << (lp.sense == Sense::Minimize ? "Minimize\n" : "Maximize\n") << " obj:";
  bool first = true;
  for (int j = 0; j < lp.num_cols(); ++j) {
    if (lp.objective[j] == 0.0) continue;
    os << ' ' << term(lp.objective[j], name(j), first);
    first = false;
  }
  if (first) os << " 0 " << (lp.num_cols() > 0 ? name(0) : "x0");
  os << "\nSubject To\n";
  for (int i = 0; i < lp.num_rows(); ++i) {
    const Row& r = lp.rows[i];
    os << ' ' << (r.name.empty() ? "c" + std::to_string(i) : r.name) << ":";
    bool f = true;
    for (std::size_t k = 0; k < r.index.size(); ++k) {
      os << ' ' << term(r.value[k], name(r.index[k]), f);
      f = false;
    }
    if (f) os << " 0 " << (lp.num_cols() > 0 ? name(0) : "x0");
    os << (r.sense == RowSense::LessEqual ? " <= " : r.sense == RowSense::Equal ? " = " : " >= ")
       << r.rhs << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < lp.num_cols(); ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (std::isinf(lo) && std::isinf(hi)) {
      os << ' ' << name(j) << " free\n";
      continue;
    }
    os << ' ' << (std::isinf(lo) ? std::string("-inf") : std::to_string(lo)) << " <= " << name(j)
       << " <= " << (std::isinf(hi) ? std::string("+inf") : std::to_string(hi)) << '\n';
  }
  bool any = false;
  for (int j = 0; j < lp.num_cols(); ++j) {
    if (!lp.integer[j]) continue;
    if (!any) os << "General\n";
    any = true;
    os << ' ' << name(j) << '\n';
  }
  os << "End\n";
}

}  // namespace v2b::solver

#endif

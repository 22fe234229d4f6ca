#ifndef V2B_SOLVER_LINEAR_PROGRAM_HPP
#define V2B_SOLVER_LINEAR_PROGRAM_HPP

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "v2b/error.hpp"

namespace v2b::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };
enum class RowSense { LessEqual, Equal, GreaterEqual };

/** \brief One sparse constraint row. */
struct Row {
  std::vector<int> index;
  std::vector<double> value;
  RowSense sense = RowSense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

/** \brief Mixed-integer linear program in row form. */
struct LinearProgram {
  Sense sense = Sense::Minimize;
  double objective_offset = 0.0;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<char> integer;
  std::vector<std::string> names;
  std::vector<Row> rows;

  int num_cols() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  int add_column(double cost, double lo, double hi, bool is_integer = false,
                 std::string name = {}) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    integer.push_back(is_integer ? 1 : 0);
    names.push_back(std::move(name));
    return num_cols() - 1;
  }

  int add_binary(double cost, std::string name = {}) {
    return add_column(cost, 0.0, 1.0, true, std::move(name));
  }

  int add_row(std::vector<int> idx, std::vector<double> val, RowSense s,
              double rhs, std::string name = {}) {
    rows.push_back(Row{std::move(idx), std::move(val), s, rhs, std::move(name)});
    return num_rows() - 1;
  }

  int add_row(std::initializer_list<std::pair<int, double>> terms, RowSense s,
              double rhs, std::string name = {}) {
    Row r;
    for (auto [i, v] : terms) {
      r.index.push_back(i);
      r.value.push_back(v);
    }
    r.sense = s;
    r.rhs = rhs;
    r.name = std::move(name);
    rows.push_back(std::move(r));
    return num_rows() - 1;
  }

  /** \brief Throws MalformedModel on NaN data, bad indices or crossed bounds. */
  void validate() const {
    const int n = num_cols();
    if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n ||
        static_cast<int>(integer.size()) != n)
      throw MalformedModel("column arrays differ in length");
    if (std::isnan(objective_offset)) throw MalformedModel("NaN objective offset");
    for (int j = 0; j < n; ++j) {
      if (std::isnan(objective[j]) || std::isinf(objective[j]))
        throw MalformedModel("non-finite objective coefficient at column " + std::to_string(j));
      if (std::isnan(lower[j]) || std::isnan(upper[j]))
        throw MalformedModel("NaN bound at column " + std::to_string(j));
      if (lower[j] > upper[j])
        throw MalformedModel("lower bound exceeds upper bound at column " + std::to_string(j));
    }
    for (int i = 0; i < num_rows(); ++i) {
      const Row& r = rows[i];
      if (r.index.size() != r.value.size())
        throw MalformedModel("row " + std::to_string(i) + " index/value length differ");
      if (!std::isfinite(r.rhs)) throw MalformedModel("non-finite rhs at row " + std::to_string(i));
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        if (r.index[k] < 0 || r.index[k] >= n)
          throw MalformedModel("column index out of range in row " + std::to_string(i));
        if (!std::isfinite(r.value[k]))
          throw MalformedModel("non-finite coefficient in row " + std::to_string(i));
      }
    }
  }

  double row_activity(int i, const std::vector<double>& x) const {
    double a = 0.0;
    const Row& r = rows[i];
    for (std::size_t k = 0; k < r.index.size(); ++k) a += r.value[k] * x[r.index[k]];
    return a;
  }

  double evaluate(const std::vector<double>& x) const {
    double v = objective_offset;
    for (int j = 0; j < num_cols(); ++j) v += objective[j] * x[j];
    return v;
  }

  /** \brief Largest bound, row or integrality violation of a point. */
  double max_violation(const std::vector<double>& x, bool check_integrality = true) const {
    double worst = 0.0;
    for (int j = 0; j < num_cols(); ++j) {
      worst = std::max(worst, lower[j] - x[j]);
      worst = std::max(worst, x[j] - upper[j]);
      if (check_integrality && integer[j])
        worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
    for (int i = 0; i < num_rows(); ++i) {
      const double a = row_activity(i, x);
      const Row& r = rows[i];
      if (r.sense != RowSense::GreaterEqual) worst = std::max(worst, a - r.rhs);
      if (r.sense != RowSense::LessEqual) worst = std::max(worst, r.rhs - a);
    }
    return worst;
  }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, GapLimit, TimeLimit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::GapLimit: return "gap_limit";
    case SolveStatus::TimeLimit: return "time_limit";
  }
  return "unknown";
}

struct SolveOutcome {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> values;
  double mip_gap = 0.0;
  double best_bound = 0.0;
  double solve_seconds = 0.0;
  long iterations = 0;
  long nodes = 0;
  bool has_solution() const { return !values.empty(); }
};

struct Tolerances {
  double feasibility = 1e-6;
  double integrality = 1e-6;
};

}  // namespace v2b::solver

#endif

#ifndef V2B_SOLVER_MILP_HPP
#define V2B_SOLVER_MILP_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "v2b/solver/linear_program.hpp"
#include "v2b/solver/simplex.hpp"

namespace v2b::solver {

/** \brief Maps a relaxation point to a candidate integer point, or nothing. */
using Heuristic = std::function<std::optional<std::vector<double>>(const std::vector<double>&)>;

struct MilpOptions {
  double gap = 1e-4;
  double time_limit_s = 30.0;
  long node_limit = 0;  // 0 = unlimited
  Tolerances tol;
  Heuristic heuristic;
  LpOptions lp;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/** \brief Continuous relaxation; integrality marks are ignored. */
inline SolveOutcome solve_lp(const LinearProgram& lp, double time_limit_s = 30.0,
                             LpOptions lpopt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  lpopt.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(time_limit_s));
  BoundedSimplex s(lp, lpopt);
  SolveOutcome out;
  const LpStatus st = s.solve();
  out.iterations = s.iterations();
  out.solve_seconds = detail::seconds_since(t0);
  switch (st) {
    case LpStatus::Optimal:
      out.status = SolveStatus::Optimal;
      out.values = s.primal();
      out.objective = s.objective();
      out.best_bound = out.objective;
      break;
    case LpStatus::Infeasible: out.status = SolveStatus::Infeasible; break;
    case LpStatus::Unbounded: out.status = SolveStatus::Unbounded; break;
    case LpStatus::IterationLimit:
    case LpStatus::TimeLimit: out.status = SolveStatus::TimeLimit; break;
  }
  return out;
}

/**
 * \brief Best-bound branch-and-bound over the bounded simplex.
 *
 * Branches on the most fractional integer column (lowest index on ties). Children
 * warm-start from the parent basis.
 */
inline SolveOutcome solve_milp(const LinearProgram& lp, const MilpOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  LpOptions lpopt = opt.lp;
  lpopt.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(opt.time_limit_s));
  BoundedSimplex s(lp, lpopt);
  const int n = lp.num_cols();
  const double sign = s.sign();
  std::vector<int> ints;
  for (int j = 0; j < n; ++j)
    if (lp.integer[j]) ints.push_back(j);

  struct Node {
    double bound;
    long id;
    std::vector<std::tuple<int, double, double>> fixes;
    Basis basis;
  };
  struct Cmp {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.id > b.id;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Cmp> open;

  SolveOutcome out;
  double incumbent = kInf;  // minimization form, no offset
  std::vector<double> best_x;
  long next_id = 0;
  long branch_nodes = 0;
  bool timed_out = false;

  auto internal_of = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (int j = 0; j < n; ++j) v += sign * lp.objective[j] * x[j];
    return v;
  };
  auto offer = [&](std::vector<double> x) {
    for (int j : ints) x[j] = std::round(x[j]);
    if (lp.max_violation(x) > opt.tol.feasibility) return;
    const double v = internal_of(x);
    if (v < incumbent) {
      incumbent = v;
      best_x = std::move(x);
    }
  };
  auto prune_tol = [&]() { return 1e-9 * std::max(1.0, std::abs(incumbent)); };
  auto gap_of = [&](double bound) {
    if (!std::isfinite(incumbent)) return kInf;
    return std::max(0.0, incumbent - bound) / std::max(1.0, std::abs(incumbent));
  };

  open.push(Node{-kInf, next_id++, {}, Basis{}});
  double best_bound = -kInf;
  bool root = true;
  while (!open.empty()) {
    if (detail::seconds_since(t0) > opt.time_limit_s) {
      timed_out = true;
      break;
    }
    if (opt.node_limit > 0 && branch_nodes >= opt.node_limit) break;
    Node node = open.top();
    open.pop();
    best_bound = node.bound;
    if (std::isfinite(incumbent) && node.bound >= incumbent - prune_tol()) {
      best_bound = incumbent;
      while (!open.empty()) open.pop();
      break;
    }
    if (gap_of(node.bound) <= opt.gap) {
      open.push(node);
      break;
    }
    for (int j : ints) s.set_bounds(j, lp.lower[j], lp.upper[j]);
    for (const auto& [j, lo, hi] : node.fixes) s.set_bounds(j, lo, hi);
    if (node.basis.empty()) s.cold_start();
    else s.set_basis(node.basis);
    const LpStatus st = s.solve();
    out.iterations += s.iterations();
    if (st == LpStatus::TimeLimit || st == LpStatus::IterationLimit) {
      timed_out = true;
      open.push(node);
      break;
    }
    if (st == LpStatus::Unbounded) {
      if (root) {
        out.status = SolveStatus::Unbounded;
        out.solve_seconds = detail::seconds_since(t0);
        return out;
      }
      continue;
    }
    if (st == LpStatus::Infeasible) {
      root = false;
      continue;
    }
    root = false;
    const double obj = s.internal_objective();
    if (obj >= incumbent - prune_tol()) continue;
    std::vector<double> x = s.primal();
    int pick = -1;
    double most = opt.tol.integrality;
    for (int j : ints) {
      const double f = x[j] - std::floor(x[j]);
      const double frac = std::min(f, 1.0 - f);
      if (frac > most + 1e-12) {
        most = frac;
        pick = j;
      }
    }
    if (pick < 0) {
      offer(x);
      continue;
    }
    if (opt.heuristic) {
      if (auto cand = opt.heuristic(x)) offer(std::move(*cand));
    }
    Basis b = s.basis();
    const double v = x[pick];
    auto down = node.fixes;
    down.emplace_back(pick, s.lower(pick), std::floor(v));
    auto up = std::move(node.fixes);
    up.emplace_back(pick, std::ceil(v), s.upper(pick));
    open.push(Node{obj, next_id++, std::move(down), b});
    open.push(Node{obj, next_id++, std::move(up), std::move(b)});
    branch_nodes += 2;
  }

  out.nodes = branch_nodes;
  out.solve_seconds = detail::seconds_since(t0);
  if (open.empty() && !timed_out) best_bound = incumbent;
  else if (!open.empty()) best_bound = std::min(best_bound, open.top().bound);
  if (!std::isfinite(incumbent)) {
    out.status = timed_out || (opt.node_limit > 0 && !open.empty()) ? SolveStatus::TimeLimit
                                                                      : SolveStatus::Infeasible;
    return out;
  }
  out.values = std::move(best_x);
  out.objective = sign * incumbent + lp.objective_offset;
  const double g = gap_of(best_bound);
  out.mip_gap = g;
  out.best_bound = sign * std::min(best_bound, incumbent) + lp.objective_offset;
  if (timed_out) out.status = SolveStatus::TimeLimit;
  else if (g <= opt.gap + 1e-12) out.status = SolveStatus::Optimal;
  else out.status = SolveStatus::GapLimit;
  return out;
}

}  // namespace v2b::solver

#endif

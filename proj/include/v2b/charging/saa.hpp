#ifndef V2B_CHARGING_SAA_HPP
#define V2B_CHARGING_SAA_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "v2b/charging/program.hpp"
#include "v2b/solver/simplex.hpp"

namespace v2b::charging {

struct SaaOptions {
  double gap = 1e-4;
  double time_limit_s = 30.0;
  int max_iterations = 200;
};

struct SaaResult {
  solver::SolveStatus status = solver::SolveStatus::Infeasible;
  std::map<int, double> first_step;  // net kWh per connected user
  double objective = 0.0;            // sample-average cost of the returned first step
  double lower_bound = 0.0;
  double planned_peak = 0.0;          // kW, scenario average at the returned first step
  int iterations = 0;
  double seconds = 0.0;

  bool usable() const {
    return status == solver::SolveStatus::Optimal || status == solver::SolveStatus::GapLimit ||
           (status == solver::SolveStatus::TimeLimit && !first_step.empty());
  }
};

/**
 * \brief Multi-cut L-shaped method for the sample-average program with a shared first step.
 *
 * Each scenario is a separate warm-started LP (envelope curve model); the master holds the
 * first-step charge/discharge of connected EVs plus one cost bound per scenario, refined by
 * subgradient cuts taken from reduced costs of the pinned first-step columns.
 */
inline SaaResult solve_saa_decomposed(const ProgramInput& in, const SaaOptions& opt = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<clock::duration>(
                                 std::chrono::duration<double>(opt.time_limit_s));
  SaaResult res;
  const int F = static_cast<int>(in.scenarios.size());
  if (F == 0) throw DomainError("program needs at least one scenario");
  std::vector<std::unique_ptr<ChargingProgram>> sub;
  ProgramOptions po;
  for (int f = 0; f < F; ++f) {
    ProgramInput pi = in;
    pi.scenarios = {in.scenarios[f]};
    pi.share_first_step = true;
    pi.curve_model = CurveModel::Envelope;
    pi.flex.reset();
    sub.push_back(std::make_unique<ChargingProgram>(std::move(pi)));
  }
  const auto box = sub[0]->first_step_box();
  auto finish = [&](solver::SolveStatus st) {
    res.status = st;
    res.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    return res;
  };

  // Scenario-wise optima give per-scenario lower bounds and a starting point.
  std::vector<double> lb(F);
  double free_peak = 0.0;
  std::map<int, std::pair<double, double>> point;
  for (const auto& [u, b] : box) point[u] = {0.0, 0.0};
  for (int f = 0; f < F; ++f) {
    const auto r = sub[f]->solve_first_step(nullptr, po, deadline);
    if (r.status == solver::LpStatus::TimeLimit) return finish(solver::SolveStatus::TimeLimit);
    if (r.status != solver::LpStatus::Optimal) return finish(solver::SolveStatus::Infeasible);
    lb[f] = r.value;
    free_peak += r.peak / F;
    for (const auto& [u, a] : r.action) {
      point[u].first += a.first / F;
      point[u].second += a.second / F;
    }
  }
  if (box.empty()) {
    double avg = 0.0;
    for (double v : lb) avg += v / F;
    res.objective = res.lower_bound = avg;
    res.planned_peak = free_peak;
    return finish(solver::SolveStatus::Optimal);
  }

  // Master: charge/discharge per user, then one bound per scenario.
  solver::LinearProgram master;
  std::map<int, std::pair<int, int>> col;
  for (const auto& [u, b] : box) {
    const int cp = master.add_column(0.0, 0.0, b.first);
    const int cn = master.add_column(0.0, 0.0, b.second);
    col[u] = {cp, cn};
  }
  std::vector<int> theta(F);
  for (int f = 0; f < F; ++f) theta[f] = master.add_column(1.0 / F, lb[f], solver::kInf);
  if (!in.tariff.allow_export) {
    std::vector<int> idx;
    std::vector<double> val;
    for (const auto& [u, c] : col) {
      idx.push_back(c.first);
      val.push_back(1.0);
      idx.push_back(c.second);
      val.push_back(-1.0);
    }
    const double building_now = in.scenarios[0].building_kw[in.now];
    master.add_row(idx, val, solver::RowSense::GreaterEqual, -building_now * in.grid.step_hours);
  }
  solver::BoundedSimplex ms(master);

  double best = solver::kInf;
  std::map<int, std::pair<double, double>> best_point = point;
  double best_peak = free_peak;
  double lower = 0.0;
  for (double v : lb) lower += v / F;
  std::vector<double> theta_val(lb);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    double avg = 0.0, peak = 0.0;
    std::vector<solver::Row> cuts;
    for (int f = 0; f < F; ++f) {
      const auto r = sub[f]->solve_first_step(&point, po, deadline);
      if (r.status == solver::LpStatus::TimeLimit) {
        res.first_step.clear();
        if (best < solver::kInf)
          for (const auto& [u, a] : best_point) res.first_step[u] = a.first - a.second;
        res.objective = best;
        res.lower_bound = lower;
        res.planned_peak = best_peak;
        return finish(solver::SolveStatus::TimeLimit);
      }
      if (r.status != solver::LpStatus::Optimal) return finish(solver::SolveStatus::Infeasible);
      avg += r.value / F;
      peak += r.peak / F;
      // theta_f >= value + g.(x - point)
      if (theta_val[f] >= r.value - 1e-9 * std::max(1.0, std::abs(r.value))) continue;
      solver::Row cut;
      cut.index.push_back(theta[f]);
      cut.value.push_back(1.0);
      double rhs = r.value;
      for (const auto& [u, g] : r.grad) {
        const auto& c = col.at(u);
        const auto& p = point.at(u);
        cut.index.push_back(c.first);
        cut.value.push_back(-g.first);
        cut.index.push_back(c.second);
        cut.value.push_back(-g.second);
        rhs -= g.first * p.first + g.second * p.second;
      }
      cut.sense = solver::RowSense::GreaterEqual;
      cut.rhs = rhs;
      cuts.push_back(std::move(cut));
    }
    if (avg < best) {
      best = avg;
      best_point = point;
      best_peak = peak;
    }
    const double tol = opt.gap * std::max(1.0, std::abs(best));
    if (best - lower <= tol || cuts.empty()) break;
    ms.add_rows(cuts);
    ms.set_deadline(deadline);
    const auto st = ms.solve();
    if (st == solver::LpStatus::TimeLimit) break;
    if (st != solver::LpStatus::Optimal) return finish(solver::SolveStatus::Infeasible);
    lower = std::max(lower, ms.objective());
    const auto x = ms.primal();
    for (const auto& [u, c] : col) point[u] = {x[c.first], x[c.second]};
    for (int f = 0; f < F; ++f) theta_val[f] = x[theta[f]];
    if (best - lower <= tol) break;
  }
  for (const auto& [u, a] : best_point) res.first_step[u] = a.first - a.second;
  res.objective = best;
  res.lower_bound = lower;
  res.planned_peak = best_peak;
  const double gap = (best - lower) / std::max(1.0, std::abs(best));
  // Stopping on the iteration or time limit still leaves a usable first step.
  return finish(gap <= opt.gap + 1e-12 ? solver::SolveStatus::Optimal : solver::SolveStatus::TimeLimit);
}

}  // namespace v2b::charging

#endif

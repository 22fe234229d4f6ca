#ifndef V2B_CHARGING_PROGRAM_HPP
#define V2B_CHARGING_PROGRAM_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "v2b/charging/curve.hpp"
#include "v2b/charging/state.hpp"
#include "v2b/domain.hpp"
#include "v2b/solver/milp.hpp"

namespace v2b::charging {

/**
 * \brief Weights of the optimization objective. The SoC weight is a tuning knob and
 * defaults well above the demand charge per kWh so that unmet energy is never traded for
 * a lower peak; reported costs always use the tariff.
 */
struct ObjectiveWeights {
  double demand = 11.67;
  double soc = 100.0;
  double battery = 0.05;

  static ObjectiveWeights from_tariff(const Tariff& t, double soc_weight = 100.0) {
    return ObjectiveWeights{t.demand_rate, soc_weight, t.battery_penalty};
  }
};

/** \brief An EV as it appears inside one scenario of a program. */
struct PlanEv {
  int user_id = 0;
  ChargerSpec charger;
  int t_start = 0;  // first controllable step
  int t_end = 0;    // departure step, exclusive
  double e_start = 0.0;
  double e_target = 0.0;
  double e_min = 0.0;
  double e_max = 0.0;
  bool connected_now = false;
};

/** \brief Option space of the EV under negotiation. */
struct FlexTerms {
  int user_id = 0;
  int t_req = 0;
  int max_delay_steps = 0;
  double max_soc_reduction = 0.0;  // kWh
};

struct PlanScenario {
  std::vector<double> building_kw;  // full day
  std::vector<PlanEv> evs;
};

/** \brief Exact piecewise curve with segment binaries, or its concave envelope (pure LP). */
enum class CurveModel { Exact, Envelope };

struct ProgramInput {
  TimeGrid grid;
  Tariff tariff;
  ObjectiveWeights weights;
  PiecewiseCurve curve = PiecewiseCurve::standard();
  int now = 0;
  double p_past_max = 0.0;
  std::vector<PlanScenario> scenarios;
  bool share_first_step = true;
  std::optional<FlexTerms> flex;
  CurveModel curve_model = CurveModel::Exact;
};

struct ProgramOptions {
  double gap = 1e-4;
  double time_limit_s = 30.0;
  int max_lazy_rounds = 12;
  int max_lp_rounds = 60;  // lazy rounds when the program is a pure LP
};

/** \brief Result of a solve with the first-step columns pinned (or released). */
struct FirstStepSolve {
  solver::LpStatus status = solver::LpStatus::Infeasible;
  double value = 0.0;                               // objective including the offset
  std::map<int, std::pair<double, double>> grad;    // d value / d (charge, discharge) per user
  std::map<int, std::pair<double, double>> action;  // (charge, discharge) kWh per user
  double peak = 0.0;                                // planned peak-window kW, scenario average
};

struct ChargingSolution {
  solver::SolveStatus status = solver::SolveStatus::Infeasible;
  double objective = 0.0;
  double mip_gap = 0.0;
  int lazy_rounds = 0;
  long nodes = 0;
  double seconds = 0.0;
  std::map<int, double> first_step;                   // net kWh at `now`, per user
  std::vector<std::map<int, std::vector<double>>> energy;  // per scenario, per user, full day
  int t_dep = -1;                                      // negotiated departure
  double soc_reduction = 0.0;                          // kWh
  double flex_energy_cost = 0.0;                       // expected $ of the flexible EV's energy
  std::vector<double> peaks;                           // planned peak-window kW per scenario

  bool usable() const {
    return status == solver::SolveStatus::Optimal || status == solver::SolveStatus::GapLimit ||
           (status == solver::SolveStatus::TimeLimit && !energy.empty());
  }
};

/**
 * \brief Sample-average charging program over a set of scenarios.
 *
 * Charge and discharge are split into two non-negative columns per step, SoC is expressed
 * as a running sum, and charging-curve segments are added only where a solution crosses
 * the curve. Segment rows use one binary per reachable segment.
 */
class ChargingProgram {
 public:
  explicit ChargingProgram(ProgramInput in) : in_(std::move(in)) {
    in_.grid.validate();
    in_.curve.validate();
    if (in_.scenarios.empty()) throw DomainError("program needs at least one scenario");
    if (static_cast<int>(in_.tariff.energy_price.size()) != in_.grid.steps)
      throw DimensionMismatch("price series length differs from grid");
    for (const auto& sc : in_.scenarios) {
      if (static_cast<int>(sc.building_kw.size()) != in_.grid.steps)
        throw DimensionMismatch("scenario load length differs from grid");
      for (const auto& ev : sc.evs) {
        if (ev.e_start < ev.e_min - 1e-6 || ev.e_start > ev.e_max + 1e-6)
          throw InfeasibleState("EV " + std::to_string(ev.user_id) + " SoC outside its bounds");
      }
    }
  }

  const ProgramInput& input() const { return in_; }

  /** \brief Current model with the curve rows collected so far. */
  solver::LinearProgram build() {
    live_.reset();
    build_model();
    return lp_;
  }

  bool is_lp() const { return in_.curve_model == CurveModel::Envelope && !in_.flex; }

  ChargingSolution solve(const ProgramOptions& opt = {}) {
    if (is_lp()) return solve_live(opt);
    const auto t0 = std::chrono::steady_clock::now();
    ChargingSolution sol;
    for (int round = 0;; ++round) {
      build_model();
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      solver::MilpOptions mo;
      mo.gap = opt.gap;
      mo.time_limit_s = std::max(0.05, opt.time_limit_s - elapsed);
      mo.heuristic = [this](const std::vector<double>& x) { return repair(x); };
      auto out = solver::solve_milp(lp_, mo);
      sol.nodes += out.nodes;
      sol.lazy_rounds = round + 1;
      sol.status = out.status;
      if (!out.has_solution()) break;
      const bool last = round + 1 >= opt.max_lazy_rounds || out.status == solver::SolveStatus::TimeLimit;
      const int added = static_cast<int>(collect_violations(out.values).size());
      if (added == 0 || last) {
        std::vector<double> x = out.values;
        if (added > 0) {
          auto fixed = repair(x);
          if (fixed) x = std::move(*fixed);
        }
        extract(x, sol);
        sol.objective = lp_.evaluate(x);
        sol.mip_gap = out.mip_gap;
        break;
      }
    }
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  int curve_steps() const { return static_cast<int>(curve_set_.size()); }

  /** \brief Upper bounds of each connected user's first-step (charge, discharge) columns. */
  std::map<int, std::pair<double, double>> first_step_box() {
    ensure_live();
    std::map<int, std::pair<double, double>> box;
    for (const auto& [u, cols] : shared_)
      box[u] = {first_ub_.at(cols.first), cols.second >= 0 ? first_ub_.at(cols.second) : 0.0};
    return box;
  }

  /**
   * \brief Pure-LP solve with the first-step columns fixed to `fix` (released when null),
   * warm-started from the previous call. Gradients are reduced costs of those columns.
   */
  FirstStepSolve solve_first_step(const std::map<int, std::pair<double, double>>* fix,
                                  const ProgramOptions& opt = {},
                                  std::chrono::steady_clock::time_point deadline =
                                      std::chrono::steady_clock::time_point::max()) {
    if (!is_lp()) throw DomainError("first-step solves need the envelope curve model without flex terms");
    ensure_live();
    for (const auto& [u, cols] : shared_) {
      for (int side = 0; side < 2; ++side) {
        const int c = side == 0 ? cols.first : cols.second;
        if (c < 0) continue;
        const double ub = first_ub_.at(c);
        if (fix == nullptr) {
          live_->set_bounds(c, 0.0, ub);
          continue;
        }
        auto it = fix->find(u);
        const double v = it == fix->end() ? 0.0 : (side == 0 ? it->second.first : it->second.second);
        const double cv = std::clamp(v, 0.0, ub);
        live_->set_bounds(c, cv, cv);
      }
    }
    FirstStepSolve out;
    out.status = run_live(opt, deadline);
    if (out.status != solver::LpStatus::Optimal) return out;
    out.value = live_->objective();
    std::vector<int> cols;
    for (const auto& [u, c] : shared_) {
      cols.push_back(c.first);
      cols.push_back(c.second >= 0 ? c.second : c.first);
    }
    const auto d = live_->reduced_costs(cols);
    const auto x = live_->primal();
    for (int pk : peak_) out.peak += x[pk] / static_cast<double>(peak_.size());
    std::size_t k = 0;
    for (const auto& [u, c] : shared_) {
      out.grad[u] = {d[k], c.second >= 0 ? d[k + 1] : 0.0};
      out.action[u] = {x[c.first], c.second >= 0 ? x[c.second] : 0.0};
      k += 2;
    }
    return out;
  }

  /** \brief Full solution from the last live solve. */
  ChargingSolution live_solution() const {
    ChargingSolution sol;
    if (!live_) return sol;
    const auto x = live_->primal();
    extract(x, sol);
    sol.status = solver::SolveStatus::Optimal;
    sol.objective = live_->objective();
    return sol;
  }

 private:
  struct EvVars {
    int scenario = 0;
    int ev = 0;
    int t0 = 0;  // first modeled step
    std::vector<int> rp, rn;
    int z = -1;
    bool flex = false;
    double reach_hi_final = 0.0;
  };
  struct CurveVars {
    int ev_vars = 0;
    int t = 0;
    std::vector<int> seg;   // curve segment ids
    std::vector<int> ybin;  // binary columns, empty when a single segment applies
  };

  double tau() const { return in_.grid.step_hours; }

  void ensure_live() {
    if (live_) return;
    build_model();
    solver::LpOptions lo;
    live_ = std::make_unique<solver::BoundedSimplex>(lp_, lo);
    first_ub_.clear();
    for (const auto& [u, cols] : shared_) {
      first_ub_[cols.first] = lp_.upper[cols.first];
      if (cols.second >= 0) first_ub_[cols.second] = lp_.upper[cols.second];
    }
  }

  // Solve, add violated envelope rows, repeat.
  solver::LpStatus run_live(const ProgramOptions& opt, std::chrono::steady_clock::time_point deadline) {
    ensure_live();
    for (int round = 0;; ++round) {
      live_->set_deadline(deadline);
      const auto st = live_->solve();
      live_rounds_ = round + 1;
      if (st != solver::LpStatus::Optimal) return st;
      if (round + 1 >= opt.max_lp_rounds) return st;
      const auto flagged = collect_violations(live_->primal());
      if (flagged.empty()) return st;
      std::vector<solver::Row> rows;
      for (auto [vi, k] : flagged) {
        auto r = curve_rows(vi, k);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      for (const auto& r : rows) lp_.rows.push_back(r);
      live_->add_rows(rows);
    }
  }

  ChargingSolution solve_live(const ProgramOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(opt.time_limit_s));
    ChargingSolution sol;
    const auto st = run_live(opt, deadline);
    sol.lazy_rounds = live_rounds_;
    if (st == solver::LpStatus::Optimal) {
      const auto x = live_->primal();
      extract(x, sol);
      sol.status = solver::SolveStatus::Optimal;
      sol.objective = live_->objective();
    } else if (st == solver::LpStatus::TimeLimit) {
      sol.status = solver::SolveStatus::TimeLimit;
    } else if (st == solver::LpStatus::Unbounded) {
      sol.status = solver::SolveStatus::Unbounded;
    } else {
      sol.status = solver::SolveStatus::Infeasible;
    }
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  // Curve cap the model enforces at SoC e, kWh per step.
  double model_cap(const PlanEv& ev, double e) const {
    const double frac = std::clamp(e / ev.e_max, 0.0, 1.0);
    const double rate = in_.curve_model == CurveModel::Exact ? max_rate_at(in_.curve, frac)
                                                             : envelope_rate_at(in_.curve, frac);
    return tau() * ev.charger.efficiency * std::min(ev.charger.rate_max_kw, rate);
  }

  double first_cap(const PlanEv& ev) const {
    return step_charge_cap(ev.charger, in_.curve, ev.e_start, ev.e_max, tau());
  }

  void build_model() {
    using solver::RowSense;
    lp_ = solver::LinearProgram{};
    vars_.clear();
    curves_.clear();
    peak_.clear();
    shared_.clear();
    lambda_.clear();
    terms_.clear();
    sigma_ = -1;
    const auto& g = in_.grid;
    const int T = g.steps;
    const int now = in_.now;
    const double F = static_cast<double>(in_.scenarios.size());
    const double wf = 1.0 / F;
    const auto& w = in_.tariff.energy_price;

    if (in_.flex) {
      const auto& fx = *in_.flex;
      sigma_ = lp_.add_column(0.0, 0.0, std::max(0.0, fx.max_soc_reduction), false, "sigma_soc");
      lambda_first_ = fx.t_req;
      const int last = std::min(T, fx.t_req + fx.max_delay_steps);
      std::vector<int> idx;
      std::vector<double> val;
      for (int s = fx.t_req; s <= last; ++s) {
        lambda_.push_back(lp_.add_binary(0.0, "lambda_" + std::to_string(s)));
        idx.push_back(lambda_.back());
        val.push_back(1.0);
      }
      lp_.add_row(idx, val, RowSense::Equal, 1.0, "one_departure");
    }

    for (int f = 0; f < static_cast<int>(in_.scenarios.size()); ++f) {
      const auto& sc = in_.scenarios[f];
      const int pk = lp_.add_column(in_.weights.demand * wf, in_.p_past_max, solver::kInf, false,
                                    "peak_" + std::to_string(f));
      peak_.push_back(pk);
      for (int t = now; t < T; ++t) lp_.objective_offset += wf * w[t] * sc.building_kw[t] * tau();

      std::vector<std::vector<std::pair<int, double>>> terms(T);
      std::vector<double> chg_max(T, 0.0), dis_max(T, 0.0);
      for (int e = 0; e < static_cast<int>(sc.evs.size()); ++e) {
        const PlanEv& ev = sc.evs[e];
        const bool is_flex = in_.flex && ev.user_id == in_.flex->user_id;
        EvVars vv;
        vv.scenario = f;
        vv.ev = e;
        vv.flex = is_flex;
        vv.t0 = std::max(now, ev.t_start);
        const int t_end = std::min(T, ev.t_end);
        const bool bidi = ev.charger.bidirectional();
        const double cap_full = tau() * ev.charger.efficiency * ev.charger.rate_max_kw;
        const double dis_full = step_discharge_cap(ev.charger, tau());
        for (int t = vv.t0; t < t_end; ++t) {
          const bool first = t == vv.t0;
          const double cap =
              first ? std::max(0.0, std::min(first_cap(ev), ev.e_max - ev.e_start)) : cap_full;
          const double dis =
              first ? std::max(0.0, std::min(dis_full, ev.e_start - ev.e_min)) : dis_full;
          int rp = -1, rn = -1;
          const bool shared = in_.share_first_step && t == now && ev.connected_now;
          if (shared) {
            auto it = shared_.find(ev.user_id);
            if (it == shared_.end()) {
              rp = lp_.add_column(0.0, 0.0, cap, false, "rp_u" + std::to_string(ev.user_id) + "_now");
              if (bidi) rn = lp_.add_column(0.0, 0.0, dis, false,
                                            "rn_u" + std::to_string(ev.user_id) + "_now");
              shared_[ev.user_id] = {rp, rn};
            } else {
              rp = it->second.first;
              rn = it->second.second;
            }
          } else {
            rp = lp_.add_column(0.0, 0.0, cap, false);
            if (bidi) rn = lp_.add_column(0.0, 0.0, dis, false);
          }
          lp_.objective[rp] += wf * w[t];
          terms[t].emplace_back(rp, 1.0 / tau());
          chg_max[t] += cap;
          if (rn >= 0) {
            lp_.objective[rn] += wf * (in_.weights.battery - w[t]);
            terms[t].emplace_back(rn, -1.0 / tau());
            dis_max[t] += dis;
          }
          vv.rp.push_back(rp);
          vv.rn.push_back(rn);
        }
        // Shortfall against the target (absolute deviation).
        vv.z = lp_.add_column(in_.weights.soc * wf, 0.0, solver::kInf);
        {
          std::vector<int> idx{vv.z};
          std::vector<double> up{1.0}, dn{1.0};
          for (std::size_t k = 0; k < vv.rp.size(); ++k) {
            idx.push_back(vv.rp[k]);
            up.push_back(1.0);
            dn.push_back(-1.0);
            if (vv.rn[k] >= 0) {
              idx.push_back(vv.rn[k]);
              up.push_back(-1.0);
              dn.push_back(1.0);
            }
          }
          double target = ev.e_target;
          if (is_flex) {
            idx.push_back(sigma_);
            up.push_back(1.0);
            dn.push_back(-1.0);
          }
          lp_.add_row(idx, up, RowSense::GreaterEqual, target - ev.e_start);
          lp_.add_row(idx, dn, RowSense::GreaterEqual, ev.e_start - target);
        }
        // SoC bounds along the running sum, only where reachable.
        {
          double hi = ev.e_start, lo = ev.e_start;
          std::vector<int> idx;
          std::vector<double> val;
          for (std::size_t k = 0; k < vv.rp.size(); ++k) {
            hi += lp_.upper[vv.rp[k]];
            idx.push_back(vv.rp[k]);
            val.push_back(1.0);
            if (vv.rn[k] >= 0) {
              lo -= lp_.upper[vv.rn[k]];
              idx.push_back(vv.rn[k]);
              val.push_back(-1.0);
            }
            const bool final_step = k + 1 == vv.rp.size();
            if (hi > ev.e_max + 1e-9 && (bidi || final_step))
              lp_.add_row(idx, val, RowSense::LessEqual, ev.e_max - ev.e_start);
            if (bidi && lo < ev.e_min - 1e-9)
              lp_.add_row(idx, val, RowSense::GreaterEqual, ev.e_min - ev.e_start);
          }
          vv.reach_hi_final = hi;
        }
        if (in_.curve_model == CurveModel::Envelope && !is_flex) add_deadline_rows(vv, ev);
        // Departure choice of the negotiating EV: no energy once it has left.
        if (is_flex) {
          for (std::size_t k = 0; k < vv.rp.size(); ++k) {
            const int t = vv.t0 + static_cast<int>(k);
            if (t < lambda_first_) continue;
            for (int col : {vv.rp[k], vv.rn[k]}) {
              if (col < 0) continue;
              const double cap = lp_.upper[col];
              std::vector<int> idx{col};
              std::vector<double> val{1.0};
              for (int s = lambda_first_; s <= t && s - lambda_first_ < static_cast<int>(lambda_.size()); ++s) {
                idx.push_back(lambda_[s - lambda_first_]);
                val.push_back(cap);
              }
              lp_.add_row(idx, val, RowSense::LessEqual, cap);
            }
          }
        }
        vars_.push_back(std::move(vv));
        const int vi = static_cast<int>(vars_.size()) - 1;
        add_curve_rows(vi);
      }
      // Peak rows only where the step can reach the peak's lower bound.
      double lb = in_.p_past_max;
      for (int t = std::max(now, g.peak_begin); t < g.peak_end; ++t)
        lb = std::max(lb, sc.building_kw[t] - dis_max[t] / tau());
      lp_.lower[pk] = lb;  // skipped rows are implied by this bound
      for (int t = std::max(now, g.peak_begin); t < g.peak_end; ++t) {
        if (sc.building_kw[t] + chg_max[t] / tau() <= lb + 1e-9) continue;
        std::vector<int> idx{pk};
        std::vector<double> val{1.0};
        for (auto [c, v] : terms[t]) {
          idx.push_back(c);
          val.push_back(-v);
        }
        lp_.add_row(idx, val, RowSense::GreaterEqual, sc.building_kw[t]);
      }
      if (!in_.tariff.allow_export) {
        for (int t = now; t < T; ++t) {
          if (sc.building_kw[t] - dis_max[t] / tau() >= -1e-9) continue;
          std::vector<int> idx;
          std::vector<double> val;
          for (auto [c, v] : terms[t]) {
            idx.push_back(c);
            val.push_back(v);
          }
          lp_.add_row(idx, val, RowSense::GreaterEqual, -sc.building_kw[t]);
        }
      }
      terms_.push_back(std::move(terms));
    }
  }

  // SoC expression e_t = e_start + sum of net energy before t, as (columns, coefficients).
  void soc_terms(const EvVars& vv, int t, std::vector<int>& idx, std::vector<double>& val,
                 double scale) const {
    for (int s = vv.t0; s < t; ++s) {
      const int k = s - vv.t0;
      idx.push_back(vv.rp[k]);
      val.push_back(scale);
      if (vv.rn[k] >= 0) {
        idx.push_back(vv.rn[k]);
        val.push_back(-scale);
      }
    }
  }

  // The envelope overrates charging near full. Each row asks that j steps before departure
  // the SoC is still high enough to hit the target at the exact full rate, softened by the
  // deviation column. Rows implied by the column bounds are skipped.
  void add_deadline_rows(const EvVars& vv, const PlanEv& ev) {
    const int len = static_cast<int>(vv.rp.size());
    double need = ev.e_target, slack = 0.0;
    for (int j = 1; j < len; ++j) {
      const double goal = need, ub = lp_.upper[vv.rp[len - j]];
      auto reaches = [&](double s) {
        return s + std::min(ub, step_charge_cap(ev.charger, in_.curve, s, ev.e_max, tau())) >=
               goal - 1e-9;
      };
      double lo = std::max(0.0, goal - ub), hi = goal;
      if (reaches(lo)) {
        hi = lo;
      } else {
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (reaches(mid) ? hi : lo) = mid;
        }
      }
      need = hi;
      slack += ub;
      if (need <= ev.e_target - slack + 1e-6) break;
      std::vector<int> idx{vv.z};
      std::vector<double> val{1.0};
      for (int k = 0; k < len - j; ++k) {
        idx.push_back(vv.rp[k]);
        val.push_back(1.0);
        if (vv.rn[k] >= 0) {
          idx.push_back(vv.rn[k]);
          val.push_back(-1.0);
        }
      }
      lp_.add_row(idx, val, solver::RowSense::GreaterEqual, need - ev.e_start);
    }
  }

  void add_curve_rows(int vi) {
    const EvVars& vv = vars_[vi];
    const PlanEv& ev = in_.scenarios[vv.scenario].evs[vv.ev];
    for (int k = 1; k < static_cast<int>(vv.rp.size()); ++k) {
      if (!curve_set_.count({vv.scenario, ev.user_id, vv.t0 + k})) continue;
      for (auto& r : curve_rows(vi, k)) lp_.rows.push_back(std::move(r));
    }
  }

  static solver::Row make_row(std::vector<int> idx, std::vector<double> val, solver::RowSense sense,
                              double rhs) {
    solver::Row r;
    r.index = std::move(idx);
    r.value = std::move(val);
    r.sense = sense;
    r.rhs = rhs;
    return r;
  }

  /**
   * \brief Curve rows for step k of an EV. The exact model adds one binary per reachable
   * segment (new columns); the envelope model only adds cuts of the concave hull.
   */
  std::vector<solver::Row> curve_rows(int vi, int k) {
    using solver::RowSense;
    std::vector<solver::Row> rows;
    const EvVars& vv = vars_[vi];
    const PlanEv& ev = in_.scenarios[vv.scenario].evs[vv.ev];
    const int t = vv.t0 + k;
    const double cap_kwh = ev.e_max;
    const double eta_tau = tau() * ev.charger.efficiency;
    const double cmax = ev.charger.rate_max_kw;
    // Reachable SoC at t.
    double hi = ev.e_start, lo = ev.e_start;
    for (int s = 0; s < k; ++s) {
      hi += lp_.upper[vv.rp[s]];
      if (vv.rn[s] >= 0) lo -= lp_.upper[vv.rn[s]];
    }
    hi = std::min(hi, ev.e_max);
    lo = std::max(lo, ev.e_min);
    const double hi_pct = 100.0 * hi / cap_kwh, lo_pct = 100.0 * lo / cap_kwh;
    const int rp = vv.rp[k];
    const double pct_per_kwh = 100.0 / cap_kwh;
    auto envelope_cuts = [&]() {
      const auto env = in_.curve.envelope_points();
      for (std::size_t q = 0; q + 1 < env.size(); ++q) {
        const auto [x0, y0] = env[q];
        const auto [x1, y1] = env[q + 1];
        if (x1 <= lo_pct || x0 >= hi_pct || y1 >= y0) continue;
        const double slope = (y1 - y0) / (x1 - x0);
        if (y0 + slope * (std::min(x1, hi_pct) - x0) >= cmax) continue;
        const double icpt = y0 - slope * x0;
        std::vector<int> ci{rp};
        std::vector<double> cvv{1.0};
        soc_terms(vv, t, ci, cvv, -eta_tau * slope * pct_per_kwh);
        rows.push_back(make_row(std::move(ci), std::move(cvv), RowSense::LessEqual,
                                eta_tau * (icpt + slope * pct_per_kwh * ev.e_start)));
      }
    };
    if (in_.curve_model == CurveModel::Envelope) {
      envelope_cuts();
      return rows;
    }
    CurveVars cv;
    cv.ev_vars = vi;
    cv.t = t;
    const auto& segs = in_.curve.segments;
    for (int sgi = 0; sgi < static_cast<int>(segs.size()); ++sgi) {
      const bool last = sgi + 1 == static_cast<int>(segs.size());
      if (segs[sgi].lo_pct > hi_pct + 1e-12) continue;
      if (last ? segs[sgi].hi_pct < lo_pct : segs[sgi].hi_pct <= lo_pct) continue;
      cv.seg.push_back(sgi);
    }
    auto binding = [&](int sgi) {
      const auto& sg = segs[sgi];
      const double a = std::max(sg.lo_pct, lo_pct), b = std::min(sg.hi_pct, hi_pct);
      return std::min(sg.rate(a), sg.rate(b)) < cmax - 1e-12;
    };
    bool any_binding = false;
    for (int sgi : cv.seg) any_binding = any_binding || binding(sgi);
    if (!any_binding || cv.seg.empty()) return rows;
    auto rate_row = [&](int sgi, int ybin) {
      // rp - eta_tau*slope*pct_per_kwh*sum(r) + M*y <= eta_tau*(a + slope*pct(e_start)) + M
      const auto& sg = segs[sgi];
      std::vector<int> idx{rp};
      std::vector<double> val{1.0};
      soc_terms(vv, t, idx, val, -eta_tau * sg.slope * pct_per_kwh);
      double rhs = eta_tau * (sg.intercept + sg.slope * pct_per_kwh * ev.e_start);
      if (ybin >= 0) {
        const double rmin = std::min(sg.rate(0.0), sg.rate(100.0));
        const double big = eta_tau * std::max(0.0, cmax - rmin) + 1e-6;
        idx.push_back(ybin);
        val.push_back(big);
        rhs += big;
      }
      rows.push_back(make_row(std::move(idx), std::move(val), RowSense::LessEqual, rhs));
    };
    if (cv.seg.size() == 1) {
      rate_row(cv.seg[0], -1);
    } else {
      std::vector<int> one_idx;
      std::vector<double> one_val;
      for (std::size_t q = 0; q < cv.seg.size(); ++q) {
        cv.ybin.push_back(lp_.add_binary(0.0));
        one_idx.push_back(cv.ybin.back());
        one_val.push_back(1.0);
      }
      rows.push_back(make_row(std::move(one_idx), std::move(one_val), RowSense::Equal, 1.0));
      // Membership: sum lo_k y_k <= e_t <= sum hi_k y_k.
      std::vector<int> idx;
      std::vector<double> lo_val, hi_val;
      soc_terms(vv, t, idx, lo_val, 1.0);
      hi_val = lo_val;
      std::vector<int> idx_lo = idx, idx_hi = idx;
      for (std::size_t q = 0; q < cv.seg.size(); ++q) {
        const auto& sg = segs[cv.seg[q]];
        const bool last = cv.seg[q] + 1 == static_cast<int>(segs.size());
        idx_lo.push_back(cv.ybin[q]);
        lo_val.push_back(-sg.lo_pct / pct_per_kwh);
        idx_hi.push_back(cv.ybin[q]);
        hi_val.push_back(-(last ? sg.hi_pct : sg.hi_pct - kEdgePct) / pct_per_kwh);
      }
      rows.push_back(make_row(std::move(idx_lo), std::move(lo_val), RowSense::GreaterEqual, -ev.e_start));
      rows.push_back(make_row(std::move(idx_hi), std::move(hi_val), RowSense::LessEqual, -ev.e_start));
      for (std::size_t q = 0; q < cv.seg.size(); ++q)
        if (binding(cv.seg[q])) rate_row(cv.seg[q], cv.ybin[q]);
      envelope_cuts();
    }
    curves_.push_back(std::move(cv));
    return rows;
  }

  // Walks every EV and flags steps whose charge exceeds the modeled curve cap, plus their
  // neighbours. Returns newly flagged (ev vars, step offset) pairs.
  std::vector<std::pair<int, int>> collect_violations(const std::vector<double>& x) {
    std::vector<std::pair<int, int>> flagged;
    for (int vi = 0; vi < static_cast<int>(vars_.size()); ++vi) {
      const auto& vv = vars_[vi];
      const PlanEv& ev = in_.scenarios[vv.scenario].evs[vv.ev];
      const int n = static_cast<int>(vv.rp.size());
      double e = ev.e_start;
      for (int k = 0; k < n; ++k) {
        const double r = x[vv.rp[k]];
        if (k > 0 && r > model_cap(ev, e) + 1e-7) {
          for (int dk = -1; dk <= 1; ++dk) {
            const int kk = k + dk;
            if (kk <= 0 || kk >= n) continue;
            if (curve_set_.insert({vv.scenario, ev.user_id, vv.t0 + kk}).second) flagged.emplace_back(vi, kk);
          }
        }
        e += r - (vv.rn[k] >= 0 ? x[vv.rn[k]] : 0.0);
      }
    }
    return flagged;
  }

  /**
   * \brief Makes a relaxation point curve-feasible: fixes the departure, clips charge to
   * the true cap, carries the clipped energy forward, then recomputes slack columns.
   */
  std::optional<std::vector<double>> repair(const std::vector<double>& x_in) const {
    std::vector<double> x = x_in;
    int dep = -1;
    if (!lambda_.empty()) {
      int best = 0;
      for (std::size_t q = 1; q < lambda_.size(); ++q)
        if (x[lambda_[q]] > x[lambda_[best]] + 1e-9) best = static_cast<int>(q);
      for (std::size_t q = 0; q < lambda_.size(); ++q) x[lambda_[q]] = q == static_cast<std::size_t>(best) ? 1.0 : 0.0;
      dep = lambda_first_ + best;
    }
    std::map<std::pair<int, int>, const CurveVars*> curve_at;
    for (const auto& cv : curves_) curve_at[{cv.ev_vars, cv.t}] = &cv;
    for (int vi = 0; vi < static_cast<int>(vars_.size()); ++vi) {
      const auto& vv = vars_[vi];
      const PlanEv& ev = in_.scenarios[vv.scenario].evs[vv.ev];
      double e = ev.e_start;
      double carry = 0.0;
      for (int k = 0; k < static_cast<int>(vv.rp.size()); ++k) {
        const int t = vv.t0 + k;
        const bool shared = in_.share_first_step && t == in_.now && ev.connected_now;
        double& rp = x[vv.rp[k]];
        double rn = vv.rn[k] >= 0 ? x[vv.rn[k]] : 0.0;
        if (vv.flex && dep >= 0 && t >= dep) {
          rp = 0.0;
          if (vv.rn[k] >= 0) x[vv.rn[k]] = 0.0;
          rn = 0.0;
        } else if (!shared) {
          const double cap = std::min(lp_.upper[vv.rp[k]], model_cap(ev, e));
          if (rp > cap) {
            carry += rp - cap;
            rp = cap;
          } else if (carry > 0.0) {
            const double add = std::min(carry, std::min(cap - rp, ev.e_max - (e + rp - rn)));
            if (add > 0.0) {
              rp += add;
              carry -= add;
            }
          }
          if (rp < 0.0) rp = 0.0;
        }
        auto it = curve_at.find({vi, t});
        if (it != curve_at.end() && !it->second->ybin.empty()) {
          const double pct = 100.0 * std::clamp(e, 0.0, ev.e_max) / ev.e_max;
          const int sg = in_.curve.segment_of(pct);
          bool found = false;
          for (std::size_t q = 0; q < it->second->seg.size(); ++q) {
            const bool on = it->second->seg[q] == sg;
            x[it->second->ybin[q]] = on ? 1.0 : 0.0;
            found = found || on;
          }
          if (!found) return std::nullopt;
        }
        e += rp - rn;
        if (e < ev.e_min - 1e-7 || e > ev.e_max + 1e-7) return std::nullopt;
      }
      double target = ev.e_target;
      if (vv.flex && sigma_ >= 0) target -= x[sigma_];
      x[vv.z] = std::abs(target - e);
    }
    for (int f = 0; f < static_cast<int>(in_.scenarios.size()); ++f) {
      double pk = in_.p_past_max;
      for (int t = std::max(in_.now, in_.grid.peak_begin); t < in_.grid.peak_end; ++t) {
        double p = in_.scenarios[f].building_kw[t];
        for (auto [c, v] : terms_[f][t]) p += v * x[c];
        pk = std::max(pk, p);
      }
      x[peak_[f]] = pk;
    }
    return x;
  }

  void extract(const std::vector<double>& x, ChargingSolution& sol) const {
    const int T = in_.grid.steps;
    sol.energy.assign(in_.scenarios.size(), {});
    std::map<int, std::pair<double, int>> first;
    const double wf = 1.0 / static_cast<double>(in_.scenarios.size());
    sol.flex_energy_cost = 0.0;
    sol.peaks.clear();
    for (int pk : peak_) sol.peaks.push_back(x[pk]);
    for (const auto& vv : vars_) {
      const PlanEv& ev = in_.scenarios[vv.scenario].evs[vv.ev];
      std::vector<double> e(T, 0.0);
      for (int k = 0; k < static_cast<int>(vv.rp.size()); ++k) {
        const int t = vv.t0 + k;
        e[t] = x[vv.rp[k]] - (vv.rn[k] >= 0 ? x[vv.rn[k]] : 0.0);
        if (std::abs(e[t]) < 1e-10) e[t] = 0.0;
        if (vv.flex) sol.flex_energy_cost += wf * in_.tariff.energy_price[t] * e[t];
      }
      if (ev.connected_now && vv.t0 == in_.now && !vv.rp.empty()) {
        auto& acc = first[ev.user_id];
        acc.first += e[in_.now];
        acc.second += 1;
      }
      sol.energy[vv.scenario][ev.user_id] = std::move(e);
    }
    for (auto& [u, acc] : first) sol.first_step[u] = acc.first / acc.second;
    if (!lambda_.empty()) {
      for (std::size_t q = 0; q < lambda_.size(); ++q)
        if (x[lambda_[q]] > 0.5) sol.t_dep = lambda_first_ + static_cast<int>(q);
      sol.soc_reduction = x[sigma_];
    }
  }

  static constexpr double kEdgePct = 1e-4;

  ProgramInput in_;
  solver::LinearProgram lp_;
  std::vector<EvVars> vars_;
  std::vector<CurveVars> curves_;
  std::vector<int> peak_;
  std::map<int, std::pair<int, int>> shared_;
  std::vector<int> lambda_;
  int lambda_first_ = 0;
  int sigma_ = -1;
  std::vector<std::vector<std::vector<std::pair<int, double>>>> terms_;
  std::set<std::tuple<int, int, int>> curve_set_;
  std::unique_ptr<solver::BoundedSimplex> live_;
  std::map<int, double> first_ub_;
  int live_rounds_ = 0;
};

}  // namespace v2b::charging

#endif

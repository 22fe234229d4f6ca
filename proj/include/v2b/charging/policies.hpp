#ifndef V2B_CHARGING_POLICIES_HPP
#define V2B_CHARGING_POLICIES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "v2b/charging/program.hpp"
#include "v2b/charging/saa.hpp"
#include "v2b/charging/state.hpp"
#include "v2b/domain.hpp"

namespace v2b::charging {

/** \brief Port of each session under first-come-first-served allocation (-1 = turned away). */
inline std::vector<int> allocate_ports(const std::vector<SessionRequest>& sessions,
                                       const std::vector<int>& departures,
                                       const std::vector<ChargerSpec>& chargers,
                                       std::map<int, int> busy_until = {},
                                       const AssignmentPolicy& policy = {}) {
  std::vector<int> order(sessions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (sessions[a].t_arr != sessions[b].t_arr) return sessions[a].t_arr < sessions[b].t_arr;
    return sessions[a].user_id < sessions[b].user_id;
  });
  const bool bidi_first = policy.order != ClassOrder::UnidirectionalFirst;
  std::vector<int> port(sessions.size(), -1);
  for (int i : order) {
    const int t = sessions[i].t_arr;
    const ChargerSpec* pick = nullptr;
    for (const auto& c : chargers) {
      auto it = busy_until.find(c.id);
      if (it != busy_until.end() && it->second > t) continue;
      if (pick == nullptr) {
        pick = &c;
        continue;
      }
      const bool cp = c.bidirectional() == bidi_first, pp = pick->bidirectional() == bidi_first;
      if (cp && !pp) pick = &c;
      else if (cp == pp && c.id < pick->id) pick = &c;
    }
    if (pick == nullptr) continue;
    port[i] = pick->id;
    busy_until[pick->id] = departures[i];
  }
  return port;
}

struct PlanOptions {
  int exclude_user = -1;     // dropped from the connected fleet
  int blocked_charger = -1;  // withheld from scenario arrivals for the rest of the day
  AssignmentPolicy policy;
};

/** \brief Connected EVs plus one scenario's future arrivals, placed on ports FCFS. */
inline PlanScenario plan_scenario(const SystemState& st, const Scenario& sc,
                                  const PlanOptions& opt = {}) {
  PlanScenario ps;
  ps.building_kw = sc.building_kw;
  std::map<int, int> busy;
  for (const auto& ev : st.connected) {
    busy[ev.charger_id] = std::max(busy[ev.charger_id], ev.departure());
    if (ev.request.user_id == opt.exclude_user) continue;
    PlanEv p;
    p.user_id = ev.request.user_id;
    p.charger = st.charger(ev.charger_id);
    p.t_start = st.now;
    p.t_end = ev.departure();
    p.e_start = ev.soc;
    p.e_target = ev.target();
    p.e_min = ev.request.e_min;
    p.e_max = ev.request.e_max;
    p.connected_now = true;
    ps.evs.push_back(p);
  }
  if (opt.blocked_charger >= 0) busy[opt.blocked_charger] = std::numeric_limits<int>::max();
  std::vector<SessionRequest> future;
  std::vector<int> deps;
  for (const auto& a : sc.arrivals) {
    if (a.t_arr <= st.now) continue;
    future.push_back(a);
    deps.push_back(a.t_req);
  }
  const auto ports = allocate_ports(future, deps, st.chargers, busy, opt.policy);
  for (std::size_t i = 0; i < future.size(); ++i) {
    if (ports[i] < 0) continue;
    const auto& a = future[i];
    PlanEv p;
    p.user_id = a.user_id;
    p.charger = st.charger(ports[i]);
    p.t_start = a.t_arr;
    p.t_end = a.t_req;
    p.e_start = a.e_arr;
    p.e_target = a.e_req;
    p.e_min = a.e_min;
    p.e_max = a.e_max;
    ps.evs.push_back(p);
  }
  return ps;
}

/** \brief Net energy per connected user for the current step, kWh. */
struct StepDecision {
  std::map<int, double> energy;
  bool fallback = false;
  solver::SolveStatus status = solver::SolveStatus::Optimal;
  double seconds = 0.0;
  long nodes = 0;  // branch-and-bound nodes, or decomposition iterations
  double planned_peak_kw = 0.0;
};

enum class Baseline { MaxCharge, ReqCharge, Edf, Llf };

inline const char* to_string(Baseline b) {
  switch (b) {
    case Baseline::MaxCharge: return "max_charge";
    case Baseline::ReqCharge: return "req_charge";
    case Baseline::Edf: return "edf";
    case Baseline::Llf: return "llf";
  }
  return "?";
}

/**
 * \brief Rule-based step. MaxCharge fills to capacity, ReqCharge to the target. EDF and
 * LLF serve EVs by priority inside a site budget during the peak window; an EV whose
 * laxity drops below one step is served regardless of the budget.
 */
inline StepDecision baseline_step(const SystemState& st, Baseline kind, const PiecewiseCurve& curve,
                                  double building_now_kw,
                                  double site_cap_kw = std::numeric_limits<double>::infinity()) {
  StepDecision d;
  const double tau = st.grid.step_hours;
  struct Item {
    int user;
    double need, cap, laxity;
    int dep;
  };
  std::vector<Item> items;
  for (const auto& ev : st.connected) {
    const auto& ch = st.charger(ev.charger_id);
    const double cap = step_charge_cap(ch, curve, ev.soc, ev.request.e_max, tau);
    const double goal = kind == Baseline::MaxCharge ? ev.request.e_max : ev.target();
    const double need = std::max(0.0, goal - ev.soc);
    const double rate = ch.efficiency * ch.rate_max_kw;
    const double laxity = (ev.departure() - st.now) * tau - (rate > 0 ? need / rate : 0.0);
    items.push_back({ev.request.user_id, need, cap, laxity, ev.departure()});
    d.energy[ev.request.user_id] = 0.0;
  }
  if (kind == Baseline::MaxCharge || kind == Baseline::ReqCharge) {
    for (const auto& it : items) d.energy[it.user] = std::min(it.need, it.cap);
    return d;
  }
  std::stable_sort(items.begin(), items.end(), [&](const Item& a, const Item& b) {
    if (kind == Baseline::Edf) {
      if (a.dep != b.dep) return a.dep < b.dep;
    } else if (a.laxity != b.laxity) {
      return a.laxity < b.laxity;
    }
    return a.user < b.user;
  });
  double budget = st.grid.in_peak(st.now)
                      ? std::max(0.0, site_cap_kw - building_now_kw) * tau
                      : std::numeric_limits<double>::infinity();
  for (const auto& it : items) {
    if (it.laxity >= tau) continue;
    const double e = std::min(it.need, it.cap);
    d.energy[it.user] = e;
    budget -= e;
  }
  for (const auto& it : items) {
    if (it.laxity < tau) continue;
    const double e = std::max(0.0, std::min({it.need, it.cap, budget}));
    d.energy[it.user] = e;
    budget -= e;
  }
  return d;
}

/**
 * \brief Spreads headroom below the estimated peak over connected EVs by water-filling.
 * Unidirectional EVs stop at their target, bidirectional ones at capacity. Applying it
 * twice changes nothing.
 */
inline std::map<int, double> refine_actions(const SystemState& st, std::map<int, double> energy,
                                            double p_max_hat_kw, double building_now_kw,
                                            const PiecewiseCurve& curve) {
  const double tau = st.grid.step_hours;
  double net = 0.0;
  for (const auto& [u, e] : energy) net += e;
  double budget = (p_max_hat_kw - (building_now_kw + net / tau)) * tau;
  if (budget <= 1e-12) return energy;
  std::map<int, double> room;
  for (const auto& ev : st.connected) {
    const int u = ev.request.user_id;
    const auto& ch = st.charger(ev.charger_id);
    const double r = energy.count(u) ? energy[u] : 0.0;
    const double cap = step_charge_cap(ch, curve, ev.soc, ev.request.e_max, tau);
    const double goal = ch.bidirectional() ? ev.request.e_max : ev.target();
    const double h = std::min(goal - (ev.soc + r), cap - r);
    if (h > 1e-12) room[u] = h;
  }
  while (budget > 1e-12 && !room.empty()) {
    const double share = budget / static_cast<double>(room.size());
    double used = 0.0;
    for (auto it = room.begin(); it != room.end();) {
      const double add = std::min(share, it->second);
      energy[it->first] += add;
      used += add;
      it->second -= add;
      if (it->second <= 1e-12) it = room.erase(it);
      else ++it;
    }
    budget -= used;
    if (used <= 1e-15) break;
  }
  return energy;
}

/** \brief Steps at the full exact-curve rate from `soc` to `target`; `limit + 1` if more. */
inline int steps_to_target(const ChargerSpec& ch, const PiecewiseCurve& curve, double soc,
                           double target, double capacity, double tau, int limit) {
  int n = 0;
  while (soc < target - 1e-7) {
    if (n > limit) return limit + 1;
    const double cap = step_charge_cap(ch, curve, soc, capacity, tau);
    if (cap <= 1e-12) return limit + 1;
    soc += std::min(cap, target - soc);
    ++n;
  }
  return n;
}

/**
 * \brief Raises any action that would leave an EV unable to reach its target at the full
 * exact-curve rate before departure. Plans built on the concave envelope overrate charging
 * near full, so they can defer too long.
 */
inline std::map<int, double> secure_targets(const SystemState& st, std::map<int, double> energy,
                                            const PiecewiseCurve& curve) {
  const double tau = st.grid.step_hours;
  for (const auto& ev : st.connected) {
    const int u = ev.request.user_id;
    const int left = ev.departure() - st.now - 1;
    double& e = energy[u];
    if (steps_to_target(st.charger(ev.charger_id), curve, ev.soc + e, ev.target(),
                        ev.request.e_max, tau, left) <= left)
      continue;
    const double full = std::min(std::max(0.0, ev.target() - ev.soc),
                                 step_charge_cap(st.charger(ev.charger_id), curve, ev.soc,
                                                 ev.request.e_max, tau));
    e = std::max(e, full);
  }
  return energy;
}

/**
 * \brief Curve model of the per-step program. Auto uses the exact segment model for a single
 * scenario and the envelope (decomposed by scenario) otherwise.
 */
enum class PlanCurve { Auto, Exact, Envelope };

/** \brief Refinement cap: the peak realized so far, or the caller's estimate. */
enum class RefinePeak { Realized, Given };

struct MpcConfig {
  ObjectiveWeights weights;
  double gap = 1e-4;
  double time_limit_s = 30.0;
  bool refine = true;
  AssignmentPolicy assignment;
  PlanCurve curve = PlanCurve::Auto;
  RefinePeak refine_peak = RefinePeak::Realized;
};

/**
 * \brief One receding-horizon step: solve the sample-average program with a shared first
 * action, then refine. Falls back to ReqCharge when the solver returns nothing in time.
 */
inline StepDecision mc_mpc_step(const SystemState& st, const std::vector<Scenario>& futures,
                                const Tariff& tariff, const PiecewiseCurve& curve,
                                const MpcConfig& cfg, double p_max_hat_kw, double building_now_kw) {
  StepDecision d;
  if (st.connected.empty()) return d;
  ProgramInput in;
  in.grid = st.grid;
  in.tariff = tariff;
  in.weights = cfg.weights;
  in.curve = curve;
  in.now = st.now;
  in.p_past_max = st.p_past_max;
  in.share_first_step = true;
  PlanOptions po;
  po.policy = cfg.assignment;
  for (const auto& sc : futures) in.scenarios.push_back(plan_scenario(st, sc, po));
  const bool exact = cfg.curve == PlanCurve::Exact ||
                     (cfg.curve == PlanCurve::Auto && in.scenarios.size() == 1);
  in.curve_model = exact ? CurveModel::Exact : CurveModel::Envelope;
  std::map<int, double> first;
  double planned = 0.0;
  bool ok = false;
  if (exact || in.scenarios.size() == 1) {
    ChargingProgram prog(std::move(in));
    ProgramOptions opt;
    opt.gap = cfg.gap;
    opt.time_limit_s = cfg.time_limit_s;
    const auto sol = prog.solve(opt);
    d.status = sol.status;
    d.seconds = sol.seconds;
    d.nodes = sol.nodes;
    ok = sol.usable() && !sol.first_step.empty();
    first = sol.first_step;
    for (double p : sol.peaks) planned += p / static_cast<double>(sol.peaks.size());
  } else {
    SaaOptions so;
    so.gap = cfg.gap;
    so.time_limit_s = cfg.time_limit_s;
    const auto res = solve_saa_decomposed(in, so);
    d.status = res.status;
    d.seconds = res.seconds;
    d.nodes = res.iterations;
    ok = res.usable() && !res.first_step.empty();
    first = res.first_step;
    planned = res.planned_peak;
  }
  if (!ok) {
    const auto status = d.status;
    const double seconds = d.seconds;
    d = baseline_step(st, Baseline::ReqCharge, curve, building_now_kw);
    d.fallback = true;
    d.status = status;
    d.seconds = seconds;
    return d;
  }
  for (const auto& ev : st.connected) {
    auto it = first.find(ev.request.user_id);
    d.energy[ev.request.user_id] = it == first.end() ? 0.0 : it->second;
  }
  d.planned_peak_kw = planned;
  if (cfg.refine) {
    const double cap = cfg.refine_peak == RefinePeak::Realized ? st.p_past_max : p_max_hat_kw;
    d.energy = refine_actions(st, d.energy, cap, building_now_kw, curve);
  }
  d.energy = secure_targets(st, d.energy, curve);
  return d;
}

}  // namespace v2b::charging

#endif

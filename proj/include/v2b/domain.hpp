#ifndef V2B_DOMAIN_HPP
#define V2B_DOMAIN_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "v2b/error.hpp"

namespace v2b {

/** \brief Discretization of one operating day. */
struct TimeGrid {
  double step_hours = 0.25;
  int steps = 96;
  int peak_begin = 24;  // half-open [peak_begin, peak_end)
  int peak_end = 88;

  bool in_peak(int t) const { return t >= peak_begin && t < peak_end; }
  double hour_of(int t) const { return t * step_hours; }
  double minutes_per_step() const { return step_hours * 60.0; }
  int step_of_hour(double h) const { return static_cast<int>(std::lround(h / step_hours)); }

  void validate() const {
    if (!(step_hours > 0.0) || steps <= 0)
      throw DomainError("time grid needs a positive step length and step count");
    if (peak_begin < 0 || peak_end > steps || peak_begin > peak_end)
      throw DomainError("peak window must lie inside the day");
  }
};

/** \brief Prices and penalty rates. Energy prices are per step. */
struct Tariff {
  std::vector<double> energy_price;  // $/kWh
  double demand_rate = 11.67;        // $/kW of billing-period peak
  double soc_penalty = 0.5;          // $/kWh of unmet requested SoC
  double battery_penalty = 0.05;     // $/kWh discharged
  double external_rate = 0.30;       // $/kWh at an outside charger
  bool allow_export = false;

  static Tariff time_of_use(const TimeGrid& g, double peak = 0.178, double off_peak = 0.137) {
    Tariff t;
    t.energy_price.resize(g.steps);
    for (int s = 0; s < g.steps; ++s) t.energy_price[s] = g.in_peak(s) ? peak : off_peak;
    return t;
  }

  double peak_price() const {
    return energy_price.empty() ? 0.0 : *std::max_element(energy_price.begin(), energy_price.end());
  }
};

enum class ChargerKind { Unidirectional, Bidirectional };

struct ChargerSpec {
  int id = 0;
  ChargerKind kind = ChargerKind::Unidirectional;
  bool controlled = true;
  double rate_min_kw = 0.0;  // negative when discharge is possible
  double rate_max_kw = 20.0;
  double efficiency = 1.0;

  bool bidirectional() const { return kind == ChargerKind::Bidirectional && rate_min_kw < 0.0; }
};

/** \brief Default site: 10 unidirectional 0..20 kW and 5 bidirectional -20..20 kW ports. */
inline std::vector<ChargerSpec> default_fleet(int unidirectional = 10, int bidirectional = 5) {
  std::vector<ChargerSpec> out;
  int id = 0;
  for (int i = 0; i < bidirectional; ++i)
    out.push_back({id++, ChargerKind::Bidirectional, true, -20.0, 20.0, 1.0});
  for (int i = 0; i < unidirectional; ++i)
    out.push_back({id++, ChargerKind::Unidirectional, true, 0.0, 20.0, 1.0});
  return out;
}

/** \brief A reported charging request; energies in kWh, times in steps. */
struct SessionRequest {
  int user_id = 0;
  int t_arr = 0;
  double e_arr = 0.0;
  double e_req = 0.0;
  int t_req = 0;
  double e_min = 0.0;
  double e_max = 0.0;  // also the usable capacity
  int user_type = 0;

  double requested_energy() const { return std::max(0.0, e_req - e_arr); }

  void validate(const TimeGrid& g) const {
    if (!(t_arr < t_req)) throw DomainError("departure must follow arrival");
    if (t_arr < 0 || t_req > g.steps) throw DomainError("session outside the day");
    if (!(e_min <= e_arr && e_arr <= e_req && e_req <= e_max))
      throw DomainError("need e_min <= e_arr <= e_req <= e_max");
    if (!(e_max > 0.0)) throw DomainError("capacity must be positive");
  }
};

/** \brief Outcome of a negotiation. level < 0 means the user declined. */
struct NegotiatedChoice {
  int level = 0;
  double e_target = 0.0;
  int t_dep = 0;
  double price = 0.0;
  double utility = 0.0;

  bool rejected() const { return level < 0; }
  static NegotiatedChoice as_requested(const SessionRequest& r, double price = 0.0) {
    return NegotiatedChoice{0, r.e_req, r.t_req, price, 0.0};
  }
  static NegotiatedChoice reject() { return NegotiatedChoice{-1, 0.0, 0, 0.0, 0.0}; }
};

struct CostBreakdown {
  double energy = 0.0;
  double demand = 0.0;
  double missing_soc = 0.0;
  double battery = 0.0;
  double total = 0.0;
  double peak_kw = 0.0;

  CostBreakdown& operator+=(const CostBreakdown& o) {
    energy += o.energy;
    demand += o.demand;
    missing_soc += o.missing_soc;
    battery += o.battery;
    total += o.total;
    peak_kw = std::max(peak_kw, o.peak_kw);
    return *this;
  }
};

/** \brief Realized per-step energy of one EV over the whole day grid. */
struct EvTrace {
  int user_id = 0;
  int charger_id = -1;
  int t_arr = 0;
  int t_dep = 0;
  double e_arr = 0.0;
  double e_target = 0.0;
  double e_min = 0.0;
  double e_max = 0.0;
  std::vector<double> energy;  // kWh per step, zero while unplugged

  double soc_at(int t) const {
    double e = e_arr;
    for (int s = t_arr; s < std::min<int>(t, static_cast<int>(energy.size())); ++s) e += energy[s];
    return e;
  }
  double final_soc() const { return soc_at(t_dep); }
  double shortfall() const { return std::max(0.0, e_target - final_soc()); }
};

/** \brief Per-EV energy plus building load for one day. */
struct Schedule {
  TimeGrid grid;
  std::vector<double> building_kw;
  std::vector<EvTrace> evs;

  std::vector<double> ev_energy_per_step() const {
    std::vector<double> s(grid.steps, 0.0);
    for (const auto& ev : evs)
      for (int t = 0; t < grid.steps && t < static_cast<int>(ev.energy.size()); ++t)
        s[t] += ev.energy[t];
    return s;
  }
  std::vector<double> aggregate_kw() const {
    auto ev = ev_energy_per_step();
    std::vector<double> p(grid.steps, 0.0);
    for (int t = 0; t < grid.steps; ++t) p[t] = building_kw[t] + ev[t] / grid.step_hours;
    return p;
  }
};

/** \brief One sampled future: building load for the whole day and later arrivals. */
struct Scenario {
  std::vector<double> building_kw;
  std::vector<SessionRequest> arrivals;
};

/** \brief Energy bill of one step: price * (building kWh + net EV kWh). Negative under net export. */
inline double step_energy_cost(double building_kw, double ev_kwh, double price, double step_hours) {
  return price * (building_kw * step_hours + ev_kwh);
}

/** \brief Demand charge on the largest of the supplied peaks. */
inline double billing_demand_cost(const std::vector<double>& peaks_kw, double rate) {
  if (peaks_kw.empty()) throw EmptyBillingPeriod("no peaks in billing period");
  return rate * *std::max_element(peaks_kw.begin(), peaks_kw.end());
}

/** \brief Peak aggregate power over the tariff's peak window. */
inline double peak_window_max(const TimeGrid& g, const std::vector<double>& p_kw) {
  double peak = 0.0;
  for (int t = g.peak_begin; t < g.peak_end; ++t) peak = std::max(peak, p_kw[t]);
  return peak;
}

/**
 * \brief Day cost: energy, demand on the peak-window maximum, one-sided SoC shortfall
 * and discharge throughput. Throws on length mismatch or net export.
 */
inline CostBreakdown total_cost(const TimeGrid& g, const std::vector<double>& building_kw,
                                const std::vector<EvTrace>& evs, const Tariff& tariff) {
  g.validate();
  if (static_cast<int>(building_kw.size()) != g.steps)
    throw DimensionMismatch("building load has " + std::to_string(building_kw.size()) +
                            " steps, grid has " + std::to_string(g.steps));
  if (static_cast<int>(tariff.energy_price.size()) != g.steps)
    throw DimensionMismatch("price series length differs from grid");
  std::vector<double> ev_step(g.steps, 0.0);
  CostBreakdown c;
  for (const auto& ev : evs) {
    if (static_cast<int>(ev.energy.size()) != g.steps)
      throw DimensionMismatch("EV trace length differs from grid");
    for (int t = 0; t < g.steps; ++t) {
      ev_step[t] += ev.energy[t];
      c.battery += tariff.battery_penalty * std::max(0.0, -ev.energy[t]);
    }
    c.missing_soc += tariff.soc_penalty * ev.shortfall();
  }
  std::vector<double> p(g.steps);
  for (int t = 0; t < g.steps; ++t) {
    p[t] = building_kw[t] + ev_step[t] / g.step_hours;
    if (!tariff.allow_export && p[t] < -1e-6)
      throw DomainError("net export at step " + std::to_string(t));
    c.energy += step_energy_cost(building_kw[t], ev_step[t], tariff.energy_price[t], g.step_hours);
  }
  c.peak_kw = peak_window_max(g, p);
  c.demand = tariff.demand_rate * c.peak_kw;
  c.total = c.energy + c.demand + c.missing_soc + c.battery;
  return c;
}

inline CostBreakdown total_cost(const Schedule& s, const Tariff& tariff) {
  return total_cost(s.grid, s.building_kw, s.evs, tariff);
}

/**
 * \brief Billing-period roll-up: day energy and penalty terms add up, demand is charged
 * once on the largest daily peak.
 */
inline CostBreakdown billing_period_cost(const std::vector<CostBreakdown>& days, double demand_rate) {
  if (days.empty()) throw EmptyBillingPeriod("billing period has no days");
  CostBreakdown c;
  std::vector<double> peaks;
  for (const auto& d : days) {
    c.energy += d.energy;
    c.missing_soc += d.missing_soc;
    c.battery += d.battery;
    peaks.push_back(d.peak_kw);
  }
  c.demand = billing_demand_cost(peaks, demand_rate);
  c.peak_kw = *std::max_element(peaks.begin(), peaks.end());
  c.total = c.energy + c.demand + c.missing_soc + c.battery;
  return c;
}

}  // namespace v2b

#endif

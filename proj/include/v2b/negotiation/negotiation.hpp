#ifndef V2B_NEGOTIATION_NEGOTIATION_HPP
#define V2B_NEGOTIATION_NEGOTIATION_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "v2b/charging/policies.hpp"
#include "v2b/charging/program.hpp"
#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"

namespace v2b::negotiation {

using charging::SystemState;

/** \brief Allowed deviation of one menu level: percent of capacity and minutes. */
struct FlexibilityLevel {
  int index = 0;
  double de_max = 0.0;
  double dt_max = 0.0;

  void validate() const {
    if (de_max < 0.0 || dt_max < 0.0) throw ConfigError("flexibility bounds must be non-negative");
    if (index == 0 && (de_max != 0.0 || dt_max != 0.0))
      throw ConfigError("level 0 must allow no deviation");
  }
};

inline std::vector<FlexibilityLevel> default_levels() {
  return {{0, 0.0, 0.0}, {1, 6.25, 30.0}, {2, 10.0, 15.0}, {3, 20.0, 105.0}};
}

inline void validate_levels(const std::vector<FlexibilityLevel>& levels) {
  if (levels.empty() || levels[0].index != 0) throw ConfigError("menu must start with level 0");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    levels[i].validate();
    if (levels[i].index != static_cast<int>(i)) throw ConfigError("levels must be numbered 0..L");
  }
}

struct Offer {
  int level = 0;
  double e_dep_target = 0.0;  // kWh
  int t_dep = 0;              // step
  double price = 0.0;         // $
  double utility = 0.0;       // $
  double expected_energy = 0.0;  // kWh delivered, scenario average
  double energy_cost = 0.0;      // $ of energy charged into the EV, scenario average
  double expected_cost = 0.0;    // sample-average system cost with this offer
  double de_pct = 0.0;           // SoC reduction, percent of capacity
  double dt_min = 0.0;           // delay, minutes
};

struct OfferMenu {
  int user_id = 0;
  std::vector<Offer> offers;
  double reject_price = 0.0;  // external rate times requested energy
  double requested_energy = 0.0;
  double cost_without = 0.0;  // sample-average system cost without the user
  bool has_reject = true;
};

inline void to_json(Json& j, const Offer& o) {
  j = Json{{"level", o.level},
           {"e_dep_target", o.e_dep_target},
           {"t_dep", o.t_dep},
           {"price", o.price},
           {"utility", o.utility},
           {"expected_energy", o.expected_energy},
           {"energy_cost", o.energy_cost},
           {"expected_cost", o.expected_cost},
           {"de_pct", o.de_pct},
           {"dt_min", o.dt_min}};
}

inline void to_json(Json& j, const OfferMenu& m) {
  j = Json{{"user_id", m.user_id},
           {"offers", m.offers},
           {"reject", m.has_reject ? Json{{"price", m.reject_price}} : Json(nullptr)},
           {"requested_energy", m.requested_energy},
           {"cost_without", m.cost_without}};
}

inline void from_json(const Json& j, FlexibilityLevel& l) {
  check_keys(j, {"index", "de_max", "dt_max"}, "flexibility level");
  read_opt(j, "index", l.index, "flexibility level");
  read_opt(j, "de_max", l.de_max, "flexibility level");
  read_opt(j, "dt_max", l.dt_max, "flexibility level");
}

inline void to_json(Json& j, const FlexibilityLevel& l) {
  j = Json{{"index", l.index}, {"de_max", l.de_max}, {"dt_max", l.dt_max}};
}

/**
 * \brief User price: charged energy cost minus the shared utility. Throws BudgetViolation when
 * the price pays out more than the user saves the site.
 */
inline double price_option(double energy_cost, double utility, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  const double zeta = energy_cost - alpha * utility;
  if (zeta < -utility - 1e-9 * std::max(1.0, std::abs(utility)))
    throw BudgetViolation("price " + std::to_string(zeta) + " below -U = " + std::to_string(-utility));
  return zeta;
}

/** \brief Price floored at -U so the site never pays out more than the user saves it. */
inline double budget_feasible_price(double energy_cost, double utility, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  return std::max(energy_cost - alpha * utility, -utility);
}

/** \brief Deviation bounds of a level in model units for one request. */
struct LevelBounds {
  double max_reduction = 0.0;  // kWh
  int max_delay = 0;           // steps
};

inline LevelBounds level_bounds(const FlexibilityLevel& l, const SessionRequest& r, const TimeGrid& g) {
  LevelBounds b;
  b.max_reduction = std::min(l.de_max / 100.0 * r.e_max, r.requested_energy());
  b.max_delay = static_cast<int>(std::floor(l.dt_max / g.minutes_per_step() + 1e-9));
  b.max_delay = std::max(0, std::min(b.max_delay, g.steps - r.t_req));
  return b;
}

struct EvaluatorOptions {
  charging::ObjectiveWeights weights;
  charging::AssignmentPolicy assignment;
  charging::CurveModel curve_model = charging::CurveModel::Envelope;
  double time_limit_s = 30.0;
  double tie_tol = 1e-7;  // relative slack when searching for the earliest departure
};

/** \brief Sample-average cost of one (target, departure) choice plus the user's energy. */
struct ChoiceValue {
  double cost = 0.0;
  double energy = 0.0;       // kWh delivered to the user
  double energy_cost = 0.0;  // $ of charged energy
};

/**
 * \brief Evaluates choices of one arriving user against a fixed scenario set. The user must
 * already be connected in `state`; its port stays withheld from future arrivals both with and
 * without the user, so the two programs differ only in the user's own columns. Scenarios are
 * solved independently as the choice is the only shared decision.
 */
class OptionEvaluator {
 public:
  OptionEvaluator(SystemState state, int user_id, std::vector<Scenario> futures, Tariff tariff,
                  charging::PiecewiseCurve curve, EvaluatorOptions opt = {})
      : st_(std::move(state)), user_(user_id), futures_(std::move(futures)),
        tariff_(std::move(tariff)), curve_(std::move(curve)), opt_(opt) {
    if (futures_.empty()) throw DomainError("option evaluation needs at least one scenario");
    bool found = false;
    for (const auto& ev : st_.connected) {
      if (ev.request.user_id != user_) continue;
      found = true;
      request_ = ev.request;
      charger_ = ev.charger_id;
    }
    if (!found) throw DomainError("user " + std::to_string(user_id) + " is not connected");
  }

  const SessionRequest& request() const { return request_; }
  const std::vector<Scenario>& futures() const { return futures_; }

  /** \brief System cost without the user; solved once. */
  double cost_without() {
    if (!without_) {
      charging::PlanOptions po;
      po.exclude_user = user_;
      po.blocked_charger = charger_;
      po.policy = opt_.assignment;
      without_ = evaluate_with(po, st_).cost;
    }
    return *without_;
  }

  ChoiceValue value(double e_target, int t_dep) {
    if (t_dep <= st_.now || t_dep > st_.grid.steps) throw DomainError("departure outside the day");
    SystemState s = st_;
    for (auto& ev : s.connected) {
      if (ev.request.user_id != user_) continue;
      ev.choice.e_target = e_target;
      ev.choice.t_dep = t_dep;
    }
    charging::PlanOptions po;
    po.blocked_charger = charger_;
    po.policy = opt_.assignment;
    return evaluate_with(po, s);
  }

  /** \brief Cost reduction the user brings at this choice. */
  double marginal_utility(double e_target, int t_dep) { return cost_without() - value(e_target, t_dep).cost; }

  struct LevelResult {
    double e_target = 0.0;
    int t_dep = 0;
    ChoiceValue value;
  };

  /**
   * \brief Best choice inside a level. Cost does not increase with a larger SoC reduction or a
   * later departure, so the reduction sits at its cap and the departure is the earliest one
   * whose cost matches the latest allowed departure.
   */
  LevelResult evaluate_level(const FlexibilityLevel& level) {
    const auto b = level_bounds(level, request_, st_.grid);
    LevelResult r;
    r.e_target = request_.e_req - b.max_reduction;
    const int lo0 = request_.t_req, hi0 = request_.t_req + b.max_delay;
    const ChoiceValue at_hi = value(r.e_target, hi0);
    r.t_dep = hi0;
    r.value = at_hi;
    const double tol = opt_.tie_tol * std::max(1.0, std::abs(at_hi.cost));
    int lo = lo0, hi = hi0;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      const ChoiceValue v = value(r.e_target, mid);
      if (v.cost <= at_hi.cost + tol) {
        hi = mid;
        r.t_dep = mid;
        r.value = v;
      } else {
        lo = mid + 1;
      }
    }
    return r;
  }

  /**
   * \brief The same level as one mixed-integer program over all scenarios, with a departure
   * indicator per candidate step and a continuous SoC reduction.
   */
  LevelResult evaluate_level_joint(const FlexibilityLevel& level, double gap = 0.0) {
    const auto b = level_bounds(level, request_, st_.grid);
    SystemState s = st_;
    for (auto& ev : s.connected) {
      if (ev.request.user_id != user_) continue;
      ev.choice.e_target = request_.e_req;
      ev.choice.t_dep = request_.t_req + b.max_delay;
    }
    charging::PlanOptions po;
    po.blocked_charger = charger_;
    po.policy = opt_.assignment;
    auto in = base_input();
    for (const auto& sc : futures_) in.scenarios.push_back(charging::plan_scenario(s, sc, po));
    charging::FlexTerms fx;
    fx.user_id = user_;
    fx.t_req = request_.t_req;
    fx.max_delay_steps = b.max_delay;
    fx.max_soc_reduction = b.max_reduction;
    in.flex = fx;
    charging::ChargingProgram prog(std::move(in));
    charging::ProgramOptions po2;
    po2.gap = gap;
    po2.time_limit_s = opt_.time_limit_s;
    const auto sol = prog.solve(po2);
    if (!sol.usable()) throw InfeasibleState("joint level program has no solution");
    LevelResult r;
    r.e_target = request_.e_req - sol.soc_reduction;
    r.t_dep = sol.t_dep;
    r.value.cost = sol.objective;
    return r;
  }

 private:
  charging::ProgramInput base_input() const {
    charging::ProgramInput in;
    in.grid = st_.grid;
    in.tariff = tariff_;
    in.weights = opt_.weights;
    in.curve = curve_;
    in.now = st_.now;
    in.p_past_max = st_.p_past_max;
    in.share_first_step = false;
    in.curve_model = opt_.curve_model;
    return in;
  }

  ChoiceValue evaluate_with(const charging::PlanOptions& po, const SystemState& s) {
    ChoiceValue out;
    const double F = static_cast<double>(futures_.size());
    const auto& w = tariff_.energy_price;
    for (const auto& sc : futures_) {
      auto in = base_input();
      in.scenarios.push_back(charging::plan_scenario(s, sc, po));
      charging::ChargingProgram prog(std::move(in));
      charging::ProgramOptions opt;
      opt.gap = 0.0;
      opt.time_limit_s = opt_.time_limit_s;
      const auto sol = prog.solve(opt);
      if (sol.status != solver::SolveStatus::Optimal && sol.status != solver::SolveStatus::GapLimit)
        throw InfeasibleState("option evaluation failed for user " + std::to_string(user_));
      out.cost += sol.objective / F;
      const auto it = sol.energy[0].find(user_);
      if (it == sol.energy[0].end()) continue;
      for (int t = 0; t < static_cast<int>(it->second.size()); ++t) {
        out.energy += it->second[t] / F;
        out.energy_cost += w[t] * std::max(0.0, it->second[t]) / F;
      }
    }
    return out;
  }

  SystemState st_;
  int user_;
  SessionRequest request_;
  int charger_ = -1;
  std::vector<Scenario> futures_;
  Tariff tariff_;
  charging::PiecewiseCurve curve_;
  EvaluatorOptions opt_;
  std::optional<double> without_;
};

struct MenuOptions {
  double alpha = 1.0;
  bool budget_floor = true;  // floor prices at -U for every alpha
  bool include_reject = true;
};

inline Offer make_offer(const FlexibilityLevel& level, const SessionRequest& r, const TimeGrid& g,
                        double e_target, int t_dep) {
  Offer o;
  o.level = level.index;
  o.e_dep_target = e_target;
  o.t_dep = t_dep;
  o.de_pct = std::max(0.0, (r.e_req - e_target) / r.e_max * 100.0);
  o.dt_min = std::max(0, t_dep - r.t_req) * g.minutes_per_step();
  return o;
}

/** \brief One optimized, utility-priced offer per level plus the outside option. */
inline OfferMenu generate_offer_menu(OptionEvaluator& ev, const std::vector<FlexibilityLevel>& levels,
                                     const Tariff& tariff, const TimeGrid& g, const MenuOptions& mo = {}) {
  validate_levels(levels);
  const auto& r = ev.request();
  OfferMenu m;
  m.user_id = r.user_id;
  m.requested_energy = r.requested_energy();
  m.reject_price = tariff.external_rate * m.requested_energy;
  m.has_reject = mo.include_reject;
  m.cost_without = ev.cost_without();
  for (const auto& l : levels) {
    const auto res = ev.evaluate_level(l);
    Offer o = make_offer(l, r, g, res.e_target, res.t_dep);
    o.expected_cost = res.value.cost;
    o.expected_energy = res.value.energy;
    o.energy_cost = res.value.energy_cost;
    o.utility = m.cost_without - res.value.cost;
    o.price = mo.budget_floor ? budget_feasible_price(o.energy_cost, o.utility, mo.alpha)
                              : price_option(o.energy_cost, o.utility, mo.alpha);
    m.offers.push_back(o);
  }
  return m;
}

/**
 * \brief Menu without optimization: each level at its full deviation, priced at the peak
 * energy rate less a fixed per-level discount.
 */
inline OfferMenu menu_based_offers(const SessionRequest& r, const std::vector<FlexibilityLevel>& levels,
                                   const std::vector<double>& discounts, const Tariff& tariff,
                                   const TimeGrid& g) {
  validate_levels(levels);
  if (discounts.size() != levels.size()) throw ConfigError("need one discount per menu level");
  OfferMenu m;
  m.user_id = r.user_id;
  m.requested_energy = r.requested_energy();
  m.reject_price = tariff.external_rate * m.requested_energy;
  const double rate = tariff.peak_price();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (discounts[i] < 0.0 || discounts[i] > 1.0) throw ConfigError("discounts must lie in [0, 1]");
    const auto b = level_bounds(levels[i], r, g);
    Offer o = make_offer(levels[i], r, g, r.e_req - b.max_reduction, r.t_req + b.max_delay);
    o.expected_energy = o.e_dep_target - r.e_arr;
    o.price = rate * (1.0 - discounts[i]) * o.expected_energy;
    o.energy_cost = o.price;
    m.offers.push_back(o);
  }
  return m;
}

}  // namespace v2b::negotiation

#endif

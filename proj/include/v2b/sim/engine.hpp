#ifndef V2B_SIM_ENGINE_HPP
#define V2B_SIM_ENGINE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "v2b/behavior/behavior.hpp"
#include "v2b/charging/policies.hpp"
#include "v2b/charging/program.hpp"
#include "v2b/domain.hpp"
#include "v2b/negotiation/negotiation.hpp"
#include "v2b/scenario/generator.hpp"
#include "v2b/sim/config.hpp"

namespace v2b::sim {

using scenario::Rng;

/** \brief Independent generator for one (seed, purpose, index) triple. */
inline Rng stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

enum StreamPurpose : std::uint32_t { kDayStream = 1, kForecastStream = 2, kNegotiationStream = 3, kChoiceStream = 4 };

/** \brief The realized day for a seed: preset-perturbed sessions, load and tariff. */
struct RealizedDay {
  scenario::Day day;
  Tariff tariff;
};

inline RealizedDay realize_day(const SimConfig& cfg, std::uint64_t seed) {
  const auto preset = scenario::find_preset(cfg.preset);
  auto rng = stream(seed, kDayStream);
  RealizedDay r;
  r.day = scenario::sample_day(scenario::apply_preset(cfg.generator, preset), rng);
  r.tariff = scenario::apply_preset(cfg.tariff, cfg.grid, preset);
  return r;
}

/** \brief What happened to one arriving user. */
struct SessionRecord {
  SessionRequest request;
  int charger_id = -1;
  bool involuntary_reject = false;
  std::optional<negotiation::OfferMenu> menu;
  std::vector<double> satisfaction;  // Y per offer, then reject when offered
  std::vector<double> probabilities;
  int chosen = -1;                   // menu index; equals offers.size() for reject
  NegotiatedChoice choice;
  double inconvenience = 0.0;
  double external_cost = 0.0;
  double price = 0.0;         // final payment
  double delivered = 0.0;     // kWh, set at departure
  double shortfall = 0.0;     // kWh below the negotiated target
  bool departed = false;

  bool accepted() const { return !involuntary_reject && !choice.rejected(); }
};

/** \brief Day-level outcome metrics. */
struct DayMetrics {
  CostBreakdown bill;          // site bill with the realized tariff
  double payments = 0.0;       // sum of user prices
  double net_cost = 0.0;       // bill minus payments
  double delivered_kwh = 0.0;  // to accepted users
  int arrivals = 0;
  int rejects = 0;             // voluntary plus involuntary
  int involuntary = 0;
  double missing_soc_kwh = 0.0;
  int cars_under_target = 0;
  std::map<int, int> choices;  // level -> count, -1 = reject
  std::vector<double> decision_seconds;
  int fallbacks = 0;

  double reject_fraction() const { return arrivals > 0 ? static_cast<double>(rejects) / arrivals : 0.0; }
  double user_price() const { return delivered_kwh > 1e-9 ? payments / delivered_kwh : 0.0; }
};

/** \brief Snapshot of one executed step. */
struct StepRecord {
  int t = 0;
  double building_kw = 0.0;
  double ev_kw = 0.0;
  double p_kw = 0.0;
  double p_past_max = 0.0;
  double p_max_hat = 0.0;  // peak estimate when the action was chosen
  int connected = 0;
};

/**
 * \brief One operating day, advanced event by event. Each step first releases departures and
 * negotiates every arrival of that step, then executes one charging action. With `autopilot`
 * the simulated user answers menus; otherwise the engine pauses on each menu until `choose`.
 */
class DayEngine {
 public:
  enum class EventKind { Arrival, Step, Completed };

  struct Event {
    EventKind kind = EventKind::Step;
    int t = 0;
    int session = -1;  // index into sessions() for arrivals
  };

  DayEngine(SimConfig cfg, PolicyBundle bundle, std::uint64_t seed)
      : DayEngine(cfg, bundle, seed, realize_day(cfg, seed)) {}

  DayEngine(SimConfig cfg, PolicyBundle bundle, std::uint64_t seed, RealizedDay realized)
      : cfg_(std::move(cfg)), bundle_(std::move(bundle)), seed_(seed), real_(std::move(realized)) {
    cfg_.validate();
    bundle_.validate();
    const auto& g = cfg_.grid;
    if (static_cast<int>(real_.day.building_kw.size()) != g.steps)
      throw DimensionMismatch("realized load length differs from grid");
    for (const auto& s : real_.day.sessions) s.validate(g);
    types_ = cfg_.effective_types();
    state_.grid = g;
    state_.chargers = cfg_.chargers;
    realized_kw_ = real_.day.building_kw;
    base_kw_ = cfg_.generator.base_load();
    if (bundle_.charging == ChargingPolicy::None) real_.day.sessions.clear();
  }

  const SimConfig& config() const { return cfg_; }
  const PolicyBundle& bundle() const { return bundle_; }
  std::uint64_t seed() const { return seed_; }
  const charging::SystemState& state() const { return state_; }
  const std::vector<SessionRecord>& sessions() const { return sessions_; }
  const std::vector<StepRecord>& steps() const { return steps_; }
  const RealizedDay& realized() const { return real_; }
  int now() const { return state_.now; }
  bool done() const { return state_.now >= cfg_.grid.steps; }

  /** \brief Session index awaiting a choice, if any. */
  std::optional<int> pending() const { return pending_; }

  /** \brief New sharing ratio; menus already issued keep their prices. */
  void set_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    bundle_.alpha = alpha;
  }

  /** \brief Runs to the next event. Throws ConflictError while a menu awaits a choice. */
  Event advance(bool autopilot) {
    if (pending_) throw ConflictError("a menu is awaiting a choice");
    if (done()) return Event{EventKind::Completed, state_.now, -1};
    if (!step_open_) open_step();
    while (!queue_.empty()) {
      const SessionRequest r = queue_.front();
      queue_.pop_front();
      const int idx = negotiate(r);
      if (idx < 0) continue;
      if (!sessions_[idx].menu) continue;
      if (autopilot) {
        choose(idx, simulated_choice(idx));
      } else {
        pending_ = idx;
      }
      return Event{EventKind::Arrival, state_.now, idx};
    }
    const int t = state_.now;
    execute_step();
    if (done()) finish_day();
    return Event{EventKind::Step, t, -1};
  }

  /**
   * \brief Resolves a menu: `option` indexes the offers, `offers.size()` means reject.
   * Throws ConflictError when nothing is pending and DomainError for an invalid option.
   */
  void choose(int session, int option) {
    if (pending_ && *pending_ != session) throw ConflictError("another menu is pending");
    auto& s = sessions_.at(static_cast<std::size_t>(session));
    if (!s.menu) throw ConflictError("session has no menu");
    if (s.chosen >= 0) throw ConflictError("choice already recorded");
    const int n = static_cast<int>(s.menu->offers.size());
    const int limit = s.menu->has_reject ? n : n - 1;
    if (option < 0 || option > limit) throw DomainError("option " + std::to_string(option) + " is not on the menu");
    s.chosen = option;
    pending_.reset();
    if (option == n) {
      s.choice = NegotiatedChoice::reject();
      s.price = 0.0;
      release(s.request.user_id);
      return;
    }
    const auto& o = s.menu->offers[static_cast<std::size_t>(option)];
    s.choice = NegotiatedChoice{o.level, o.e_dep_target, o.t_dep, o.price, o.utility};
    s.price = o.price;
    const auto& ty = types_.at(static_cast<std::size_t>(s.request.user_type));
    s.inconvenience = behavior::inconvenience_cost(ty, o.de_pct, o.dt_min);
    for (auto& ev : state_.connected)
      if (ev.request.user_id == s.request.user_id) ev.choice = s.choice;
    auto& tr = traces_.at(s.request.user_id);
    tr.e_target = o.e_dep_target;
    tr.t_dep = o.t_dep;
    oracle_dirty_ = oracle_dirty_ || o.level != 0;
  }

  /** \brief Day result. Valid once done(). */
  DayMetrics metrics() const {
    if (!done()) throw ConflictError("day still running");
    return metrics_;
  }

  Schedule schedule() const {
    Schedule s;
    s.grid = cfg_.grid;
    s.building_kw = realized_kw_;
    for (const auto& [u, tr] : traces_) s.evs.push_back(tr);
    return s;
  }

  /** \brief Menu index a simulated user picks. */
  int simulated_choice(int session) {
    const auto& s = sessions_.at(static_cast<std::size_t>(session));
    if (bundle_.behavior == behavior::ChoiceMode::Rational) return behavior::rational_choice(s.satisfaction);
    auto rng = stream(seed_, kChoiceStream, static_cast<std::uint64_t>(s.request.user_id));
    return behavior::sample_choice(behavior::ChoiceDistribution{s.probabilities}, rng);
  }

 private:
  void open_step() {
    const int t = state_.now;
    // Departures.
    for (auto it = state_.connected.begin(); it != state_.connected.end();) {
      if (it->departure() <= t) {
        depart(*it);
        it = state_.connected.erase(it);
      } else {
        ++it;
      }
    }
    std::vector<SessionRequest> batch;
    for (const auto& r : real_.day.sessions)
      if (r.t_arr == t) batch.push_back(r);
    auto order_rng = stream(seed_, kDayStream, 1000 + static_cast<std::uint64_t>(t));
    batch = charging::order_arrivals(batch, cfg_.assignment, &order_rng);
    queue_.assign(batch.begin(), batch.end());
    step_open_ = true;
  }

  void depart(const charging::ConnectedEv& ev) {
    auto& tr = traces_.at(ev.request.user_id);
    tr.t_dep = ev.departure();
    for (auto& s : sessions_) {
      if (s.request.user_id != ev.request.user_id || !s.accepted()) continue;
      s.departed = true;
      s.delivered = tr.final_soc() - tr.e_arr;
      s.shortfall = tr.shortfall();
      if (bundle_.pricing == PricingMode::FixedPrice)
        s.price = real_.tariff.peak_price() * std::max(0.0, s.delivered);
    }
  }

  void release(int user) {
    state_.connected.erase(std::remove_if(state_.connected.begin(), state_.connected.end(),
                                          [&](const auto& ev) { return ev.request.user_id == user; }),
                           state_.connected.end());
    traces_.erase(user);
    oracle_dirty_ = true;
  }

  /** \brief Assigns a port and builds the menu; returns the session index, -1 if turned away. */
  int negotiate(const SessionRequest& r) {
    SessionRecord s;
    s.request = r;
    s.external_cost = real_.tariff.external_rate * r.requested_energy();
    auto assign_rng = stream(seed_, kDayStream, 5000 + static_cast<std::uint64_t>(r.user_id));
    int port = -1;
    try {
      port = charging::assign_charger(state_, cfg_.assignment, &assign_rng);
    } catch (const NoChargerAvailable&) {
      s.involuntary_reject = true;
      s.choice = NegotiatedChoice::reject();
      sessions_.push_back(s);
      oracle_dirty_ = true;
      return -1;
    }
    s.charger_id = port;
    charging::ConnectedEv ev;
    ev.request = r;
    ev.charger_id = port;
    ev.soc = r.e_arr;
    ev.choice = NegotiatedChoice::as_requested(r);
    state_.connected.push_back(ev);
    EvTrace tr;
    tr.user_id = r.user_id;
    tr.charger_id = port;
    tr.t_arr = r.t_arr;
    tr.t_dep = r.t_req;
    tr.e_arr = r.e_arr;
    tr.e_target = r.e_req;
    tr.e_min = r.e_min;
    tr.e_max = r.e_max;
    tr.energy.assign(cfg_.grid.steps, 0.0);
    traces_[r.user_id] = tr;

    if (bundle_.needs_evaluator()) {
      auto rng = stream(seed_, kNegotiationStream, static_cast<std::uint64_t>(r.user_id));
      auto futures = scenario::sample_futures(cfg_.generator, state_.now, realized_kw_, cfg_.negotiation_scenarios, rng);
      negotiation::EvaluatorOptions eo;
      eo.weights = charging::ObjectiveWeights::from_tariff(cfg_.tariff, cfg_.soc_weight);
      eo.assignment = cfg_.assignment;
      eo.time_limit_s = cfg_.mpc_time_limit_s;
      negotiation::OptionEvaluator evaluator(state_, r.user_id, std::move(futures), cfg_.tariff, cfg_.curve, eo);
      negotiation::MenuOptions mo;
      mo.alpha = bundle_.alpha;
      mo.include_reject = bundle_.pricing == PricingMode::Consent;
      std::vector<negotiation::FlexibilityLevel> levels = cfg_.levels;
      if (bundle_.pricing == PricingMode::UtilityPriced) levels.resize(1);
      const auto t0 = std::chrono::steady_clock::now();
      auto menu = negotiation::generate_offer_menu(evaluator, levels, cfg_.tariff, cfg_.grid, mo);
      negotiation_seconds_.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (bundle_.pricing == PricingMode::UtilityPriced) {
        // Everyone is served as requested at the utility-based price.
        const auto& o = menu.offers[0];
        s.choice = NegotiatedChoice{0, o.e_dep_target, o.t_dep, o.price, o.utility};
        s.price = o.price;
        s.chosen = 0;
        sessions_.push_back(s);
        return -1;
      }
      s.menu = std::move(menu);
    } else if (bundle_.pricing == PricingMode::MenuBased) {
      s.menu = negotiation::menu_based_offers(r, cfg_.levels, cfg_.menu_discounts, cfg_.tariff, cfg_.grid);
    } else {
      s.choice = NegotiatedChoice::as_requested(r);
      s.chosen = 0;
      sessions_.push_back(s);
      return -1;
    }
    // Satisfaction and choice probabilities of the simulated user.
    const auto& ty = types_.at(static_cast<std::size_t>(r.user_type));
    for (const auto& o : s.menu->offers)
      s.satisfaction.push_back(behavior::acceptance_utility(
          s.external_cost, o.price, behavior::inconvenience_cost(ty, o.de_pct, o.dt_min)));
    if (s.menu->has_reject) s.satisfaction.push_back(0.0);
    s.probabilities = behavior::choice_probabilities(s.satisfaction, cfg_.choice_epsilon).p;
    sessions_.push_back(std::move(s));
    return static_cast<int>(sessions_.size()) - 1;
  }

  double peak_estimate() const {
    double p = state_.p_past_max;
    for (int t = std::max(state_.now, cfg_.grid.peak_begin); t < cfg_.grid.peak_end; ++t) p = std::max(p, base_kw_[t]);
    return p;
  }

  charging::StepDecision decide() {
    const int t = state_.now;
    const double b_now = realized_kw_[t];
    charging::StepDecision d;
    switch (bundle_.charging) {
      case ChargingPolicy::None: return d;
      case ChargingPolicy::MaxCharge:
        return charging::baseline_step(state_, charging::Baseline::MaxCharge, cfg_.curve, b_now);
      case ChargingPolicy::ReqCharge:
        return charging::baseline_step(state_, charging::Baseline::ReqCharge, cfg_.curve, b_now);
      case ChargingPolicy::Edf:
        return charging::baseline_step(state_, charging::Baseline::Edf, cfg_.curve, b_now, peak_estimate());
      case ChargingPolicy::Llf:
        return charging::baseline_step(state_, charging::Baseline::Llf, cfg_.curve, b_now, peak_estimate());
      case ChargingPolicy::Oracle: return oracle_step();
      case ChargingPolicy::McMpc: {
        if (state_.connected.empty()) return d;
        auto rng = stream(seed_, kForecastStream, static_cast<std::uint64_t>(t));
        const auto futures = scenario::sample_futures(cfg_.generator, t, realized_kw_, cfg_.mpc_scenarios, rng);
        charging::MpcConfig mc;
        mc.weights = charging::ObjectiveWeights::from_tariff(cfg_.tariff, cfg_.soc_weight);
        mc.gap = cfg_.mpc_gap;
        mc.time_limit_s = cfg_.mpc_time_limit_s;
        mc.refine = cfg_.refine;
        mc.refine_peak = cfg_.refine_peak == "realized" ? charging::RefinePeak::Realized : charging::RefinePeak::Given;
        mc.assignment = cfg_.assignment;
        return charging::mc_mpc_step(state_, futures, cfg_.tariff, cfg_.curve, mc, peak_estimate(), b_now);
      }
    }
    return d;
  }

  /** \brief Full-information plan of the rest of the day, re-solved when a choice changes it. */
  charging::StepDecision oracle_step() {
    charging::StepDecision d;
    if (state_.connected.empty()) return d;
    if (oracle_dirty_ || !oracle_plan_) {
      Scenario sc;
      sc.building_kw = realized_kw_;
      for (const auto& r : real_.day.sessions)
        if (r.t_arr > state_.now) sc.arrivals.push_back(r);
      charging::ProgramInput in;
      in.grid = cfg_.grid;
      in.tariff = real_.tariff;
      in.weights = charging::ObjectiveWeights::from_tariff(real_.tariff, cfg_.soc_weight);
      in.curve = cfg_.curve;
      in.now = state_.now;
      in.p_past_max = state_.p_past_max;
      in.share_first_step = false;
      in.curve_model = charging::CurveModel::Exact;
      charging::PlanOptions po;
      po.policy = cfg_.assignment;
      in.scenarios.push_back(charging::plan_scenario(state_, sc, po));
      charging::ChargingProgram prog(std::move(in));
      charging::ProgramOptions opt;
      opt.gap = cfg_.oracle_gap;
      opt.time_limit_s = 10.0 * cfg_.mpc_time_limit_s;
      const auto sol = prog.solve(opt);
      d.status = sol.status;
      d.seconds = sol.seconds;
      d.nodes = sol.nodes;
      if (!sol.usable()) {
        oracle_plan_.reset();
        auto f = charging::baseline_step(state_, charging::Baseline::ReqCharge, cfg_.curve, realized_kw_[state_.now]);
        f.fallback = true;
        return f;
      }
      oracle_plan_ = sol.energy[0];
      oracle_dirty_ = false;
    }
    for (const auto& ev : state_.connected) {
      auto it = oracle_plan_->find(ev.request.user_id);
      d.energy[ev.request.user_id] = it == oracle_plan_->end() ? 0.0 : it->second[state_.now];
    }
    return d;
  }

  /** \brief Clamps a decision to what the hardware and the batteries allow this step. */
  std::map<int, double> feasible(const std::map<int, double>& want) const {
    const double tau = cfg_.grid.step_hours;
    std::map<int, double> out;
    for (const auto& ev : state_.connected) {
      const auto& ch = state_.charger(ev.charger_id);
      const int u = ev.request.user_id;
      double e = 0.0;
      if (!ch.controlled) {
        e = std::max(0.0, ev.target() - ev.soc);
      } else {
        auto it = want.find(u);
        e = it == want.end() ? 0.0 : it->second;
      }
      const double up = std::min(charging::step_charge_cap(ch, cfg_.curve, ev.soc, ev.request.e_max, tau),
                                 ev.request.e_max - ev.soc);
      const double down = std::min(charging::step_discharge_cap(ch, tau), ev.soc - ev.request.e_min);
      e = std::clamp(e, -std::max(0.0, down), std::max(0.0, up));
      if (std::abs(e) < 1e-12) e = 0.0;
      out[u] = e;
    }
    if (!real_.tariff.allow_export) {
      double net = realized_kw_[state_.now] * tau;
      double discharge = 0.0;
      for (const auto& [u, e] : out) {
        net += e;
        if (e < 0.0) discharge -= e;
      }
      if (net < 0.0 && discharge > 0.0) {
        const double keep = std::max(0.0, 1.0 - (-net) / discharge);
        for (auto& [u, e] : out)
          if (e < 0.0) e *= keep;
      }
    }
    return out;
  }

  void execute_step() {
    const auto& g = cfg_.grid;
    const int t = state_.now;
    const double p_hat = peak_estimate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = decide();
    if (!state_.connected.empty()) {
      metrics_.decision_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (d.fallback) ++metrics_.fallbacks;
    }
    const auto act = feasible(d.energy);
    double ev_kwh = 0.0;
    for (auto& ev : state_.connected) {
      const double e = act.at(ev.request.user_id);
      ev.soc += e;
      ev_kwh += e;
      traces_.at(ev.request.user_id).energy[t] = e;
    }
    StepRecord rec;
    rec.t = t;
    rec.building_kw = realized_kw_[t];
    rec.ev_kw = ev_kwh / g.step_hours;
    rec.p_kw = rec.building_kw + rec.ev_kw;
    if (g.in_peak(t)) state_.p_past_max = std::max(state_.p_past_max, rec.p_kw);
    rec.p_past_max = state_.p_past_max;
    rec.p_max_hat = std::max(p_hat, d.planned_peak_kw);
    rec.connected = static_cast<int>(state_.connected.size());
    steps_.push_back(rec);
    state_.now = t + 1;
    step_open_ = false;
  }

  void finish_day() {
    for (const auto& ev : state_.connected) depart(ev);
    state_.connected.clear();
    const auto sched = schedule();
    metrics_.bill = total_cost(sched, real_.tariff);
    for (const auto& s : sessions_) {
      ++metrics_.arrivals;
      if (!s.accepted()) {
        ++metrics_.rejects;
        if (s.involuntary_reject) ++metrics_.involuntary;
        ++metrics_.choices[-1];
        continue;
      }
      ++metrics_.choices[s.choice.level];
      metrics_.payments += s.price;
      metrics_.delivered_kwh += std::max(0.0, s.delivered);
      metrics_.missing_soc_kwh += s.shortfall;
      if (s.shortfall > 1e-4) ++metrics_.cars_under_target;
    }
    metrics_.net_cost = metrics_.bill.total - metrics_.payments;
  }

 public:
  /** \brief Wall time of each menu computation, seconds. */
  const std::vector<double>& negotiation_seconds() const { return negotiation_seconds_; }

 private:
  SimConfig cfg_;
  PolicyBundle bundle_;
  std::uint64_t seed_;
  RealizedDay real_;
  std::vector<behavior::UserType> types_;
  charging::SystemState state_;
  std::vector<double> realized_kw_;
  std::vector<double> base_kw_;
  std::map<int, EvTrace> traces_;
  std::vector<SessionRecord> sessions_;
  std::vector<StepRecord> steps_;
  std::deque<SessionRequest> queue_;
  bool step_open_ = false;
  std::optional<int> pending_;
  DayMetrics metrics_;
  std::optional<std::map<int, std::vector<double>>> oracle_plan_;
  bool oracle_dirty_ = true;
  std::vector<double> negotiation_seconds_;
};

struct DayResult {
  DayMetrics metrics;
  Schedule schedule;
  std::vector<SessionRecord> sessions;
  std::vector<StepRecord> steps;
  std::vector<double> negotiation_seconds;
};

inline DayResult run_day(const SimConfig& cfg, const PolicyBundle& bundle, std::uint64_t seed) {
  DayEngine e(cfg, bundle, seed);
  while (!e.done()) e.advance(true);
  return DayResult{e.metrics(), e.schedule(), e.sessions(), e.steps(), e.negotiation_seconds()};
}

inline DayResult run_day(const SimConfig& cfg, const PolicyBundle& bundle, std::uint64_t seed, RealizedDay day) {
  DayEngine e(cfg, bundle, seed, std::move(day));
  while (!e.done()) e.advance(true);
  return DayResult{e.metrics(), e.schedule(), e.sessions(), e.steps(), e.negotiation_seconds()};
}

}  // namespace v2b::sim

#endif

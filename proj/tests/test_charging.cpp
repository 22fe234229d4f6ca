#include <gtest/gtest.h>

#include <random>

#include "v2b/charging/policies.hpp"

using namespace v2b;
using namespace v2b::charging;

namespace {

SessionRequest request(int user, int t_arr, int t_req, double e_arr, double e_req, double cap = 60.0) {
  return SessionRequest{user, t_arr, e_arr, e_req, t_req, 0.1 * cap, cap, 0};
}

ConnectedEv plugged(const SessionRequest& r, int charger, double soc) {
  ConnectedEv ev;
  ev.request = r;
  ev.choice = NegotiatedChoice::as_requested(r);
  ev.charger_id = charger;
  ev.soc = soc;
  return ev;
}

SystemState site(int steps = 96) {
  SystemState st;
  st.grid = TimeGrid{0.25, steps, 0, steps};
  st.chargers = default_fleet();
  return st;
}

}  // namespace

TEST(Curve, PinnedRates) {
  const auto c = PiecewiseCurve::standard();
  EXPECT_DOUBLE_EQ(max_rate_at(c, 0.50), 20.0);
  EXPECT_NEAR(max_rate_at(c, 0.86), 15.33, 5e-3);
  EXPECT_NEAR(max_rate_at(c, 0.86), 130.0 - 4.0 / 3.0 * 86.0, 1e-12);
  EXPECT_NEAR(max_rate_at(c, 0.90), 10.0, 1e-12);
  EXPECT_NEAR(max_rate_at(c, 0.95), 5.0, 1e-12);
  EXPECT_NEAR(max_rate_at(c, 0.83), 130.0 - 4.0 / 3.0 * 83.0, 1e-12);  // half-open at 83 %
  EXPECT_THROW(max_rate_at(c, 1.2), DomainError);
  EXPECT_THROW(max_rate_at(c, -0.1), DomainError);
}

TEST(Curve, EnvelopeDominatesExact) {
  const auto c = PiecewiseCurve::standard();
  for (int k = 0; k <= 1000; ++k) {
    const double s = k / 1000.0;
    EXPECT_GE(envelope_rate_at(c, s) + 1e-9, max_rate_at(c, s)) << s;
  }
}

TEST(Assignment, ExamplesFromTheRule) {
  auto st = site();
  st.chargers = {{0, ChargerKind::Unidirectional, true, 0, 20, 1},
                 {1, ChargerKind::Bidirectional, true, -20, 20, 1},
                 {2, ChargerKind::Unidirectional, true, 0, 20, 1},
                 {3, ChargerKind::Unidirectional, true, 0, 20, 1}};
  EXPECT_EQ(assign_charger(st), 1);
  st.connected.push_back(plugged(request(0, 0, 10, 20, 30), 1, 20));
  EXPECT_EQ(assign_charger(st), 0);
  AssignmentPolicy uni{ClassOrder::UnidirectionalFirst, TieBreak::UserId};
  st.connected.clear();
  EXPECT_EQ(assign_charger(st, uni), 0);
  for (int id : {0, 1, 2, 3}) st.connected.push_back(plugged(request(id, 0, 10, 20, 30), id, 20));
  EXPECT_THROW(assign_charger(st), NoChargerAvailable);
}

TEST(Assignment, SameStepOrdering) {
  std::vector<SessionRequest> batch{request(2, 5, 20, 20, 30), request(0, 5, 40, 20, 25), request(1, 5, 30, 10, 50)};
  auto by_id = order_arrivals(batch, {ClassOrder::BidirectionalFirst, TieBreak::UserId});
  EXPECT_EQ(by_id[0].user_id, 0);
  auto later = order_arrivals(batch, {ClassOrder::BidirectionalFirst, TieBreak::LaterDeparture});
  EXPECT_EQ(later[0].user_id, 0);
  EXPECT_EQ(later[2].user_id, 2);
  auto energy = order_arrivals(batch, {ClassOrder::BidirectionalFirst, TieBreak::LargerEnergy});
  EXPECT_EQ(energy[0].user_id, 1);
}

TEST(Refine, SplitsHeadroomEqually) {
  auto st = site();
  PiecewiseCurve flat40{{{0.0, 100.0, 40.0, 0.0}}};
  st.chargers = {{0, ChargerKind::Unidirectional, true, 0, 40, 1}, {1, ChargerKind::Unidirectional, true, 0, 40, 1}};
  st.connected = {plugged(request(0, 0, 50, 10, 50), 0, 10), plugged(request(1, 0, 50, 10, 50), 1, 10)};
  const std::map<int, double> in{{0, 2.5}, {1, 2.5}};  // 20 kW together
  const auto out = refine_actions(st, in, 150.0, 100.0, flat40);
  EXPECT_NEAR(out.at(0), 2.5 + 3.75, 1e-12);
  EXPECT_NEAR(out.at(1), 2.5 + 3.75, 1e-12);
  EXPECT_EQ(refine_actions(st, in, 110.0, 100.0, flat40), in);  // no headroom
}

TEST(Refine, TargetCapBinds) {
  auto st = site();
  st.connected = {plugged(request(0, 0, 50, 10, 31), 5, 30), plugged(request(1, 0, 50, 10, 50), 6, 10)};
  const auto out = refine_actions(st, {{0, 0.0}, {1, 0.0}}, 130.0, 100.0, PiecewiseCurve::standard());
  EXPECT_NEAR(out.at(0), 1.0, 1e-12);
  EXPECT_NEAR(out.at(1), 5.0, 1e-12);  // 20 kW port cap
}

TEST(Refine, IdempotentAndCapRespectingOnRandomStates) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto curve = PiecewiseCurve::standard();
  for (int trial = 0; trial < 300; ++trial) {
    auto st = site();
    const int n = 1 + trial % 8;
    std::map<int, double> act;
    for (int k = 0; k < n; ++k) {
      const double arr = 6.0 + 40.0 * u(rng);
      const double req = arr + (60.0 - arr) * u(rng);
      const double soc = arr + (req - arr) * u(rng);
      st.connected.push_back(plugged(request(k, 0, 60, arr, req), k, soc));
      const double cap = step_charge_cap(st.charger(k), curve, soc, 60.0, 0.25);
      act[k] = std::min(cap, std::max(0.0, req - soc)) * u(rng);
    }
    const double building = 40.0 + 60.0 * u(rng);
    const double hat = building + 150.0 * u(rng);
    const auto once = refine_actions(st, act, hat, building, curve);
    const auto twice = refine_actions(st, once, hat, building, curve);
    double net = 0.0, before = 0.0;
    for (const auto& ev : st.connected) {
      const int k = ev.request.user_id;
      EXPECT_NEAR(twice.at(k), once.at(k), 1e-9);
      EXPECT_GE(once.at(k), act.at(k) - 1e-12);
      EXPECT_LE(once.at(k), step_charge_cap(st.charger(k), curve, ev.soc, 60.0, 0.25) + 1e-9);
      const double goal = st.charger(k).bidirectional() ? ev.request.e_max : ev.target();
      EXPECT_LE(ev.soc + once.at(k), std::max(goal, ev.soc + act.at(k)) + 1e-9);
      net += once.at(k);
      before += act.at(k);
    }
    EXPECT_LE(building + net / 0.25, std::max(hat, building + before / 0.25) + 1e-6);
  }
}

TEST(Baselines, Examples) {
  const auto curve = PiecewiseCurve::standard();
  auto st = site();
  st.now = 10;
  st.connected = {plugged(request(0, 0, 40, 20, 30), 5, 30)};
  EXPECT_DOUBLE_EQ(baseline_step(st, Baseline::ReqCharge, curve, 50.0).energy.at(0), 0.0);

  st.connected = {plugged(request(0, 0, 40, 20, 59), 5, 57.0)};  // 95 %
  EXPECT_NEAR(baseline_step(st, Baseline::MaxCharge, curve, 50.0).energy.at(0), 5.0 * 0.25, 1e-12);

  // Laxity 0.5 h versus 3 h with room for only one EV below the site cap.
  st.connected = {plugged(request(0, 0, 10 + 22, 10, 40), 5, 10), plugged(request(1, 0, 10 + 4, 10, 20), 6, 10)};
  st.grid.peak_begin = 0;
  const auto d = baseline_step(st, Baseline::Llf, curve, 50.0, 70.0);
  EXPECT_NEAR(d.energy.at(1), 5.0, 1e-12);
  EXPECT_NEAR(d.energy.at(0), 0.0, 1e-12);
  const auto e = baseline_step(st, Baseline::Edf, curve, 50.0, 70.0);
  EXPECT_NEAR(e.energy.at(1), 5.0, 1e-12);
}

TEST(Program, TwoStepWindowDeliversInFull) {
  ProgramInput in;
  in.grid = TimeGrid{0.25, 4, 0, 4};
  in.tariff = Tariff::time_of_use(in.grid);
  in.weights = ObjectiveWeights::from_tariff(in.tariff);
  PlanScenario sc;
  sc.building_kw.assign(4, 30.0);
  PlanEv ev;
  ev.user_id = 0;
  ev.charger = default_fleet()[6];
  ev.t_start = 0;
  ev.t_end = 2;
  ev.e_start = 20.0;
  ev.e_target = 30.0;
  ev.e_min = 6.0;
  ev.e_max = 60.0;
  ev.connected_now = true;
  sc.evs.push_back(ev);
  in.scenarios.push_back(sc);
  ChargingProgram prog(in);
  const auto sol = prog.solve();
  ASSERT_TRUE(sol.usable());
  const auto& e = sol.energy[0].at(0);
  EXPECT_NEAR(e[0], 5.0, 1e-6);
  EXPECT_NEAR(e[1], 5.0, 1e-6);
  EXPECT_NEAR(e[2] + e[3], 0.0, 1e-9);
}

TEST(Program, FlatPriceMakesTimingIrrelevant) {
  ProgramInput in;
  in.grid = TimeGrid{0.25, 4, 0, 4};
  in.tariff.energy_price.assign(4, 0.137);
  in.tariff.demand_rate = 0.0;
  in.weights = ObjectiveWeights{0.0, 100.0, 0.05};
  PlanScenario sc;
  sc.building_kw.assign(4, 30.0);
  PlanEv ev;
  ev.charger = default_fleet()[7];
  ev.t_end = 4;
  ev.e_start = 20.0;
  ev.e_target = 27.0;
  ev.e_min = 6.0;
  ev.e_max = 60.0;
  ev.connected_now = true;
  sc.evs.push_back(ev);
  in.scenarios.push_back(sc);
  const auto sol = ChargingProgram(in).solve();
  ASSERT_TRUE(sol.usable());
  EXPECT_NEAR(sol.objective, 0.137 * (30.0 * 0.25 * 4 + 7.0), 1e-6);
}

TEST(Program, FirstStepSharedAcrossScenarios) {
  ProgramInput in;
  in.grid = TimeGrid{0.25, 8, 0, 8};
  in.tariff = Tariff::time_of_use(in.grid);
  in.weights = ObjectiveWeights::from_tariff(in.tariff);
  for (int f = 0; f < 2; ++f) {
    PlanScenario sc;
    sc.building_kw.assign(8, 40.0);
    for (int t = 2; t < 8; ++t) sc.building_kw[t] = f == 0 ? 20.0 : 90.0;
    PlanEv ev;
    ev.charger = default_fleet()[0];
    ev.t_end = 6;
    ev.e_start = 20.0;
    ev.e_target = 35.0;
    ev.e_min = 6.0;
    ev.e_max = 60.0;
    ev.connected_now = true;
    sc.evs.push_back(ev);
    in.scenarios.push_back(sc);
  }
  const auto sol = ChargingProgram(in).solve();
  ASSERT_TRUE(sol.usable());
  ASSERT_EQ(sol.first_step.size(), 1u);
  EXPECT_NEAR(sol.energy[0].at(0)[0], sol.energy[1].at(0)[0], 1e-7);
  EXPECT_NEAR(sol.energy[0].at(0)[0], sol.first_step.at(0), 1e-7);
}

TEST(Program, SocOutsideBoundsRejected) {
  ProgramInput in;
  in.grid = TimeGrid{0.25, 4, 0, 4};
  in.tariff = Tariff::time_of_use(in.grid);
  PlanScenario sc;
  sc.building_kw.assign(4, 30.0);
  PlanEv ev;
  ev.charger = default_fleet()[0];
  ev.t_end = 4;
  ev.e_start = 70.0;
  ev.e_target = 60.0;
  ev.e_min = 6.0;
  ev.e_max = 60.0;
  sc.evs.push_back(ev);
  in.scenarios.push_back(sc);
  EXPECT_THROW(ChargingProgram prog(in), InfeasibleState);
}

TEST(Mpc, NoEvsGivesEmptyAction) {
  auto st = site();
  Scenario sc;
  sc.building_kw.assign(96, 50.0);
  const auto d = mc_mpc_step(st, {sc}, Tariff::time_of_use(st.grid), PiecewiseCurve::standard(), {}, 80.0, 50.0);
  EXPECT_TRUE(d.energy.empty());
}

TEST(Mpc, DepartingEvChargesFlatOut) {
  auto st = site();
  st.now = 20;
  st.connected = {plugged(request(0, 10, 21, 10, 50), 6, 30.0)};
  Scenario sc;
  sc.building_kw.assign(96, 50.0);
  MpcConfig cfg;
  cfg.refine = false;
  const auto d = mc_mpc_step(st, {sc}, Tariff::time_of_use(st.grid), PiecewiseCurve::standard(), cfg, 50.0, 50.0);
  EXPECT_NEAR(d.energy.at(0), 5.0, 1e-6);
}

// Receding horizon with the true future as the only scenario reproduces the one-shot plan.
TEST(Mpc, DeterministicRecedingHorizonMatchesOracle) {
  const int steps = 16;
  TimeGrid g{0.25, steps, 0, steps};
  auto tariff = Tariff::time_of_use(g);
  for (int t = 0; t < steps; ++t) tariff.energy_price[t] = t < 8 ? 0.178 : 0.137;
  const auto curve = PiecewiseCurve::standard();
  std::vector<double> load{40, 42, 45, 60, 70, 75, 72, 68, 60, 55, 50, 48, 45, 44, 42, 40};
  std::vector<SessionRequest> arrivals{request(0, 0, 12, 20, 40), request(1, 2, 10, 30, 45),
                                       request(2, 5, 15, 15, 32)};
  std::vector<ChargerSpec> chargers{{0, ChargerKind::Bidirectional, true, -20, 20, 1},
                                    {1, ChargerKind::Unidirectional, true, 0, 20, 1},
                                    {2, ChargerKind::Unidirectional, true, 0, 20, 1}};
  MpcConfig cfg;
  cfg.refine = false;
  cfg.gap = 0.0;
  cfg.weights = ObjectiveWeights::from_tariff(tariff);

  Scenario truth{load, arrivals};
  std::optional<ChargingSolution> oracle;
  SystemState st;
  st.grid = g;
  st.chargers = chargers;
  std::vector<EvTrace> traces;
  std::map<int, EvTrace> live;
  for (int t = 0; t < steps; ++t) {
    st.now = t;
    for (const auto& a : arrivals) {
      if (a.t_arr != t) continue;
      const int c = assign_charger(st);
      st.connected.push_back(plugged(a, c, a.e_arr));
      EvTrace tr{a.user_id, c, a.t_arr, a.t_req, a.e_arr, a.e_req, a.e_min, a.e_max, std::vector<double>(steps, 0.0)};
      live[a.user_id] = tr;
    }
    if (t == 0) {
      // One-shot plan over the whole day from the first connection.
      ProgramInput in;
      in.grid = g;
      in.tariff = tariff;
      in.weights = cfg.weights;
      in.share_first_step = false;
      in.scenarios.push_back(plan_scenario(st, truth));
      ProgramOptions po;
      po.gap = 0.0;
      oracle = ChargingProgram(in).solve(po);
      ASSERT_TRUE(oracle->usable());
    }
    const auto d = mc_mpc_step(st, {truth}, tariff, curve, cfg, 0.0, load[t]);
    double ev_kwh = 0.0;
    for (auto& ev : st.connected) {
      const double e = d.energy.at(ev.request.user_id);
      live[ev.request.user_id].energy[t] = e;
      ev.soc += e;
      ev_kwh += e;
    }
    st.p_past_max = std::max(st.p_past_max, load[t] + ev_kwh / g.step_hours);
    std::vector<ConnectedEv> keep;
    for (auto& ev : st.connected) {
      if (ev.departure() <= t + 1) traces.push_back(live[ev.request.user_id]);
      else keep.push_back(ev);
    }
    st.connected = keep;
  }
  std::vector<EvTrace> oracle_traces;
  for (const auto& a : arrivals) {
    auto tr = live[a.user_id];
    tr.energy = oracle->energy[0].at(a.user_id);
    oracle_traces.push_back(tr);
  }
  const auto mpc_cost = total_cost(g, load, traces, tariff);
  const auto oracle_cost = total_cost(g, load, oracle_traces, tariff);
  EXPECT_NEAR(mpc_cost.total, oracle_cost.total, 1e-4 * oracle_cost.total);
  EXPECT_DOUBLE_EQ(mpc_cost.missing_soc, 0.0);
}

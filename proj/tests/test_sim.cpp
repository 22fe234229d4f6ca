#include <gtest/gtest.h>

#include <cmath>

#include "v2b/sim/config.hpp"
#include "v2b/sim/engine.hpp"
#include "v2b/sim/experiments.hpp"
#include "v2b/sim/serialize.hpp"

using namespace v2b;
using namespace v2b::sim;

namespace {

SimConfig light() {
  SimConfig c;
  c.mpc_scenarios = 2;
  c.negotiation_scenarios = 2;
  return c;
}

RealizedDay one_ev_day(const SimConfig& cfg, std::uint64_t seed) {
  auto day = realize_day(cfg, seed);
  day.day.sessions = {SessionRequest{0, 36, 20.0, 45.0, 64, 6.0, 60.0, 1}};
  return day;
}

}  // namespace

TEST(Config, JsonRoundTripAndErrors) {
  auto c = light();
  c.tariff.demand_rate = 9.0;
  c.assignment.tie = charging::TieBreak::LaterDeparture;
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
  EXPECT_EQ(config_hash(back), config_hash(c));

  auto bad = j;
  bad["tariff"]["demand_rate"] = -1.0;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["bogus"] = 1;
  EXPECT_THROW(config_from_json(bad), ConfigError);
  bad = j;
  bad["refine_peak"] = "sometimes";
  EXPECT_THROW(config_from_json(bad), ConfigError);
}

TEST(Bundles, NamesAndValidation) {
  EXPECT_EQ(table_bundles().size(), 7u);
  EXPECT_EQ(find_bundle("oracle").charging, ChargingPolicy::Oracle);
  EXPECT_THROW(find_bundle("nope"), ConfigError);
  auto b = find_bundle("consent");
  b.alpha = 0.0;
  EXPECT_THROW(b.validate(), ConfigError);
}

TEST(RunDay, ZeroArrivalsEqualsBuildingOnly) {
  auto c = light();
  c.generator.zero_inflation = 1.0;
  const auto consent = run_day(c, find_bundle("consent"), 3);
  const auto base = run_day(c, find_bundle("building_only"), 3);
  EXPECT_EQ(consent.metrics.arrivals, 0);
  EXPECT_NEAR(consent.metrics.bill.total, base.metrics.bill.total, 1e-9);
  EXPECT_DOUBLE_EQ(consent.metrics.payments, 0.0);
}

// Without discharge-capable ports an EV can only add load.
TEST(RunDay, UnidirectionalChargingNeverLowersTheBill) {
  auto c = light();
  c.chargers = default_fleet(10, 0);
  const auto with = run_day(c, find_bundle("smart_free"), 4, one_ev_day(c, 4));
  const auto without = run_day(c, find_bundle("building_only"), 4, one_ev_day(c, 4));
  EXPECT_EQ(with.metrics.arrivals, 1);
  EXPECT_GE(with.metrics.bill.total, without.metrics.bill.total - 1e-9);
  EXPECT_DOUBLE_EQ(with.metrics.payments, 0.0);
}

TEST(RunDay, DeterministicPerSeed) {
  const auto c = light();
  const auto a = run_day(c, find_bundle("consent"), 5);
  const auto b = run_day(c, find_bundle("consent"), 5);
  EXPECT_EQ(Json(a.metrics).dump(), Json(b.metrics).dump());
  ASSERT_EQ(a.schedule.evs.size(), b.schedule.evs.size());
  for (std::size_t i = 0; i < a.schedule.evs.size(); ++i) EXPECT_EQ(a.schedule.evs[i].energy, b.schedule.evs[i].energy);
}

TEST(RunDay, ConservationAndBillDecomposition) {
  const auto c = light();
  const auto r = run_day(c, find_bundle("consent"), 6);
  for (const auto& s : r.sessions) {
    if (!s.accepted()) continue;
    const EvTrace* tr = nullptr;
    for (const auto& ev : r.schedule.evs)
      if (ev.user_id == s.request.user_id) tr = &ev;
    ASSERT_NE(tr, nullptr);
    double sum = 0.0;
    for (double e : tr->energy) sum += e;
    EXPECT_NEAR(sum, tr->final_soc() - tr->e_arr, 1e-9);
    EXPECT_NEAR(s.delivered, sum, 1e-9);
    for (int t = 0; t < c.grid.steps; ++t)
      if (t < tr->t_arr || t >= tr->t_dep) EXPECT_DOUBLE_EQ(tr->energy[t], 0.0);
  }
  const auto bill = total_cost(r.schedule, realize_day(c, 6).tariff);
  EXPECT_NEAR(bill.total, r.metrics.bill.total, 1e-9);
  EXPECT_NEAR(r.metrics.net_cost, r.metrics.bill.total - r.metrics.payments, 1e-9);
}

TEST(Engine, HumanModeFlow) {
  auto c = light();
  auto day = realize_day(c, 7);
  day.day.sessions = {SessionRequest{0, 36, 20.0, 45.0, 64, 6.0, 60.0, 1},
                      SessionRequest{1, 40, 25.0, 40.0, 70, 6.0, 60.0, 2}};
  DayEngine e(c, find_bundle("consent"), 7, day);
  DayEngine::Event ev;
  do ev = e.advance(false);
  while (ev.kind != DayEngine::EventKind::Arrival);
  ASSERT_TRUE(e.pending());
  EXPECT_EQ(ev.t, 36);
  EXPECT_THROW(e.advance(false), ConflictError);
  const auto& menu = *e.sessions()[0].menu;
  EXPECT_EQ(menu.offers.size(), 4u);
  EXPECT_THROW(e.choose(0, 9), DomainError);
  e.choose(0, 0);
  EXPECT_DOUBLE_EQ(e.sessions()[0].choice.e_target, 45.0);
  EXPECT_EQ(e.sessions()[0].choice.t_dep, 64);
  EXPECT_THROW(e.choose(0, 1), ConflictError);
  do ev = e.advance(false);
  while (ev.kind != DayEngine::EventKind::Arrival);
  e.choose(1, static_cast<int>(e.sessions()[1].menu->offers.size()));
  EXPECT_TRUE(e.sessions()[1].choice.rejected());
  EXPECT_THROW(e.metrics(), ConflictError);
  e.set_alpha(0.5);
  EXPECT_THROW(e.set_alpha(0.0), DomainError);
  while (!e.done()) e.advance(false);
  EXPECT_EQ(e.advance(false).kind, DayEngine::EventKind::Completed);
  const auto m = e.metrics();
  EXPECT_EQ(m.arrivals, 2);
  EXPECT_EQ(m.rejects, 1);
  EXPECT_EQ(m.choices.at(-1), 1);
  EXPECT_DOUBLE_EQ(m.missing_soc_kwh, 0.0);
  for (const auto& tr : e.schedule().evs) EXPECT_NE(tr.user_id, 1);
}

TEST(Engine, LevelThreeBoundsHoldOnRealizedPlan) {
  auto c = light();
  auto day = realize_day(c, 8);
  day.day.sessions = {SessionRequest{0, 36, 20.0, 50.0, 60, 6.0, 60.0, 1}};
  DayEngine e(c, find_bundle("consent"), 8, day);
  while (e.advance(false).kind != DayEngine::EventKind::Arrival) {
  }
  e.choose(0, 3);
  const auto& s = e.sessions()[0];
  EXPECT_GE(s.choice.e_target, 50.0 - 0.20 * 60.0 - 1e-9);
  EXPECT_LE(s.choice.t_dep, 60 + 7);
  while (!e.done()) e.advance(false);
  const auto sched = e.schedule();
  const auto& tr = sched.evs.at(0);
  EXPECT_EQ(tr.t_dep, s.choice.t_dep);
  EXPECT_GE(tr.final_soc(), s.choice.e_target - 1e-6);
}

TEST(Billing, TwentyDaysDemandOnLargestPeak) {
  std::vector<DayMetrics> days(20);
  for (int d = 0; d < 20; ++d) {
    days[static_cast<std::size_t>(d)].bill.peak_kw = 100.0 + 20.0 * d / 19.0;
    days[static_cast<std::size_t>(d)].bill.energy = 50.0;
  }
  const auto ep = aggregate_days("x", days, 11.67);
  EXPECT_NEAR(ep.bill.demand, 11.67 * 120.0, 1e-9);
  EXPECT_NEAR(ep.bill.energy, 1000.0, 1e-9);
  EXPECT_EQ(ep.days, 20);
  const auto one = aggregate_days("x", {days[4]}, 11.67);
  EXPECT_NEAR(one.bill.demand, 11.67 * days[4].bill.peak_kw, 1e-9);
}

TEST(Billing, WeekendsDropped) {
  auto c = light();
  c.start_weekday = 0;
  const auto plan = plan_days(c, seed_range(1, 14));
  EXPECT_EQ(plan.size(), 10u);
  for (const auto& d : plan) EXPECT_LT(d.weekday, 5);
  EXPECT_EQ(plan_days(c, calendar_seeds(c, 1, 20)).size(), 20u);
  c.weekdays_only = false;
  EXPECT_EQ(plan_days(c, seed_range(1, 14)).size(), 14u);
}

TEST(Stats, SignTestAndSummary) {
  std::vector<double> a(20), b(20);
  for (int i = 0; i < 20; ++i) {
    a[static_cast<std::size_t>(i)] = i;
    b[static_cast<std::size_t>(i)] = i + 1;
  }
  EXPECT_NEAR(sign_test_p(a, b), std::pow(0.5, 20), 1e-15);
  b[0] = a[0];  // ties are dropped
  EXPECT_NEAR(sign_test_p(a, b), std::pow(0.5, 19), 1e-15);
  EXPECT_NEAR(sign_test_p(b, a), 1.0, 1e-12);
  const auto s = summarize({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, 1.0);
}

TEST(Compare, PairedDaysAndPeakShaving) {
  const auto c = light();
  RunOptions opt;
  opt.workers = 1;
  const auto cmp = compare_policies(c, {find_bundle("mc_mpc"), find_bundle("max_charge")}, seed_range(1, 2), opt);
  ASSERT_EQ(cmp.rows.size(), 2u);
  const auto mpc = cmp.series("mc_mpc", "peak_kw");
  const auto max = cmp.series("max_charge", "peak_kw");
  ASSERT_EQ(mpc.size(), 2u);
  for (std::size_t i = 0; i < mpc.size(); ++i) EXPECT_LE(mpc[i], max[i] + 1e-6);
  ASSERT_TRUE(cmp.row("mc_mpc").period.peak_shaving_kw);
  EXPECT_GE(*cmp.row("mc_mpc").period.peak_shaving_kw, -1e-6);
  EXPECT_NEAR(*cmp.row("max_charge").period.peak_shaving_kw, 0.0, 1e-9);
}

TEST(Experiments, UnknownPresetIsConfigError) {
  ExperimentSpec spec;
  spec.name = "robustness";
  spec.presets = {"volcano"};
  spec.seeds = {1};
  spec.out_dir = ::testing::TempDir() + "v2b_bad_preset";
  EXPECT_THROW(run_experiment(spec, light()), ConfigError);
  spec.name = "nope";
  EXPECT_THROW(spec.validate(), ConfigError);
}

#include <gtest/gtest.h>

#include "v2b/negotiation/negotiation.hpp"
#include "v2b/scenario/generator.hpp"

using namespace v2b;
using namespace v2b::charging;
using namespace v2b::negotiation;

namespace {

ConnectedEv plugged(const SessionRequest& r, int charger) {
  ConnectedEv ev;
  ev.request = r;
  ev.choice = NegotiatedChoice::as_requested(r);
  ev.charger_id = charger;
  ev.soc = r.e_arr;
  return ev;
}

struct Instance {
  SystemState state;
  std::vector<Scenario> futures;
  Tariff tariff;
  EvaluatorOptions opt;
};

Instance flat_instance(const SessionRequest& r, int charger, double price, double demand_rate,
                       std::vector<double> load = std::vector<double>(96, 40.0)) {
  Instance in;
  in.state.grid = TimeGrid{};
  in.state.now = r.t_arr;
  in.state.chargers = default_fleet();
  in.state.connected = {plugged(r, charger)};
  in.tariff = Tariff::time_of_use(in.state.grid);
  if (price > 0.0) in.tariff.energy_price.assign(96, price);
  in.tariff.demand_rate = demand_rate;
  in.opt.weights = ObjectiveWeights::from_tariff(in.tariff);
  in.futures = {Scenario{std::move(load), {}}};
  return in;
}

OptionEvaluator evaluator(const Instance& in, int user = 0) {
  return OptionEvaluator(in.state, user, in.futures, in.tariff, PiecewiseCurve::standard(), in.opt);
}

}  // namespace

TEST(Pricing, Examples) {
  EXPECT_NEAR(price_option(1.37, -1.37, 1.0), 2.74, 1e-12);
  EXPECT_DOUBLE_EQ(price_option(1.37, 0.0, 0.3), 1.37);
  EXPECT_NEAR(price_option(1.37, 0.80, 0.5), 0.97, 1e-12);
  EXPECT_THROW(price_option(0.0, -1.0, 0.5), BudgetViolation);
  EXPECT_DOUBLE_EQ(budget_feasible_price(0.0, -1.0, 0.5), 1.0);
  EXPECT_THROW(price_option(1.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(price_option(1.0, 0.0, 1.5), DomainError);
}

TEST(Levels, DefaultsAndBounds) {
  const auto l = default_levels();
  ASSERT_EQ(l.size(), 4u);
  EXPECT_DOUBLE_EQ(l[1].de_max, 6.25);
  EXPECT_DOUBLE_EQ(l[3].dt_max, 105.0);
  const SessionRequest r{0, 10, 20.0, 50.0, 40, 6.0, 60.0, 0};
  const auto b = level_bounds(l[3], r, TimeGrid{});
  EXPECT_DOUBLE_EQ(b.max_reduction, 12.0);
  EXPECT_EQ(b.max_delay, 7);
  EXPECT_THROW(validate_levels({{0, 1.0, 0.0}}), ConfigError);
}

TEST(MarginalUtility, UnidirectionalFlatPrice) {
  const SessionRequest r{0, 30, 20.0, 30.0, 50, 6.0, 60.0, 0};
  auto in = flat_instance(r, 5, 0.137, 0.0);
  auto ev = evaluator(in);
  EXPECT_NEAR(ev.marginal_utility(30.0, 50), -1.37, 1e-6);
}

TEST(MarginalUtility, NothingToDoIsZero) {
  const SessionRequest r{0, 30, 20.0, 20.0, 31, 6.0, 60.0, 0};
  auto in = flat_instance(r, 5, 0.137, 11.67);
  auto ev = evaluator(in);
  EXPECT_NEAR(ev.marginal_utility(20.0, 31), 0.0, 1e-7);
}

TEST(MarginalUtility, BidirectionalShavesPeak) {
  std::vector<double> load(96, 40.0);
  load[34] = 90.0;
  const SessionRequest r{0, 32, 40.0, 40.0, 38, 6.0, 60.0, 0};
  auto in = flat_instance(r, 0, 0.0, 11.67, load);
  auto ev = evaluator(in);
  EXPECT_GT(ev.marginal_utility(40.0, 38), 0.0);
}

TEST(Levels, LevelZeroMatchesPlainProgram) {
  const SessionRequest r{0, 36, 20.0, 40.0, 60, 6.0, 60.0, 0};
  auto in = flat_instance(r, 5, 0.0, 11.67);
  auto ev = evaluator(in);
  const auto res = ev.evaluate_level(default_levels()[0]);
  EXPECT_DOUBLE_EQ(res.e_target, 40.0);
  EXPECT_EQ(res.t_dep, 60);
  EXPECT_NEAR(res.value.cost, ev.value(40.0, 60).cost, 1e-9);
}

// A load spike covers the requested window; later steps are quiet.
TEST(Levels, DelayChosenAcrossSpikeMatchesBruteForce) {
  std::vector<double> load(96, 30.0);
  for (int t = 40; t < 44; ++t) load[t] = 100.0;
  const SessionRequest r{0, 40, 20.0, 40.0, 44, 6.0, 60.0, 0};
  auto in = flat_instance(r, 5, 0.0, 11.67, load);
  auto ev = evaluator(in);
  const FlexibilityLevel l3{3, 20.0, 105.0};
  const auto res = ev.evaluate_level(l3);
  const auto base = ev.evaluate_level(default_levels()[0]);
  EXPECT_GT(res.t_dep, r.t_req);
  EXPECT_LT(res.value.cost, base.value.cost - 1e-6);

  const auto b = level_bounds(l3, r, in.state.grid);
  double best = 1e300;
  for (int d = 0; d <= b.max_delay; ++d)
    for (int k = 0; k <= 4; ++k) best = std::min(best, ev.value(r.e_req - b.max_reduction * k / 4.0, r.t_req + d).cost);
  EXPECT_NEAR(res.value.cost, best, 1e-6 * std::max(1.0, best));
  EXPECT_NEAR(ev.evaluate_level_joint(l3).value.cost, best, 1e-5 * std::max(1.0, best));
}

TEST(Levels, NestedLevelsNeverCostMore) {
  std::vector<double> load(96, 30.0);
  for (int t = 40; t < 48; ++t) load[t] = 80.0;
  const SessionRequest r{0, 38, 15.0, 45.0, 48, 6.0, 60.0, 0};
  auto in = flat_instance(r, 5, 0.0, 11.67, load);
  auto ev = evaluator(in);
  const std::vector<FlexibilityLevel> nested{{0, 0, 0}, {1, 5, 15}, {2, 10, 30}, {3, 20, 105}};
  double prev = 1e300, prev_u = -1e300;
  for (const auto& l : nested) {
    const auto res = ev.evaluate_level(l);
    EXPECT_LE(res.value.cost, prev + 1e-7);
    const double u = ev.cost_without() - res.value.cost;
    EXPECT_GE(u, prev_u - 1e-7);
    prev = res.value.cost;
    prev_u = u;
  }
}

TEST(Menu, ShapeRejectPriceAndBudget) {
  const SessionRequest r{0, 36, 20.0, 45.0, 64, 6.0, 60.0, 1};
  auto in = flat_instance(r, 5, 0.0, 11.67, scenario::office_profile(TimeGrid{}));
  auto ev = evaluator(in);
  const auto m = generate_offer_menu(ev, default_levels(), in.tariff, in.state.grid);
  ASSERT_EQ(m.offers.size(), 4u);
  EXPECT_TRUE(m.has_reject);
  EXPECT_NEAR(m.reject_price, 0.30 * 25.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.offers[0].e_dep_target, r.e_req);
  EXPECT_EQ(m.offers[0].t_dep, r.t_req);
  for (const auto& o : m.offers) {
    EXPECT_GE(o.price, -o.utility - 1e-9);  // site never pays more than the user saves it
    EXPECT_LE(r.e_req - o.e_dep_target, default_levels()[static_cast<std::size_t>(o.level)].de_max / 100 * 60 + 1e-9);
    EXPECT_GE(o.t_dep, r.t_req);
  }

  auto ev2 = evaluator(in);
  const auto m2 = generate_offer_menu(ev2, default_levels(), in.tariff, in.state.grid);
  EXPECT_EQ(Json(m).dump(), Json(m2).dump());
}

TEST(Menu, MenuBasedDiscounts) {
  const SessionRequest r{0, 36, 20.0, 45.0, 64, 6.0, 60.0, 1};
  const auto tariff = Tariff::time_of_use(TimeGrid{});
  const auto m = menu_based_offers(r, default_levels(), {0.0, 0.05, 0.10, 0.15}, tariff, TimeGrid{});
  ASSERT_EQ(m.offers.size(), 4u);
  EXPECT_NEAR(m.offers[0].price, 0.178 * 25.0, 1e-12);
  const double e3 = 45.0 - 12.0 - 20.0;
  EXPECT_NEAR(m.offers[3].price, 0.178 * 0.85 * e3, 1e-12);
  EXPECT_EQ(m.offers[3].t_dep, 64 + 7);
  EXPECT_THROW(menu_based_offers(r, default_levels(), {0.0}, tariff, TimeGrid{}), ConfigError);
}

// Reporting an earlier departure or a larger energy never raises the utility the site credits.
TEST(StrategyProofness, MisreportsDoNotPay) {
  std::vector<double> load = scenario::office_profile(TimeGrid{});
  const SessionRequest truth{0, 36, 20.0, 40.0, 60, 6.0, 60.0, 0};
  auto in = flat_instance(truth, 5, 0.0, 11.67, load);
  auto ev = evaluator(in);
  const double u_true = ev.marginal_utility(truth.e_req, truth.t_req);
  for (int earlier : {1, 4, 10})
    EXPECT_LE(ev.marginal_utility(truth.e_req, truth.t_req - earlier), u_true + 1e-6);
  for (double more : {2.0, 5.0, 10.0})
    EXPECT_LE(ev.marginal_utility(truth.e_req + more, truth.t_req), u_true + 1e-6);
}

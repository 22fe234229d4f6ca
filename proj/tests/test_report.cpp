#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "v2b/sim/experiments.hpp"
#include "v2b/sim/report.hpp"

using namespace v2b;
using namespace v2b::sim;

namespace {

SimConfig light() {
  SimConfig c;
  c.mpc_scenarios = 2;
  c.negotiation_scenarios = 2;
  return c;
}

Schedule single_ev(double energy_at_40, int charger = 5) {
  Schedule s;
  s.building_kw.assign(96, 30.0);
  EvTrace ev;
  ev.user_id = 7;
  ev.charger_id = charger;
  ev.t_arr = 36;
  ev.t_dep = 60;
  ev.e_arr = 20.0;
  ev.e_target = 20.0;
  ev.e_min = 6.0;
  ev.e_max = 60.0;
  ev.energy.assign(96, 0.0);
  ev.energy[40] = energy_at_40;
  s.evs.push_back(ev);
  return s;
}

}  // namespace

TEST(Numbers, FormatRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-9, 123456.789, 0.0})
    EXPECT_EQ(parse_number(format_number(v), "x"), v);
  EXPECT_THROW(parse_number("abc", "x"), FormatError);
}

TEST(ScheduleCsv, RoundTripOfASimulatedDay) {
  const auto c = light();
  const auto r = run_day(c, find_bundle("consent"), 2);
  std::stringstream io;
  write_schedule_csv(io, r.schedule);
  const auto back = read_schedule_csv(io, c.grid);
  EXPECT_EQ(back.building_kw, r.schedule.building_kw);
  ASSERT_EQ(back.evs.size(), r.schedule.evs.size());
  for (const auto& ev : r.schedule.evs) {
    const auto it = std::find_if(back.evs.begin(), back.evs.end(), [&](const EvTrace& b) { return b.user_id == ev.user_id; });
    ASSERT_NE(it, back.evs.end());
    EXPECT_EQ(it->energy, ev.energy);
    EXPECT_EQ(it->t_dep, ev.t_dep);
    EXPECT_EQ(it->e_target, ev.e_target);
  }
  EXPECT_NEAR(total_cost(back, realize_day(c, 2).tariff).total, r.metrics.bill.total, 1e-9);
  EXPECT_TRUE(validate_schedule(r.schedule, c).ok());
}

TEST(ScheduleCsv, MalformedInputIsFormatError) {
  const TimeGrid g;
  std::istringstream empty("");
  EXPECT_THROW(read_schedule_csv(empty, g), FormatError);
  std::istringstream header("t,user\n");
  EXPECT_THROW(read_schedule_csv(header, g), FormatError);
  std::stringstream io;
  write_schedule_csv(io, single_ev(1.0));
  std::string text = io.str();
  text.replace(text.find("\n0,-1"), 5, "\nx,-1");
  std::istringstream bad(text);
  EXPECT_THROW(read_schedule_csv(bad, g), FormatError);
  std::stringstream missing;
  write_schedule_csv(missing, single_ev(1.0));
  std::string m = missing.str();
  m.erase(m.find("\n0,-1") + 1, m.find('\n', m.find("\n0,-1") + 1) - m.find("\n0,-1"));
  std::istringstream gap(m);
  EXPECT_THROW(read_schedule_csv(gap, g), FormatError);
}

TEST(Validator, OneCorruptedRateIsOneViolation) {
  const auto c = light();
  EXPECT_TRUE(validate_schedule(single_ev(5.0), c).ok());
  const auto rep = validate_schedule(single_ev(5.5), c);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].family, "rate");
  EXPECT_EQ(rep.violations[0].t, 40);
  EXPECT_EQ(rep.violations[0].user_id, 7);
}

TEST(Validator, FlagsEachFamily) {
  const auto c = light();
  // Discharging 5 kWh in 15 minutes is 20 kW against a 10 kW building.
  auto s = single_ev(-5.0, 0);
  s.building_kw.assign(96, 10.0);
  auto rep = validate_schedule(s, c);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].family, "export");

  s = single_ev(-1.0);  // unidirectional port
  EXPECT_EQ(validate_schedule(s, c).violations.at(0).family, "rate");

  s = single_ev(0.0);
  s.evs[0].energy[70] = 1.0;
  EXPECT_EQ(validate_schedule(s, c).violations.at(0).family, "window");

  s = single_ev(0.0);
  s.evs[0].e_arr = 58.0;
  s.evs[0].e_target = 58.0;
  s.evs[0].energy[40] = 3.0;
  rep = validate_schedule(s, c);
  ASSERT_FALSE(rep.ok());
  EXPECT_EQ(rep.violations[0].family, "curve");

  s = single_ev(0.0);
  s.evs.push_back(s.evs[0]);
  s.evs[1].user_id = 8;
  s.evs[1].t_arr = 50;
  s.evs[1].t_dep = 70;
  rep = validate_schedule(s, c);
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].family, "charger");

  s = single_ev(0.0);
  s.evs[0].e_target = 40.0;
  rep = validate_schedule(s, c);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.warnings.size(), 1u);
}

TEST(Validator, OracleScheduleIsClean) {
  const auto c = light();
  auto day = realize_day(c, 3);
  day.day.sessions = {SessionRequest{0, 32, 15.0, 45.0, 60, 6.0, 60.0, 0},
                      SessionRequest{1, 36, 25.0, 50.0, 70, 6.0, 60.0, 1},
                      SessionRequest{2, 40, 30.0, 40.0, 56, 6.0, 60.0, 2}};
  const auto r = run_day(c, find_bundle("oracle"), 3, day);
  const auto rep = validate_schedule(r.schedule, c);
  EXPECT_TRUE(rep.ok()) << report_to_json(rep).dump();
  EXPECT_NEAR(r.metrics.missing_soc_kwh, 0.0, 1e-9);
}

TEST(MetricsCsv, RoundTrip) {
  const auto c = light();
  RunOptions opt;
  const auto period = run_billing_period(c, find_bundle("req_charge"), seed_range(1, 2), opt);
  std::stringstream io;
  write_metrics_csv(io, period.days);
  const auto rows = read_metrics_csv(io);
  ASSERT_EQ(rows.size(), period.days.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].bundle, "req_charge");
    EXPECT_EQ(rows[i].seed, period.days[i].day.seed);
    for (const auto& [name, v] : daily_values(period.days[i])) {
      if (std::isnan(v)) {
        EXPECT_TRUE(std::isnan(rows[i].values.at(name)));
      } else {
        EXPECT_EQ(rows[i].values.at(name), v) << name;
      }
    }
  }
  std::istringstream bad("variant,bundle\nx\n");
  EXPECT_THROW(read_metrics_csv(bad), FormatError);
}

TEST(Manifest, RecordsConfigAndSeeds) {
  const auto c = light();
  const auto m = run_manifest(c, {"consent"}, {1, 2}, "test");
  EXPECT_EQ(m.at("config_hash").get<std::string>(), config_hash(c));
  EXPECT_EQ(m.at("seeds").size(), 2u);
  EXPECT_EQ(m.at("version").get<std::string>(), version());
}

#include "v2b/sim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "v2b/charging/state.hpp"

namespace v2b::sim {

const char* version() { return "1.0.0"; }

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw FormatError(where + ": '" + cell + "' is not a number");
  return v;
}

namespace {

std::int64_t parse_int(const std::string& cell, const std::string& where) {
  std::int64_t v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw FormatError(where + ": '" + cell + "' is not an integer");
  return v;
}

std::uint64_t parse_uint(const std::string& cell, const std::string& where) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw FormatError(where + ": '" + cell + "' is not an unsigned integer");
  return v;
}

std::string where(int row) { return "row " + std::to_string(row); }

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<DailyRow>& rows) {
  out << "variant,bundle,seed,day,weekday";
  for (const auto& n : daily_value_names()) out << ',' << n;
  out << '\n';
  for (const auto& r : rows) {
    out << r.variant << ',' << r.bundle << ',' << r.day.seed << ',' << r.day.index << ',' << r.day.weekday;
    for (const auto& [n, v] : daily_values(r)) out << ',' << format_number(v);
    out << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("metrics file is empty");
  const auto header = split_csv_line(line);
  std::vector<std::string> want{"variant", "bundle", "seed", "day", "weekday"};
  for (const auto& n : daily_value_names()) want.push_back(n);
  if (header != want) throw FormatError("metrics header does not match the expected columns");
  std::vector<MetricsRow> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != want.size()) throw FormatError(where(row) + " has " + std::to_string(c.size()) + " columns");
    MetricsRow m;
    m.variant = c[0];
    m.bundle = c[1];
    m.seed = parse_uint(c[2], where(row));
    m.day = static_cast<int>(parse_int(c[3], where(row)));
    m.weekday = static_cast<int>(parse_int(c[4], where(row)));
    for (std::size_t i = 5; i < c.size(); ++i) m.values[want[i]] = parse_number(c[i], where(row));
    rows.push_back(std::move(m));
  }
  return rows;
}

void write_table_csv(std::ostream& out, const std::vector<ComparisonRow>& rows) {
  out << "variant,bundle,days";
  for (const auto& n : daily_value_names()) out << ',' << n << "_mean," << n << "_std";
  out << ",period_building_cost,period_demand_cost,period_peak_kw,period_net_cost,monthly_user_cost,"
         "period_user_price,period_reject_pct,period_missing_soc_kwh,period_peak_shaving_kw\n";
  for (const auto& r : rows) {
    const auto& p = r.period;
    out << r.variant << ',' << r.bundle << ',' << p.days;
    for (const auto& [n, s] : r.stats) out << ',' << format_number(s.mean) << ',' << format_number(s.std);
    out << ',' << format_number(p.bill.total) << ',' << format_number(p.bill.demand) << ','
        << format_number(p.bill.peak_kw) << ',' << format_number(p.net_cost) << ','
        << format_number(p.monthly_user_cost) << ',' << format_number(p.user_price) << ','
        << format_number(100.0 * p.reject_fraction) << ',' << format_number(p.missing_soc_kwh) << ','
        << (p.peak_shaving_kw ? format_number(*p.peak_shaving_kw) : std::string()) << '\n';
  }
}

namespace {
const std::vector<std::string>& schedule_header() {
  static const std::vector<std::string> h{"t",     "user_id", "charger_id", "t_arr",      "t_dep",      "e_arr",
                                          "e_target", "e_min", "e_max",   "energy_kwh", "building_kw"};
  return h;
}
}  // namespace

void write_schedule_csv(std::ostream& out, const Schedule& s) {
  const auto& h = schedule_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (int t = 0; t < s.grid.steps; ++t)
    out << t << ",-1,,,,,,,,," << format_number(s.building_kw[static_cast<std::size_t>(t)]) << '\n';
  for (const auto& ev : s.evs) {
    for (int t = ev.t_arr; t < ev.t_dep && t < s.grid.steps; ++t) {
      out << t << ',' << ev.user_id << ',' << ev.charger_id << ',' << ev.t_arr << ',' << ev.t_dep << ','
          << format_number(ev.e_arr) << ',' << format_number(ev.e_target) << ',' << format_number(ev.e_min) << ','
          << format_number(ev.e_max) << ',' << format_number(ev.energy[static_cast<std::size_t>(t)]) << ",\n";
    }
  }
}

Schedule read_schedule_csv(std::istream& in, const TimeGrid& grid) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("schedule file is empty");
  if (split_csv_line(line) != schedule_header()) throw FormatError("schedule header does not match");
  Schedule s;
  s.grid = grid;
  s.building_kw.assign(static_cast<std::size_t>(grid.steps), std::numeric_limits<double>::quiet_NaN());
  std::map<int, EvTrace> evs;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != schedule_header().size()) throw FormatError(where(row) + " has " + std::to_string(c.size()) + " columns");
    const auto t = parse_int(c[0], where(row));
    const auto u = parse_int(c[1], where(row));
    if (u == -1) {
      if (t < 0 || t >= grid.steps) throw FormatError(where(row) + ": building step outside the day");
      s.building_kw[static_cast<std::size_t>(t)] = parse_number(c[10], where(row));
      continue;
    }
    auto [it, fresh] = evs.try_emplace(static_cast<int>(u));
    EvTrace& ev = it->second;
    EvTrace meta;
    meta.user_id = static_cast<int>(u);
    meta.charger_id = static_cast<int>(parse_int(c[2], where(row)));
    meta.t_arr = static_cast<int>(parse_int(c[3], where(row)));
    meta.t_dep = static_cast<int>(parse_int(c[4], where(row)));
    meta.e_arr = parse_number(c[5], where(row));
    meta.e_target = parse_number(c[6], where(row));
    meta.e_min = parse_number(c[7], where(row));
    meta.e_max = parse_number(c[8], where(row));
    for (double v : {meta.e_arr, meta.e_target, meta.e_min, meta.e_max})
      if (std::isnan(v)) throw FormatError(where(row) + ": EV fields must be filled");
    if (fresh) {
      ev = meta;
      ev.energy.assign(static_cast<std::size_t>(grid.steps), 0.0);
    } else if (ev.charger_id != meta.charger_id || ev.t_arr != meta.t_arr || ev.t_dep != meta.t_dep ||
               ev.e_arr != meta.e_arr || ev.e_target != meta.e_target || ev.e_min != meta.e_min ||
               ev.e_max != meta.e_max) {
      throw FormatError(where(row) + ": session fields of user " + std::to_string(u) + " change between rows");
    }
    if (t < 0 || t >= grid.steps) throw FormatError(where(row) + ": step outside the day");
    const double e = parse_number(c[9], where(row));
    if (std::isnan(e)) throw FormatError(where(row) + ": energy is empty");
    ev.energy[static_cast<std::size_t>(t)] += e;
    // Rows outside the connection window are kept so the validator can flag them.
  }
  for (int t = 0; t < grid.steps; ++t)
    if (std::isnan(s.building_kw[static_cast<std::size_t>(t)]))
      throw FormatError("no building row for step " + std::to_string(t));
  for (auto& [u, ev] : evs) s.evs.push_back(std::move(ev));
  return s;
}

ValidationReport validate_schedule(const Schedule& s, const SimConfig& cfg) {
  ValidationReport r;
  const auto& g = s.grid;
  const double tau = g.step_hours;
  const double tol = 1e-6;
  r.steps = g.steps;
  r.evs = static_cast<int>(s.evs.size());
  auto flag = [&](std::string family, int t, int u, std::string msg) {
    r.violations.push_back({std::move(family), t, u, std::move(msg)});
  };
  if (static_cast<int>(s.building_kw.size()) != g.steps) {
    flag("shape", -1, -1, "building load has " + std::to_string(s.building_kw.size()) + " steps");
    return r;
  }
  std::map<int, const ChargerSpec*> ports;
  for (const auto& c : cfg.chargers) ports[c.id] = &c;
  std::map<int, std::vector<std::pair<int, int>>> occupancy;
  std::vector<double> ev_kwh(static_cast<std::size_t>(g.steps), 0.0);
  for (const auto& ev : s.evs) {
    const int u = ev.user_id;
    if (static_cast<int>(ev.energy.size()) != g.steps) {
      flag("shape", -1, u, "trace length differs from the grid");
      continue;
    }
    if (!(ev.t_arr < ev.t_dep) || ev.t_arr < 0 || ev.t_dep > g.steps) flag("window", -1, u, "invalid connection window");
    if (!(ev.e_min <= ev.e_arr + tol && ev.e_arr <= ev.e_max + tol)) flag("soc_bounds", ev.t_arr, u, "arrival SoC outside bounds");
    auto pit = ports.find(ev.charger_id);
    if (pit == ports.end()) {
      flag("charger", -1, u, "unknown charger " + std::to_string(ev.charger_id));
      continue;
    }
    const ChargerSpec& ch = *pit->second;
    occupancy[ch.id].push_back({ev.t_arr, ev.t_dep});
    double soc = ev.e_arr;
    for (int t = 0; t < g.steps; ++t) {
      const double e = ev.energy[static_cast<std::size_t>(t)];
      ev_kwh[static_cast<std::size_t>(t)] += e;
      if (t < ev.t_arr || t >= ev.t_dep) {
        if (std::abs(e) > tol) flag("window", t, u, "energy while not connected");
        continue;
      }
      const double up = tau * ch.efficiency * ch.rate_max_kw;
      const double down = tau * ch.efficiency * ch.rate_min_kw;
      if (e > up + tol) {
        flag("rate", t, u, "charge " + format_number(e) + " kWh above the port cap " + format_number(up));
      } else if (e < down - tol) {
        flag("rate", t, u, "discharge " + format_number(-e) + " kWh beyond the port cap " + format_number(-down));
      } else {
        const double curve_cap = charging::step_charge_cap(ch, cfg.curve, soc, ev.e_max, tau);
        if (e > curve_cap + tol)
          flag("curve", t, u, "charge " + format_number(e) + " kWh above the curve cap " + format_number(curve_cap));
      }
      soc += e;
      if (soc > ev.e_max + tol) flag("soc_bounds", t, u, "SoC " + format_number(soc) + " above capacity");
      if (soc < ev.e_min - tol) flag("soc_bounds", t, u, "SoC " + format_number(soc) + " below the floor");
    }
    if (soc < ev.e_target - 1e-4)
      r.warnings.push_back("user " + std::to_string(u) + " departs " + format_number(ev.e_target - soc) +
                           " kWh short of its target");
  }
  for (auto& [id, spans] : occupancy) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i)
      if (spans[i].first < spans[i - 1].second)
        flag("charger", spans[i].first, -1, "charger " + std::to_string(id) + " holds two EVs");
  }
  for (int t = 0; t < g.steps; ++t) {
    const double p = s.building_kw[static_cast<std::size_t>(t)] + ev_kwh[static_cast<std::size_t>(t)] / tau;
    if (!cfg.tariff.allow_export && p < -tol) flag("export", t, -1, "net export of " + format_number(-p) + " kW");
    if (t >= g.peak_begin && t < g.peak_end) r.peak_kw = std::max(r.peak_kw, p);
  }
  return r;
}

ValidationReport validate_schedule_csv(std::istream& in, const SimConfig& cfg) {
  return validate_schedule(read_schedule_csv(in, cfg.grid), cfg);
}

Json report_to_json(const ValidationReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back(Json{{"family", x.family}, {"t", x.t}, {"user_id", x.user_id}, {"message", x.message}});
  return Json{{"ok", r.ok()},         {"violations", v}, {"warnings", r.warnings},
              {"evs", r.evs},         {"steps", r.steps}, {"peak_kw", r.peak_kw}};
}

Json run_manifest(const SimConfig& cfg, const std::vector<std::string>& bundles,
                  const std::vector<std::uint64_t>& seeds, const std::string& command) {
  return Json{{"command", command},
              {"version", version()},
              {"compiler", __VERSION__},
              {"config_hash", config_hash(cfg)},
              {"config", config_to_json(cfg)},
              {"bundles", bundles},
              {"seeds", seeds}};
}

}  // namespace v2b::sim

#include "v2b/sim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "v2b/sim/report.hpp"

namespace v2b::sim {

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  if (count < 0) throw DomainError("seed count must be non-negative");
  std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = first + static_cast<std::uint64_t>(i);
  return s;
}

std::vector<DayPlan> plan_days(const SimConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  std::vector<DayPlan> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    DayPlan d;
    d.index = static_cast<int>(i);
    d.weekday = (cfg.start_weekday + d.index) % 7;
    d.seed = seeds[i];
    if (cfg.weekdays_only && d.weekday >= 5) continue;
    out.push_back(d);
  }
  return out;
}

std::vector<std::uint64_t> calendar_seeds(const SimConfig& cfg, std::uint64_t first, int weekdays) {
  if (weekdays < 1) throw DomainError("need at least one day");
  std::vector<std::uint64_t> seeds;
  int kept = 0;
  for (int i = 0; kept < weekdays; ++i) {
    seeds.push_back(first + static_cast<std::uint64_t>(i));
    if (!cfg.weekdays_only || (cfg.start_weekday + i) % 7 < 5) ++kept;
  }
  return seeds;
}

EpisodeMetrics aggregate_days(const std::string& bundle, const std::vector<DayMetrics>& days, double demand_rate,
                              const std::vector<double>* maxcharge_peaks) {
  if (days.empty()) throw EmptyBillingPeriod("billing period has no days");
  EpisodeMetrics m;
  m.bundle = bundle;
  m.days = static_cast<int>(days.size());
  std::vector<CostBreakdown> bills;
  for (const auto& d : days) {
    bills.push_back(d.bill);
    m.daily_peaks.push_back(d.bill.peak_kw);
    m.payments += d.payments;
    m.delivered_kwh += d.delivered_kwh;
    m.arrivals += d.arrivals;
    m.rejects += d.rejects;
    m.involuntary += d.involuntary;
    m.missing_soc_kwh += d.missing_soc_kwh;
    m.cars_under_target += d.cars_under_target;
    for (const auto& [level, n] : d.choices) m.choices[level] += n;
  }
  m.bill = billing_period_cost(bills, demand_rate);
  m.net_cost = m.bill.total - m.payments;
  m.monthly_user_cost = m.payments;
  m.user_price = m.delivered_kwh > 1e-9 ? m.payments / m.delivered_kwh : 0.0;
  m.reject_fraction = m.arrivals > 0 ? static_cast<double>(m.rejects) / m.arrivals : 0.0;
  if (maxcharge_peaks) {
    if (maxcharge_peaks->size() != days.size()) throw DimensionMismatch("replay covers different days");
    m.peak_shaving_kw = *std::max_element(maxcharge_peaks->begin(), maxcharge_peaks->end()) - m.bill.peak_kw;
  }
  return m;
}

const std::vector<std::string>& daily_value_names() {
  static const std::vector<std::string> names{
      "building_cost", "energy_cost",  "demand_cost",       "soc_penalty",       "battery_cost",
      "peak_kw",       "net_cost",     "user_payments",     "user_price",        "delivered_kwh",
      "arrivals",      "rejects",      "involuntary",       "reject_pct",        "missing_soc_kwh",
      "cars_under_target", "peak_shaving_kw", "decision_ms_mean", "decision_ms_max", "fallbacks"};
  return names;
}

std::vector<std::pair<std::string, double>> daily_values(const DailyRow& row) {
  const auto& m = row.metrics;
  double mean_ms = 0.0, max_ms = 0.0;
  for (double s : m.decision_seconds) {
    mean_ms += 1e3 * s;
    max_ms = std::max(max_ms, 1e3 * s);
  }
  if (!m.decision_seconds.empty()) mean_ms /= static_cast<double>(m.decision_seconds.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {{"building_cost", m.bill.total},
          {"energy_cost", m.bill.energy},
          {"demand_cost", m.bill.demand},
          {"soc_penalty", m.bill.missing_soc},
          {"battery_cost", m.bill.battery},
          {"peak_kw", m.bill.peak_kw},
          {"net_cost", m.net_cost},
          {"user_payments", m.payments},
          {"user_price", m.user_price()},
          {"delivered_kwh", m.delivered_kwh},
          {"arrivals", static_cast<double>(m.arrivals)},
          {"rejects", static_cast<double>(m.rejects)},
          {"involuntary", static_cast<double>(m.involuntary)},
          {"reject_pct", 100.0 * m.reject_fraction()},
          {"missing_soc_kwh", m.missing_soc_kwh},
          {"cars_under_target", static_cast<double>(m.cars_under_target)},
          {"peak_shaving_kw", row.peak_shaving_kw.value_or(nan)},
          {"decision_ms_mean", mean_ms},
          {"decision_ms_max", max_ms},
          {"fallbacks", static_cast<double>(m.fallbacks)}};
}

void parallel_for(int jobs, int workers, const std::function<void(int)>& task) {
  if (jobs <= 0) return;
  workers = std::clamp(workers, 1, jobs);
  if (workers == 1) {
    for (int i = 0; i < jobs; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < jobs; i = next++) {
        {
          std::lock_guard<std::mutex> lock(mu);
          if (error) return;
        }
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

DayResult run_planned_day(const SimConfig& cfg, const PolicyBundle& bundle, const DayPlan& d) {
  try {
    return run_day(cfg, bundle, d.seed);
  } catch (const Error& e) {
    throw InfeasibleState("bundle " + bundle.name + ", seed " + std::to_string(d.seed) + ": " + e.what());
  }
}

std::vector<double> replay_maxcharge(const SimConfig& cfg, const std::vector<DayPlan>& days, int workers) {
  const auto mc = find_bundle("uncoordinated");
  std::vector<double> peaks(days.size());
  parallel_for(static_cast<int>(days.size()), workers, [&](int i) {
    peaks[static_cast<std::size_t>(i)] = run_planned_day(cfg, mc, days[static_cast<std::size_t>(i)]).metrics.bill.peak_kw;
  });
  return peaks;
}

ComparisonRow make_row(const std::string& bundle, const std::vector<DailyRow>& rows, double demand_rate,
                       const std::vector<double>* mc_peaks) {
  ComparisonRow r;
  r.bundle = bundle;
  if (!rows.empty()) r.variant = rows.front().variant;
  std::vector<DayMetrics> ms;
  for (const auto& d : rows) ms.push_back(d.metrics);
  r.period = aggregate_days(bundle, ms, demand_rate, mc_peaks);
  for (const auto& name : daily_value_names()) {
    std::vector<double> v;
    for (const auto& d : rows)
      for (const auto& [n, x] : daily_values(d))
        if (n == name && !std::isnan(x)) v.push_back(x);
    r.stats.emplace_back(name, summarize(v));
  }
  return r;
}

}  // namespace

PeriodResult run_billing_period(const SimConfig& cfg, const PolicyBundle& bundle,
                                const std::vector<std::uint64_t>& seeds, const RunOptions& opt) {
  const auto cmp = compare_policies(cfg, {bundle}, seeds, opt);
  PeriodResult p;
  p.metrics = cmp.rows.front().period;
  p.days = cmp.daily;
  return p;
}

Stat summarize(const std::vector<double>& v) {
  Stat s;
  s.n = static_cast<int>(v.size());
  if (v.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

const Stat& ComparisonRow::stat(const std::string& name) const {
  for (const auto& [n, s] : stats)
    if (n == name) return s;
  throw DomainError("no metric named " + name);
}

const ComparisonRow& Comparison::row(const std::string& bundle) const {
  for (const auto& r : rows)
    if (r.bundle == bundle) return r;
  throw DomainError("no bundle named " + bundle);
}

std::vector<double> Comparison::series(const std::string& bundle, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& d : daily) {
    if (d.bundle != bundle) continue;
    bool found = false;
    for (const auto& [n, x] : daily_values(d))
      if (n == metric) out.push_back(x), found = true;
    if (!found) throw DomainError("no metric named " + metric);
  }
  return out;
}

Comparison compare_policies(const SimConfig& cfg, const std::vector<PolicyBundle>& bundles,
                            const std::vector<std::uint64_t>& seeds, const RunOptions& opt) {
  cfg.validate();
  if (bundles.empty()) throw DomainError("no policy bundles to compare");
  Comparison c;
  c.days = plan_days(cfg, seeds);
  if (c.days.empty()) throw EmptyBillingPeriod("no weekdays among the seeds");
  const std::size_t nd = c.days.size();
  std::vector<double> mc_peaks;
  if (opt.peak_shaving) mc_peaks = replay_maxcharge(cfg, c.days, opt.workers);
  c.daily.resize(bundles.size() * nd);
  parallel_for(static_cast<int>(c.daily.size()), opt.workers, [&](int job) {
    const std::size_t b = static_cast<std::size_t>(job) / nd, d = static_cast<std::size_t>(job) % nd;
    auto res = run_planned_day(cfg, bundles[b], c.days[d]);
    DailyRow row;
    row.bundle = bundles[b].name;
    row.day = c.days[d];
    row.metrics = res.metrics;
    if (opt.peak_shaving) row.peak_shaving_kw = mc_peaks[d] - res.metrics.bill.peak_kw;
    if (opt.keep_schedules) row.result = std::move(res);
    c.daily[static_cast<std::size_t>(job)] = std::move(row);
  });
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    std::vector<DailyRow> rows(c.daily.begin() + static_cast<std::ptrdiff_t>(b * nd),
                               c.daily.begin() + static_cast<std::ptrdiff_t>((b + 1) * nd));
    c.rows.push_back(make_row(bundles[b].name, rows, cfg.tariff.demand_rate, opt.peak_shaving ? &mc_peaks : nullptr));
  }
  return c;
}

double sign_test_p(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("sign test needs paired samples");
  int n = 0, k = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    ++n;
    if (a[i] < b[i]) ++k;
  }
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int i = k; i <= n; ++i)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, p);
}

std::vector<std::string> experiment_names() {
  return {"compare", "sweep-alpha", "sweep-weights", "robustness", "assignment-study", "scaling"};
}

void ExperimentSpec::validate() const {
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError("unknown experiment '" + name + "'");
  if (seeds.empty()) throw ConfigError("experiment needs at least one seed");
  if (workers < 1) throw ConfigError("workers must be positive");
  for (const auto& b : bundles) find_bundle(b);
  for (const auto& p : presets) scenario::find_preset(p);
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alpha values must lie in (0, 1]");
  for (auto [m1, m2] : weight_multipliers)
    if (m1 < 0.0 || m2 < 0.0) throw ConfigError("weight multipliers must be non-negative");
  for (double m : fleet_means)
    if (!(m > 0.0)) throw ConfigError("fleet means must be positive");
  if (out_dir.empty()) throw ConfigError("output directory is empty");
}

namespace {

std::vector<PolicyBundle> resolve(const std::vector<std::string>& names, const std::vector<std::string>& fallback) {
  std::vector<PolicyBundle> out;
  for (const auto& n : names.empty() ? fallback : names) out.push_back(find_bundle(n));
  return out;
}

Json period_json(const EpisodeMetrics& m) {
  Json choices = Json::object();
  for (const auto& [level, n] : m.choices) choices[level < 0 ? "reject" : std::to_string(level)] = n;
  Json j{{"days", m.days},
         {"building_cost", m.bill.total},
         {"energy_cost", m.bill.energy},
         {"demand_cost", m.bill.demand},
         {"peak_kw", m.bill.peak_kw},
         {"net_cost", m.net_cost},
         {"monthly_user_cost", m.monthly_user_cost},
         {"user_price", m.user_price},
         {"delivered_kwh", m.delivered_kwh},
         {"arrivals", m.arrivals},
         {"rejects", m.rejects},
         {"involuntary", m.involuntary},
         {"reject_fraction", m.reject_fraction},
         {"missing_soc_kwh", m.missing_soc_kwh},
         {"cars_under_target", m.cars_under_target},
         {"choices", choices}};
  j["peak_shaving_kw"] = m.peak_shaving_kw ? Json(*m.peak_shaving_kw) : Json(nullptr);
  return j;
}

Json row_json(const ComparisonRow& r) {
  Json stats = Json::object();
  for (const auto& [n, s] : r.stats) {
    Json e{{"n", s.n}, {"std", s.std}};
    e["mean"] = std::isnan(s.mean) ? Json(nullptr) : Json(s.mean);
    stats[n] = e;
  }
  return Json{{"variant", r.variant}, {"bundle", r.bundle}, {"period", period_json(r.period)}, {"daily", stats}};
}

struct Collected {
  std::vector<ComparisonRow> rows;
  std::vector<DailyRow> daily;
};

void collect(Collected& out, Comparison c, const std::string& variant) {
  for (auto& r : c.rows) {
    r.variant = variant;
    out.rows.push_back(std::move(r));
  }
  for (auto& d : c.daily) {
    d.variant = variant;
    d.result.reset();
    out.daily.push_back(std::move(d));
  }
}

std::string label(double v) { return format_number(v); }

Json check(const std::string& name, bool pass, const std::string& detail) {
  return Json{{"name", name}, {"pass", pass}, {"detail", detail}};
}

const ComparisonRow* find_row(const std::vector<ComparisonRow>& rows, const std::string& variant,
                              const std::string& bundle) {
  for (const auto& r : rows)
    if (r.variant == variant && r.bundle == bundle) return &r;
  return nullptr;
}

// Directional trends that assertion mode enforces. Building cost is the operator's net cost.
Json directional_checks(const ExperimentSpec& spec, const std::vector<ComparisonRow>& rows) {
  constexpr double tol = 1e-9;
  Json out = Json::array();
  if (spec.name == "sweep-alpha") {
    std::vector<std::string> bundles;
    for (const auto& r : rows)
      if (std::find(bundles.begin(), bundles.end(), r.bundle) == bundles.end()) bundles.push_back(r.bundle);
    for (const auto& b : bundles) {
      std::vector<const ComparisonRow*> seq;
      std::vector<double> alphas = spec.alphas;
      std::sort(alphas.rbegin(), alphas.rend());
      for (double a : alphas)
        if (const auto* r = find_row(rows, "alpha=" + label(a), b)) seq.push_back(r);
      bool cost = true, price = true, reject = true;
      for (std::size_t i = 1; i < seq.size(); ++i) {
        cost = cost && seq[i]->period.net_cost <= seq[i - 1]->period.net_cost + tol;
        price = price && seq[i]->period.user_price >= seq[i - 1]->period.user_price - tol;
        reject = reject && seq[i]->period.reject_fraction >= seq[i - 1]->period.reject_fraction - tol;
      }
      out.push_back(check(b + ": building cost nonincreasing as alpha falls", cost, ""));
      out.push_back(check(b + ": user price nondecreasing as alpha falls", price, ""));
      out.push_back(check(b + ": reject fraction nondecreasing as alpha falls", reject, ""));
    }
  } else if (spec.name == "sweep-weights") {
    const std::string base = "w1x1_w2x1";
    for (const auto& r : rows) {
      const auto* ref = find_row(rows, base, r.bundle);
      if (!ref || r.variant == base) continue;
      const auto pos = r.variant.find("_w2x");
      const double m1 = std::stod(r.variant.substr(3, pos - 3));
      const double m2 = std::stod(r.variant.substr(pos + 4));
      if (m1 <= 1.0 && m2 <= 1.0) {
        out.push_back(check(r.bundle + " " + r.variant + ": building cost <= baseline",
                            r.period.net_cost <= ref->period.net_cost + tol, ""));
        out.push_back(check(r.bundle + " " + r.variant + ": reject fraction <= baseline",
                            r.period.reject_fraction <= ref->period.reject_fraction + tol, ""));
      } else if (m1 >= 1.0 && m2 >= 1.0) {
        out.push_back(check(r.bundle + " " + r.variant + ": user price >= baseline",
                            r.period.user_price >= ref->period.user_price - tol, ""));
      }
    }
  } else if (spec.name == "compare") {
    for (const char* b : {"mc_mpc", "req_charge", "max_charge", "smart_free", "smart_fixed", "smart_utility"})
      if (const auto* r = find_row(rows, "default", b))
        out.push_back(check(std::string(b) + ": no missing SoC", r->period.missing_soc_kwh <= 1e-6, ""));
    const auto* c = find_row(rows, "default", "consent");
    const auto* m = find_row(rows, "default", "menu_based");
    if (c && m)
      out.push_back(check("consent reject fraction <= menu_based", c->period.reject_fraction <= m->period.reject_fraction + tol, ""));
  }
  return out;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentSpec& spec, const SimConfig& base) {
  spec.validate();
  base.validate();
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir);
  RunOptions ro;
  ro.workers = spec.workers;
  Collected all;
  Json extra = Json::object();
  std::vector<std::string> bundle_names;
  std::string table = spec.name;
  std::replace(table.begin(), table.end(), '-', '_');

  if (spec.name == "compare") {
    std::vector<std::string> names;
    for (const auto& b : table_bundles()) names.push_back(b.name);
    const auto bundles = resolve(spec.bundles, names);
    collect(all, compare_policies(base, bundles, spec.seeds, ro), "default");
  } else if (spec.name == "sweep-alpha") {
    for (const auto& proto : resolve(spec.bundles, {"consent"})) {
      std::vector<PolicyBundle> bundles;
      for (double a : spec.alphas) {
        auto b = proto;
        b.alpha = a;
        bundles.push_back(b);
      }
      for (const auto& b : bundles) collect(all, compare_policies(base, {b}, spec.seeds, ro), "alpha=" + label(b.alpha));
    }
  } else if (spec.name == "sweep-weights") {
    const auto bundles = resolve(spec.bundles, {"consent"});
    for (auto [m1, m2] : spec.weight_multipliers) {
      auto cfg = base;
      cfg.w1_scale = m1;
      cfg.w2_scale = m2;
      collect(all, compare_policies(cfg, bundles, spec.seeds, ro), "w1x" + label(m1) + "_w2x" + label(m2));
    }
  } else if (spec.name == "robustness") {
    const auto bundles = resolve(spec.bundles, {"mc_mpc", "edf", "llf", "req_charge", "max_charge"});
    std::vector<std::string> presets = spec.presets;
    if (presets.empty())
      for (const auto& p : scenario::robustness_presets()) presets.push_back(p.name);
    for (const auto& p : presets) {
      auto cfg = base;
      cfg.preset = p;
      collect(all, compare_policies(cfg, bundles, spec.seeds, ro), p);
    }
  } else if (spec.name == "assignment-study") {
    const auto bundles = resolve(spec.bundles, {"consent"});
    using charging::ClassOrder;
    using charging::TieBreak;
    for (auto order : {ClassOrder::BidirectionalFirst, ClassOrder::UnidirectionalFirst, ClassOrder::Random})
      for (auto tie : {TieBreak::UserId, TieBreak::LaterDeparture, TieBreak::LargerEnergy, TieBreak::Random}) {
        auto cfg = base;
        cfg.assignment = {order, tie};
        collect(all, compare_policies(cfg, bundles, spec.seeds, ro),
                std::string(to_string(order)) + "/" + to_string(tie));
      }
  } else if (spec.name == "scaling") {
    const auto bundles = resolve(spec.bundles, {"consent"});
    Json scaling = Json::array();
    std::ofstream sc(fs::path(spec.out_dir) / "scaling_times.csv");
    sc << "mean_cars,bundle,kind,decisions,p50_ms,p90_ms,p99_ms,max_ms,mean_ms\n";
    for (double m : spec.fleet_means) {
      auto cfg = base;
      const double factor = m / base.generator.mean_arrivals;
      cfg.generator.mean_arrivals = m;
      for (double& v : cfg.generator.bin_mean) v *= factor;
      int uni = 0, bi = 0;
      for (const auto& c : base.chargers) (c.bidirectional() ? bi : uni) += 1;
      cfg.chargers = default_fleet(std::max(1, static_cast<int>(std::lround(uni * std::max(1.0, factor)))),
                                   static_cast<int>(std::lround(bi * std::max(1.0, factor))));
      RunOptions keep = ro;
      keep.keep_schedules = true;
      keep.peak_shaving = false;
      auto c = compare_policies(cfg, bundles, spec.seeds, keep);
      for (const auto& b : bundles) {
        for (const char* kind : {"charging", "negotiation"}) {
          std::vector<double> t;
          for (const auto& d : c.daily) {
            if (d.bundle != b.name) continue;
            const auto& src = std::string(kind) == "charging" ? d.metrics.decision_seconds
                                                               : d.result->negotiation_seconds;
            for (double s : src) t.push_back(1e3 * s);
          }
          std::sort(t.begin(), t.end());
          auto pct = [&](double q) {
            if (t.empty()) return 0.0;
            const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(t.size()))) - 1;
            return t[std::min(i, t.size() - 1)];
          };
          double mean = 0.0;
          for (double x : t) mean += x;
          if (!t.empty()) mean /= static_cast<double>(t.size());
          sc << format_number(m) << ',' << b.name << ',' << kind << ',' << t.size() << ','
             << format_number(pct(0.5)) << ',' << format_number(pct(0.9)) << ',' << format_number(pct(0.99)) << ','
             << format_number(t.empty() ? 0.0 : t.back()) << ',' << format_number(mean) << '\n';
          scaling.push_back(Json{{"mean_cars", m}, {"bundle", b.name}, {"kind", kind}, {"decisions", t.size()},
                                 {"p50_ms", pct(0.5)}, {"p90_ms", pct(0.9)}, {"p99_ms", pct(0.99)}});
        }
      }
      collect(all, std::move(c), "cars=" + label(m));
    }
    extra["scaling"] = scaling;
  }

  for (const auto& r : all.rows)
    if (std::find(bundle_names.begin(), bundle_names.end(), r.bundle) == bundle_names.end())
      bundle_names.push_back(r.bundle);

  ExperimentOutput out;
  const auto table_path = (fs::path(spec.out_dir) / (table + ".csv")).string();
  {
    std::ofstream f(table_path);
    write_table_csv(f, all.rows);
    if (!f) throw FormatError("cannot write " + table_path);
  }
  const auto daily_path = (fs::path(spec.out_dir) / "daily.csv").string();
  {
    std::ofstream f(daily_path);
    write_metrics_csv(f, all.daily);
    if (!f) throw FormatError("cannot write " + daily_path);
  }
  out.files = {table_path, daily_path};
  if (spec.name == "scaling") out.files.push_back((fs::path(spec.out_dir) / "scaling_times.csv").string());

  Json rows = Json::array();
  for (const auto& r : all.rows) rows.push_back(row_json(r));
  out.summary = Json{{"experiment", spec.name}, {"rows", rows}, {"checks", directional_checks(spec, all.rows)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) out.summary[it.key()] = it.value();
  const auto summary_path = (fs::path(spec.out_dir) / "summary.json").string();
  std::ofstream(summary_path) << out.summary.dump(2) << '\n';
  const auto manifest_path = (fs::path(spec.out_dir) / "manifest.json").string();
  std::ofstream(manifest_path) << run_manifest(base, bundle_names, spec.seeds, spec.name).dump(2) << '\n';
  out.files.push_back(summary_path);
  out.files.push_back(manifest_path);
  return out;
}

}  // namespace v2b::sim

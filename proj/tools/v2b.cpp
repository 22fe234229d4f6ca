#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "v2b/error.hpp"
#include "v2b/scenario/generator.hpp"
#include "v2b/service/service.hpp"
#include "v2b/sim/config.hpp"
#include "v2b/sim/experiments.hpp"
#include "v2b/sim/report.hpp"
#include "v2b/sim/serialize.hpp"

namespace fs = std::filesystem;
using namespace v2b;

namespace {

struct Common {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::uint64_t first_seed = 1;
  int days = 20;
  int workers = 1;
  std::string out = "out";
};

void add_common(CLI::App* app, Common& c, bool with_out = true) {
  app->add_option("--config", c.config, "JSON config file (defaults when omitted)");
  app->add_option("--seeds", c.seeds, "explicit seed list")->delimiter(',');
  app->add_option("--first-seed", c.first_seed, "first calendar seed");
  app->add_option("--days", c.days, "weekdays to simulate")->check(CLI::PositiveNumber);
  app->add_option("--workers", c.workers, "parallel jobs")->check(CLI::PositiveNumber);
  if (with_out) app->add_option("--out", c.out, "output directory");
}

sim::SimConfig load(const Common& c) { return c.config.empty() ? sim::SimConfig{} : sim::load_config(c.config); }

std::vector<std::uint64_t> seeds_of(const Common& c, const sim::SimConfig& cfg) {
  return c.seeds.empty() ? sim::calendar_seeds(cfg, c.first_seed, c.days) : c.seeds;
}

int report_checks(const Json& summary, bool assert_mode) {
  bool all = true;
  for (const auto& ch : summary.value("checks", Json::array())) {
    const bool pass = ch.at("pass").get<bool>();
    all = all && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << ch.at("name").get<std::string>() << '\n';
  }
  return assert_mode && !all ? 1 : 0;
}

int run_days(const Common& c, const std::string& policy, const std::string& trace, bool validate) {
  const auto cfg = load(c);
  const auto bundle = sim::find_bundle(policy);
  fs::create_directories(c.out);
  std::vector<sim::DailyRow> rows;
  std::vector<sim::DayMetrics> metrics;
  int violations = 0;
  auto finish_day = [&](sim::DailyRow row) {
    const auto& res = *row.result;
    const auto path = fs::path(c.out) / ("schedule_" + std::to_string(row.day.seed) + ".csv");
    std::ofstream f(path);
    sim::write_schedule_csv(f, res.schedule);
    if (validate) {
      const auto rep = sim::validate_schedule(res.schedule, cfg);
      violations += static_cast<int>(rep.violations.size());
      std::cerr << "seed " << row.day.seed << ": " << rep.violations.size() << " violations\n";
    }
    metrics.push_back(row.metrics);
    row.result.reset();
    rows.push_back(std::move(row));
  };

  std::vector<std::uint64_t> seeds;
  if (!trace.empty()) {
    std::ifstream in(trace);
    if (!in) throw FormatError("cannot open trace " + trace);
    const auto requests = scenario::read_trace_csv(in, cfg.generator);
    const std::uint64_t seed = c.seeds.empty() ? c.first_seed : c.seeds.front();
    auto real = sim::realize_day(cfg, seed);
    real.day.sessions = requests;
    sim::DailyRow row;
    row.bundle = bundle.name;
    row.day = sim::DayPlan{0, cfg.start_weekday, seed};
    auto res = sim::run_day(cfg, bundle, seed, real);
    row.metrics = res.metrics;
    row.result = std::move(res);
    finish_day(std::move(row));
    seeds = {seed};
  } else {
    seeds = seeds_of(c, cfg);
    sim::RunOptions opt;
    opt.workers = c.workers;
    opt.keep_schedules = true;
    opt.peak_shaving = false;
    auto period = sim::run_billing_period(cfg, bundle, seeds, opt);
    for (auto& d : period.days) finish_day(std::move(d));
  }
  {
    std::ofstream f(fs::path(c.out) / "daily.csv");
    sim::write_metrics_csv(f, rows);
  }
  std::ofstream(fs::path(c.out) / "manifest.json")
      << sim::run_manifest(cfg, {bundle.name}, seeds, "run").dump(2) << '\n';
  const auto ep = sim::aggregate_days(bundle.name, metrics, cfg.tariff.demand_rate);
  Json out{{"bundle", bundle.name},
           {"days", ep.days},
           {"building_cost", ep.bill.total},
           {"peak_kw", ep.bill.peak_kw},
           {"net_cost", ep.net_cost},
           {"user_price", ep.user_price},
           {"reject_fraction", ep.reject_fraction},
           {"missing_soc_kwh", ep.missing_soc_kwh}};
  std::cout << out.dump(2) << '\n';
  return violations > 0 ? 1 : 0;
}

int run_named(const std::string& name, const Common& c, sim::ExperimentSpec spec, bool assert_mode) {
  const auto cfg = load(c);
  spec.name = name;
  spec.config_path = c.config;
  spec.seeds = seeds_of(c, cfg);
  spec.out_dir = c.out;
  spec.workers = c.workers;
  const auto out = sim::run_experiment(spec, cfg);
  for (const auto& f : out.files) std::cerr << "wrote " << f << '\n';
  return report_checks(out.summary, assert_mode);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"V2B charging and negotiation experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sim::version());

  Common c;
  bool assert_mode = false;
  sim::ExperimentSpec spec;

  auto* run = app.add_subcommand("run", "simulate days under one policy bundle");
  add_common(run, c);
  std::string policy = "consent", trace;
  bool validate = false;
  run->add_option("--policy", policy, "policy bundle name");
  run->add_option("--trace", trace, "arrival trace CSV (t_arr,e_arr,e_req,t_req,user_type) replacing sampled arrivals");
  run->add_flag("--validate", validate, "check every schedule; exit 1 on violations");

  std::vector<CLI::App*> experiments;
  for (const auto& name : sim::experiment_names()) {
    auto* sub = app.add_subcommand(name, "experiment: " + name);
    add_common(sub, c);
    sub->add_option("--bundles", spec.bundles, "policy bundles")->delimiter(',');
    sub->add_flag("--assert", assert_mode, "exit 1 when a directional check fails");
    experiments.push_back(sub);
  }
  app.get_subcommand("sweep-alpha")->add_option("--alphas", spec.alphas)->delimiter(',');
  std::vector<double> multipliers;
  app.get_subcommand("sweep-weights")
      ->add_option("--multipliers", multipliers, "applied to both weights; 1 is always included")
      ->delimiter(',');
  app.get_subcommand("robustness")->add_option("--presets", spec.presets)->delimiter(',');
  app.get_subcommand("scaling")->add_option("--fleet-means", spec.fleet_means)->delimiter(',');

  auto* val = app.add_subcommand("validate", "check a schedule CSV against a config");
  std::string schedule;
  val->add_option("--config", c.config, "JSON config file");
  val->add_option("schedule", schedule, "schedule CSV")->required();

  auto* serve = app.add_subcommand("serve", "start the HTTP service");
  std::string host = "127.0.0.1", log_dir, replay;
  int port = 8080;
  std::uint64_t seed = 1;
  serve->add_option("--config", c.config, "JSON config file");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));
  serve->add_option("--seed", seed, "default day seed");
  serve->add_option("--log-dir", log_dir, "session logs (JSON lines)");
  serve->add_option("--replay", replay, "session log to restore at startup");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_days(c, policy, trace, validate);
    for (auto* sub : experiments) {
      if (!*sub) continue;
      if (sub->get_name() == "sweep-weights" && !multipliers.empty()) {
        spec.weight_multipliers = {{1.0, 1.0}};
        for (double m : multipliers)
          if (m != 1.0) spec.weight_multipliers.emplace_back(m, m);
      }
      return run_named(sub->get_name(), c, spec, assert_mode);
    }
    if (*val) {
      const auto cfg = load(c);
      std::ifstream in(schedule);
      if (!in) throw FormatError("cannot open " + schedule);
      const auto rep = sim::validate_schedule_csv(in, cfg);
      std::cout << sim::report_to_json(rep).dump(2) << '\n';
      return rep.ok() ? 0 : 1;
    }
    if (*serve) {
      service::ServiceOptions opt;
      opt.base = load(c);
      opt.default_seed = seed;
      opt.log_dir = log_dir;
      service::Service svc(opt);
      if (!replay.empty()) {
        const auto r = svc.replay_log(replay);
        if (r.status >= 400) throw FormatError(r.body.dump());
        std::cerr << "restored " << r.body.at("session_id").get<std::string>() << '\n';
      }
      svc.serve(host, port);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}

#ifndef V2B_SIM_EXPERIMENTS_HPP
#define V2B_SIM_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"
#include "v2b/sim/config.hpp"
#include "v2b/sim/engine.hpp"

namespace v2b::sim {

/** \brief A calendar day of a billing period and the seed that realizes it. */
struct DayPlan {
  int index = 0;    // calendar position, 0-based
  int weekday = 0;  // 0 = Monday
  std::uint64_t seed = 0;
};

/** \brief `count` consecutive seeds starting at `first`. */
std::vector<std::uint64_t> seed_range(std::uint64_t first, int count);

/** \brief One calendar day per seed; weekend days are dropped when the config says so. */
std::vector<DayPlan> plan_days(const SimConfig& cfg, const std::vector<std::uint64_t>& seeds);

/** \brief Calendar seeds `first, first + 1, ...` covering `weekdays` planned days. */
std::vector<std::uint64_t> calendar_seeds(const SimConfig& cfg, std::uint64_t first, int weekdays);

/** \brief Billing-period outcome of one policy bundle. */
struct EpisodeMetrics {
  std::string bundle;
  int days = 0;
  CostBreakdown bill;              // demand charged once on the largest daily peak
  double payments = 0.0;           // fleet total over the period ($)
  double net_cost = 0.0;           // bill minus payments
  double delivered_kwh = 0.0;
  double user_price = 0.0;         // payments per delivered kWh
  double monthly_user_cost = 0.0;  // fleet total, equals payments
  int arrivals = 0;
  int rejects = 0;
  int involuntary = 0;
  double reject_fraction = 0.0;
  double missing_soc_kwh = 0.0;
  int cars_under_target = 0;
  std::optional<double> peak_shaving_kw;  // MaxCharge replay peak minus this peak
  std::map<int, int> choices;
  std::vector<double> daily_peaks;
};

/**
 * \brief Rolls daily results into a billing period. `maxcharge_peaks`, when given, are the
 * daily peaks of the MaxCharge replay on the same days.
 */
EpisodeMetrics aggregate_days(const std::string& bundle, const std::vector<DayMetrics>& days,
                              double demand_rate,
                              const std::vector<double>* maxcharge_peaks = nullptr);

struct RunOptions {
  int workers = 1;
  bool peak_shaving = true;
  bool keep_schedules = false;
};

/** \brief One simulated day of one bundle. */
struct DailyRow {
  std::string variant = "default";
  std::string bundle;
  DayPlan day;
  DayMetrics metrics;
  std::optional<double> peak_shaving_kw;
  std::optional<DayResult> result;  // only with keep_schedules
};

/** \brief Named per-day values that feed every table. */
std::vector<std::pair<std::string, double>> daily_values(const DailyRow& row);

/** \brief Names produced by daily_values, in column order. */
const std::vector<std::string>& daily_value_names();

struct PeriodResult {
  EpisodeMetrics metrics;
  std::vector<DailyRow> days;
};

/** \brief Runs every planned weekday of a billing period under one bundle. */
PeriodResult run_billing_period(const SimConfig& cfg, const PolicyBundle& bundle,
                                const std::vector<std::uint64_t>& seeds, const RunOptions& opt = {});

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  int n = 0;
};

Stat summarize(const std::vector<double>& v);

struct ComparisonRow {
  std::string variant = "default";
  std::string bundle;
  std::vector<std::pair<std::string, Stat>> stats;  // daily_value_names order
  EpisodeMetrics period;

  const Stat& stat(const std::string& name) const;
};

struct Comparison {
  std::vector<DayPlan> days;
  std::vector<DailyRow> daily;  // bundle-major
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(const std::string& bundle) const;
  /** \brief Paired daily values of one metric for one bundle, in day order. */
  std::vector<double> series(const std::string& bundle, const std::string& metric) const;
};

/** \brief Every bundle on the same days; MaxCharge is replayed once per day for peak shaving. */
Comparison compare_policies(const SimConfig& cfg, const std::vector<PolicyBundle>& bundles,
                            const std::vector<std::uint64_t>& seeds, const RunOptions& opt = {});

/**
 * \brief One-sided sign test of "a <= b" over paired samples: the probability of at least
 * the observed number of strict a < b pairs under a fair coin. Ties are dropped.
 */
double sign_test_p(const std::vector<double>& a, const std::vector<double>& b);

/** \brief Runs `jobs` independent tasks on up to `workers` threads; rethrows the first error. */
void parallel_for(int jobs, int workers, const std::function<void(int)>& task);

/** \brief A named experiment run from the command line. */
struct ExperimentSpec {
  std::string name = "compare";  // compare | sweep-alpha | sweep-weights | robustness | assignment-study | scaling
  std::string config_path;       // empty keeps the defaults
  std::vector<std::string> bundles;
  std::vector<double> alphas{1.0, 0.5, 0.1};
  std::vector<std::pair<double, double>> weight_multipliers{{1.0, 1.0}, {0.75, 0.75}, {1.25, 1.25}};
  std::vector<std::string> presets;
  std::vector<double> fleet_means{6.0, 12.0, 30.0, 60.0};
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  int workers = 1;

  void validate() const;
};

std::vector<std::string> experiment_names();

/** \brief Files written and the machine-readable summary. */
struct ExperimentOutput {
  std::vector<std::string> files;
  Json summary;
};

/** \brief Runs an experiment with `base` as the configuration and writes its tables. */
ExperimentOutput run_experiment(const ExperimentSpec& spec, const SimConfig& base);

}  // namespace v2b::sim

#endif

#ifndef V2B_SIM_REPORT_HPP
#define V2B_SIM_REPORT_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"
#include "v2b/sim/config.hpp"
#include "v2b/sim/experiments.hpp"

namespace v2b::sim {

/** \brief Shortest decimal text that parses back to the same double. */
std::string format_number(double v);

/** \brief Splits one CSV line; no quoting is used by any file this library writes. */
std::vector<std::string> split_csv_line(const std::string& line);

double parse_number(const std::string& cell, const std::string& where);

/** \brief Per-day metrics: variant, bundle, seed, day, weekday, then daily_value_names(). */
void write_metrics_csv(std::ostream& out, const std::vector<DailyRow>& rows);

struct MetricsRow {
  std::string variant;
  std::string bundle;
  std::uint64_t seed = 0;
  int day = 0;
  int weekday = 0;
  std::map<std::string, double> values;
};

std::vector<MetricsRow> read_metrics_csv(std::istream& in);

/** \brief Bundle table: mean and std of every daily value plus billing-period totals. Absent
 * values (peak shaving without a replay) are written as empty cells and read back as NaN. */
void write_table_csv(std::ostream& out, const std::vector<ComparisonRow>& rows);

/**
 * \brief Long-format schedule. One row per connected EV step and one building row per step
 * (user_id -1, EV columns empty).
 */
void write_schedule_csv(std::ostream& out, const Schedule& s);

/** \brief Inverse of write_schedule_csv; throws FormatError on malformed input. */
Schedule read_schedule_csv(std::istream& in, const TimeGrid& grid);

struct Violation {
  std::string family;
  int t = -1;
  int user_id = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;  // soft terms such as SoC shortfall
  int evs = 0;
  int steps = 0;
  double peak_kw = 0.0;

  bool ok() const { return violations.empty(); }
};

/** \brief Independent check of every constraint family of a realized schedule. */
ValidationReport validate_schedule(const Schedule& s, const SimConfig& cfg);

/** \brief Parses and validates a schedule CSV. */
ValidationReport validate_schedule_csv(std::istream& in, const SimConfig& cfg);

Json report_to_json(const ValidationReport& r);

/** \brief Reproducibility record of a run. */
Json run_manifest(const SimConfig& cfg, const std::vector<std::string>& bundles,
                  const std::vector<std::uint64_t>& seeds, const std::string& command);

/** \brief Library version string. */
const char* version();

}  // namespace v2b::sim

#endif

#ifndef V2B_SCENARIO_GENERATOR_HPP
#define V2B_SCENARIO_GENERATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "v2b/charging/curve.hpp"
#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"

namespace v2b::scenario {

using Rng = std::mt19937_64;

/** \brief Office-style building load: a night base plus a midday bump, kW per step. */
inline std::vector<double> office_profile(const TimeGrid& g, double base_kw = 25.0, double bump_kw = 55.0,
                                          double mode_hour = 13.0, double width_hours = 3.5) {
  std::vector<double> p(g.steps);
  for (int t = 0; t < g.steps; ++t) {
    const double h = g.hour_of(t) + 0.5 * g.step_hours;
    const double z = (h - mode_hour) / width_hours;
    p[t] = base_kw + bump_kw * std::exp(-z * z);
  }
  return p;
}

/** \brief Parameters of the arrival, session and load samplers. */
struct GeneratorConfig {
  TimeGrid grid;
  // Arrivals: per-step zero-inflated negative binomial counts.
  double mean_arrivals = 6.0;       // expected sessions per day
  double arrival_mode_hour = 9.0;
  double arrival_spread_hours = 1.0;
  std::vector<double> bin_mean;     // optional per-step means; overrides the Gaussian shape
  double zero_inflation = 0.2;
  double dispersion = 2.0;          // negative binomial size
  int max_sessions = 0;             // 0 = no cap
  // Sessions.
  double capacity_kwh = 60.0;
  double min_soc_frac = 0.1;
  double arrival_soc_alpha = 2.33;  // Beta over [e_min, e_max]
  double arrival_soc_beta = 2.67;
  double required_alpha = 4.0;      // Beta share of the headroom above arrival SoC
  double required_beta = 2.0;
  double dwell_shape = 2.2;         // Weibull, hours
  double dwell_scale_hours = 6.0;
  bool cap_request_to_reachable = true;
  std::vector<double> type_shares{0.107, 0.536, 0.321, 0.036};
  // Building load.
  std::vector<double> base_load_kw;  // empty = office_profile(grid)
  double load_noise = 0.05;
  // Robustness perturbations of the realized day.
  double departure_noise_hours = 0.0;
  double arrival_soc_shift = 0.0;    // fraction of capacity
  std::uint64_t seed = 1;

  std::vector<double> base_load() const {
    return base_load_kw.empty() ? office_profile(grid) : base_load_kw;
  }

  std::vector<double> intensity() const {
    if (!bin_mean.empty()) return bin_mean;
    std::vector<double> m(grid.steps, 0.0);
    double sum = 0.0;
    for (int t = 0; t < grid.steps; ++t) {
      const double z = (grid.hour_of(t) - arrival_mode_hour) / arrival_spread_hours;
      m[t] = std::exp(-0.5 * z * z);
      sum += m[t];
    }
    for (double& v : m) v = sum > 0.0 ? v * mean_arrivals / sum : 0.0;
    return m;
  }

  void validate() const {
    grid.validate();
    auto pos = [](double v, const char* what) {
      if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
    };
    pos(dispersion, "dispersion");
    pos(arrival_soc_alpha, "arrival_soc_alpha");
    pos(arrival_soc_beta, "arrival_soc_beta");
    pos(required_alpha, "required_alpha");
    pos(required_beta, "required_beta");
    pos(dwell_shape, "dwell_shape");
    pos(dwell_scale_hours, "dwell_scale_hours");
    pos(capacity_kwh, "capacity_kwh");
    pos(arrival_spread_hours, "arrival_spread_hours");
    if (mean_arrivals < 0.0) throw ConfigError("mean_arrivals must be non-negative");
    if (zero_inflation < 0.0 || zero_inflation > 1.0) throw ConfigError("zero_inflation must lie in [0, 1]");
    if (load_noise < 0.0 || load_noise > 0.5) throw ConfigError("load_noise must lie in [0, 0.5]");
    if (min_soc_frac < 0.0 || min_soc_frac >= 1.0) throw ConfigError("min_soc_frac must lie in [0, 1)");
    if (!bin_mean.empty() && static_cast<int>(bin_mean.size()) != grid.steps)
      throw ConfigError("bin_mean length differs from grid");
    if (!base_load_kw.empty() && static_cast<int>(base_load_kw.size()) != grid.steps)
      throw ConfigError("base_load_kw length differs from grid");
    for (double v : base_load_kw)
      if (v < 0.0) throw ConfigError("base load must be non-negative");
    if (type_shares.empty()) throw ConfigError("type_shares must not be empty");
    if (departure_noise_hours < 0.0) throw ConfigError("departure_noise_hours must be non-negative");
  }
};

inline void to_json(Json& j, const GeneratorConfig& c) {
  j = Json{{"mean_arrivals", c.mean_arrivals},
           {"arrival_mode_hour", c.arrival_mode_hour},
           {"arrival_spread_hours", c.arrival_spread_hours},
           {"bin_mean", c.bin_mean},
           {"zero_inflation", c.zero_inflation},
           {"dispersion", c.dispersion},
           {"max_sessions", c.max_sessions},
           {"capacity_kwh", c.capacity_kwh},
           {"min_soc_frac", c.min_soc_frac},
           {"arrival_soc_alpha", c.arrival_soc_alpha},
           {"arrival_soc_beta", c.arrival_soc_beta},
           {"required_alpha", c.required_alpha},
           {"required_beta", c.required_beta},
           {"dwell_shape", c.dwell_shape},
           {"dwell_scale_hours", c.dwell_scale_hours},
           {"cap_request_to_reachable", c.cap_request_to_reachable},
           {"type_shares", c.type_shares},
           {"base_load_kw", c.base_load_kw},
           {"load_noise", c.load_noise},
           {"departure_noise_hours", c.departure_noise_hours},
           {"arrival_soc_shift", c.arrival_soc_shift},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, GeneratorConfig& c) {
  const std::string w = "generator";
  check_keys(j,
             {"mean_arrivals", "arrival_mode_hour", "arrival_spread_hours", "bin_mean", "zero_inflation",
              "dispersion", "max_sessions", "capacity_kwh", "min_soc_frac", "arrival_soc_alpha",
              "arrival_soc_beta", "required_alpha", "required_beta", "dwell_shape", "dwell_scale_hours",
              "cap_request_to_reachable", "type_shares", "base_load_kw", "load_noise",
              "departure_noise_hours", "arrival_soc_shift", "seed"},
             w);
  read_opt(j, "mean_arrivals", c.mean_arrivals, w);
  read_opt(j, "arrival_mode_hour", c.arrival_mode_hour, w);
  read_opt(j, "arrival_spread_hours", c.arrival_spread_hours, w);
  read_opt(j, "bin_mean", c.bin_mean, w);
  read_opt(j, "zero_inflation", c.zero_inflation, w);
  read_opt(j, "dispersion", c.dispersion, w);
  read_opt(j, "max_sessions", c.max_sessions, w);
  read_opt(j, "capacity_kwh", c.capacity_kwh, w);
  read_opt(j, "min_soc_frac", c.min_soc_frac, w);
  read_opt(j, "arrival_soc_alpha", c.arrival_soc_alpha, w);
  read_opt(j, "arrival_soc_beta", c.arrival_soc_beta, w);
  read_opt(j, "required_alpha", c.required_alpha, w);
  read_opt(j, "required_beta", c.required_beta, w);
  read_opt(j, "dwell_shape", c.dwell_shape, w);
  read_opt(j, "dwell_scale_hours", c.dwell_scale_hours, w);
  read_opt(j, "cap_request_to_reachable", c.cap_request_to_reachable, w);
  read_opt(j, "type_shares", c.type_shares, w);
  read_opt(j, "base_load_kw", c.base_load_kw, w);
  read_opt(j, "load_noise", c.load_noise, w);
  read_opt(j, "departure_noise_hours", c.departure_noise_hours, w);
  read_opt(j, "arrival_soc_shift", c.arrival_soc_shift, w);
  read_opt(j, "seed", c.seed, w);
}

inline double sample_beta(Rng& rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

/** \brief Zero-inflated negative binomial draw with the given overall mean. */
inline int sample_zinb(Rng& rng, double mean, double zero_prob, double size) {
  if (mean <= 0.0 || zero_prob >= 1.0) return 0;
  if (std::bernoulli_distribution(zero_prob)(rng)) return 0;
  const double nb_mean = mean / (1.0 - zero_prob);
  const double lambda = std::gamma_distribution<double>(size, nb_mean / size)(rng);
  if (lambda <= 0.0) return 0;
  return static_cast<int>(std::poisson_distribution<long>(lambda)(rng));
}

/** \brief Energy reachable from `e0` within `steps` steps at the full curve-limited rate. */
inline double reachable_energy(double e0, double capacity, int steps, double step_hours,
                               double rate_kw = 20.0, double eta = 1.0,
                               const charging::PiecewiseCurve& curve = charging::PiecewiseCurve::standard()) {
  double e = e0;
  for (int s = 0; s < steps; ++s) {
    const double frac = std::clamp(e / capacity, 0.0, 1.0);
    e = std::min(capacity, e + step_hours * eta * std::min(rate_kw, charging::max_rate_at(curve, frac)));
  }
  return e;
}

/**
 * \brief One day of sessions with ids `first_id`, `first_id + 1`, ... sorted by arrival.
 * Only steps at or after `from_step` are sampled.
 */
inline std::vector<SessionRequest> sample_day_arrivals(const GeneratorConfig& cfg, Rng& rng,
                                                       int first_id = 0, int from_step = 0) {
  const auto& g = cfg.grid;
  const auto mean = cfg.intensity();
  std::discrete_distribution<int> type_dist(cfg.type_shares.begin(), cfg.type_shares.end());
  std::weibull_distribution<double> dwell(cfg.dwell_shape, cfg.dwell_scale_hours);
  std::normal_distribution<double> dep_noise(0.0, 1.0);
  const double e_min = cfg.min_soc_frac * cfg.capacity_kwh, e_max = cfg.capacity_kwh;
  std::vector<SessionRequest> out;
  int id = first_id;
  for (int t = from_step; t < g.steps; ++t) {
    const int n = sample_zinb(rng, mean[t], cfg.zero_inflation, cfg.dispersion);
    for (int k = 0; k < n; ++k) {
      SessionRequest r;
      r.user_id = id++;
      r.t_arr = t;
      const double a = std::clamp(sample_beta(rng, cfg.arrival_soc_alpha, cfg.arrival_soc_beta) +
                                      cfg.arrival_soc_shift * e_max / (e_max - e_min),
                                  0.0, 1.0);
      const double b = sample_beta(rng, cfg.required_alpha, cfg.required_beta);
      double hours = dwell(rng);
      if (cfg.departure_noise_hours > 0.0) hours += cfg.departure_noise_hours * dep_noise(rng);
      r.user_type = type_dist(rng);
      int steps = std::max(1, static_cast<int>(std::lround(hours / g.step_hours)));
      r.t_req = std::min(t + steps, g.steps - 1);
      r.e_min = e_min;
      r.e_max = e_max;
      r.e_arr = e_min + a * (e_max - e_min);
      r.e_req = r.e_arr + b * (e_max - r.e_arr);
      if (r.t_req <= r.t_arr) continue;  // arrived too late to charge today
      if (cfg.cap_request_to_reachable)
        r.e_req = std::min(r.e_req, reachable_energy(r.e_arr, e_max, r.t_req - r.t_arr, g.step_hours));
      out.push_back(r);
    }
  }
  if (cfg.max_sessions > 0 && static_cast<int>(out.size()) > cfg.max_sessions)
    out.resize(static_cast<std::size_t>(cfg.max_sessions));
  return out;
}

/** \brief Noisy building load: base * (1 + N(0, sigma)), floored at zero. */
inline std::vector<double> sample_building_load(const GeneratorConfig& cfg, Rng& rng) {
  auto base = cfg.base_load();
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : base) {
    const double n = cfg.load_noise > 0.0 ? cfg.load_noise * noise(rng) : 0.0;
    v = std::max(0.0, v * (1.0 + n));
  }
  return base;
}

/** \brief A realized day: sessions and building load. */
struct Day {
  std::vector<SessionRequest> sessions;
  std::vector<double> building_kw;
};

inline Day sample_day(const GeneratorConfig& cfg, Rng& rng) {
  Day d;
  d.sessions = sample_day_arrivals(cfg, rng, 0, 0);
  d.building_kw = sample_building_load(cfg, rng);
  return d;
}

/** \brief Synthetic ids for sampled future users, far from real ones. */
constexpr int kFutureIdBase = 1000000;

/**
 * \brief N sampled futures from step `now`: load before and at `now` is the realized one,
 * later steps are resampled; arrivals are drawn strictly after `now`.
 */
inline std::vector<Scenario> sample_futures(const GeneratorConfig& cfg, int now,
                                            const std::vector<double>& realized_kw, int n, Rng& rng) {
  if (n < 1) throw DomainError("need at least one scenario");
  if (static_cast<int>(realized_kw.size()) != cfg.grid.steps)
    throw DimensionMismatch("realized load length differs from grid");
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int f = 0; f < n; ++f) {
    Rng sub(rng());
    Scenario sc;
    auto fresh = sample_building_load(cfg, sub);
    sc.building_kw = realized_kw;
    for (int t = now + 1; t < cfg.grid.steps; ++t) sc.building_kw[t] = fresh[t];
    GeneratorConfig fc = cfg;
    fc.max_sessions = 0;
    sc.arrivals = sample_day_arrivals(fc, sub, kFutureIdBase + f * 1000, now + 1);
    out.push_back(std::move(sc));
  }
  return out;
}

/** \brief Robustness perturbations applied to the realized day only. */
struct RobustnessPreset {
  std::string name = "nominal";
  double departure_noise_hours = 0.0;
  double arrival_soc_shift = 0.0;
  double load_noise = -1.0;  // negative keeps the forecaster's level
  double price_uplift = 0.0;
  double uplift_from_hour = 11.0, uplift_to_hour = 15.0;
  double fleet_scale = 1.0;
};

inline std::vector<RobustnessPreset> robustness_presets() {
  std::vector<RobustnessPreset> p(7);
  p[0].name = "nominal";
  p[1].name = "departure_noise";
  p[1].departure_noise_hours = 2.0;
  p[2].name = "soc_high";
  p[2].arrival_soc_shift = 0.15;
  p[3].name = "soc_low";
  p[3].arrival_soc_shift = -0.15;
  p[4].name = "load_noise";
  p[4].load_noise = 0.15;
  p[5].name = "price_spike";
  p[5].price_uplift = 0.2;
  p[6].name = "fleet_x2";
  p[6].fleet_scale = 2.0;
  return p;
}

inline RobustnessPreset find_preset(const std::string& name) {
  for (const auto& p : robustness_presets())
    if (p.name == name) return p;
  throw ConfigError("unknown robustness preset '" + name + "'");
}

/** \brief Generator of the realized day under a preset; the forecaster keeps `cfg`. */
inline GeneratorConfig apply_preset(GeneratorConfig cfg, const RobustnessPreset& p) {
  cfg.departure_noise_hours = p.departure_noise_hours;
  cfg.arrival_soc_shift = p.arrival_soc_shift;
  if (p.load_noise >= 0.0) cfg.load_noise = p.load_noise;
  cfg.mean_arrivals *= p.fleet_scale;
  for (double& v : cfg.bin_mean) v *= p.fleet_scale;
  if (cfg.max_sessions > 0) cfg.max_sessions = static_cast<int>(std::lround(cfg.max_sessions * p.fleet_scale));
  return cfg;
}

inline Tariff apply_preset(Tariff t, const TimeGrid& g, const RobustnessPreset& p) {
  if (p.price_uplift == 0.0) return t;
  for (int s = 0; s < g.steps; ++s) {
    const double h = g.hour_of(s);
    if (h >= p.uplift_from_hour && h < p.uplift_to_hour) t.energy_price[s] *= 1.0 + p.price_uplift;
  }
  return t;
}

/**
 * \brief Reads an arrival log with header t_arr,e_arr,e_req,t_req,user_type. Bounds and
 * ids come from `cfg`; rows violating session invariants throw FormatError.
 */
inline std::vector<SessionRequest> read_trace_csv(std::istream& in, const GeneratorConfig& cfg) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace is empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string c;
    while (std::getline(ss, c, ',')) {
      c.erase(std::remove_if(c.begin(), c.end(), [](unsigned char ch) { return std::isspace(ch); }), c.end());
      cells.push_back(c);
    }
    return cells;
  };
  const auto header = split(line);
  const std::vector<std::string> want{"t_arr", "e_arr", "e_req", "t_req", "user_type"};
  if (header != want) throw FormatError("trace header must be t_arr,e_arr,e_req,t_req,user_type");
  std::vector<SessionRequest> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto c = split(line);
    if (c.size() != 5) throw FormatError("trace row " + std::to_string(row) + " needs 5 columns");
    SessionRequest r;
    try {
      r.t_arr = std::stoi(c[0]);
      r.e_arr = std::stod(c[1]);
      r.e_req = std::stod(c[2]);
      r.t_req = std::stoi(c[3]);
      r.user_type = std::stoi(c[4]);
    } catch (const std::exception&) {
      throw FormatError("trace row " + std::to_string(row) + " is not numeric");
    }
    r.user_id = static_cast<int>(out.size());
    r.e_min = cfg.min_soc_frac * cfg.capacity_kwh;
    r.e_max = cfg.capacity_kwh;
    try {
      r.validate(cfg.grid);
    } catch (const DomainError& e) {
      throw FormatError("trace row " + std::to_string(row) + ": " + e.what());
    }
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t_arr < b.t_arr; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].user_id = static_cast<int>(i);
  return out;
}

}  // namespace v2b::scenario

#endif

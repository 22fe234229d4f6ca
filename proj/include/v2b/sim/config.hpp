#ifndef V2B_SIM_CONFIG_HPP
#define V2B_SIM_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "v2b/behavior/behavior.hpp"
#include "v2b/charging/curve.hpp"
#include "v2b/charging/state.hpp"
#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"
#include "v2b/negotiation/negotiation.hpp"
#include "v2b/scenario/generator.hpp"

namespace v2b {

inline std::string charger_kind(const ChargerSpec& c) {
  return c.kind == ChargerKind::Bidirectional ? "bidirectional" : "unidirectional";
}

inline void to_json(Json& j, const ChargerSpec& c) {
  j = Json{{"id", c.id},
           {"kind", charger_kind(c)},
           {"controlled", c.controlled},
           {"rate_min_kw", c.rate_min_kw},
           {"rate_max_kw", c.rate_max_kw},
           {"efficiency", c.efficiency}};
}

inline void from_json(const Json& j, ChargerSpec& c) {
  check_keys(j, {"id", "kind", "controlled", "rate_min_kw", "rate_max_kw", "efficiency"}, "charger");
  read_opt(j, "id", c.id, "charger");
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "bidirectional") c.kind = ChargerKind::Bidirectional;
    else if (k == "unidirectional") c.kind = ChargerKind::Unidirectional;
    else throw ConfigError("charger.kind must be unidirectional or bidirectional");
  }
  read_opt(j, "controlled", c.controlled, "charger");
  read_opt(j, "rate_min_kw", c.rate_min_kw, "charger");
  read_opt(j, "rate_max_kw", c.rate_max_kw, "charger");
  read_opt(j, "efficiency", c.efficiency, "charger");
}

}  // namespace v2b

namespace v2b::sim {

enum class ChargingPolicy { None, Oracle, McMpc, MaxCharge, ReqCharge, Edf, Llf };
enum class PricingMode { Free, FixedPrice, UtilityPriced, MenuBased, Consent, ConsentNoReject };

inline const char* to_string(ChargingPolicy p) {
  switch (p) {
    case ChargingPolicy::None: return "none";
    case ChargingPolicy::Oracle: return "oracle";
    case ChargingPolicy::McMpc: return "mc_mpc";
    case ChargingPolicy::MaxCharge: return "max_charge";
    case ChargingPolicy::ReqCharge: return "req_charge";
    case ChargingPolicy::Edf: return "edf";
    case ChargingPolicy::Llf: return "llf";
  }
  return "?";
}

inline const char* to_string(PricingMode p) {
  switch (p) {
    case PricingMode::Free: return "free";
    case PricingMode::FixedPrice: return "fixed_price";
    case PricingMode::UtilityPriced: return "utility_priced";
    case PricingMode::MenuBased: return "menu_based";
    case PricingMode::Consent: return "consent";
    case PricingMode::ConsentNoReject: return "consent_no_reject";
  }
  return "?";
}

inline ChargingPolicy parse_charging(const std::string& s) {
  for (auto p : {ChargingPolicy::None, ChargingPolicy::Oracle, ChargingPolicy::McMpc, ChargingPolicy::MaxCharge,
                 ChargingPolicy::ReqCharge, ChargingPolicy::Edf, ChargingPolicy::Llf})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown charging policy '" + s + "'");
}

inline PricingMode parse_pricing(const std::string& s) {
  for (auto p : {PricingMode::Free, PricingMode::FixedPrice, PricingMode::UtilityPriced, PricingMode::MenuBased,
                 PricingMode::Consent, PricingMode::ConsentNoReject})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown pricing mode '" + s + "'");
}

/** \brief Charging policy, pricing, sharing ratio and user model of one run. */
struct PolicyBundle {
  std::string name = "consent";
  ChargingPolicy charging = ChargingPolicy::McMpc;
  PricingMode pricing = PricingMode::Consent;
  double alpha = 1.0;
  behavior::ChoiceMode behavior = behavior::ChoiceMode::Logit;

  bool negotiates() const {
    return pricing == PricingMode::Consent || pricing == PricingMode::ConsentNoReject ||
           pricing == PricingMode::MenuBased;
  }
  bool needs_evaluator() const {
    return pricing == PricingMode::Consent || pricing == PricingMode::ConsentNoReject ||
           pricing == PricingMode::UtilityPriced;
  }
  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
    if (charging == ChargingPolicy::None && pricing != PricingMode::Free)
      throw ConfigError("building-only runs take no payments");
  }
};

inline PolicyBundle make_bundle(std::string name, ChargingPolicy c, PricingMode p, double alpha = 1.0) {
  PolicyBundle b;
  b.name = std::move(name);
  b.charging = c;
  b.pricing = p;
  b.alpha = alpha;
  return b;
}

/** \brief The seven policy rows of the comparison table. */
inline std::vector<PolicyBundle> table_bundles() {
  return {make_bundle("building_only", ChargingPolicy::None, PricingMode::Free),
          make_bundle("uncoordinated", ChargingPolicy::MaxCharge, PricingMode::Free),
          make_bundle("smart_free", ChargingPolicy::McMpc, PricingMode::Free),
          make_bundle("smart_fixed", ChargingPolicy::McMpc, PricingMode::FixedPrice),
          make_bundle("smart_utility", ChargingPolicy::McMpc, PricingMode::UtilityPriced),
          make_bundle("menu_based", ChargingPolicy::McMpc, PricingMode::MenuBased),
          make_bundle("consent", ChargingPolicy::McMpc, PricingMode::Consent)};
}

inline PolicyBundle find_bundle(const std::string& name) {
  for (const auto& b : table_bundles())
    if (b.name == name) return b;
  for (auto c : {ChargingPolicy::Oracle, ChargingPolicy::McMpc, ChargingPolicy::MaxCharge, ChargingPolicy::ReqCharge,
                 ChargingPolicy::Edf, ChargingPolicy::Llf})
    if (name == to_string(c)) return make_bundle(name, c, PricingMode::Free);
  if (name == "consent_no_reject")
    return make_bundle(name, ChargingPolicy::McMpc, PricingMode::ConsentNoReject);
  throw ConfigError("unknown policy bundle '" + name + "'");
}

inline void to_json(Json& j, const PolicyBundle& b) {
  j = Json{{"name", b.name},
           {"charging", to_string(b.charging)},
           {"pricing", to_string(b.pricing)},
           {"alpha", b.alpha},
           {"behavior", b.behavior == behavior::ChoiceMode::Logit ? "logit" : "rational"}};
}

inline void from_json(const Json& j, PolicyBundle& b) {
  check_keys(j, {"name", "charging", "pricing", "alpha", "behavior"}, "policy");
  read_opt(j, "name", b.name, "policy");
  std::string s;
  if (j.contains("charging")) b.charging = parse_charging(j.at("charging").get<std::string>());
  if (j.contains("pricing")) b.pricing = parse_pricing(j.at("pricing").get<std::string>());
  read_opt(j, "alpha", b.alpha, "policy");
  if (j.contains("behavior")) {
    s = j.at("behavior").get<std::string>();
    if (s == "logit") b.behavior = behavior::ChoiceMode::Logit;
    else if (s == "rational") b.behavior = behavior::ChoiceMode::Rational;
    else throw ConfigError("policy.behavior must be logit or rational");
  }
  b.validate();
}

/** \brief Everything a simulated day needs besides the policy and the seed. */
struct SimConfig {
  TimeGrid grid;
  Tariff tariff = Tariff::time_of_use(TimeGrid{});
  std::vector<ChargerSpec> chargers = default_fleet();
  charging::PiecewiseCurve curve = charging::PiecewiseCurve::standard();
  scenario::GeneratorConfig generator;
  std::vector<behavior::UserType> user_types = behavior::default_user_types();
  double w1_scale = 1.0;
  double w2_scale = 1.0;
  std::vector<negotiation::FlexibilityLevel> levels = negotiation::default_levels();
  std::vector<double> menu_discounts{0.0, 0.05, 0.10, 0.15};
  int mpc_scenarios = 5;
  int negotiation_scenarios = 5;
  double soc_weight = 100.0;
  double mpc_gap = 1e-4;
  double mpc_time_limit_s = 30.0;
  double oracle_gap = 1e-4;
  bool refine = true;
  std::string refine_peak = "realized";  // or "load_only"
  charging::AssignmentPolicy assignment;
  std::string preset = "nominal";
  bool weekdays_only = true;
  int start_weekday = 0;  // 0 = Monday
  double choice_epsilon = 1e-6;

  std::vector<behavior::UserType> effective_types() const {
    return behavior::scale_weights(user_types, w1_scale, w2_scale);
  }

  void validate() const {
    grid.validate();
    if (static_cast<int>(tariff.energy_price.size()) != grid.steps)
      throw ConfigError("tariff.energy_price length differs from grid.steps");
    for (const auto& [name, v] : {std::pair{"demand_rate", tariff.demand_rate}, std::pair{"soc_penalty", tariff.soc_penalty},
                                  std::pair{"battery_penalty", tariff.battery_penalty},
                                  std::pair{"external_rate", tariff.external_rate}})
      if (v < 0.0) throw ConfigError(std::string("tariff.") + name + " must be non-negative");
    for (double p : tariff.energy_price)
      if (p < 0.0) throw ConfigError("tariff.energy_price must be non-negative");
    if (chargers.empty()) throw ConfigError("site needs at least one charger");
    for (std::size_t i = 0; i < chargers.size(); ++i) {
      const auto& c = chargers[i];
      if (!(c.rate_max_kw > 0.0) || c.rate_min_kw > 0.0 || !(c.efficiency > 0.0 && c.efficiency <= 1.0))
        throw ConfigError("chargers[" + std::to_string(i) + "] has invalid rates");
      for (std::size_t k = 0; k < i; ++k)
        if (chargers[k].id == c.id) throw ConfigError("duplicate charger id " + std::to_string(c.id));
    }
    curve.validate();
    generator.validate();
    if (generator.grid.steps != grid.steps || generator.grid.step_hours != grid.step_hours)
      throw ConfigError("generator grid differs from the site grid");
    behavior::validate_types(user_types);
    if (generator.type_shares.size() != user_types.size())
      throw ConfigError("generator.type_shares needs one share per user type");
    negotiation::validate_levels(levels);
    if (menu_discounts.size() != levels.size()) throw ConfigError("menu_discounts needs one entry per level");
    if (mpc_scenarios < 1 || negotiation_scenarios < 1) throw ConfigError("scenario counts must be positive");
    if (w1_scale < 0.0 || w2_scale < 0.0) throw ConfigError("weight scales must be non-negative");
    if (start_weekday < 0 || start_weekday > 6) throw ConfigError("start_weekday must lie in 0..6");
    scenario::find_preset(preset);
    if (refine_peak != "realized" && refine_peak != "load_only")
      throw ConfigError("refine_peak must be realized or load_only");
  }
};

inline Json tariff_to_json(const Tariff& t) {
  return Json{{"energy_price", t.energy_price},     {"demand_rate", t.demand_rate},
              {"soc_penalty", t.soc_penalty},       {"battery_penalty", t.battery_penalty},
              {"external_rate", t.external_rate},   {"allow_export", t.allow_export}};
}

/**
 * \brief Tariff from JSON. Either a full `energy_price` series or `peak_price` and
 * `off_peak_price` applied over the grid's peak window.
 */
inline Tariff tariff_from_json(const Json& j, const TimeGrid& g) {
  check_keys(j, {"energy_price", "peak_price", "off_peak_price", "demand_rate", "soc_penalty", "battery_penalty",
                 "external_rate", "allow_export"},
             "tariff");
  double peak = 0.178, off = 0.137;
  read_opt(j, "peak_price", peak, "tariff");
  read_opt(j, "off_peak_price", off, "tariff");
  Tariff t = Tariff::time_of_use(g, peak, off);
  read_opt(j, "energy_price", t.energy_price, "tariff");
  read_opt(j, "demand_rate", t.demand_rate, "tariff");
  read_opt(j, "soc_penalty", t.soc_penalty, "tariff");
  read_opt(j, "battery_penalty", t.battery_penalty, "tariff");
  read_opt(j, "external_rate", t.external_rate, "tariff");
  read_opt(j, "allow_export", t.allow_export, "tariff");
  return t;
}

inline Json grid_to_json(const TimeGrid& g) {
  return Json{{"step_hours", g.step_hours}, {"steps", g.steps}, {"peak_begin", g.peak_begin}, {"peak_end", g.peak_end}};
}

inline TimeGrid grid_from_json(const Json& j) {
  check_keys(j, {"step_hours", "steps", "peak_begin", "peak_end"}, "grid");
  TimeGrid g;
  read_opt(j, "step_hours", g.step_hours, "grid");
  read_opt(j, "steps", g.steps, "grid");
  read_opt(j, "peak_begin", g.peak_begin, "grid");
  read_opt(j, "peak_end", g.peak_end, "grid");
  return g;
}

inline Json curve_to_json(const charging::PiecewiseCurve& c) {
  Json segs = Json::array();
  for (const auto& s : c.segments) segs.push_back(Json{{"lo_pct", s.lo_pct}, {"hi_pct", s.hi_pct}, {"intercept", s.intercept}, {"slope", s.slope}});
  return segs;
}

inline charging::PiecewiseCurve curve_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("curve must be an array of segments");
  charging::PiecewiseCurve c;
  c.segments.clear();
  for (const auto& s : j) {
    check_keys(s, {"lo_pct", "hi_pct", "intercept", "slope"}, "curve segment");
    charging::CurveSegment seg;
    read_opt(s, "lo_pct", seg.lo_pct, "curve segment");
    read_opt(s, "hi_pct", seg.hi_pct, "curve segment");
    read_opt(s, "intercept", seg.intercept, "curve segment");
    read_opt(s, "slope", seg.slope, "curve segment");
    c.segments.push_back(seg);
  }
  return c;
}

inline const char* to_string(charging::ClassOrder o) {
  switch (o) {
    case charging::ClassOrder::BidirectionalFirst: return "bidirectional_first";
    case charging::ClassOrder::UnidirectionalFirst: return "unidirectional_first";
    case charging::ClassOrder::Random: return "random";
  }
  return "?";
}

inline const char* to_string(charging::TieBreak t) {
  switch (t) {
    case charging::TieBreak::UserId: return "user_id";
    case charging::TieBreak::LaterDeparture: return "later_departure";
    case charging::TieBreak::LargerEnergy: return "larger_energy";
    case charging::TieBreak::Random: return "random";
  }
  return "?";
}

inline Json assignment_to_json(const charging::AssignmentPolicy& a) {
  return Json{{"class_order", to_string(a.order)}, {"tie_break", to_string(a.tie)}};
}

inline charging::AssignmentPolicy assignment_from_json(const Json& j) {
  check_keys(j, {"class_order", "tie_break"}, "assignment");
  charging::AssignmentPolicy a;
  if (j.contains("class_order")) {
    const auto s = j.at("class_order").get<std::string>();
    bool found = false;
    for (auto o : {charging::ClassOrder::BidirectionalFirst, charging::ClassOrder::UnidirectionalFirst,
                   charging::ClassOrder::Random})
      if (s == to_string(o)) a.order = o, found = true;
    if (!found) throw ConfigError("assignment.class_order: unknown value '" + s + "'");
  }
  if (j.contains("tie_break")) {
    const auto s = j.at("tie_break").get<std::string>();
    bool found = false;
    for (auto t : {charging::TieBreak::UserId, charging::TieBreak::LaterDeparture, charging::TieBreak::LargerEnergy,
                   charging::TieBreak::Random})
      if (s == to_string(t)) a.tie = t, found = true;
    if (!found) throw ConfigError("assignment.tie_break: unknown value '" + s + "'");
  }
  return a;
}

inline Json config_to_json(const SimConfig& c) {
  Json types = Json::array();
  for (const auto& t : c.user_types) types.push_back(t);
  Json levels = Json::array();
  for (const auto& l : c.levels) levels.push_back(l);
  Json gen;
  scenario::to_json(gen, c.generator);
  return Json{{"grid", grid_to_json(c.grid)},
              {"tariff", tariff_to_json(c.tariff)},
              {"chargers", c.chargers},
              {"curve", curve_to_json(c.curve)},
              {"generator", gen},
              {"user_types", types},
              {"w1_scale", c.w1_scale},
              {"w2_scale", c.w2_scale},
              {"levels", levels},
              {"menu_discounts", c.menu_discounts},
              {"mpc_scenarios", c.mpc_scenarios},
              {"negotiation_scenarios", c.negotiation_scenarios},
              {"soc_weight", c.soc_weight},
              {"mpc_gap", c.mpc_gap},
              {"mpc_time_limit_s", c.mpc_time_limit_s},
              {"oracle_gap", c.oracle_gap},
              {"refine", c.refine},
              {"refine_peak", c.refine_peak},
              {"assignment", assignment_to_json(c.assignment)},
              {"preset", c.preset},
              {"weekdays_only", c.weekdays_only},
              {"start_weekday", c.start_weekday},
              {"choice_epsilon", c.choice_epsilon}};
}

/** \brief Config from JSON; absent keys keep their defaults, unknown keys are errors. */
inline SimConfig config_from_json(const Json& j) {
  check_keys(j, {"grid", "tariff", "chargers", "curve", "generator", "user_types", "w1_scale", "w2_scale", "levels",
                 "menu_discounts", "mpc_scenarios", "negotiation_scenarios", "soc_weight", "mpc_gap",
                 "mpc_time_limit_s", "oracle_gap", "refine", "refine_peak", "assignment", "preset", "weekdays_only", "start_weekday",
                 "choice_epsilon"},
             "config");
  SimConfig c;
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.tariff = Tariff::time_of_use(c.grid);
  if (j.contains("tariff")) c.tariff = tariff_from_json(j.at("tariff"), c.grid);
  if (j.contains("chargers")) {
    const auto& cj = j.at("chargers");
    if (cj.is_object()) {
      check_keys(cj, {"unidirectional", "bidirectional"}, "chargers");
      int uni = 10, bi = 5;
      read_opt(cj, "unidirectional", uni, "chargers");
      read_opt(cj, "bidirectional", bi, "chargers");
      c.chargers = default_fleet(uni, bi);
    } else {
      c.chargers.clear();
      for (const auto& e : cj) c.chargers.push_back(e.get<ChargerSpec>());
    }
  }
  if (j.contains("curve")) c.curve = curve_from_json(j.at("curve"));
  if (j.contains("generator")) scenario::from_json(j.at("generator"), c.generator);
  c.generator.grid = c.grid;
  if (j.contains("user_types")) c.user_types = behavior::types_from_json(j.at("user_types"));
  read_opt(j, "w1_scale", c.w1_scale, "config");
  read_opt(j, "w2_scale", c.w2_scale, "config");
  if (j.contains("levels")) {
    c.levels.clear();
    for (const auto& l : j.at("levels")) c.levels.push_back(l.get<negotiation::FlexibilityLevel>());
  }
  read_opt(j, "menu_discounts", c.menu_discounts, "config");
  read_opt(j, "mpc_scenarios", c.mpc_scenarios, "config");
  read_opt(j, "negotiation_scenarios", c.negotiation_scenarios, "config");
  read_opt(j, "soc_weight", c.soc_weight, "config");
  read_opt(j, "mpc_gap", c.mpc_gap, "config");
  read_opt(j, "mpc_time_limit_s", c.mpc_time_limit_s, "config");
  read_opt(j, "oracle_gap", c.oracle_gap, "config");
  read_opt(j, "refine", c.refine, "config");
  read_opt(j, "refine_peak", c.refine_peak, "config");
  if (j.contains("assignment")) c.assignment = assignment_from_json(j.at("assignment"));
  read_opt(j, "preset", c.preset, "config");
  read_opt(j, "weekdays_only", c.weekdays_only, "config");
  read_opt(j, "start_weekday", c.start_weekday, "config");
  read_opt(j, "choice_epsilon", c.choice_epsilon, "config");
  c.validate();
  return c;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return config_from_json(Json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

/** \brief Short stable fingerprint of a config (FNV-1a of its canonical JSON). */
inline std::string config_hash(const SimConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace v2b::sim

#endif

#ifndef V2B_SIM_SERIALIZE_HPP
#define V2B_SIM_SERIALIZE_HPP

#include "v2b/domain.hpp"
#include "v2b/json_util.hpp"
#include "v2b/sim/engine.hpp"

namespace v2b {

inline void to_json(Json& j, const CostBreakdown& c) {
  j = Json{{"energy", c.energy},   {"demand", c.demand}, {"missing_soc", c.missing_soc},
           {"battery", c.battery}, {"total", c.total},   {"peak_kw", c.peak_kw}};
}

inline void to_json(Json& j, const SessionRequest& r) {
  j = Json{{"user_id", r.user_id}, {"t_arr", r.t_arr}, {"e_arr", r.e_arr}, {"e_req", r.e_req},
           {"t_req", r.t_req},     {"e_min", r.e_min}, {"e_max", r.e_max}, {"user_type", r.user_type}};
}

inline void to_json(Json& j, const NegotiatedChoice& c) {
  j = Json{{"level", c.level}, {"e_target", c.e_target}, {"t_dep", c.t_dep}, {"price", c.price},
           {"utility", c.utility}, {"rejected", c.rejected()}};
}

}  // namespace v2b

namespace v2b::sim {

inline void to_json(Json& j, const StepRecord& s) {
  j = Json{{"t", s.t},
           {"building_kw", s.building_kw},
           {"ev_kw", s.ev_kw},
           {"p_kw", s.p_kw},
           {"p_past_max", s.p_past_max},
           {"p_max_hat", s.p_max_hat},
           {"connected", s.connected}};
}

inline void to_json(Json& j, const SessionRecord& s) {
  j = Json{{"request", s.request},
           {"charger_id", s.charger_id},
           {"involuntary_reject", s.involuntary_reject},
           {"menu", s.menu ? Json(*s.menu) : Json(nullptr)},
           {"satisfaction", s.satisfaction},
           {"probabilities", s.probabilities},
           {"chosen", s.chosen},
           {"choice", s.choice},
           {"inconvenience", s.inconvenience},
           {"external_cost", s.external_cost},
           {"price", s.price},
           {"delivered", s.delivered},
           {"shortfall", s.shortfall},
           {"departed", s.departed},
           {"accepted", s.accepted()}};
}

inline void to_json(Json& j, const DayMetrics& m) {
  Json choices = Json::object();
  for (const auto& [level, n] : m.choices) choices[level < 0 ? "reject" : std::to_string(level)] = n;
  j = Json{{"bill", m.bill},
           {"payments", m.payments},
           {"net_cost", m.net_cost},
           {"delivered_kwh", m.delivered_kwh},
           {"user_price", m.user_price()},
           {"arrivals", m.arrivals},
           {"rejects", m.rejects},
           {"involuntary", m.involuntary},
           {"reject_fraction", m.reject_fraction()},
           {"missing_soc_kwh", m.missing_soc_kwh},
           {"cars_under_target", m.cars_under_target},
           {"choices", choices},
           {"fallbacks", m.fallbacks}};
}

}  // namespace v2b::sim

#endif

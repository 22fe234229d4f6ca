#ifndef V2B_CHARGING_STATE_HPP
#define V2B_CHARGING_STATE_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "v2b/charging/curve.hpp"
#include "v2b/domain.hpp"

namespace v2b::charging {

/** \brief An EV plugged in at the site, with its negotiated target. */
struct ConnectedEv {
  SessionRequest request;
  NegotiatedChoice choice;
  int charger_id = -1;
  double soc = 0.0;  // kWh now

  double target() const { return choice.e_target; }
  int departure() const { return choice.t_dep; }
};

/** \brief Site state at the start of step `now`. */
struct SystemState {
  TimeGrid grid;
  int now = 0;
  std::vector<ChargerSpec> chargers;
  std::vector<ConnectedEv> connected;
  double p_past_max = 0.0;  // highest realized peak-window power so far today

  const ChargerSpec& charger(int id) const {
    for (const auto& c : chargers)
      if (c.id == id) return c;
    throw DomainError("unknown charger id " + std::to_string(id));
  }

  bool occupied(int charger_id) const {
    return std::any_of(connected.begin(), connected.end(),
                       [&](const ConnectedEv& ev) { return ev.charger_id == charger_id; });
  }
};

enum class ClassOrder { BidirectionalFirst, UnidirectionalFirst, Random };
enum class TieBreak { UserId, LaterDeparture, LargerEnergy, Random };

/** \brief How a free port is chosen and how same-step arrivals are ordered. */
struct AssignmentPolicy {
  ClassOrder order = ClassOrder::BidirectionalFirst;
  TieBreak tie = TieBreak::UserId;
};

/**
 * \brief Picks a free port: preferred class first, lowest id within a class.
 * Throws NoChargerAvailable when every port is busy.
 */
inline int assign_charger(const SystemState& state, const AssignmentPolicy& policy = {},
                          std::mt19937_64* rng = nullptr) {
  std::vector<const ChargerSpec*> free;
  for (const auto& c : state.chargers)
    if (!state.occupied(c.id)) free.push_back(&c);
  if (free.empty()) throw NoChargerAvailable("all ports busy at step " + std::to_string(state.now));
  bool bidi_first = policy.order != ClassOrder::UnidirectionalFirst;
  if (policy.order == ClassOrder::Random) {
    if (rng == nullptr) throw DomainError("random class order needs a generator");
    bidi_first = std::bernoulli_distribution(0.5)(*rng);
  }
  auto rank = [&](const ChargerSpec* c) {
    const bool preferred = c->bidirectional() == bidi_first;
    return std::pair<int, int>(preferred ? 0 : 1, c->id);
  };
  return (*std::min_element(free.begin(), free.end(),
                            [&](auto* a, auto* b) { return rank(a) < rank(b); }))->id;
}

/** \brief Order in which same-step arrivals claim ports. */
inline std::vector<SessionRequest> order_arrivals(std::vector<SessionRequest> batch,
                                                  const AssignmentPolicy& policy,
                                                  std::mt19937_64* rng = nullptr) {
  std::sort(batch.begin(), batch.end(),
            [](const auto& a, const auto& b) { return a.user_id < b.user_id; });
  switch (policy.tie) {
    case TieBreak::UserId: break;
    case TieBreak::LaterDeparture:
      std::stable_sort(batch.begin(), batch.end(),
                       [](const auto& a, const auto& b) { return a.t_req > b.t_req; });
      break;
    case TieBreak::LargerEnergy:
      std::stable_sort(batch.begin(), batch.end(), [](const auto& a, const auto& b) {
        return a.requested_energy() > b.requested_energy();
      });
      break;
    case TieBreak::Random:
      if (rng == nullptr) throw DomainError("random tie break needs a generator");
      std::shuffle(batch.begin(), batch.end(), *rng);
      break;
  }
  return batch;
}

/** \brief Largest energy this step for an EV on a port: min of port and curve caps. */
inline double step_charge_cap(const ChargerSpec& c, const PiecewiseCurve& curve, double soc_kwh,
                              double capacity_kwh, double step_hours) {
  const double frac = std::clamp(soc_kwh / capacity_kwh, 0.0, 1.0);
  return step_hours * c.efficiency * std::min(c.rate_max_kw, max_rate_at(curve, frac));
}

inline double step_discharge_cap(const ChargerSpec& c, double step_hours) {
  return c.bidirectional() ? step_hours * c.efficiency * -c.rate_min_kw : 0.0;
}

}  // namespace v2b::charging

#endif

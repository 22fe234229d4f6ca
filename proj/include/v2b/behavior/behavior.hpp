#ifndef V2B_BEHAVIOR_BEHAVIOR_HPP
#define V2B_BEHAVIOR_BEHAVIOR_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "v2b/error.hpp"
#include "v2b/json_util.hpp"

namespace v2b::behavior {

/** \brief Survey cluster: $ per %-SoC shortfall, $ per minute of delay, population share. */
struct UserType {
  std::string name;
  double w1 = 0.0;
  double w2 = 0.0;
  double share = 0.0;
};

inline std::vector<UserType> default_user_types() {
  return {{"i", 0.0489, 0.1250, 0.107},
          {"ii", 0.0133, 0.0346, 0.536},
          {"iii", 0.0362, 0.0673, 0.321},
          {"iv", 0.0000, 0.1083, 0.036}};
}

inline void validate_types(const std::vector<UserType>& types) {
  if (types.empty()) throw ConfigError("user type table is empty");
  double sum = 0.0;
  for (const auto& t : types) {
    if (t.w1 < 0.0 || t.w2 < 0.0 || t.share < 0.0)
      throw ConfigError("user type " + t.name + " has a negative weight or share");
    sum += t.share;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("user type shares must sum to 1");
}

/** \brief Every centroid scaled by the same factors. */
inline std::vector<UserType> scale_weights(std::vector<UserType> types, double m1, double m2) {
  if (m1 < 0.0 || m2 < 0.0) throw ConfigError("weight multipliers must be non-negative");
  for (auto& t : types) {
    t.w1 *= m1;
    t.w2 *= m2;
  }
  return types;
}

inline void to_json(Json& j, const UserType& t) {
  j = Json{{"name", t.name}, {"w1", t.w1}, {"w2", t.w2}, {"share", t.share}};
}

inline void from_json(const Json& j, UserType& t) {
  check_keys(j, {"name", "w1", "w2", "share"}, "user type");
  read_opt(j, "name", t.name, "user type");
  read_opt(j, "w1", t.w1, "user type");
  read_opt(j, "w2", t.w2, "user type");
  read_opt(j, "share", t.share, "user type");
}

inline std::vector<UserType> types_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("user types must be a JSON array");
  std::vector<UserType> out;
  for (const auto& e : j) out.push_back(e.get<UserType>());
  validate_types(out);
  return out;
}

/** \brief Cost of a deviation: de in percent of capacity, dt in minutes. */
inline double inconvenience_cost(const UserType& type, double de_pct, double dt_min) {
  if (de_pct < 0.0 || dt_min < 0.0) throw DomainError("deviations must be non-negative");
  return type.w1 * de_pct + type.w2 * dt_min;
}

/** \brief Surplus of accepting an option over charging elsewhere. */
inline double acceptance_utility(double external_cost, double price, double inconvenience) {
  return external_cost - (price + inconvenience);
}

struct ChoiceDistribution {
  std::vector<double> p;
};

/**
 * \brief Logit with an additive floor: P_l proportional to exp(Y_l) + eps. Utilities are shifted
 * by their maximum first; eps is added after the shift.
 */
inline ChoiceDistribution choice_probabilities(const std::vector<double>& y, double eps = 1e-6) {
  if (y.empty()) throw DomainError("choice needs at least one option");
  const double top = *std::max_element(y.begin(), y.end());
  ChoiceDistribution d;
  d.p.resize(y.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    d.p[i] = std::exp(y[i] - top) + eps;
    sum += d.p[i];
  }
  for (double& v : d.p) v /= sum;
  return d;
}

/** \brief Inverse-CDF draw. */
template <class Rng>
int sample_choice(const ChoiceDistribution& d, Rng& rng) {
  if (d.p.empty()) throw DomainError("empty choice distribution");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < d.p.size(); ++i) {
    acc += d.p[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = d.p.size(); i-- > 0;)
    if (d.p[i] > 0.0) return static_cast<int>(i);
  return 0;
}

/** \brief Utility maximizer; ties go to the lower index. */
inline int rational_choice(const std::vector<double>& y) {
  if (y.empty()) throw DomainError("choice needs at least one option");
  return static_cast<int>(std::max_element(y.begin(), y.end()) - y.begin());
}

template <class Rng>
int sample_user_type(const std::vector<UserType>& types, Rng& rng) {
  std::vector<double> w;
  for (const auto& t : types) w.push_back(t.share);
  return static_cast<int>(std::discrete_distribution<int>(w.begin(), w.end())(rng));
}

enum class ChoiceMode { Logit, Rational };

}  // namespace v2b::behavior

#endif

#ifndef V2B_CHARGING_CURVE_HPP
#define V2B_CHARGING_CURVE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "v2b/error.hpp"

namespace v2b::charging {

/** \brief Affine rate cap kW = intercept + slope * soc_pct on [lo_pct, hi_pct). */
struct CurveSegment {
  double lo_pct = 0.0;
  double hi_pct = 100.0;
  double intercept = 20.0;
  double slope = 0.0;

  double rate(double soc_pct) const { return intercept + slope * soc_pct; }
};

/**
 * \brief Piecewise charging-rate curve over state of charge. Segments are half-open
 * except the last, which includes 100 %.
 */
struct PiecewiseCurve {
  std::vector<CurveSegment> segments;

  static PiecewiseCurve standard() {
    return PiecewiseCurve{{{0.0, 83.0, 20.0, 0.0},
                           {83.0, 90.0, 130.0, -4.0 / 3.0},
                           {90.0, 100.0, 100.0, -1.0}}};
  }

  int segment_of(double soc_pct) const {
    for (std::size_t k = 0; k + 1 < segments.size(); ++k)
      if (soc_pct < segments[k].hi_pct) return static_cast<int>(k);
    return static_cast<int>(segments.size()) - 1;
  }

  void validate() const {
    if (segments.empty()) throw DomainError("curve has no segments");
    if (segments.front().lo_pct != 0.0 || segments.back().hi_pct != 100.0)
      throw DomainError("curve must cover 0..100 %");
    for (std::size_t k = 1; k < segments.size(); ++k)
      if (segments[k].lo_pct != segments[k - 1].hi_pct)
        throw DomainError("curve segments must be contiguous");
  }

  /** \brief Concave upper envelope as (soc_pct, kW) breakpoints, used for valid cuts. */
  std::vector<std::pair<double, double>> envelope_points() const {
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : segments) {
      // Left limit at the start and right limit at the end of every segment.
      pts.emplace_back(s.lo_pct, s.rate(s.lo_pct));
      pts.emplace_back(s.hi_pct, s.rate(s.hi_pct));
    }
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
      while (hull.size() >= 2) {
        const auto& a = hull[hull.size() - 2];
        const auto& b = hull.back();
        const double cross = (b.first - a.first) * (p.second - a.second) -
                             (b.second - a.second) * (p.first - a.first);
        if (cross >= 0.0) hull.pop_back();
        else break;
      }
      if (!hull.empty() && hull.back().first == p.first) {
        hull.back().second = std::max(hull.back().second, p.second);
        continue;
      }
      hull.push_back(p);
    }
    return hull;
  }
};

/** \brief Curve cap in kW at a state of charge given as a fraction of capacity. */
inline double max_rate_at(const PiecewiseCurve& curve, double soc) {
  if (std::isnan(soc) || soc < -1e-9 || soc > 1.0 + 1e-9)
    throw DomainError("state of charge outside [0, 1]");
  const double pct = std::clamp(soc, 0.0, 1.0) * 100.0;
  return std::max(0.0, curve.segments[curve.segment_of(pct)].rate(pct));
}

/** \brief Concave-envelope cap in kW at a state of charge given as a fraction. */
inline double envelope_rate_at(const PiecewiseCurve& curve, double soc) {
  if (std::isnan(soc) || soc < -1e-9 || soc > 1.0 + 1e-9)
    throw DomainError("state of charge outside [0, 1]");
  const double pct = std::clamp(soc, 0.0, 1.0) * 100.0;
  const auto env = curve.envelope_points();
  for (std::size_t q = 0; q + 1 < env.size(); ++q) {
    const auto [x0, y0] = env[q];
    const auto [x1, y1] = env[q + 1];
    if (pct <= x1 || q + 2 == env.size())
      return std::max(0.0, x1 > x0 ? y0 + (y1 - y0) * (pct - x0) / (x1 - x0) : y1);
  }
  return std::max(0.0, env.back().second);
}

}  // namespace v2b::charging

#endif

#ifndef V2B_TESTS_RANDOM_MILP_HPP
#define V2B_TESTS_RANDOM_MILP_HPP

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "v2b/solver/linear_program.hpp"

namespace v2b::testing {

/** \brief Small MILP with binaries plus at most two bounded continuous columns. */
inline solver::LinearProgram random_milp(std::mt19937_64& rng, int binaries, int continuous) {
  using namespace solver;
  std::uniform_int_distribution<int> coef(-6, 9);
  std::uniform_int_distribution<int> rows_d(1, 5);
  std::bernoulli_distribution maxim(0.5);
  LinearProgram lp;
  lp.sense = maxim(rng) ? Sense::Maximize : Sense::Minimize;
  for (int j = 0; j < binaries; ++j) lp.add_binary(coef(rng));
  for (int j = 0; j < continuous; ++j) lp.add_column(coef(rng) * 0.5, 0.0, 3.0 + j);
  const int m = rows_d(rng);
  const int n = binaries + continuous;
  for (int i = 0; i < m; ++i) {
    std::vector<int> idx;
    std::vector<double> val;
    double abs_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const int c = coef(rng);
      if (c == 0) continue;
      idx.push_back(j);
      val.push_back(c);
      abs_sum += std::abs(c);
    }
    std::uniform_real_distribution<double> rhs(-0.2 * abs_sum, 0.6 * abs_sum);
    const int kind = std::uniform_int_distribution<int>(0, 5)(rng);
    const RowSense s = kind < 4 ? RowSense::LessEqual : RowSense::GreaterEqual;
    double b = std::round(rhs(rng) * 2.0) / 2.0;
    if (s == RowSense::GreaterEqual) b = -std::abs(b) * 0.5;
    lp.add_row(std::move(idx), std::move(val), s, b);
  }
  return lp;
}

/**
 * \brief Exact optimum by enumerating binaries and, for the continuous part, every
 * vertex formed by pairs of active constraints or bounds.
 */
inline std::optional<double> brute_force_optimum(const solver::LinearProgram& lp) {
  using namespace solver;
  std::vector<int> bins, conts;
  for (int j = 0; j < lp.num_cols(); ++j) (lp.integer[j] ? bins : conts).push_back(j);
  const bool maximize = lp.sense == Sense::Maximize;
  std::optional<double> best;
  std::vector<double> x(lp.num_cols(), 0.0);
  for (long mask = 0; mask < (1L << bins.size()); ++mask) {
    for (std::size_t k = 0; k < bins.size(); ++k) x[bins[k]] = (mask >> k) & 1;
    // Lines a'y = b over continuous coordinates with the binary part moved to the rhs.
    struct Line {
      std::vector<double> a;
      double b;
    };
    std::vector<Line> lines;
    for (const Row& r : lp.rows) {
      Line l{std::vector<double>(conts.size(), 0.0), r.rhs};
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        const int j = r.index[k];
        bool is_cont = false;
        for (std::size_t c = 0; c < conts.size(); ++c)
          if (conts[c] == j) {
            l.a[c] += r.value[k];
            is_cont = true;
          }
        if (!is_cont) l.b -= r.value[k] * x[j];
      }
      lines.push_back(l);
    }
    for (std::size_t c = 0; c < conts.size(); ++c) {
      Line lo{std::vector<double>(conts.size(), 0.0), lp.lower[conts[c]]};
      lo.a[c] = 1.0;
      Line hi = lo;
      hi.b = lp.upper[conts[c]];
      lines.push_back(lo);
      lines.push_back(hi);
    }
    std::vector<std::vector<double>> candidates;
    if (conts.empty()) {
      candidates.push_back({});
    } else if (conts.size() == 1) {
      for (const Line& l : lines)
        if (std::abs(l.a[0]) > 1e-12) candidates.push_back({l.b / l.a[0]});
    } else {
      for (std::size_t p = 0; p < lines.size(); ++p)
        for (std::size_t q = p + 1; q < lines.size(); ++q) {
          const double det = lines[p].a[0] * lines[q].a[1] - lines[p].a[1] * lines[q].a[0];
          if (std::abs(det) < 1e-12) continue;
          const double y0 = (lines[p].b * lines[q].a[1] - lines[p].a[1] * lines[q].b) / det;
          const double y1 = (lines[p].a[0] * lines[q].b - lines[p].b * lines[q].a[0]) / det;
          candidates.push_back({y0, y1});
        }
    }
    for (const auto& y : candidates) {
      for (std::size_t c = 0; c < conts.size(); ++c) x[conts[c]] = y[c];
      if (lp.max_violation(x) > 1e-9) continue;
      const double v = lp.evaluate(x);
      if (!best || (maximize ? v > *best : v < *best)) best = v;
    }
  }
  return best;
}

}  // namespace v2b::testing

#endif

#ifndef V2B_SOLVER_SIMPLEX_HPP
#define V2B_SOLVER_SIMPLEX_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "v2b/solver/linear_program.hpp"

namespace v2b::solver {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, TimeLimit };

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_every = 80;
  long max_iterations = 0;  // 0 picks a size-based default
  std::chrono::steady_clock::time_point deadline = std::chrono::steady_clock::time_point::max();
};

/** \brief Snapshot of a simplex basis, used to warm-start child problems. */
struct Basis {
  std::vector<int> basic;
  std::vector<std::int8_t> state;
  bool empty() const { return basic.empty(); }
};

/**
 * \brief Bounded-variable primal simplex on min c'x, L <= x <= U, rows as ranged logicals.
 *
 * Row i is stored as a_i'x - s_i = 0 with the logical s_i carrying the row bounds, so the
 * all-logical basis is always a valid (possibly infeasible) start.
 */
class BoundedSimplex {
 public:
  enum : std::int8_t { kBasic = 0, kLower = 1, kUpper = 2, kFree = 3 };

  explicit BoundedSimplex(const LinearProgram& lp, LpOptions opt = {}) : opt_(opt) {
    lp.validate();
    n_ = lp.num_cols();
    m_ = lp.num_rows();
    const int total = n_ + m_;
    sign_ = lp.sense == Sense::Maximize ? -1.0 : 1.0;
    offset_ = lp.objective_offset;
    cost_.assign(total, 0.0);
    lo_.assign(total, 0.0);
    hi_.assign(total, 0.0);
    for (int j = 0; j < n_; ++j) {
      cost_[j] = sign_ * lp.objective[j];
      lo_[j] = lp.lower[j];
      hi_[j] = lp.upper[j];
    }
    for (int i = 0; i < m_; ++i) {
      const Row& r = lp.rows[i];
      double l = -kInf, u = kInf;
      if (r.sense == RowSense::LessEqual) u = r.rhs;
      if (r.sense == RowSense::GreaterEqual) l = r.rhs;
      if (r.sense == RowSense::Equal) l = u = r.rhs;
      lo_[n_ + i] = l;
      hi_[n_ + i] = u;
    }
    // Row-to-column transpose; duplicate indices within a row are summed.
    std::vector<int> count(n_, 0);
    for (const Row& r : lp.rows)
      for (int j : r.index) ++count[j];
    col_start_.assign(n_ + 1, 0);
    for (int j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + count[j];
    row_idx_.assign(col_start_[n_], 0);
    val_.assign(col_start_[n_], 0.0);
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (int i = 0; i < m_; ++i) {
      const Row& r = lp.rows[i];
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        const int j = r.index[k];
        row_idx_[fill[j]] = i;
        val_[fill[j]] = r.value[k];
        ++fill[j];
      }
    }
    cold_start();
  }

  int num_cols() const { return n_; }
  int num_rows() const { return m_; }

  void set_bounds(int j, double lo, double hi) {
    lo_[j] = lo;
    hi_[j] = hi;
    if (state_[j] != kBasic) place_nonbasic(j);
  }
  void set_deadline(std::chrono::steady_clock::time_point d) { opt_.deadline = d; }
  double lower(int j) const { return lo_[j]; }
  double upper(int j) const { return hi_[j]; }

  void cold_start() {
    const int total = n_ + m_;
    state_.assign(total, kLower);
    x_.assign(total, 0.0);
    pos_.assign(total, -1);
    basic_.resize(m_);
    for (int j = 0; j < n_; ++j) place_nonbasic(j, true);
    for (int i = 0; i < m_; ++i) {
      basic_[i] = n_ + i;
      state_[n_ + i] = kBasic;
      pos_[n_ + i] = i;
    }
    factored_ = false;
  }

  Basis basis() const { return Basis{basic_, state_}; }

  void set_basis(const Basis& b) {
    if (b.basic.size() != static_cast<std::size_t>(m_) ||
        b.state.size() != static_cast<std::size_t>(n_ + m_)) {
      cold_start();
      return;
    }
    basic_ = b.basic;
    state_ = b.state;
    std::fill(pos_.begin(), pos_.end(), -1);
    for (int i = 0; i < m_; ++i) pos_[basic_[i]] = i;
    for (int j = 0; j < n_ + m_; ++j)
      if (state_[j] != kBasic) place_nonbasic(j);
    factored_ = false;
  }

  LpStatus solve() {
    iterations_ = 0;
    if (m_ == 0) return solve_without_rows();
    const long limit = opt_.max_iterations > 0 ? opt_.max_iterations
                                               : 200L * (n_ + m_) + 20000L;
    const long bland_after = 2L * (n_ + m_);
    if (!factored_) {
      refactor();
      since_refactor_ = 0;
    }
    compute_primal();
    int& since_refactor = since_refactor_;
    int phase1_stalls = 0;
    bool confirmed = false;
    std::vector<double> cb(m_), y(m_), alpha(m_);
    while (true) {
      if (iterations_ >= limit) return LpStatus::IterationLimit;
      if ((iterations_ & 31) == 0 && std::chrono::steady_clock::now() > opt_.deadline)
        return LpStatus::TimeLimit;
      if (since_refactor >= opt_.refactor_every) {
        refactor();
        compute_primal();
        since_refactor = 0;
      }
      const bool bland = iterations_ >= bland_after;
      // Phase costs: infeasibility gradient while any basic variable is out of bounds.
      bool infeasible = false;
      for (int i = 0; i < m_; ++i) {
        const int j = basic_[i];
        const double tol = opt_.primal_tol * (1.0 + std::abs(x_[j]));
        if (x_[j] < lo_[j] - tol) {
          cb[i] = -1.0;
          infeasible = true;
        } else if (x_[j] > hi_[j] + tol) {
          cb[i] = 1.0;
          infeasible = true;
        } else {
          cb[i] = 0.0;
        }
      }
      if (!infeasible)
        for (int i = 0; i < m_; ++i) cb[i] = cost_[basic_[i]];
      compute_duals(cb, y);

      // Pricing.
      int q = -1;
      double best = 0.0, dq = 0.0;
      for (int j = 0; j < n_ + m_; ++j) {
        const std::int8_t s = state_[j];
        if (s == kBasic) continue;
        if (lo_[j] == hi_[j]) continue;
        const double cj = infeasible ? 0.0 : cost_[j];
        const double d = cj - column_dot(j, y);
        bool eligible = false;
        if (s == kLower) eligible = d < -opt_.dual_tol;
        else if (s == kUpper) eligible = d > opt_.dual_tol;
        else eligible = std::abs(d) > opt_.dual_tol;
        if (!eligible) continue;
        if (bland) {
          q = j;
          dq = d;
          break;
        }
        const double score = std::abs(d) / std::sqrt(1.0 + column_norm2(j));
        if (score > best) {
          best = score;
          q = j;
          dq = d;
        }
      }
      if (q < 0) {
        if (!confirmed && since_refactor > 0) {
          // Recompute the basic values before declaring termination; refactor first when
          // many updates have piled up or when claiming infeasibility.
          if (infeasible || since_refactor > opt_.refactor_every / 2) {
            refactor();
            since_refactor = 0;
          }
          compute_primal();
          confirmed = true;
          continue;
        }
        return infeasible ? LpStatus::Infeasible : LpStatus::Optimal;
      }
      confirmed = false;
      const double dir = dq < 0.0 ? 1.0 : -1.0;
      ftran(q, alpha);

      // Ratio test (Harris two-pass, textbook when in Bland mode).
      const double ptol = opt_.pivot_tol;
      double theta_max = kInf;
      for (int i = 0; i < m_; ++i) {
        const double a = alpha[i];
        if (std::abs(a) <= ptol) continue;
        const double rate = -dir * a;
        double dist;
        if (!limit_distance(i, rate, infeasible, dist)) continue;
        const int j = basic_[i];
        const double tol = opt_.primal_tol * (1.0 + std::abs(x_[j]));
        theta_max = std::min(theta_max, (std::max(0.0, dist) + (bland ? 0.0 : tol)) / std::abs(rate));
      }
      int r = -1;
      double theta = kInf, best_pivot = 0.0;
      if (theta_max < kInf) {
        for (int i = 0; i < m_; ++i) {
          const double a = alpha[i];
          if (std::abs(a) <= ptol) continue;
          const double rate = -dir * a;
          double dist;
          if (!limit_distance(i, rate, infeasible, dist)) continue;
          const double ratio = std::max(0.0, dist) / std::abs(rate);
          if (ratio > theta_max) continue;
          if (bland) {
            if (r < 0 || ratio < theta - 1e-15 ||
                (ratio <= theta + 1e-15 && basic_[i] < basic_[r])) {
              r = i;
              theta = ratio;
            }
          } else if (std::abs(a) > best_pivot) {
            best_pivot = std::abs(a);
            r = i;
            theta = ratio;
          }
        }
      }
      const double flip = hi_[q] - lo_[q];
      const bool can_flip = std::isfinite(flip);
      if (r < 0 && !can_flip) {
        if (!infeasible) return LpStatus::Unbounded;
        // Numerical trouble in phase one; refactor and retry a few times.
        if (++phase1_stalls > 3) return LpStatus::Infeasible;
        refactor();
        compute_primal();
        since_refactor = 0;
        continue;
      }
      ++iterations_;
      if (can_flip && (r < 0 || flip <= theta)) {
        for (int i = 0; i < m_; ++i) x_[basic_[i]] -= dir * flip * alpha[i];
        state_[q] = state_[q] == kLower ? kUpper : kLower;
        x_[q] = state_[q] == kLower ? lo_[q] : hi_[q];
        continue;
      }
      const int leave = basic_[r];
      const double x_leave = x_[leave];
      for (int i = 0; i < m_; ++i) x_[basic_[i]] -= dir * theta * alpha[i];
      const double xq = x_[q] + dir * theta;
      const double rate_r = -dir * alpha[r];
      // Leaving variable goes to the bound it was moving toward; an infeasible one stops at
      // the bound it was approaching.
      const double ltol = opt_.primal_tol * (1.0 + std::abs(x_leave));
      bool to_lower;
      if (infeasible && x_leave < lo_[leave] - ltol && rate_r > 0)
        to_lower = true;
      else if (infeasible && x_leave > hi_[leave] + ltol && rate_r < 0)
        to_lower = false;
      else
        to_lower = rate_r < 0.0;
      if (to_lower && !std::isfinite(lo_[leave])) to_lower = false;
      if (!to_lower && !std::isfinite(hi_[leave])) to_lower = true;
      state_[leave] = to_lower ? kLower : kUpper;
      if (!std::isfinite(lo_[leave]) && !std::isfinite(hi_[leave])) state_[leave] = kFree;
      pos_[leave] = -1;
      place_nonbasic(leave);
      basic_[r] = q;
      pos_[q] = r;
      state_[q] = kBasic;
      x_[q] = xq;
      pivot_inverse(r, alpha);
      ++since_refactor;
    }
  }

  /** \brief Structural part of the current primal point. */
  std::vector<double> primal() const { return std::vector<double>(x_.begin(), x_.begin() + n_); }

  /** \brief Objective in the caller's sense, including the offset. */
  double objective() const {
    double v = 0.0;
    for (int j = 0; j < n_; ++j) v += cost_[j] * x_[j];
    return sign_ * v + offset_;
  }
  /** \brief Objective in minimization form, without offset. */
  double internal_objective() const {
    double v = 0.0;
    for (int j = 0; j < n_; ++j) v += cost_[j] * x_[j];
    return v;
  }

  /**
   * \brief Appends rows with their logicals basic; the inverse is extended in place so the
   * current basis stays factored.
   */
  void add_rows(const std::vector<Row>& rows) {
    if (rows.empty()) return;
    const int m_old = m_;
    const int add = static_cast<int>(rows.size());
    for (const Row& r : rows) {
      if (r.index.size() != r.value.size()) throw MalformedModel("row index/value length mismatch");
      for (std::size_t k = 0; k < r.index.size(); ++k) {
        if (r.index[k] < 0 || r.index[k] >= n_) throw MalformedModel("row references unknown column");
        if (!std::isfinite(r.value[k])) throw MalformedModel("non-finite row coefficient");
      }
      if (std::isnan(r.rhs)) throw MalformedModel("NaN right-hand side");
    }
    // Rebuild the column store with the new entries appended.
    std::vector<std::vector<std::pair<int, double>>> extra(n_);
    for (int a = 0; a < add; ++a) {
      const Row& r = rows[a];
      for (std::size_t k = 0; k < r.index.size(); ++k) extra[r.index[k]].emplace_back(m_old + a, r.value[k]);
    }
    std::vector<int> cs(n_ + 1, 0), ri;
    std::vector<double> vv;
    ri.reserve(row_idx_.size() + 8 * add);
    vv.reserve(row_idx_.size() + 8 * add);
    for (int j = 0; j < n_; ++j) {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        ri.push_back(row_idx_[k]);
        vv.push_back(val_[k]);
      }
      for (auto [i, v] : extra[j]) {
        ri.push_back(i);
        vv.push_back(v);
      }
      cs[j + 1] = static_cast<int>(ri.size());
    }
    col_start_.swap(cs);
    row_idx_.swap(ri);
    val_.swap(vv);
    m_ += add;
    const int total = n_ + m_;
    cost_.resize(total, 0.0);
    lo_.resize(total, 0.0);
    hi_.resize(total, 0.0);
    x_.resize(total, 0.0);
    state_.resize(total, kBasic);
    pos_.resize(total, -1);
    basic_.resize(m_);
    for (int a = 0; a < add; ++a) {
      const Row& r = rows[a];
      const int j = n_ + m_old + a;
      double l = -kInf, u = kInf;
      if (r.sense == RowSense::LessEqual) u = r.rhs;
      if (r.sense == RowSense::GreaterEqual) l = r.rhs;
      if (r.sense == RowSense::Equal) l = u = r.rhs;
      lo_[j] = l;
      hi_[j] = u;
      double act = 0.0;
      for (std::size_t k = 0; k < r.index.size(); ++k) act += r.value[k] * x_[r.index[k]];
      x_[j] = act;
      state_[j] = kBasic;
      basic_[m_old + a] = j;
      pos_[j] = m_old + a;
    }
    if (!factored_) return;
    // [[B, 0], [C, -I]]^-1 = [[B^-1, 0], [C B^-1, -I]] with C the new rows on basic columns.
    const std::size_t mo = static_cast<std::size_t>(m_old), mn = static_cast<std::size_t>(m_);
    std::vector<double> nb(mn * mn, 0.0);
    for (std::size_t k = 0; k < mo; ++k)
      std::copy(&binv_[k * mo], &binv_[k * mo] + mo, &nb[k * mn]);
    for (int a = 0; a < add; ++a) {
      const Row& r = rows[a];
      const std::size_t ra = mo + static_cast<std::size_t>(a);
      for (std::size_t q = 0; q < r.index.size(); ++q) {
        const int p = pos_[r.index[q]];
        if (p < 0 || p >= m_old) continue;
        const double c = r.value[q];
        for (std::size_t k = 0; k < mo; ++k) nb[k * mn + ra] += c * binv_[k * mo + p];
      }
      nb[ra * mn + ra] = -1.0;
    }
    binv_.swap(nb);
  }

  /** \brief Reduced cost of column j (minimization form) under the current basis. */
  std::vector<double> reduced_costs(const std::vector<int>& cols) {
    if (!factored_) {
      refactor();
      since_refactor_ = 0;
    }
    std::vector<double> cb(m_), y(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basic_[i]];
    compute_duals(cb, y);
    std::vector<double> out;
    out.reserve(cols.size());
    for (int j : cols) out.push_back(state_[j] == kBasic ? 0.0 : cost_[j] - column_dot(j, y));
    return out;
  }

  long iterations() const { return iterations_; }
  double sign() const { return sign_; }
  double offset() const { return offset_; }

 private:
  LpStatus solve_without_rows() {
    for (int j = 0; j < n_; ++j) {
      const double c = cost_[j];
      if (c > 0) {
        if (!std::isfinite(lo_[j])) return LpStatus::Unbounded;
        x_[j] = lo_[j];
      } else if (c < 0) {
        if (!std::isfinite(hi_[j])) return LpStatus::Unbounded;
        x_[j] = hi_[j];
      } else {
        x_[j] = std::isfinite(lo_[j]) ? lo_[j] : (std::isfinite(hi_[j]) ? hi_[j] : 0.0);
      }
    }
    return LpStatus::Optimal;
  }

  // Distance a basic variable may travel at the given rate before it blocks.
  bool limit_distance(int i, double rate, bool phase1, double& dist) const {
    const int j = basic_[i];
    const double x = x_[j];
    const double tol = opt_.primal_tol * (1.0 + std::abs(x));
    if (phase1 && x < lo_[j] - tol) {
      if (rate <= 0) return false;
      dist = lo_[j] - x;
      return true;
    }
    if (phase1 && x > hi_[j] + tol) {
      if (rate >= 0) return false;
      dist = x - hi_[j];
      return true;
    }
    if (rate < 0) {
      if (!std::isfinite(lo_[j])) return false;
      dist = x - lo_[j];
      return true;
    }
    if (!std::isfinite(hi_[j])) return false;
    dist = hi_[j] - x;
    return true;
  }

  void place_nonbasic(int j, bool choose_state = false) {
    const bool lf = std::isfinite(lo_[j]), hf = std::isfinite(hi_[j]);
    if (choose_state) {
      if (lf && hf) state_[j] = std::abs(lo_[j]) <= std::abs(hi_[j]) ? kLower : kUpper;
      else if (lf) state_[j] = kLower;
      else if (hf) state_[j] = kUpper;
      else state_[j] = kFree;
    }
    if (state_[j] == kLower && !lf) state_[j] = hf ? kUpper : kFree;
    if (state_[j] == kUpper && !hf) state_[j] = lf ? kLower : kFree;
    if (state_[j] == kFree && (lf || hf)) state_[j] = lf ? kLower : kUpper;
    if (state_[j] == kLower) x_[j] = lo_[j];
    else if (state_[j] == kUpper) x_[j] = hi_[j];
    else x_[j] = 0.0;
  }

  double column_dot(int j, const std::vector<double>& y) const {
    if (j >= n_) return -y[j - n_];
    double s = 0.0;
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) s += val_[k] * y[row_idx_[k]];
    return s;
  }

  double column_norm2(int j) const {
    if (j >= n_) return 1.0;
    double s = 0.0;
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) s += val_[k] * val_[k];
    return s;
  }

  // binv_ is column-major: binv_[k * m + i] holds row i, column k of the inverse.
  void ftran(int j, std::vector<double>& out) const {
    const std::size_t m = static_cast<std::size_t>(m_);
    if (j >= n_) {
      const double* col = &binv_[(j - n_) * m];
      for (std::size_t i = 0; i < m; ++i) out[i] = -col[i];
      return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      const double* col = &binv_[row_idx_[k] * m];
      const double v = val_[k];
      for (std::size_t i = 0; i < m; ++i) out[i] += col[i] * v;
    }
  }

  void compute_duals(const std::vector<double>& cb, std::vector<double>& y) const {
    const std::size_t m = static_cast<std::size_t>(m_);
    std::vector<int> nz;
    for (int i = 0; i < m_; ++i)
      if (cb[i] != 0.0) nz.push_back(i);
    for (std::size_t k = 0; k < m; ++k) {
      const double* col = &binv_[k * m];
      double s = 0.0;
      for (int i : nz) s += cb[i] * col[i];
      y[k] = s;
    }
  }

  void compute_primal() {
    const std::size_t m = static_cast<std::size_t>(m_);
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < n_; ++j) {
      if (state_[j] == kBasic || x_[j] == 0.0) continue;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) rhs[row_idx_[k]] -= val_[k] * x_[j];
    }
    for (int i = 0; i < m_; ++i) {
      const int j = n_ + i;
      if (state_[j] != kBasic) rhs[i] += x_[j];
    }
    std::vector<double> xb(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double v = rhs[k];
      if (v == 0.0) continue;
      const double* col = &binv_[k * m];
      for (std::size_t i = 0; i < m; ++i) xb[i] += col[i] * v;
    }
    for (int i = 0; i < m_; ++i) x_[basic_[i]] = xb[i];
  }

  void pivot_inverse(int r, const std::vector<double>& alpha) {
    const std::size_t m = static_cast<std::size_t>(m_);
    const double inv = 1.0 / alpha[r];
    for (std::size_t k = 0; k < m; ++k) {
      double* col = &binv_[k * m];
      const double t = col[r] * inv;
      if (t == 0.0) continue;
      for (std::size_t i = 0; i < m; ++i) col[i] -= alpha[i] * t;
      col[r] = t;
    }
  }

  // Gauss-Jordan inversion of the basis, logical columns first so they cost nothing.
  void refactor() {
    const std::size_t m = static_cast<std::size_t>(m_);
    for (int attempt = 0; attempt < 3; ++attempt) {
      std::vector<double> mat(m * m, 0.0);
      std::vector<int> order;
      order.reserve(m);
      for (int c = 0; c < m_; ++c)
        if (basic_[c] >= n_) order.push_back(c);
      for (int c = 0; c < m_; ++c)
        if (basic_[c] < n_) order.push_back(c);
      for (int c = 0; c < m_; ++c) {
        const int j = basic_[c];
        if (j >= n_) {
          mat[(j - n_) * m + c] = -1.0;
        } else {
          for (int k = col_start_[j]; k < col_start_[j + 1]; ++k)
            mat[row_idx_[k] * m + c] += val_[k];
        }
      }
      std::vector<double> inv(m * m, 0.0);
      for (std::size_t i = 0; i < m; ++i) inv[i * m + i] = 1.0;
      std::vector<char> used(m, 0);
      std::vector<int> pivot_row(m, -1);
      std::vector<int> singular;
      for (int c : order) {
        int p = -1;
        double big = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          if (used[i]) continue;
          const double v = std::abs(mat[i * m + c]);
          if (v > big) {
            big = v;
            p = static_cast<int>(i);
          }
        }
        if (p < 0 || big < 1e-11) {
          singular.push_back(c);
          continue;
        }
        used[p] = 1;
        pivot_row[c] = p;
        const double pv = 1.0 / mat[p * m + c];
        double* mp = &mat[p * m];
        double* ip = &inv[p * m];
        for (std::size_t k = 0; k < m; ++k) {
          mp[k] *= pv;
          ip[k] *= pv;
        }
        for (std::size_t i = 0; i < m; ++i) {
          if (static_cast<int>(i) == p) continue;
          const double f = mat[i * m + c];
          if (f == 0.0) continue;
          double* mi = &mat[i * m];
          double* ii = &inv[i * m];
          for (std::size_t k = 0; k < m; ++k) {
            mi[k] -= f * mp[k];
            ii[k] -= f * ip[k];
          }
        }
      }
      if (singular.empty()) {
        binv_.assign(m * m, 0.0);
        for (int c = 0; c < m_; ++c) {
          const double* src = &inv[pivot_row[c] * m];
          for (std::size_t k = 0; k < m; ++k) binv_[k * m + c] = src[k];
        }
        factored_ = true;
        return;
      }
      // Replace dependent columns by logicals of uncovered rows and retry.
      std::size_t s = 0;
      for (int i = 0; i < m_ && s < singular.size(); ++i) {
        if (used[i]) continue;
        const int logical = n_ + i;
        if (state_[logical] == kBasic) continue;
        const int c = singular[s++];
        const int out = basic_[c];
        state_[out] = kLower;
        pos_[out] = -1;
        place_nonbasic(out, true);
        basic_[c] = logical;
        state_[logical] = kBasic;
        pos_[logical] = c;
      }
    }
    throw MalformedModel("basis could not be factorized");
  }

  LpOptions opt_;
  int n_ = 0, m_ = 0;
  double sign_ = 1.0, offset_ = 0.0;
  std::vector<double> cost_, lo_, hi_, x_;
  std::vector<int> col_start_, row_idx_;
  std::vector<double> val_;
  std::vector<std::int8_t> state_;
  std::vector<int> basic_, pos_;
  std::vector<double> binv_;
  bool factored_ = false;
  int since_refactor_ = 0;
  long iterations_ = 0;
};

}  // namespace v2b::solver

#endif

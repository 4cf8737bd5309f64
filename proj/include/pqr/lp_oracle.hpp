#pragma once

// Exact rational two-phase simplex over a ConstraintSet. Link with gmpxx and gmp.

#include <gmpxx.h>

#include <map>
#include <optional>
#include <vector>

#include "pqr/lp.hpp"

namespace pqr {

namespace detail {

// max c.x subject to A x <= b, x >= 0, dense, Bland's rule.
class Simplex {
 public:
  enum class Status { optimal, infeasible, unbounded };

  Simplex(std::vector<std::vector<mpq_class>> a, std::vector<mpq_class> b, std::vector<mpq_class> c)
      : m_(a.size()), n_(c.size()) {
    // Columns: structural [0,n), slack [n,n+m), artificial [n+m, n+m+k).
    std::vector<std::size_t> needs_art;
    for (std::size_t i = 0; i < m_; ++i)
      if (b[i] < 0) needs_art.push_back(i);
    width_ = n_ + m_ + needs_art.size();
    t_.assign(m_, std::vector<mpq_class>(width_ + 1, 0));
    basis_.assign(m_, 0);
    std::size_t art = n_ + m_;
    for (std::size_t i = 0; i < m_; ++i) {
      bool flip = b[i] < 0;
      for (std::size_t j = 0; j < n_; ++j) t_[i][j] = flip ? mpq_class(-a[i][j]) : a[i][j];
      t_[i][n_ + i] = flip ? -1 : 1;
      t_[i][width_] = flip ? mpq_class(-b[i]) : b[i];
      if (flip) {
        t_[i][art] = 1;
        basis_[i] = art++;
      } else {
        basis_[i] = n_ + i;
      }
    }
    artificial_from_ = n_ + m_;
    c_ = std::move(c);
  }

  Status solve() {
    if (width_ > artificial_from_) {
      std::vector<mpq_class> phase1(width_, 0);
      for (std::size_t j = artificial_from_; j < width_; ++j) phase1[j] = -1;
      run(phase1, width_);
      mpq_class infeas = 0;
      for (std::size_t i = 0; i < m_; ++i)
        if (basis_[i] >= artificial_from_) infeas += t_[i][width_];
      if (infeas > 0) return Status::infeasible;
      for (std::size_t i = 0; i < m_; ++i) {
        if (basis_[i] < artificial_from_) continue;
        for (std::size_t j = 0; j < artificial_from_; ++j)
          if (t_[i][j] != 0) {
            pivot(i, j);
            break;
          }
      }
    }
    std::vector<mpq_class> obj(width_, 0);
    for (std::size_t j = 0; j < n_; ++j) obj[j] = c_[j];
    return run(obj, artificial_from_) ? Status::optimal : Status::unbounded;
  }

  std::vector<mpq_class> values() const {
    std::vector<mpq_class> x(n_, 0);
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = t_[i][width_];
    return x;
  }

 private:
  // Primal simplex on columns [0, limit); false when unbounded.
  bool run(const std::vector<mpq_class>& obj, std::size_t limit) {
    for (;;) {
      std::optional<std::size_t> enter;
      for (std::size_t j = 0; j < limit && !enter; ++j) {
        if (is_basic(j)) continue;
        mpq_class reduced = obj[j];
        for (std::size_t i = 0; i < m_; ++i) reduced -= obj[basis_[i]] * t_[i][j];
        if (reduced > 0) enter = j;
      }
      if (!enter) return true;
      std::optional<std::size_t> leave;
      mpq_class best;
      for (std::size_t i = 0; i < m_; ++i) {
        if (t_[i][*enter] <= 0) continue;
        mpq_class ratio = t_[i][width_] / t_[i][*enter];
        if (!leave || ratio < best || (ratio == best && basis_[i] < basis_[*leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (!leave) return false;
      pivot(*leave, *enter);
    }
  }

  bool is_basic(std::size_t j) const {
    for (auto b : basis_)
      if (b == j) return true;
    return false;
  }

  void pivot(std::size_t r, std::size_t col) {
    mpq_class p = t_[r][col];
    for (auto& v : t_[r]) v /= p;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r || t_[i][col] == 0) continue;
      mpq_class f = t_[i][col];
      for (std::size_t j = 0; j <= width_; ++j) t_[i][j] -= f * t_[r][j];
    }
    basis_[r] = col;
  }

  std::size_t m_, n_, width_ = 0, artificial_from_ = 0;
  std::vector<std::vector<mpq_class>> t_;
  std::vector<std::size_t> basis_;
  std::vector<mpq_class> c_;
};

}  // namespace detail

inline Solution solve_lp_oracle(const ConstraintSet& cs) {
  Solution sol;
  Millis base = 0;
  if (!cs.fixed.empty()) {
    base = cs.fixed.begin()->second;
    for (const auto& [v, t] : cs.fixed) base = std::min(base, t);
  }
  // Free variables y = y+ - y-, shifted by base.
  std::map<VarRef, std::size_t> col;
  for (std::size_t s = 0; s < cs.slots.size(); ++s)
    for (auto w : {Bound::tmin, Bound::tmax}) {
      VarRef v{s, w};
      if (!cs.fixed.count(v)) col.emplace(v, col.size());
    }
  std::size_t n = col.size() * 2;
  std::vector<std::vector<mpq_class>> a;
  std::vector<mpq_class> b;
  for (const auto& c : cs.constraints) {
    std::vector<mpq_class> row(n, 0);
    mpq_class rhs = c.offset;
    auto term = [&](VarRef v, int sign) {
      if (auto it = cs.fixed.find(v); it != cs.fixed.end()) {
        rhs -= sign * mpq_class(it->second - base);
      } else {
        row[2 * col.at(v)] += sign;
        row[2 * col.at(v) + 1] -= sign;
      }
    };
    term(c.lhs, 1);
    term(c.rhs, -1);
    bool empty = true;
    for (const auto& x : row) empty = empty && x == 0;
    if (empty) {
      if (rhs < 0) {
        sol.message = "fixed values violate a constraint";
        return sol;
      }
      continue;
    }
    a.push_back(std::move(row));
    b.push_back(rhs);
  }
  std::vector<mpq_class> obj(n, 0);
  for (const auto& [v, j] : col) {
    int sign = v.which == Bound::tmax ? 1 : -1;
    obj[2 * j] = sign;
    obj[2 * j + 1] = -sign;
  }
  detail::Simplex lp(std::move(a), std::move(b), std::move(obj));
  auto status = lp.solve();
  if (status == detail::Simplex::Status::infeasible) {
    sol.message = "infeasible";
    return sol;
  }
  if (status == detail::Simplex::Status::unbounded) {
    sol.message = "unbounded";
    return sol;
  }
  auto x = lp.values();
  auto value = [&](VarRef v) -> Millis {
    if (auto it = cs.fixed.find(v); it != cs.fixed.end()) return it->second;
    mpq_class y = x[2 * col.at(v)] - x[2 * col.at(v) + 1];
    if (y.get_den() != 1) throw ConstraintError("non-integral optimum");
    return base + static_cast<Millis>(y.get_num().get_si());
  };
  for (std::size_t s = 0; s < cs.slots.size(); ++s) {
    sol.bounds.emplace_back(value({s, Bound::tmin}), value({s, Bound::tmax}));
    sol.objective += sol.bounds.back().second - sol.bounds.back().first;
  }
  sol.feasible = true;
  return sol;
}

}  // namespace pqr

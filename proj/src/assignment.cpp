#include "pentrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pentrack {

namespace {

// Cost with a lexicographic forbidden-cell count in front, so "fewer
// forbidden cells" always dominates the real-valued part without a big-M
// constant eating the floating-point precision of the real costs.
struct LexCost {
  long forbidden = 0;
  double value = 0.0;

  LexCost operator+(const LexCost& o) const { return {forbidden + o.forbidden, value + o.value}; }
  LexCost operator-(const LexCost& o) const { return {forbidden - o.forbidden, value - o.value}; }
  LexCost& operator+=(const LexCost& o) {
    forbidden += o.forbidden;
    value += o.value;
    return *this;
  }
  LexCost& operator-=(const LexCost& o) {
    forbidden -= o.forbidden;
    value -= o.value;
    return *this;
  }
  bool operator<(const LexCost& o) const {
    return forbidden != o.forbidden ? forbidden < o.forbidden : value < o.value;
  }
};

constexpr LexCost kInfinite{std::numeric_limits<long>::max() / 4, 0.0};

enum class CellKind { Allowed, Forbidden, Padding };

struct SquareProblem {
  std::size_t n = 0;
  std::vector<LexCost> cost;  // n * n row-major
  std::vector<CellKind> kind;

  const LexCost& at(std::size_t r, std::size_t c) const { return cost[r * n + c]; }
  CellKind kind_at(std::size_t r, std::size_t c) const { return kind[r * n + c]; }
};

SquareProblem pad(const Eigen::MatrixXd& cost, const CellMask& forbidden) {
  const auto rows = static_cast<std::size_t>(cost.rows());
  const auto cols = static_cast<std::size_t>(cost.cols());
  SquareProblem sq;
  sq.n = std::max(rows, cols);
  sq.cost.assign(sq.n * sq.n, LexCost{});
  sq.kind.assign(sq.n * sq.n, CellKind::Padding);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ci = static_cast<Eigen::Index>(c);
      if (forbidden(ri, ci)) {
        sq.cost[r * sq.n + c] = LexCost{1, 0.0};
        sq.kind[r * sq.n + c] = CellKind::Forbidden;
      } else {
        if (!std::isfinite(cost(ri, ci))) {
          throw std::invalid_argument("hungarian: non-finite cost on an allowed cell");
        }
        sq.cost[r * sq.n + c] = LexCost{0, cost(ri, ci)};
        sq.kind[r * sq.n + c] = CellKind::Allowed;
      }
    }
  }
  return sq;
}

struct Solution {
  std::vector<long> row_to_col;
  std::vector<LexCost> u;  // row potentials
  std::vector<LexCost> v;  // column potentials
};

// Shortest augmenting path Hungarian with potentials, O(n^3).
Solution solve(const SquareProblem& sq) {
  const std::size_t n = sq.n;
  std::vector<LexCost> u(n + 1), v(n + 1), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInfinite);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      LexCost delta = kInfinite;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) {
          continue;
        }
        const LexCost cur = sq.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Solution s;
  s.row_to_col.assign(n, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) {
      s.row_to_col[p[j] - 1] = static_cast<long>(j - 1);
    }
  }
  s.u.assign(u.begin() + 1, u.end());
  s.v.assign(v.begin() + 1, v.end());
  return s;
}

// Rewrites an optimal perfect matching into the lexicographically smallest
// one among all perfect matchings on tight (zero reduced cost) cells; by
// complementary slackness those are exactly the optimal matchings.
void lex_smallest(const SquareProblem& sq, Solution& sol, double tolerance) {
  const std::size_t n = sq.n;
  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const LexCost red = sq.at(r, c) - sol.u[r] - sol.v[c];
      if (red.forbidden == 0 && std::abs(red.value) <= tolerance) {
        tight[r].push_back(c);
      }
    }
    // Allowed cells first so real pairs sort ahead of dropped ones.
    std::stable_sort(tight[r].begin(), tight[r].end(), [&](std::size_t a, std::size_t b) {
      const bool aa = sq.kind_at(r, a) == CellKind::Allowed;
      const bool ba = sq.kind_at(r, b) == CellKind::Allowed;
      return aa != ba ? aa : a < b;
    });
  }

  std::vector<long>& row_to_col = sol.row_to_col;
  std::vector<long> col_to_row(n, -1);
  for (std::size_t r = 0; r < n; ++r) {
    col_to_row[static_cast<std::size_t>(row_to_col[r])] = static_cast<long>(r);
  }

  // Earlier rows holding a real pair are frozen. Rows left without one may
  // still trade columns among dropped cells; that never changes the output.
  auto frozen = [&](long owner, std::size_t upto) {
    const auto o = static_cast<std::size_t>(owner);
    return owner >= 0 &&
           (o == upto ||
            (o < upto && sq.kind_at(o, static_cast<std::size_t>(row_to_col[o])) == CellKind::Allowed));
  };

  std::vector<bool> visited(n);
  // Kuhn augmentation that leaves frozen rows in place.
  auto augment = [&](auto&& self, std::size_t row, std::size_t fixed_upto) -> bool {
    for (std::size_t c : tight[row]) {
      if (visited[c]) {
        continue;
      }
      visited[c] = true;
      const long owner = col_to_row[c];
      if (frozen(owner, fixed_upto)) {
        continue;
      }
      if (owner < 0 || self(self, static_cast<std::size_t>(owner), fixed_upto)) {
        row_to_col[row] = static_cast<long>(c);
        col_to_row[c] = static_cast<long>(row);
        return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : tight[i]) {
      const auto current = static_cast<std::size_t>(row_to_col[i]);
      if (j == current) {
        break;
      }
      const long owner = col_to_row[j];
      if (static_cast<std::size_t>(owner) != i && frozen(owner, i)) {
        continue;
      }
      // Move i onto j; the displaced row must reach the column i vacated.
      const auto displaced = static_cast<std::size_t>(owner);
      const auto saved_rows = row_to_col;
      const auto saved_cols = col_to_row;
      row_to_col[i] = static_cast<long>(j);
      col_to_row[j] = static_cast<long>(i);
      col_to_row[current] = -1;
      row_to_col[displaced] = -1;
      std::fill(visited.begin(), visited.end(), false);
      if (augment(augment, displaced, i)) {
        break;
      }
      row_to_col = saved_rows;
      col_to_row = saved_cols;
    }
  }
}

}  // namespace

AssignmentPairs hungarian(const Eigen::MatrixXd& cost, const CellMask& forbidden,
                          bool lexicographic_ties) {
  if (forbidden.rows() != cost.rows() || forbidden.cols() != cost.cols()) {
    throw std::invalid_argument("hungarian: mask shape differs from cost shape");
  }
  AssignmentPairs out;
  if (cost.rows() == 0 || cost.cols() == 0) {
    return out;
  }
  const SquareProblem sq = pad(cost, forbidden);
  Solution sol = solve(sq);

  if (lexicographic_ties) {
    double scale = 1.0;
    for (std::size_t k = 0; k < sq.cost.size(); ++k) {
      if (sq.kind[k] == CellKind::Allowed) {
        scale = std::max(scale, std::abs(sq.cost[k].value));
      }
    }
    lex_smallest(sq, sol, 1e-9 * scale * static_cast<double>(sq.n));
  }

  for (std::size_t r = 0; r < static_cast<std::size_t>(cost.rows()); ++r) {
    const auto c = static_cast<std::size_t>(sol.row_to_col[r]);
    if (sq.kind_at(r, c) == CellKind::Allowed) {
      out.emplace_back(r, c);
    }
  }
  return out;
}

AssignmentPairs hungarian(const Eigen::MatrixXd& cost) {
  return hungarian(cost, CellMask::Constant(cost.rows(), cost.cols(), false));
}

double assignment_cost(const Eigen::MatrixXd& cost, const AssignmentPairs& pairs) {
  double total = 0.0;
  for (const auto& [r, c] : pairs) {
    total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  return total;
}

}  // namespace pentrack

#pragma once

// Reference implementations used by the tests. Deliberately naive: each one
// follows the definition directly and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
using Mask = std::vector<std::vector<bool>>;

struct BruteAssignment {
  std::size_t cardinality = 0;
  double cost = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
};

// Enumerates every injection of the smaller side into the larger one; keeps
// the largest number of allowed pairs, then the smallest cost, then the
// lexicographically smallest sorted pair list.
inline BruteAssignment brute_force_assignment(const Matrix& cost, const Mask& forbidden) {
  const std::size_t rows = cost.size();
  const std::size_t cols = rows == 0 ? 0 : cost[0].size();
  const std::size_t n = std::max(rows, cols);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  BruteAssignment best;
  bool have = false;
  if (rows == 0 || cols == 0) {
    return best;
  }
  do {
    BruteAssignment cur;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t c = perm[r];
      if (c < cols && !forbidden[r][c]) {
        ++cur.cardinality;
        cur.cost += cost[r][c];
        cur.pairs.emplace_back(r, c);
      }
    }
    const bool better = !have || cur.cardinality > best.cardinality ||
                        (cur.cardinality == best.cardinality &&
                         (cur.cost < best.cost ||
                          (cur.cost == best.cost && cur.pairs < best.pairs)));
    if (better) {
      best = cur;
      have = true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// The track-aligning loop written out naively: take the first maximum in
// row-major order, zero that column, and store the pair only when the row
// is not yet a key of the dictionary.
inline std::map<std::size_t, std::size_t> greedy_literal(Matrix matrix) {
  std::map<std::size_t, std::size_t> matches;
  auto any_nonzero = [&] {
    for (const auto& row : matrix) {
      for (double v : row) {
        if (v != 0.0) return true;
      }
    }
    return false;
  };
  while (any_nonzero()) {
    std::size_t best_r = 0;
    std::size_t best_c = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < matrix.size(); ++r) {
      for (std::size_t c = 0; c < matrix[r].size(); ++c) {
        if (matrix[r][c] > best) {
          best = matrix[r][c];
          best_r = r;
          best_c = c;
        }
      }
    }
    for (auto& row : matrix) {
      row[best_c] = 0.0;
    }
    if (!matches.contains(best_r)) {
      matches[best_r] = best_c;
    }
  }
  return matches;
}

struct Rect {
  double x0, y0, x1, y1;
};

inline double rect_overlap(const Rect& a, const Rect& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline double rect_iou(const Rect& a, const Rect& b) {
  const double i = rect_overlap(a, b);
  const double u = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - i;
  return i / u;
}

}  // namespace oracle

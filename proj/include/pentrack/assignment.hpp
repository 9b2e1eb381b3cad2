#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <utility>
#include <vector>

namespace pentrack {

using CellMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using AssignmentPairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Optimal rectangular assignment.
//
// Among assignments that use as many allowed cells as possible, returns one
// of minimum total cost; ties between optimal sets go to the
// lexicographically smallest sorted (row, col) list. Forbidden cells are
// never returned. Output is sorted by row.
//
// `lexicographic_ties = false` skips the tie-breaking pass (any optimal set
// is returned, still deterministically); useful for large sparse problems
// where only the optimal value matters.
AssignmentPairs hungarian(const Eigen::MatrixXd& cost, const CellMask& forbidden,
                          bool lexicographic_ties = true);
AssignmentPairs hungarian(const Eigen::MatrixXd& cost);

// Sum of cost over the pairs in the given order.
double assignment_cost(const Eigen::MatrixXd& cost, const AssignmentPairs& pairs);

}  // namespace pentrack

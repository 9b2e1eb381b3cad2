#include "pentrack/assignment.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pentrack;

namespace {

struct Case {
  Eigen::MatrixXd cost;
  CellMask forbidden;
  oracle::Matrix cost_rows;
  oracle::Mask mask_rows;
};

// Costs are multiples of 1/4 so sums are exact and ties are frequent.
Case random_case(std::mt19937_64& rng, int rows, int cols, double forbid_prob) {
  std::uniform_int_distribution<int> v(0, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Case c{Eigen::MatrixXd(rows, cols), CellMask(rows, cols), {}, {}};
  c.cost_rows.assign(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
  c.mask_rows.assign(static_cast<std::size_t>(rows), std::vector<bool>(static_cast<std::size_t>(cols)));
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      const double x = v(rng) / 4.0;
      const bool f = u(rng) < forbid_prob;
      c.cost(r, k) = x;
      c.forbidden(r, k) = f;
      c.cost_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = x;
      c.mask_rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = f;
    }
  }
  return c;
}

}  // namespace

TEST(Hungarian, SingleCell) {
  Eigen::MatrixXd c(1, 1);
  c << 3.0;
  const auto p = hungarian(c);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], std::make_pair(std::size_t{0}, std::size_t{0}));
}

TEST(Hungarian, CheapDiagonal) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(4, 4, 5.0);
  c.diagonal().setZero();
  const auto p = hungarian(c);
  ASSERT_EQ(p.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(p[i], std::make_pair(i, i));
  }
}

TEST(Hungarian, EmptyAndAllForbidden) {
  EXPECT_TRUE(hungarian(Eigen::MatrixXd(0, 3)).empty());
  const Eigen::MatrixXd c = Eigen::MatrixXd::Ones(2, 2);
  EXPECT_TRUE(hungarian(c, CellMask::Constant(2, 2, true)).empty());
}

TEST(Hungarian, NonFiniteAllowedCellThrows) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(2, 2);
  c(0, 1) = NAN;
  EXPECT_THROW(hungarian(c), std::invalid_argument);
  CellMask m = CellMask::Constant(2, 2, false);
  m(0, 1) = true;
  EXPECT_NO_THROW(hungarian(c, m));
}

TEST(Hungarian, PrefersCardinalityOverCost) {
  // Taking the cheap (0,0) alone would leave row 1 without a partner.
  Eigen::MatrixXd c(2, 2);
  c << 0, 1, 100, 1000;
  CellMask m(2, 2);
  m << false, false, false, true;
  const auto p = hungarian(c, m);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0], std::make_pair(std::size_t{0}, std::size_t{1}));
  EXPECT_EQ(p[1], std::make_pair(std::size_t{1}, std::size_t{0}));
}

TEST(Hungarian, LexicographicTieBreak) {
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(3, 5, 2.0);
  const auto p = hungarian(c);
  ASSERT_EQ(p.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p[i], std::make_pair(i, i));
  }
}

TEST(Hungarian, MatchesBruteForceIncludingTies) {
  std::mt19937_64 rng(21);
  for (int rows = 1; rows <= 6; ++rows) {
    for (int cols = 1; cols <= 6; ++cols) {
      for (int trial = 0; trial < 40; ++trial) {
        const Case c = random_case(rng, rows, cols, trial % 2 == 0 ? 0.0 : 0.3);
        const auto got = hungarian(c.cost, c.forbidden);
        const auto want = oracle::brute_force_assignment(c.cost_rows, c.mask_rows);
        ASSERT_EQ(got.size(), want.cardinality) << rows << "x" << cols << " #" << trial;
        EXPECT_EQ(assignment_cost(c.cost, got), want.cost);
        EXPECT_EQ(got, want.pairs) << rows << "x" << cols << " #" << trial;
      }
    }
  }
}

TEST(Hungarian, WithoutTieBreakStillOptimal) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const Case c = random_case(rng, 5, 4, 0.25);
    const auto got = hungarian(c.cost, c.forbidden, false);
    const auto want = oracle::brute_force_assignment(c.cost_rows, c.mask_rows);
    ASSERT_EQ(got.size(), want.cardinality);
    EXPECT_EQ(assignment_cost(c.cost, got), want.cost);
  }
}

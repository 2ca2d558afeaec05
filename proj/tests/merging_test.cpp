#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lnet/merging.hpp"
#include "support.hpp"

using namespace lnet;
using lnet::testing::random_matrix;

namespace {

struct Enumerated {
  double loss = std::numeric_limits<double>::infinity();
  std::vector<Segment> segments;
};

// Every ordered partition of rows into k segments, visited in lexicographic
// order of the cut positions, so the first strict minimum is kept.
Enumerated enumerate_partitions(const Matrix& rows, Index k) {
  const Index n = rows.rows();
  Enumerated best;
  std::vector<Index> cuts(static_cast<std::size_t>(k - 1));
  auto visit = [&](auto&& self, std::size_t depth, Index from) -> void {
    if (depth == cuts.size()) {
      std::vector<Segment> segs;
      Index start = 0;
      for (Index c : cuts) {
        segs.push_back({start, c - 1});
        start = c;
      }
      segs.push_back({start, n - 1});
      double loss = 0.0;
      for (const Segment& s : segs) {
        const Eigen::RowVectorXd mean = rows.middleRows(s.first, s.length()).colwise().mean();
        for (Index l = s.first; l <= s.last; ++l) loss += (rows.row(l) - mean).squaredNorm();
      }
      if (loss < best.loss) {
        best.loss = loss;
        best.segments = segs;
      }
      return;
    }
    for (Index c = from; c <= n - static_cast<Index>(cuts.size() - depth); ++c) {
      cuts[depth] = c;
      self(self, depth + 1, c + 1);
    }
  };
  visit(visit, 0, 1);
  return best;
}

Matrix blocks(const std::vector<Index>& lengths, const Matrix& levels) {
  Index total = 0;
  for (Index l : lengths) total += l;
  Matrix out(total, levels.cols());
  Index row = 0;
  for (std::size_t b = 0; b < lengths.size(); ++b)
    for (Index l = 0; l < lengths[b]; ++l) out.row(row++) = levels.row(static_cast<Index>(b));
  return out;
}

}  // namespace

TEST(NormalizeW, FixedPointAndGram) {
  Matrix w = Matrix::Zero(4, 2);
  w << 1, 1, 1, -1, 1, 1, 1, -1;  // orthogonal columns of squared norm 4 = L
  EXPECT_LT((normalize_w(w) - w).norm(), 1e-12);

  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = random_matrix(12, 3, rng);
    const Matrix wt = normalize_w(x);
    EXPECT_LT((wt.transpose() * wt / 12.0 - Matrix::Identity(3, 3)).norm(), 1e-10);
    // Inverse square root by an eigendecomposition oracle.
    Eigen::SelfAdjointEigenSolver<Matrix> es(x.transpose() * x);
    const Matrix inv_sqrt = es.operatorInverseSqrt();
    EXPECT_LT((wt - std::sqrt(12.0) * x * inv_sqrt).norm(), 1e-10);
  }
}

TEST(NormalizeW, RankDeficientReportsCondition) {
  Matrix w(5, 2);
  w.col(0) << 1, 2, 3, 4, 5;
  w.col(1) = w.col(0);
  try {
    normalize_w(w);
    ADD_FAILURE() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("condition number"), std::string::npos);
  }
  EXPECT_THROW(normalize_w(Matrix(1, 2)), ShapeError);
}

TEST(BestOrderedPartition, SingleSegmentAndExactBlocks) {
  std::mt19937_64 rng(2);
  const Matrix rows = random_matrix(7, 2, rng);
  const OrderedPartitionResult one = best_ordered_partition(rows, 1);
  ASSERT_EQ(one.segments.size(), 1u);
  EXPECT_EQ(one.segments[0], (Segment{0, 6}));
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  double expect = 0.0;
  for (Index l = 0; l < 7; ++l) expect += (rows.row(l) - mean).squaredNorm();
  EXPECT_NEAR(one.loss, expect, 1e-12);

  Matrix levels(2, 2);
  levels << 1, 0, -1, 2;
  const OrderedPartitionResult two = best_ordered_partition(blocks({3, 5}, levels), 2);
  EXPECT_EQ(two.segments, (std::vector<Segment>{{0, 2}, {3, 7}}));
  EXPECT_NEAR(two.loss, 0.0, 1e-12);
  EXPECT_THROW(best_ordered_partition(rows, 0), ValueError);
  EXPECT_THROW(best_ordered_partition(rows, 8), ValueError);
}

TEST(BestOrderedPartition, MatchesEnumeration) {
  std::mt19937_64 rng(3);
  const Matrix rows = random_matrix(10, 2, rng);
  const Enumerated e = enumerate_partitions(rows, 3);
  const OrderedPartitionResult r = best_ordered_partition(rows, 3);
  EXPECT_NEAR(r.loss, e.loss, 1e-10);
  EXPECT_EQ(r.segments, e.segments);

  for (int rep = 0; rep < 30; ++rep) {
    const Index n = 2 + rep % 11;
    const Matrix x = random_matrix(n, 1 + rep % 3, rng);
    const SegmentationPath path(x, std::min<Index>(4, n));
    for (Index k = 1; k <= path.k_max(); ++k) {
      const Enumerated oracle = enumerate_partitions(x, k);
      const OrderedPartitionResult got = path.best(k);
      EXPECT_NEAR(got.loss, oracle.loss, 1e-10);
      EXPECT_EQ(got.segments, oracle.segments);
    }
  }
}

TEST(BestOrderedPartition, LossNonIncreasingInK) {
  std::mt19937_64 rng(4);
  const Matrix x = random_matrix(15, 3, rng);
  const SegmentationPath path(x, 10);
  for (Index k = 2; k <= 10; ++k) EXPECT_LE(path.best(k).loss, path.best(k - 1).loss + 1e-12);
}

TEST(SelectK, ExactBlocksLargeAndSmallPenalty) {
  Matrix levels(3, 2);
  levels << 1, 1, -1, 0.5, 0.3, -2;
  const Matrix rows = blocks({4, 3, 5}, levels);
  EXPECT_EQ(select_k(rows, 6, 1e-3), 3);
  const double single = best_ordered_partition(rows, 1).loss / 12.0;
  EXPECT_EQ(select_k(rows, 6, 2.0 * single), 1);
  EXPECT_THROW(select_k(rows, 6, 0.0), ValueError);
}

TEST(SelectK, InvariantToPermutationWithinConstantSegment) {
  std::mt19937_64 rng(5);
  Matrix rows = random_matrix(9, 2, rng);
  rows.middleRows(2, 4).rowwise() = Eigen::RowVector2d(0.7, -0.4);
  Matrix permuted = rows;
  permuted.row(2).swap(permuted.row(5));
  for (double nu : {0.01, 0.1, 0.5}) EXPECT_EQ(select_k(rows, 5, nu), select_k(permuted, 5, nu));
}

TEST(SelectK, CriterionVector) {
  std::mt19937_64 rng(6);
  const Matrix rows = random_matrix(8, 2, rng);
  const SegmentationPath path(rows, 4);
  const KSelection sel = select_k_detail(path, 8, 0.2);
  ASSERT_EQ(sel.criterion.size(), 4u);
  for (Index s = 1; s <= 4; ++s)
    EXPECT_NEAR(sel.criterion[static_cast<std::size_t>(s - 1)], path.best(s).loss / 8.0 + 0.2 * s, 1e-12);
}

TEST(DefaultNu, FormulaAndBranches) {
  const double lg = std::log(2500.0);
  EXPECT_FALSE(strong_intensity_regime(50.0, 50.0));
  EXPECT_NEAR(default_nu(50.0, 50.0), std::pow(lg, 0.3) / (std::sqrt(50.0) * std::pow(50.0, 0.25)), 1e-15);

  // T = n^2 / log(nT) solved by fixed point.
  double t = 500.0;
  for (int i = 0; i < 200; ++i) t = 2500.0 / std::log(50.0 * t);
  EXPECT_TRUE(strong_intensity_regime(50.0, t * (1 + 1e-12)));
  const double lt = std::log(50.0 * t * (1 + 1e-12));
  EXPECT_NEAR(default_nu(50.0, t * (1 + 1e-12)),
              std::pow(lt, 0.8) / (std::sqrt(50.0) * std::pow(t * (1 + 1e-12), 0.25)), 1e-14);

  double prev = std::numeric_limits<double>::infinity();
  for (double n = 10; n <= 200; n += 10) {
    const double nu = default_nu(n, 40.0);
    EXPECT_LT(nu, prev);
    prev = nu;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double n = 4; n <= 12; n += 1) {
    const double nu = default_nu(n, 1000.0);
    EXPECT_TRUE(strong_intensity_regime(n, 1000.0));
    EXPECT_LT(nu, prev);
    prev = nu;
  }
  EXPECT_THROW(default_nu(1.0, 10.0), ValueError);
}

TEST(Endpoints, FromSegments) {
  const std::vector<Segment> segs{{0, 3}, {4, 8}, {9, 9}, {10, 18}, {19, 20}, {21, 23}};
  EXPECT_EQ(endpoints_from_segments(segs, 5.0, 120.0),
            (std::vector<double>{20, 45, 50, 95, 105, 120}));
  EXPECT_EQ(endpoints_from_segments({{0, 9}}, 0.5, 5.0), (std::vector<double>{5.0}));
  EXPECT_EQ(endpoints_from_segments({{0, 0}, {1, 1}, {2, 2}}, 2.0, 6.0),
            (std::vector<double>{2.0, 4.0, 6.0}));
  EXPECT_THROW(endpoints_from_segments({{1, 3}}, 1.0, 4.0), ValueError);
}

TEST(KMax, Default) {
  EXPECT_EQ(default_k_max(1), 1);
  EXPECT_EQ(default_k_max(7), 4);
  EXPECT_EQ(default_k_max(103), 25);
}

TEST(SegmentsCsv, Layout) {
  OrderedPartitionResult r;
  r.segments = {{0, 1}, {2, 4}};
  r.segment_loss = {0.5, 0.25};
  r.endpoints = {2.0, 5.0};
  std::ostringstream out;
  write_segments_csv(r, out);
  EXPECT_EQ(out.str(), "segment,first,last,endpoint,loss\n1,1,2,2,0.5\n2,3,5,5,0.25\n");
}

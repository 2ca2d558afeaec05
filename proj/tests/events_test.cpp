#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lnet/events.hpp"

using namespace lnet;

namespace {

EdgeSet random_edges(Index n1, Index n2, double horizon, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> i(0, n1 - 1), j(0, n2 - 1);
  std::uniform_real_distribution<double> t(0.0, horizon);
  EdgeSet e(n1, n2, horizon);
  for (std::size_t m = 0; m < count; ++m) e.add(i(rng), j(rng), t(rng));
  return e;
}

}  // namespace

TEST(EqualPartition, Breakpoints) {
  const Partition p = equal_partition(1.0, 4);
  EXPECT_EQ(p.breakpoints(), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  const Partition q = equal_partition(120.0, 24);
  for (Index l = 0; l < 24; ++l) EXPECT_DOUBLE_EQ(q.width(l), 5.0);
  const Partition one = equal_partition(3.0, 1);
  EXPECT_EQ(one.breakpoints(), (std::vector<double>{3.0}));
  EXPECT_THROW(equal_partition(1.0, 0), ValueError);
}

TEST(PartitionType, Validation) {
  EXPECT_THROW(Partition(1.0, {}), ValueError);
  EXPECT_THROW(Partition(1.0, {0.5, 0.5, 1.0}), ValueError);
  EXPECT_THROW(Partition(1.0, {0.5, 0.9}), ValueError);
  EXPECT_THROW(Partition(1.0, {0.0, 1.0}), ValueError);
  const Partition p(2.0, {0.5, 2.0});
  EXPECT_EQ(p.count(), 2);
  EXPECT_DOUBLE_EQ(p.width(1), 1.5);
  EXPECT_EQ(p.interval_of(0.0), 0);
  EXPECT_EQ(p.interval_of(0.5), 1);  // breakpoint belongs to the interval it starts
  EXPECT_THROW(p.interval_of(2.0), ValueError);
}

TEST(EdgeSetType, Validation) {
  EdgeSet e(2, 3, 1.0);
  e.add(1, 2, 0.0);
  e.add(1, 2, 0.0);  // multiplicity allowed
  EXPECT_EQ(e.size(), 2u);
  EXPECT_THROW(e.add(2, 0, 0.5), ValueError);
  EXPECT_THROW(e.add(0, 3, 0.5), ValueError);
  EXPECT_THROW(e.add(0, 0, 1.0), ValueError);
  EXPECT_THROW(e.add(0, 0, -0.1), ValueError);
}

TEST(BinEdges, EmptyAndSingle) {
  const EdgeSet none(3, 3, 1.0);
  const Tensor3 y = bin_edges(none, equal_partition(1.0, 2));
  EXPECT_EQ(y, Tensor3(3, 3, 2));

  EdgeSet one(2, 2, 1.0);
  one.add(0, 1, 0.0);
  const Tensor3 z = bin_edges(one, equal_partition(1.0, 1));
  EXPECT_EQ(z(0, 1, 0), 1.0);
  EXPECT_EQ(z(0, 0, 0) + z(1, 0, 0) + z(1, 1, 0), 0.0);
  EXPECT_THROW(bin_edges(one, equal_partition(2.0, 1)), ValueError);
}

TEST(BinEdges, MatchesNaiveScan) {
  const EdgeSet e = random_edges(6, 5, 3.0, 10000, 42);
  const Partition p = equal_partition(3.0, 8);
  const Tensor3 y = bin_edges(e, p);
  Tensor3 expect(6, 5, 8);
  for (const Edge& x : e.edges()) {
    for (Index l = 0; l < 8; ++l) {
      if (x.time >= p.left(l) && x.time < p.right(l)) {
        expect(x.out, x.in, l) += 1.0;
        break;
      }
    }
  }
  EXPECT_EQ(y, expect);
}

TEST(BinEdges, ConservesCountsAndRefines) {
  const EdgeSet e = random_edges(4, 4, 10.0, 2000, 7);
  const Partition coarse(10.0, {2.5, 6.0, 10.0});
  const Partition fine(10.0, {2.5, 4.0, 6.0, 10.0});
  const Tensor3 yc = bin_edges(e, coarse);
  const Tensor3 yf = bin_edges(e, fine);
  double total = 0.0;
  for (double x : yc.data()) total += x;
  EXPECT_EQ(total, 2000.0);
  EXPECT_EQ(Matrix(yf.slice(1) + yf.slice(2)), Matrix(yc.slice(1)));
  EXPECT_EQ(Matrix(yf.slice(0)), Matrix(yc.slice(0)));
}

TEST(BinEdges, EdgeOnBreakpointGoesRight) {
  EdgeSet e(1, 1, 2.0);
  e.add(0, 0, 1.0);
  const Tensor3 y = bin_edges(e, equal_partition(2.0, 2));
  EXPECT_EQ(y(0, 0, 0), 0.0);
  EXPECT_EQ(y(0, 0, 1), 1.0);
}

TEST(EdgeFile, LoadsHeaderAndEdges) {
  std::istringstream in("# a comment\nn1=2 n2=2 T=1.0\n1,2,0.25\n");
  const EdgeSet e = load_edges(in);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e.edges()[0], (Edge{0, 1, 0.25}));
}

TEST(EdgeFile, RejectsBadInput) {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      load_edges(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("n1=2 n2=2 T=1.0\n3,1,0.5\n"), 2u);
  EXPECT_EQ(line_of("n1=2 n2=2 T=1.0\n1,1,0.5\n1,1,1.0\n"), 3u);
  EXPECT_EQ(line_of("n1=2 n2=2 T=1.0\n1;1;0.5\n"), 2u);
  EXPECT_EQ(line_of("n1=2 T=1.0\n"), 1u);
  EXPECT_EQ(line_of("n1=2 n2=2 T=1.0\n\n# x\n1,x,0.5\n"), 4u);
}

TEST(EdgeFile, RoundTrip) {
  const EdgeSet e = random_edges(7, 3, 2.5, 500, 9);
  std::stringstream buf;
  save_edges(e, buf);
  EXPECT_EQ(load_edges(buf), e);
}

TEST(PartitionFile, RoundTripAndErrors) {
  const Partition p(3.0, {0.1, 1.0 / 3.0, 3.0});
  std::stringstream buf;
  save_partition(p, buf);
  EXPECT_EQ(load_partition(buf), p);
  std::istringstream bad("T=2\n1.0\n1.5\n");
  EXPECT_THROW(load_partition(bad), ParseError);
  std::istringstream noheader("1.0\n");
  EXPECT_THROW(load_partition(noheader), ParseError);
}

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lnet/io.hpp"
#include "support.hpp"

using namespace lnet;
using lnet::testing::values;

namespace {

std::size_t parse_error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    load_factors(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST(FactorFile, RoundTripIsExact) {
  std::mt19937_64 rng(21);
  const TuckerFactors f = lnet::testing::random_factors({5, 4, 3}, {2, 3, 1}, rng);
  std::stringstream buf;
  save_factors(f, buf);
  const TuckerFactors g = load_factors(buf);
  EXPECT_EQ(g.u, f.u);
  EXPECT_EQ(g.v, f.v);
  EXPECT_EQ(g.w, f.w);
  EXPECT_EQ(values(g.core), values(f.core));
}

TEST(FactorFile, Layout) {
  TuckerFactors f;
  f.u = Matrix::Identity(1, 1);
  f.v = Matrix::Constant(1, 1, 0.5);
  f.w = Matrix::Constant(2, 1, -2.0);
  f.core = Tensor3(1, 1, 1);
  f.core(0, 0, 0) = 0.1;
  std::ostringstream out;
  save_factors(f, out);
  EXPECT_EQ(out.str(), "format=lnet-tucker-1\ndims=1 1 2\nranks=1 1 1\nU\n1\nV\n0.5\nW\n-2\n-2\nS\n0.1\n");
}

TEST(FactorFile, ErrorsCarryLineNumbers) {
  const std::string good = "format=lnet-tucker-1\ndims=1 1 1\nranks=1 1 1\nU\n1\nV\n1\nW\n1\nS\n1\n";
  std::istringstream ok(good);
  EXPECT_NO_THROW(load_factors(ok));

  EXPECT_EQ(parse_error_line("format=other\n"), 1u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\ndims=1 1\n"), 2u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\ndims=1 1 1\nranks=1 0 1\n"), 3u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\ndims=1 1 1\nranks=1 1 1\nU\n1 2\n"), 5u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\n# note\n\ndims=1 1 1\nranks=1 1 1\nU\nx\n"), 7u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\ndims=1 1 1\nranks=1 1 1\nU\n1\nV\n1\n"), 7u);
  EXPECT_EQ(parse_error_line("format=lnet-tucker-1\ndims=1 1 1\nranks=2 1 1\nU\n1 1\nV\n1\nW\n1\nS\n1\n1\n"),
            12u);
}

TEST(TraceAndManifest, Layout) {
  std::ostringstream trace;
  write_trace_csv({-1.5, -2.25}, trace);
  EXPECT_EQ(trace.str(), "iteration,objective\n0,-1.5\n1,-2.25\n");
  std::ostringstream man;
  write_manifest({{"command", "estimate"}, {"L", "12"}}, man);
  EXPECT_EQ(man.str(), "command=estimate\nL=12\n");
  EXPECT_THROW(open_input("/nonexistent/lnet/file"), ValueError);
}

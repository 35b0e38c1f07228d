#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "vecot/io.hpp"
#include "vecot/solver.hpp"

using namespace vecot;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(VECOT_SAMPLES_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode parse_code(const std::string& text) {
  try {
    io::parse_instance(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Io, SamplesRoundTripByteIdentical) {
  for (const char* name : {"two_point.json", "line.json", "counterexample.json"}) {
    const std::string text = slurp(name);
    ASSERT_FALSE(text.empty()) << name;
    EXPECT_EQ(io::serialize_instance(io::parse_instance(text)), text) << name;
  }
}

TEST(Io, DoublesRoundTripExactly) {
  RowMatrix p(2, 1), w(2, 1);
  p << 0.1, 1.0 / 3.0;
  w << 2.0 / 7.0, -2.0 / 7.0;
  const Instance inst = build_instance(p, w);
  const Instance back = io::parse_instance(io::serialize_instance(inst));
  EXPECT_EQ(back.cloud()->points(), inst.cloud()->points());
  EXPECT_EQ(back.measure().weights(), inst.measure().weights());
}

TEST(Io, NonFiniteBecomesNull) {
  EXPECT_TRUE(io::number(std::numeric_limits<double>::infinity()).is_null());
  EXPECT_TRUE(io::number(std::nan("")).is_null());
  EXPECT_EQ(io::number(1.5).get<double>(), 1.5);
}

TEST(Io, ParseErrors) {
  EXPECT_EQ(parse_code("{"), ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"n": 1, "points": [[0]], "weights": [[0]]})"), ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"n": 1, "m": 1, "points": [[0], [1]], "weights": [[1], ["x"]]})"), ErrorCode::ParseError);
  EXPECT_EQ(parse_code(R"({"n": 2, "m": 1, "points": [[0], [1]], "weights": [[1], [-1]]})"),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_code(R"({"n": 1, "m": 1, "points": [[0], [1]], "weights": [[1]]})"), ErrorCode::DimensionMismatch);
  EXPECT_EQ(parse_code(R"({"n": 1, "m": 1, "points": [[0], [1]], "weights": [[1], [0]]})"),
            ErrorCode::NonzeroTotalMass);
  EXPECT_EQ(parse_code(R"({"n": 0, "m": 1, "points": [], "weights": []})"), ErrorCode::ParseError);
}

TEST(Io, CouplingAndPotentialRoundTrip) {
  const Instance inst = io::parse_instance(slurp("counterexample.json"));
  const SolveResult r = solve(inst);
  const VectorCoupling pi = io::parse_coupling(io::to_json(r.coupling), inst.cloud(), inst.target_dim());
  ASSERT_EQ(pi.edges().size(), r.coupling.edges().size());
  for (std::size_t k = 0; k < pi.edges().size(); ++k) {
    EXPECT_EQ(pi.edges()[k].i, r.coupling.edges()[k].i);
    EXPECT_EQ(pi.edges()[k].flow, r.coupling.edges()[k].flow);
  }
  const PotentialField u = io::parse_potential(io::to_json(r.potential), inst.cloud(), inst.target_dim());
  EXPECT_EQ(u.values(), r.potential.values());
}

TEST(Io, CouplingParseErrors) {
  const Instance inst = io::parse_instance(slurp("two_point.json"));
  EXPECT_THROW(io::parse_coupling(io::json::parse(R"([{"i": 0, "flow": [1, 0]}])"), inst.cloud(), 2), Error);
  EXPECT_THROW(io::parse_coupling(io::json::parse(R"([{"i": 0, "j": 1, "flow": [1]}])"), inst.cloud(), 2), Error);
  EXPECT_THROW(io::parse_coupling(io::json::parse(R"({"i": 0})"), inst.cloud(), 2), Error);
}

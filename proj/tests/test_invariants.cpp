#include "invariants.hpp"

#include <gtest/gtest.h>

#include <cctype>
#include <ostream>

using tcanet::testing::Invariant;

namespace tcanet::testing {
void PrintTo(const Invariant& inv, std::ostream* os) { *os << inv.module << ": " << inv.name; }
}  // namespace tcanet::testing

namespace {

class InvariantTest : public ::testing::TestWithParam<Invariant> {};

TEST_P(InvariantTest, Holds) {
  const auto& inv = GetParam();
  EXPECT_EQ(inv.check(tcanet::testing::kInvariantSeed, tcanet::testing::kInvariantCases), "");
}

INSTANTIATE_TEST_SUITE_P(All, InvariantTest, ::testing::ValuesIn(tcanet::testing::invariants()),
                         [](const ::testing::TestParamInfo<Invariant>& info) {
                           std::string id = info.param.module + "_" + info.param.name;
                           for (char& c : id) {
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           }
                           return id;
                         });

}  // namespace

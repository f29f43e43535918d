#include "oracles.hpp"
#include "tcanet/postproc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace tcanet;
using namespace tcanet::postproc;

TEST(FuseScores, Examples) {
  EXPECT_EQ(fuse_scores(1.0, 0.8), 0.8);
  EXPECT_EQ(fuse_scores(0.0, 0.37), 0.0);
  EXPECT_NEAR(fuse_scores(0.6, 0.5), 0.3, 1e-16);
  EXPECT_THROW(fuse_scores(1.2, 0.5), ArgumentError);
  EXPECT_THROW(fuse_scores(0.5, -0.1), ArgumentError);
}

TEST(SoftNms, SingleProposalUnchanged) {
  const std::vector<Proposal> in = {{0.2, 0.4, 0.6}};
  const auto out = soft_nms(in);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], in[0]);
}

TEST(SoftNms, DisjointKeepScores) {
  const auto out = soft_nms({{0.5, 0.7, 0.4}, {0.1, 0.3, 0.9}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[1].score, 0.4);
}

TEST(SoftNms, ThreeProposalExampleMatchesRecurrence) {
  const std::vector<Proposal> in = {{0.1, 0.5, 0.9}, {0.12, 0.5, 0.8}, {0.6, 0.9, 0.7}};
  SoftNmsConfig cfg;
  cfg.sigma = 0.5;
  cfg.score_floor = 0.001;
  const auto out = soft_nms(in, cfg);
  const auto ref = oracle::soft_nms(in, 0.5, 0.001, 100);
  ASSERT_EQ(out.size(), ref.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].start, ref[i].start);
    EXPECT_EQ(out[i].end, ref[i].end);
    EXPECT_NEAR(out[i].score, ref[i].score, 1e-12);
  }
  // Hand check: (0.12,0.5) overlaps (0.1,0.5) with tIoU 0.95.
  EXPECT_EQ(out[1].start, 0.6);
  EXPECT_NEAR(out[2].score, 0.8 * std::exp(-0.95 * 0.95 / 0.5), 1e-12);
}

TEST(SoftNms, TiesPreferEarlierThenShorter) {
  const auto out = soft_nms({{0.5, 0.6, 0.5}, {0.1, 0.3, 0.5}, {0.1, 0.2, 0.5}});
  EXPECT_EQ(out[0].start, 0.1);
  EXPECT_EQ(out[0].end, 0.2);
}

TEST(SoftNms, FloorAndTopK) {
  SoftNmsConfig cfg;
  cfg.top_k = 2;
  EXPECT_EQ(soft_nms({{0.0, 0.1, 0.9}, {0.2, 0.3, 0.8}, {0.4, 0.5, 0.7}}, cfg).size(), 2u);
  cfg = {};
  cfg.score_floor = 0.5;
  EXPECT_EQ(soft_nms({{0.0, 0.1, 0.9}, {0.2, 0.3, 0.4}}, cfg).size(), 1u);
  EXPECT_TRUE(soft_nms({}).empty());
}

TEST(SoftNms, InvalidConfig) {
  SoftNmsConfig cfg;
  cfg.sigma = 0.0;
  EXPECT_THROW(soft_nms({}, cfg), ArgumentError);
  cfg = {};
  cfg.top_k = 0;
  EXPECT_THROW(soft_nms({}, cfg), ArgumentError);
}

TEST(SoftNms, MatchesRecurrenceOnRandomSets) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    std::vector<Proposal> in;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 30); ++i) {
      const double s = u(rng) * 0.9;
      in.push_back({s, s + 0.01 + u(rng) * (0.99 - s), std::round(u(rng) * 20) / 20});
    }
    SoftNmsConfig cfg;
    cfg.sigma = 0.1 + u(rng);
    cfg.top_k = 1 + static_cast<int>(rng() % 40);
    const auto out = soft_nms(in, cfg);
    const auto ref = oracle::soft_nms(in, cfg.sigma, cfg.score_floor, cfg.top_k);
    ASSERT_EQ(out.size(), ref.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_EQ(out[i].interval(), ref[i].interval());
      EXPECT_NEAR(out[i].score, ref[i].score, 1e-12);
    }
  }
}

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "fakeidet/errors.hpp"
#include "fakeidet/fusion.hpp"
#include "fakeidet/rng.hpp"
#include "support/oracles.hpp"

using namespace fakeidet;

namespace {

ScoreRecord rec(std::string id, std::string code, PaiClass pai, double s) {
  return {std::move(id), std::move(code), label_for(pai), pai, s};
}

}  // namespace

TEST(FuseMean, Examples) {
  const std::vector<double> three{0.2, 0.4, 0.9};
  EXPECT_NEAR(fuse_mean(three), 0.5, 1e-15);
  const std::vector<double> one{0.37};
  EXPECT_EQ(fuse_mean(one), 0.37);
}

TEST(FuseMean, EmptyIsDegenerate) {
  try {
    fuse_mean({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_data);
  }
}

TEST(FuseMean, MatchesPairwiseOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(1000);
    for (auto& v : s) v = rng.uniform01();
    EXPECT_NEAR(fuse_mean(s), oracle::pairwise_sum(s) / 1000.0, 1e-12);
  }
}

TEST(FuseMean, StaysWithinRangeProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(1 + rng.below(50), rng.uniform01());
    if (trial % 2) for (auto& v : s) v = rng.uniform01();
    const double m = fuse_mean(s);
    EXPECT_GE(m, *std::min_element(s.begin(), s.end()));
    EXPECT_LE(m, *std::max_element(s.begin(), s.end()));
  }
}

TEST(GroupAndFuse, OneRecordPerSourceCode) {
  const std::vector<ScoreRecord> recs{
      rec("a1", "B", PaiClass::print, 0.9), rec("a2", "A", PaiClass::bonafide, 0.1),
      rec("a3", "B", PaiClass::print, 0.7), rec("a4", "A", PaiClass::bonafide, 0.3),
      rec("a5", "B", PaiClass::print, 0.8), rec("a6", "A", PaiClass::bonafide, 0.2),
  };
  const auto fused = group_and_fuse(recs);
  ASSERT_EQ(fused.size(), 2u);
  EXPECT_EQ(fused[0].source_code, "A");
  EXPECT_NEAR(fused[0].id_score, 0.2, 1e-15);
  EXPECT_EQ(fused[0].patch_count, 3u);
  EXPECT_EQ(fused[1].source_code, "B");
  EXPECT_EQ(fused[1].label, Label::attack);
  EXPECT_NEAR(fused[1].id_score, 0.8, 1e-15);
}

TEST(GroupAndFuse, MixedLabelsAreIntegrityError) {
  const std::vector<ScoreRecord> recs{rec("a", "X", PaiClass::print, 0.9), rec("b", "X", PaiClass::bonafide, 0.1)};
  try {
    group_and_fuse(recs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::integrity);
    EXPECT_NE(std::string(e.what()).find("X"), std::string::npos);
  }
}

TEST(GroupAndFuse, CustomRule) {
  const std::vector<ScoreRecord> recs{rec("a", "X", PaiClass::screen, 0.9), rec("b", "X", PaiClass::screen, 0.1)};
  const auto fused = group_and_fuse(recs, [](std::span<const double> s) { return *std::max_element(s.begin(), s.end()); });
  EXPECT_EQ(fused[0].id_score, 0.9);
}

TEST(ScoresCsv, RoundTrip) {
  const std::vector<ScoreRecord> recs{rec("p1", "c1", PaiClass::screen, 0.1234567890123),
                                      rec("p2", "c2", PaiClass::bonafide, 1e-17)};
  std::ostringstream out;
  write_scores(out, recs);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "patch_id,source_code,label,pai,score");
  std::istringstream in(out.str());
  const auto back = read_scores(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].score, recs[0].score);
  EXPECT_EQ(back[1].score, recs[1].score);
  EXPECT_EQ(back[1].pai, PaiClass::bonafide);
}

TEST(ScoresCsv, RejectsBadInput) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(read_scores(in), Error) << text;
  };
  bad("id,score\n");
  bad("patch_id,source_code,label,pai,score\np,c,attack,print\n");
  bad("patch_id,source_code,label,pai,score\np,c,attack,print,1.5\n");
  bad("patch_id,source_code,label,pai,score\np,c,real,print,0.5\n");
  bad("patch_id,source_code,label,pai,score\np,c,attack,print,abc\n");
}

TEST(FusedCsv, Format) {
  const std::vector<FusedRecord> f{{"c1", Label::attack, PaiClass::print, 0.5, 3}};
  std::ostringstream out;
  write_fused(out, f);
  EXPECT_EQ(out.str(), "source_code,label,pai,id_score\nc1,attack,print,0.5\n");
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(0.75), "0.75");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

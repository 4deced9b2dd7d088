#include <gtest/gtest.h>

#include <sstream>

#include "ecocontrib/stats.hpp"
#include "ecocontrib/synth.hpp"
#include "test_support.hpp"

using namespace ecocontrib;
using namespace testing_support;

namespace {

std::string serialise(const SynthCorpus& c) {
  std::ostringstream s;
  write_events(s, c.events);
  write_dependency_graph(s, c.deps);
  return s.str();
}

}  // namespace

TEST(Synth, SameSeedSameCorpus) {
  SynthOptions opt;
  opt.users = 60;
  opt.projects = 8;
  opt.days = 120;
  opt.seed = 11;
  const auto profile = SynthProfile::load(data_dir() / "signal_profile.json");
  const auto a = serialise(generate_synthetic(opt, profile));
  EXPECT_EQ(a, serialise(generate_synthetic(opt, profile)));
  opt.seed = 12;
  EXPECT_NE(a, serialise(generate_synthetic(opt, profile)));
}

TEST(Synth, OutputParsesWithoutDiagnostics) {
  SynthOptions opt;
  opt.users = 40;
  opt.projects = 6;
  opt.days = 60;
  const auto corpus = generate_synthetic(opt, SynthProfile::load(data_dir() / "signal_profile.json"));
  std::stringstream s;
  write_events(s, corpus.events);
  const auto parsed = parse_events(s);
  EXPECT_TRUE(parsed.diagnostics.empty());
  EXPECT_EQ(parsed.events.size(), corpus.events.size());
  for (const auto& ev : corpus.events) {
    ASSERT_TRUE(ev.closed());
    if (ev.is_pr()) {
      EXPECT_TRUE(ev.merged.has_value());
    }
  }
}

TEST(Synth, ZeroEffectProfileMatchesInterceptRate) {
  auto profile = SynthProfile::load(data_dir() / "zero_effect_profile.json");
  profile.pull_requests = 60000;
  profile.issues = 0;
  profile.comments_per_activity = 0.5;
  SynthOptions opt;
  opt.users = 2000;
  opt.projects = 50;
  opt.seed = 3;
  const auto corpus = generate_synthetic(opt, profile);
  std::size_t prs = 0, merged = 0;
  for (const auto& ev : corpus.events)
    if (ev.is_pr()) {
      ++prs;
      merged += ev.was_merged();
    }
  ASSERT_GE(prs, 50000u);
  EXPECT_NEAR(double(merged) / double(prs), logistic(1.0), 0.02);
}

TEST(Synth, InvalidProfileRejected) {
  EXPECT_THROW(SynthProfile::from_json(nlohmann::json::parse(R"({"intercept": "high"})")), DataError);
  EXPECT_THROW(SynthProfile::from_json(nlohmann::json::parse(R"({"coefficients": {"stars": 1}})")),
               DataError);
  EXPECT_THROW(SynthProfile::from_json(nlohmann::json::parse(R"({"bot_fraction": 1.5})")), DataError);
  EXPECT_THROW(SynthProfile::from_json(nlohmann::json::parse(R"({"colour": 1})")), DataError);
  EXPECT_THROW(SynthProfile::from_json(nlohmann::json::parse("[]")), DataError);
  const auto dir = scratch_dir("bad_profile");
  { std::ofstream(dir / "p.json") << "{not json"; }
  try {
    SynthProfile::load(dir / "p.json");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("invalid profile"), std::string::npos);
  }
}

TEST(Synth, RejectsDegenerateOptions) {
  SynthOptions opt;
  opt.users = 1;
  EXPECT_THROW(generate_synthetic(opt, {}), DataError);
}

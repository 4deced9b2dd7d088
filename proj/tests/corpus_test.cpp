#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "ecocontrib/corpus.hpp"
#include "test_support.hpp"

using namespace ecocontrib;
using namespace testing_support;

namespace {

const char* kValidPr =
    R"({"kind":"pull_request","id":"1","project":"o/a","submitter":"alice",)"
    R"("created_at":"2021-01-01T00:00:00Z","closed_at":"2021-01-02T00:00:00Z","merged":true,)"
    R"("integrator":"bob","commit_count":3,"title":"t","description":"d",)"
    R"("comments":[{"author":"bob","at":"2021-01-01T10:00:00Z"}],)"
    R"("reviews":[{"reviewer":"carol","at":"2021-01-01T11:00:00Z"}]})";

}  // namespace

TEST(Iso8601, ParsesAndFormats) {
  EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_iso8601("2021-01-02T00:00:00Z"), 1609545600);
  EXPECT_EQ(parse_iso8601("2021-01-02T01:00:00+01:00"), 1609545600);
  EXPECT_EQ(parse_iso8601("2021-01-02T00:00:00.250Z"), 1609545600);
  EXPECT_FALSE(parse_iso8601("2021-02-30T00:00:00Z"));
  EXPECT_FALSE(parse_iso8601("yesterday"));
  EXPECT_EQ(format_iso8601(1609545600), "2021-01-02T00:00:00Z");
  EXPECT_EQ(format_iso8601(-1), "1969-12-31T23:59:59Z");
}

TEST(ParseEvents, EmptyStreamYieldsNothing) {
  std::istringstream in("");
  auto r = parse_events(in);
  EXPECT_TRUE(r.events.empty());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(ParseEvents, ValidPullRequestKeepsFields) {
  std::istringstream in(kValidPr);
  auto r = parse_events(in);
  ASSERT_EQ(r.events.size(), 1u);
  const auto& ev = r.events[0];
  EXPECT_TRUE(ev.is_pr());
  EXPECT_EQ(ev.merged, true);
  EXPECT_EQ(ev.integrator->str(), "bob");
  EXPECT_EQ(ev.commit_count, 3);
  ASSERT_EQ(ev.comments.size(), 1u);
  ASSERT_EQ(ev.reviews.size(), 1u);
  EXPECT_EQ(ev.reviews[0].reviewer.str(), "carol");
  EXPECT_EQ(*ev.closed_at - ev.created_at, 86400);
}

TEST(ParseEvents, MissingSubmitterIsReportedWithLineNumber) {
  std::istringstream in(std::string(kValidPr) + "\n" +
                        R"({"kind":"issue","id":"2","project":"o/a","created_at":"2021-01-01T00:00:00Z"})" +
                        "\n\n" + kValidPr + "\n");
  auto r = parse_events(in);
  EXPECT_EQ(r.events.size(), 2u);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
  EXPECT_EQ(r.diagnostics[0].message, "missing field: submitter");
}

TEST(ParseEvents, SchemaViolations) {
  std::istringstream in(
      "not json\n"
      R"({"kind":"issue","id":"2","project":"o/a","submitter":"x","created_at":"bad"})" "\n"
      R"({"kind":"issue","id":"3","project":"o/a","submitter":"x","created_at":"2021-01-01T00:00:00Z","merged":true})" "\n"
      R"({"kind":"issue","id":"4","project":"o/a","submitter":"x","created_at":"2021-01-02T00:00:00Z","closed_at":"2021-01-01T00:00:00Z"})" "\n");
  auto r = parse_events(in);
  EXPECT_TRUE(r.events.empty());
  ASSERT_EQ(r.diagnostics.size(), 4u);
  EXPECT_NE(r.diagnostics[0].message.find("invalid JSON"), std::string::npos);
  EXPECT_EQ(r.diagnostics[1].message, "bad timestamp: created_at");
  EXPECT_EQ(r.diagnostics[2].message, "field not allowed for issue: merged");
  EXPECT_EQ(r.diagnostics[3].message, "closed_at precedes created_at");
}

TEST(ParseEvents, JsonRoundTripPreservesEvents) {
  std::mt19937_64 rng(5);
  std::vector<ActivityEvent> events;
  for (int i = 0; i < 50; ++i) {
    auto ev = (rng() % 2) ? make_pr("pr" + std::to_string(i), "o/p" + std::to_string(rng() % 3),
                                    "u" + std::to_string(rng() % 5), Timestamp(rng() % 100000) + 4000,
                                    rng() % 2, "m")
                          : make_issue("is" + std::to_string(i), "o/q", "u1", 5000);
    ev.comments.push_back({UserId{"c" + std::to_string(rng() % 4)}, ev.created_at + 5, rng() % 7 == 0});
    ev.title = "title #" + std::to_string(i) + " \"quoted\"";
    events.push_back(ev);
  }
  std::stringstream buf;
  write_events(buf, events);
  auto back = parse_events(buf);
  ASSERT_TRUE(back.diagnostics.empty());
  std::stringstream again;
  write_events(again, back.events);
  std::stringstream first;
  write_events(first, events);
  EXPECT_EQ(first.str(), again.str());
}

TEST(DetectBots, ListMembershipAndMetadata) {
  auto dir = scratch_dir("bots");
  {
    std::ofstream f(dir / "bots.txt");
    f << "# known bots\nlisted-bot\n  spaced-bot  # trailing comment\n\n";
  }
  std::vector<ActivityEvent> events;
  for (int i = 0; i < 3; ++i) events.push_back(make_pr("b" + std::to_string(i), "o/a", "listed-bot", 100, true));
  auto flagged = make_pr("f", "o/a", "flagged", 100, true);
  flagged.submitter_is_bot = true;
  events.push_back(flagged);

  FilterConfig cfg;
  cfg.bot_lists = {dir / "bots.txt"};
  auto det = detect_bots(events, cfg);
  EXPECT_TRUE(det.bots.contains(UserId{"listed-bot"}));
  EXPECT_TRUE(det.bots.contains(UserId{"spaced-bot"}));
  EXPECT_TRUE(det.bots.contains(UserId{"flagged"}));
  EXPECT_TRUE(det.review_list.empty());
}

TEST(DetectBots, HeavyUserThresholdIsStrict) {
  std::vector<ActivityEvent> events;
  for (int i = 0; i < 401; ++i) events.push_back(make_pr("a" + std::to_string(i), "o/a", "heavy", 100 + i, true));
  for (int i = 0; i < 400; ++i) events.push_back(make_pr("b" + std::to_string(i), "o/a", "borderline", 100 + i, true));
  auto open = make_pr("open", "o/a", "borderline", 100, true);
  open.closed_at.reset();
  events.push_back(open);  // not closed: does not count

  FilterConfig cfg;
  auto det = detect_bots(events, cfg);
  EXPECT_TRUE(det.review_list.contains(UserId{"heavy"}));
  EXPECT_FALSE(det.review_list.contains(UserId{"borderline"}));
  EXPECT_FALSE(det.bots.contains(UserId{"heavy"}));  // reported, never removed
}

TEST(DetectBots, UnreadableListNamesFile) {
  FilterConfig cfg;
  cfg.bot_lists = {"/nonexistent/bots.txt"};
  try {
    detect_bots({}, cfg);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/bots.txt"), std::string::npos);
  }
}

TEST(FilterActivities, CriteriaAndAttribution) {
  std::vector<ActivityEvent> events;
  events.push_back(make_pr("ok", "o/a", "human", 100, true));
  events.push_back(make_pr("ghost", "o/a", "ghost", 100, true));
  auto open = make_pr("open", "o/a", "human", 100, true);
  open.closed_at.reset();
  events.push_back(open);
  auto incomplete = make_pr("incomplete", "o/a", "human", 100, true);
  incomplete.commit_count.reset();
  events.push_back(incomplete);
  events.push_back(make_pr("bot", "o/a", "dependabot", 100, true));
  // Ghost and open: the first failing criterion wins.
  auto ghost_open = make_pr("ghost-open", "o/a", "ghost", 100, true);
  ghost_open.closed_at.reset();
  events.push_back(ghost_open);
  events.push_back(make_issue("issue", "o/a", "human", 200));

  FilterConfig cfg;
  std::set<UserId> bots{UserId{"dependabot"}};
  FilterReport rep;
  auto kept = filter_activities(events, cfg, bots, &rep);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].id, "ok");
  EXPECT_EQ(kept[1].id, "issue");
  EXPECT_EQ(rep.removed[std::size_t(RemovalReason::Ghost)], 2u);
  EXPECT_EQ(rep.removed[std::size_t(RemovalReason::NotClosed)], 1u);
  EXPECT_EQ(rep.removed[std::size_t(RemovalReason::MissingData)], 1u);
  EXPECT_EQ(rep.removed[std::size_t(RemovalReason::Bot)], 1u);
  EXPECT_EQ(rep.retained + rep.removed_total(), events.size());
}

TEST(FilterActivities, CustomGhostLogin) {
  std::vector<ActivityEvent> events = {make_pr("a", "o/a", "deleted-user", 100, true),
                                       make_pr("b", "o/a", "ghost", 100, true)};
  FilterConfig cfg;
  cfg.ghost_login = "deleted-user";
  auto kept = filter_activities(events, cfg, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "b");
}

TEST(FilterActivities, IdempotentAndExcludesBotsProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ActivityEvent> events;
    const int n = int(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const std::string user = (rng() % 10 == 0) ? "ghost" : "u" + std::to_string(rng() % 8);
      auto ev = make_pr(std::to_string(i), "o/a", user, 1000 + Timestamp(rng() % 100), rng() % 2);
      if (rng() % 6 == 0) ev.closed_at.reset();
      if (rng() % 6 == 0) ev.merged.reset();
      events.push_back(ev);
    }
    FilterConfig cfg;
    std::set<UserId> bots{UserId{"u1"}, UserId{"u2"}};
    FilterReport rep;
    auto once = filter_activities(events, cfg, bots, &rep);
    auto twice = filter_activities(once, cfg, bots);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].id, twice[i].id);
    for (const auto& ev : once) EXPECT_FALSE(bots.contains(ev.submitter));
    EXPECT_EQ(rep.retained + rep.removed_total(), events.size());

    auto det = detect_bots(events, FilterConfig{{}, 3, true, "ghost"});
    for (const auto& u : det.review_list) EXPECT_FALSE(det.bots.contains(u));
  }
}

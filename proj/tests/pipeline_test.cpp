#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ecocontrib/pipeline.hpp"
#include "test_support.hpp"

using namespace ecocontrib;
using namespace testing_support;

namespace {

struct Captured {
  std::ostringstream out, err;
  CommandIo io() { return {out, err}; }
};

fs::path ingest_fixture(const std::string& name, const char* events = "fixture_events.jsonl",
                        const char* deps = "fixture_deps.csv") {
  const auto ws = scratch_dir(name);
  IngestOptions opt;
  opt.events = {data_dir() / events};
  opt.deps = data_dir() / deps;
  opt.out = ws;
  Captured c;
  EXPECT_EQ(cmd_ingest(opt, c.io()), kExitOk) << c.err.str();
  return ws;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ECOCONTRIB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Ingest, WritesWorkspaceAndReport) {
  const auto ws = ingest_fixture("ingest");
  const WorkspaceLayout layout{ws};
  EXPECT_TRUE(fs::exists(layout.events()));
  EXPECT_TRUE(fs::exists(layout.deps()));
  const auto report = nlohmann::json::parse(read_file(layout.filter_report()));
  EXPECT_EQ(report["parsed"], 5);
  EXPECT_EQ(report["retained"], 5);
  EXPECT_EQ(report["removed_total"], 0);
  EXPECT_EQ(report["dependency_edges"], 1);
}

TEST(Ingest, SecondRunIsUpToDate) {
  const auto ws = ingest_fixture("ingest_rerun");
  IngestOptions opt;
  opt.events = {data_dir() / "fixture_events.jsonl"};
  opt.deps = data_dir() / "fixture_deps.csv";
  opt.out = ws;
  Captured c;
  ASSERT_EQ(cmd_ingest(opt, c.io()), kExitOk);
  EXPECT_EQ(c.out.str(), "ingest: up to date\n");
  opt.force = true;
  Captured forced;
  ASSERT_EQ(cmd_ingest(opt, forced.io()), kExitOk);
  EXPECT_NE(forced.out.str(), "ingest: up to date\n");
}

TEST(Ingest, MissingManifestNamesPath) {
  IngestOptions opt;
  opt.events = {data_dir() / "fixture_events.jsonl"};
  opt.deps = data_dir() / "no_such_deps.csv";
  opt.out = scratch_dir("ingest_missing");
  try {
    Captured c;
    cmd_ingest(opt, c.io());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no_such_deps.csv"), std::string::npos);
  }
}

TEST(Ingest, MalformedLinesAreReportedAndSkipped) {
  const auto dir = scratch_dir("ingest_malformed");
  {
    std::ofstream f(dir / "events.jsonl");
    f << read_file(data_dir() / "fixture_events.jsonl") << "{\"kind\":\"pull_request\"}\nnot json\n";
  }
  IngestOptions opt;
  opt.events = {dir / "events.jsonl"};
  opt.deps = data_dir() / "fixture_deps.csv";
  opt.out = dir / "ws";
  Captured c;
  ASSERT_EQ(cmd_ingest(opt, c.io()), kExitOk);
  const auto report = nlohmann::json::parse(read_file(WorkspaceLayout{opt.out}.filter_report()));
  EXPECT_EQ(report["malformed_lines"], 2);
  EXPECT_EQ(report["retained"], 5);
  EXPECT_NE(c.err.str().find(":7:"), std::string::npos);
}

TEST(Features, DefaultsRecordedInMetadata) {
  const auto ws = ingest_fixture("features_meta");
  FeaturesOptions opt;
  opt.workspace = ws;
  opt.out = ws / "features.csv";
  Captured c;
  ASSERT_EQ(cmd_features(opt, c.io()), kExitOk) << c.err.str();
  const auto meta = nlohmann::json::parse(read_file(ws / "features.meta.json"));
  EXPECT_EQ(meta["config"]["window_days"], 90);
  EXPECT_EQ(meta["config"]["cap"], 688);
  EXPECT_EQ(meta["columns"].size(), 35u);
  EXPECT_TRUE(meta["cooks_outliers"].contains("ecosystem"));
  EXPECT_TRUE(fs::exists(ws / "features.transformed.csv"));
}

TEST(Features, FixtureOutputMatchesGoldenFile) {
  const auto ws = ingest_fixture("features_golden");
  FeaturesOptions opt;
  opt.workspace = ws;
  opt.out = ws / "features.csv";
  Captured c;
  ASSERT_EQ(cmd_features(opt, c.io()), kExitOk);
  EXPECT_EQ(read_file(opt.out), read_file(data_dir() / "fixture_golden.csv"));
}

TEST(Features, RerunIsByteIdenticalAndCached) {
  const auto ws = ingest_fixture("features_rerun");
  FeaturesOptions opt;
  opt.workspace = ws;
  opt.out = ws / "a.csv";
  Captured c1, c2, c3;
  ASSERT_EQ(cmd_features(opt, c1.io()), kExitOk);
  const auto first = read_file(opt.out);
  const auto first_meta = read_file(ws / "a.meta.json");
  ASSERT_EQ(cmd_features(opt, c2.io()), kExitOk);
  EXPECT_EQ(c2.out.str(), "features: up to date\n");
  opt.force = true;
  opt.config.threads = 4;
  ASSERT_EQ(cmd_features(opt, c3.io()), kExitOk);
  EXPECT_EQ(read_file(opt.out), first);
  EXPECT_EQ(read_file(ws / "a.meta.json"), first_meta);
}

TEST(Features, RequiresIngestedWorkspace) {
  FeaturesOptions opt;
  opt.workspace = scratch_dir("features_empty");
  Captured c;
  EXPECT_THROW(cmd_features(opt, c.io()), DataError);
}

TEST(Metric, CentralityOfFixture) {
  const auto ws = ingest_fixture("metric", "metric_events.jsonl", "empty_deps.csv");
  MetricOptions opt;
  opt.workspace = ws;
  opt.user = "A";
  opt.project = "org/p";
  opt.at = "1970-01-01T00:00:10Z";
  Captured c;
  ASSERT_EQ(cmd_metric(opt, c.io()), kExitOk);
  EXPECT_EQ(c.out.str(), "1\n");
  EXPECT_NE(c.err.str().find("unknown project"), std::string::npos);

  opt.at = "10";
  Captured epoch;
  ASSERT_EQ(cmd_metric(opt, epoch.io()), kExitOk);
  EXPECT_EQ(epoch.out.str(), "1\n");
}

TEST(Metric, UnknownUserIsZeroWithWarning) {
  const auto ws = ingest_fixture("metric_unknown", "metric_events.jsonl", "empty_deps.csv");
  MetricOptions opt;
  opt.workspace = ws;
  opt.user = "nobody";
  opt.project = "org/q1";
  opt.at = "100";
  Captured c;
  ASSERT_EQ(cmd_metric(opt, c.io()), kExitOk);
  EXPECT_EQ(c.out.str(), "0\n");
  EXPECT_NE(c.err.str().find("unknown user: nobody"), std::string::npos);
}

TEST(Metric, SelfStrengthIsZeroWithWarning) {
  const auto ws = ingest_fixture("metric_self", "metric_events.jsonl", "empty_deps.csv");
  MetricOptions opt;
  opt.workspace = ws;
  opt.user = "A";
  opt.other = "A";
  opt.kind = "strength";
  opt.project = "org/p";
  opt.at = "100";
  Captured c;
  ASSERT_EQ(cmd_metric(opt, c.io()), kExitOk);
  EXPECT_EQ(c.out.str(), "0\n");
  EXPECT_NE(c.err.str().find("self-collaboration"), std::string::npos);
}

TEST(Layers, PrintsCountsAndWeights) {
  const auto ws = ingest_fixture("layers");
  Captured c;
  ASSERT_EQ(cmd_layers(ws, c.io()), kExitOk);
  EXPECT_NE(c.out.str().find("pr_review,4,0.159090909"), std::string::npos) << c.out.str();
}

TEST(Workspace, ConcurrentCommandIsRejected) {
  const auto ws = ingest_fixture("locked");
  WorkspaceLock held(ws);
  FeaturesOptions opt;
  opt.workspace = ws;
  opt.out = ws / "f.csv";
  Captured c;
  try {
    cmd_features(opt, c.io());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("locked"), std::string::npos);
  }
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  const auto data = data_dir().string();
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("features --window-days -3"), 1);
  EXPECT_EQ(run_cli("ingest --events " + data + "fixture_events.jsonl --deps " + data +
                    "missing.csv --out " + dir.string()),
            2);
  EXPECT_EQ(run_cli("ingest --events " + data + "fixture_events.jsonl --deps " + data +
                    "fixture_deps.csv --out " + dir.string()),
            0);
  EXPECT_EQ(run_cli("features --workspace " + dir.string() + " --out " + (dir / "f.csv").string()), 0);
  EXPECT_EQ(read_file(dir / "f.csv"), read_file(data_dir() / "fixture_golden.csv"));
  EXPECT_EQ(run_cli("metric --workspace " + dir.string() + " --user alice --project acme/app --at 2021-01-10T00:00:00Z"),
            0);
  EXPECT_EQ(run_cli("synth --users 20 --projects 3 --days 30 --effect-profile " + data +
                    "zero_effect_profile.json --out " + (dir / "synth").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "synth" / "events.jsonl"));
}

// Command-line driver: ingest -> features, plus metric/layers audit tools and
// a synthetic corpus generator.

#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "ecocontrib/pipeline.hpp"

using namespace ecocontrib;

int main(int argc, char** argv) {
  CLI::App app{"Ecosystem contribution and collaboration features for pull request analysis"};
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse and filter raw events into a workspace");
  ingest_cmd->add_option("--events", ingest.events, "Event log (JSON lines)")->required();
  ingest_cmd->add_option("--deps", ingest.deps, "Dependency manifest CSV")->required();
  ingest_cmd->add_option("--bots", ingest.bots, "Bot list file");
  ingest_cmd->add_option("--ghost-login", ingest.ghost_login, "Deleted-account sentinel login")
      ->capture_default_str();
  ingest_cmd->add_option("--heavy-user-threshold", ingest.heavy_user_threshold,
                         "Closed-PR count above which users are listed for review")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--out", ingest.out, "Workspace directory")->required();
  ingest_cmd->add_flag("--force", ingest.force, "Rerun even if up to date");

  FeaturesOptions features;
  features.config.threads = std::max(1u, std::thread::hardware_concurrency());
  auto* features_cmd = app.add_subcommand("features", "Build the feature matrix");
  features_cmd->add_option("--workspace", features.workspace, "Workspace directory")
      ->capture_default_str();
  features_cmd->add_option("--window-days", features.config.window_days)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  features_cmd->add_option("--cap", features.config.cap)->capture_default_str()->check(CLI::PositiveNumber);
  features_cmd->add_option("--cap-fraction", features.config.cap_fraction)
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  features_cmd->add_option("--seed", features.config.rng_seed)->capture_default_str();
  features_cmd->add_option("--vif-threshold", features.config.vif_threshold)->capture_default_str();
  features_cmd->add_option("--spearman-threshold", features.config.spearman_threshold)
      ->capture_default_str();
  features_cmd->add_option("--cooks-multiplier", features.config.cooks_multiplier)
      ->capture_default_str();
  features_cmd->add_option("--threads", features.config.threads)->check(CLI::PositiveNumber);
  features_cmd->add_option("--out", features.out, "Output CSV")->capture_default_str();
  features_cmd->add_flag("--force", features.force, "Rerun even if up to date");

  MetricOptions metric;
  auto* metric_cmd = app.add_subcommand("metric", "Evaluate one collaboration metric");
  metric_cmd->add_option("--workspace", metric.workspace)->capture_default_str();
  metric_cmd->add_option("--user", metric.user)->required();
  metric_cmd->add_option("--project", metric.project)->required();
  metric_cmd->add_option("--at", metric.at, "ISO-8601 time or epoch seconds")->required();
  metric_cmd->add_option("--kind", metric.kind)
      ->capture_default_str()
      ->check(CLI::IsMember({"centrality", "strength"}));
  metric_cmd->add_option("--other", metric.other, "Second user for --kind strength");
  metric_cmd->add_option("--window-days", metric.window_days, "Edge window; 0 = unbounded")
      ->capture_default_str();

  std::filesystem::path layers_ws = ".";
  auto* layers_cmd = app.add_subcommand("layers", "Print per-layer edge counts and weights");
  layers_cmd->add_option("--workspace", layers_ws)->capture_default_str();

  SynthCommandOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--users", synth.synth.users)->capture_default_str();
  synth_cmd->add_option("--projects", synth.synth.projects)->capture_default_str();
  synth_cmd->add_option("--days", synth.synth.days)->capture_default_str();
  synth_cmd->add_option("--effect-profile", synth.profile, "Profile JSON")->required();
  synth_cmd->add_option("--seed", synth.synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*features_cmd) return cmd_features(features);
    if (*metric_cmd) return cmd_metric(metric);
    if (*layers_cmd) return cmd_layers(layers_ws);
    if (*synth_cmd) return cmd_synth(synth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

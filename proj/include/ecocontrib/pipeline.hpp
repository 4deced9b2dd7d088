#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecocontrib/collabgraph.hpp"
#include "ecocontrib/corpus.hpp"
#include "ecocontrib/depgraph.hpp"
#include "ecocontrib/features.hpp"
#include "ecocontrib/stats.hpp"
#include "ecocontrib/synth.hpp"
#include "ecocontrib/workspace.hpp"

namespace ecocontrib {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Canonical corpus files inside a workspace.
struct WorkspaceLayout {
  fs::path root;

  fs::path events() const { return root / "corpus" / "events.jsonl"; }
  fs::path deps() const { return root / "corpus" / "deps.csv"; }
  fs::path filter_report() const { return root / "corpus" / "filter_report.json"; }
};

struct IngestOptions {
  std::vector<fs::path> events;
  fs::path deps;
  std::vector<fs::path> bots;
  std::string ghost_login = "ghost";
  std::int64_t heavy_user_threshold = 400;
  fs::path out;
  bool force = false;
};

struct FeaturesOptions {
  fs::path workspace = ".";
  PipelineConfig config;
  fs::path out = "features.csv";
  bool force = false;
};

struct MetricOptions {
  fs::path workspace = ".";
  std::string user;
  std::string project;
  std::string at;
  std::string kind = "centrality";
  std::string other;
  std::int64_t window_days = 0;  // 0: no lower bound on edge time
};

struct SynthCommandOptions {
  SynthOptions synth;
  fs::path profile;
  fs::path out;
};

struct CommandIo {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

namespace detail {

inline std::string abs_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

inline void require_file(const fs::path& p, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw DataError(std::string(what) + " not found: " + p.string());
}

inline nlohmann::json diagnostics_json(const std::vector<ParseDiagnostic>& diags, const fs::path& file,
                                       std::size_t limit = 100) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < diags.size() && i < limit; ++i)
    arr.push_back({{"file", file.string()}, {"line", diags[i].line}, {"message", diags[i].message}});
  return arr;
}

/// Parses a timestamp flag given either as ISO-8601 or as epoch seconds.
inline Timestamp parse_time_flag(const std::string& s) {
  if (auto t = parse_iso8601(s)) return *t;
  Timestamp v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError("bad timestamp: " + s);
  return v;
}

struct LoadedCorpus {
  std::vector<ActivityEvent> events;
  DependencyGraph deps;
};

inline LoadedCorpus load_workspace_corpus(const WorkspaceLayout& ws) {
  require_file(ws.events(), "workspace corpus (run ingest first)");
  require_file(ws.deps(), "workspace dependency graph (run ingest first)");
  LoadedCorpus c;
  auto parsed = parse_events_file(ws.events());
  if (!parsed.diagnostics.empty())
    throw DataError("corrupt workspace corpus at line " +
                    std::to_string(parsed.diagnostics.front().line) + ": " +
                    parsed.diagnostics.front().message);
  c.events = std::move(parsed.events);
  c.deps = build_dependency_graph_file(ws.deps()).graph;
  return c;
}

inline void write_text_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write file: " + p.string());
  f << content;
}

}  // namespace detail

/// Parses, filters and stores the corpus in the workspace.
inline int cmd_ingest(const IngestOptions& opt, CommandIo io = {}) {
  if (opt.events.empty()) throw DataError("no events files given");
  for (const auto& p : opt.events) detail::require_file(p, "events file");
  detail::require_file(opt.deps, "dependency manifest");
  for (const auto& p : opt.bots) detail::require_file(p, "bot list");

  const WorkspaceLayout ws{opt.out};
  WorkspaceLock lock(ws.root);

  const nlohmann::json config = {{"ghost_login", opt.ghost_login},
                                 {"heavy_user_threshold", opt.heavy_user_threshold},
                                 {"drop_ghost", true}};
  StageManifest current;
  current.config_digest = config_digest(config);
  for (const auto& p : opt.events) current.inputs["events:" + detail::abs_string(p)] = file_digest(p);
  current.inputs["deps:" + detail::abs_string(opt.deps)] = file_digest(opt.deps);
  for (const auto& p : opt.bots) current.inputs["bots:" + detail::abs_string(p)] = file_digest(p);

  if (!opt.force)
    if (auto prev = StageManifest::load(ws.root, "ingest"); prev && prev->up_to_date(current)) {
      io.out << "ingest: up to date\n";
      return kExitOk;
    }

  FilterConfig fcfg;
  fcfg.bot_lists = opt.bots;
  fcfg.heavy_user_threshold = opt.heavy_user_threshold;
  fcfg.ghost_login = opt.ghost_login;

  std::vector<ActivityEvent> events;
  auto parse_diags = nlohmann::json::array();
  std::size_t malformed = 0;
  for (const auto& p : opt.events) {
    auto parsed = parse_events_file(p);
    malformed += parsed.diagnostics.size();
    for (auto& d : detail::diagnostics_json(parsed.diagnostics, p)) parse_diags.push_back(d);
    for (const auto& d : parsed.diagnostics)
      io.err << p.string() << ":" << d.line << ": " << d.message << '\n';
    std::move(parsed.events.begin(), parsed.events.end(), std::back_inserter(events));
  }

  auto manifest = build_dependency_graph_file(opt.deps);
  for (const auto& d : manifest.diagnostics)
    io.err << opt.deps.string() << ": row " << d.row << ": " << d.message << '\n';

  const auto detection = detect_bots(events, fcfg);
  FilterReport report;
  const auto kept = filter_activities(events, fcfg, detection.bots, &report);

  {
    std::ostringstream s;
    write_events(s, kept);
    detail::write_text_file(ws.events(), s.str());
  }
  {
    std::ostringstream s;
    write_dependency_graph(s, manifest.graph);
    detail::write_text_file(ws.deps(), s.str());
  }

  nlohmann::json removed;
  for (std::size_t i = 0; i < kRemovalReasonNames.size(); ++i)
    removed[kRemovalReasonNames[i]] = report.removed[i];
  auto review = nlohmann::json::array();
  for (const auto& u : detection.review_list) review.push_back(u.str());
  auto manifest_diags = nlohmann::json::array();
  for (const auto& d : manifest.diagnostics)
    manifest_diags.push_back({{"row", d.row}, {"message", d.message}});
  const nlohmann::json filter_report = {
      {"config", config},
      {"config_digest", current.config_digest},
      {"parsed", report.input},
      {"malformed_lines", malformed},
      {"parse_diagnostics", parse_diags},
      {"retained", report.retained},
      {"removed", removed},
      {"removed_total", report.removed_total()},
      {"bots_known", detection.bots.size()},
      {"heavy_user_review_list", review},
      {"dependency_edges", manifest.graph.size()},
      {"manifest_diagnostics", manifest_diags}};
  detail::write_text_file(ws.filter_report(), filter_report.dump(2) + "\n");

  for (const auto& p : {ws.events(), ws.deps(), ws.filter_report()})
    current.outputs[detail::abs_string(p)] = file_digest(p);
  current.save(ws.root, "ingest");

  io.out << "ingest: parsed " << report.input << " events (" << malformed << " malformed lines), retained "
         << report.retained << ", removed " << report.removed_total() << " (ghost "
         << report.removed[0] << ", not_closed " << report.removed[1] << ", missing_data "
         << report.removed[2] << ", bot " << report.removed[3] << "); "
         << detection.review_list.size() << " heavy users listed for review\n";
  return kExitOk;
}

inline fs::path metadata_path_for(const fs::path& csv) {
  auto p = csv;
  return p.replace_extension(".meta.json");
}

inline fs::path transformed_path_for(const fs::path& csv) {
  auto p = csv;
  return p.replace_extension(".transformed.csv");
}

inline void write_matrix_csv(std::ostream& out, const std::vector<FeatureRow>& rows,
                             const NumericMatrix& m) {
  out << "pr_id,project,submitter";
  for (const auto& c : m.columns) out << ',' << c;
  out << ",label_merged\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << detail::csv_field(rows[i].pr_id) << ',' << detail::csv_field(rows[i].project.str()) << ','
        << detail::csv_field(rows[i].submitter.str());
    for (Eigen::Index j = 0; j < m.data.cols(); ++j)
      out << ',' << format_real(m.data(Eigen::Index(i), j));
    out << ',' << (rows[i].merged ? 1 : 0) << '\n';
  }
}

namespace detail {

inline nlohmann::json number_or_string(double x) {
  if (std::isinf(x)) return "inf";
  if (std::isnan(x)) return "nan";
  return x;
}

}  // namespace detail

/// Builds the feature matrix from the workspace corpus.
inline int cmd_features(const FeaturesOptions& opt, CommandIo io = {}) {
  const auto& cfg = opt.config;
  cfg.validate();
  const WorkspaceLayout ws{opt.workspace};
  WorkspaceLock lock(ws.root);

  const nlohmann::json config = {{"window_days", cfg.window_days},
                                 {"cap", cfg.cap},
                                 {"cap_fraction", cfg.cap_fraction},
                                 {"vif_threshold", cfg.vif_threshold},
                                 {"spearman_threshold", cfg.spearman_threshold},
                                 {"cooks_multiplier", cfg.cooks_multiplier},
                                 {"seed", cfg.rng_seed}};
  detail::require_file(ws.events(), "workspace corpus (run ingest first)");
  detail::require_file(ws.deps(), "workspace dependency graph (run ingest first)");
  StageManifest current;
  current.config_digest = config_digest(config);
  current.inputs["events"] = file_digest(ws.events());
  current.inputs["deps"] = file_digest(ws.deps());
  current.inputs["out"] = detail::abs_string(opt.out);
  if (!opt.force)
    if (auto prev = StageManifest::load(ws.root, "features"); prev && prev->up_to_date(current)) {
      io.out << "features: up to date\n";
      return kExitOk;
    }

  const auto corpus = detail::load_workspace_corpus(ws);
  const auto graph = build_graph(corpus.events);
  std::vector<std::string> diags;
  const auto assembled = assemble_matrix(corpus.events, corpus.deps, graph, cfg, &diags);
  if (assembled.empty()) throw DataError("corpus contains no closed pull requests");

  CapReport cap_report;
  const auto rows = cap_sampling(assembled, cfg.cap, cfg.cap_fraction, cfg.rng_seed, &cap_report);

  {
    std::ostringstream s;
    write_feature_csv(s, rows);
    detail::write_text_file(opt.out, s.str());
  }

  const auto transformed = transform_matrix(rows);
  {
    std::ostringstream s;
    write_matrix_csv(s, rows, transformed);
    detail::write_text_file(transformed_path_for(opt.out), s.str());
  }

  const auto screen =
      multicollinearity_screen(transformed, cfg.vif_threshold, cfg.spearman_threshold);
  nlohmann::json screen_json;
  for (std::size_t j = 0; j < screen.columns.size(); ++j)
    screen_json["vif"][screen.columns[j]] = detail::number_or_string(screen.vif[j]);
  screen_json["flagged"] = nlohmann::json::object();
  for (const auto& [col, partners] : screen.flagged) {
    auto arr = nlohmann::json::array();
    for (const auto& p : partners) arr.push_back({{"column", p.column}, {"rho", p.rho}});
    screen_json["flagged"][col] = arr;
  }
  screen_json["retained"] = screen.retained;
  screen_json["dropped"] = screen.dropped;

  Eigen::VectorXd labels(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) labels[Eigen::Index(i)] = rows[i].merged ? 1 : 0;
  nlohmann::json cooks;
  for (auto v : {ModelVariant::Ecosystem, ModelVariant::Dependency, ModelVariant::Collaborative}) {
    const auto cols = variant_columns(v);
    nlohmann::json entry = {{"predictors", cols}};
    try {
      const auto sub = transformed.select(cols);
      const auto res =
          cooks_outlier_filter(sub.data, labels, cfg.cooks_multiplier, variant_name(v));
      auto dropped = nlohmann::json::array();
      for (auto i : res.dropped) dropped.push_back(rows[i].pr_id);
      entry["threshold"] = res.threshold;
      entry["n"] = rows.size();
      entry["k"] = cols.size();
      entry["iterations"] = res.iterations;
      entry["drop_fraction"] = res.drop_fraction();
      entry["dropped_pr_ids"] = dropped;
    } catch (const DataError& e) {
      entry["error"] = e.what();
      io.err << "warning: " << e.what() << '\n';
    }
    cooks[variant_name(v)] = entry;
  }

  const auto weights = graph.edge_count() ? layer_weights(graph) : LayerWeights::uniform();
  nlohmann::json layers;
  for (auto l : kAllLayers)
    layers[layer_name(l)] = {{"edges", graph.edge_count(l)}, {"weight", weights[l]}};

  auto columns = nlohmann::json::array();
  for (std::size_t j = 0; j < transformed.columns.size(); ++j)
    columns.push_back({{"name", transformed.columns[j]},
                       {"log1p", bool(transformed.log_transformed[j])},
                       {"minmax", true}});

  const nlohmann::json meta = {
      {"config", config},
      {"config_digest", current.config_digest},
      {"seed", cfg.rng_seed},
      {"rows_assembled", assembled.size()},
      {"rows_written", rows.size()},
      {"cap_sampling",
       {{"top_projects", cap_report.top_projects}, {"capped_projects", cap_report.capped_projects}}},
      {"transformed_csv", transformed_path_for(opt.out).filename().string()},
      {"columns", columns},
      {"transform_diagnostics", transformed.diagnostics},
      {"multicollinearity", screen_json},
      {"cooks_outliers", cooks},
      {"layers", layers},
      {"diagnostics", diags}};
  detail::write_text_file(metadata_path_for(opt.out), meta.dump(2) + "\n");

  for (const auto& p : {opt.out, transformed_path_for(opt.out), metadata_path_for(opt.out)})
    current.outputs[detail::abs_string(p)] = file_digest(p);
  current.save(ws.root, "features");

  io.out << "features: " << rows.size() << " rows (" << assembled.size() << " before cap) -> "
         << opt.out.string() << '\n';
  return kExitOk;
}

/// Evaluates one collaboration metric and prints it with 9 significant digits.
inline int cmd_metric(const MetricOptions& opt, CommandIo io = {}) {
  if (opt.kind != "centrality" && opt.kind != "strength")
    throw DataError("--kind must be centrality or strength");
  if (opt.kind == "strength" && opt.other.empty()) throw DataError("--kind strength needs --other");
  const Timestamp at = detail::parse_time_flag(opt.at);
  const WorkspaceLayout ws{opt.workspace};
  WorkspaceLock lock(ws.root);
  const auto corpus = detail::load_workspace_corpus(ws);
  const auto graph = build_graph(corpus.events);

  const UserId user{opt.user};
  const ProjectId project{opt.project};
  bool known_project = false;
  for (const auto& ev : corpus.events) known_project |= ev.project == project;
  if (!graph.has_user(user)) io.err << "warning: unknown user: " << opt.user << '\n';
  if (!known_project) io.err << "warning: unknown project: " << opt.project << '\n';

  double value = 0;
  if (graph.edge_count() > 0) {
    const auto weights = layer_weights(graph);
    const Timestamp from = opt.window_days > 0 ? at - opt.window_days * kSecondsPerDay : kNoLowerBound;
    if (opt.kind == "centrality") {
      value = second_order_centrality(graph, weights, user, project, at, from);
    } else {
      const UserId other{opt.other};
      if (other == user)
        io.err << "warning: --other equals --user; self-collaboration is 0\n";
      else if (!graph.has_user(other))
        io.err << "warning: unknown user: " << opt.other << '\n';
      value = link_strength(graph, weights, user, other, project, at, from);
    }
  }
  io.out << format_real(value) << '\n';
  return kExitOk;
}

/// Prints per-layer edge counts and weights of the workspace graph.
inline int cmd_layers(const fs::path& workspace, CommandIo io = {}) {
  const WorkspaceLayout ws{workspace};
  WorkspaceLock lock(ws.root);
  const auto corpus = detail::load_workspace_corpus(ws);
  const auto graph = build_graph(corpus.events);
  const auto weights = graph.edge_count() ? layer_weights(graph) : LayerWeights{};
  io.out << "layer,edges,weight\n";
  for (auto l : kAllLayers)
    io.out << layer_name(l) << ',' << graph.edge_count(l) << ',' << format_real(weights[l]) << '\n';
  return kExitOk;
}

/// Writes events.jsonl, deps.csv and bots.txt for a synthetic corpus.
inline int cmd_synth(const SynthCommandOptions& opt, CommandIo io = {}) {
  const auto profile = SynthProfile::load(opt.profile);
  const auto corpus = generate_synthetic(opt.synth, profile);
  write_synthetic(corpus, opt.out);
  std::size_t prs = 0, merged = 0;
  for (const auto& ev : corpus.events)
    if (ev.is_pr()) {
      ++prs;
      merged += ev.was_merged();
    }
  io.out << "synth: " << corpus.events.size() << " events (" << prs << " pull requests, "
         << merged << " merged), " << corpus.deps.size() << " dependency edges -> "
         << opt.out.string() << '\n';
  return kExitOk;
}

}  // namespace ecocontrib

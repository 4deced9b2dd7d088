#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ecocontrib/collabgraph.hpp"
#include "ecocontrib/corpus.hpp"
#include "ecocontrib/depgraph.hpp"
#include "ecocontrib/types.hpp"

namespace ecocontrib {

/// Contribution bucket: the four dependency scopes plus their ecosystem total.
enum class Bucket : std::uint8_t { Intra, Ecosystem, Downstream, Upstream, NonDependency };
inline constexpr std::size_t kBucketCount = 5;
inline constexpr std::array<Bucket, kBucketCount> kAllBuckets = {
    Bucket::Intra, Bucket::Ecosystem, Bucket::Downstream, Bucket::Upstream, Bucket::NonDependency};

inline constexpr const char* bucket_name(Bucket b) {
  constexpr std::array<const char*, kBucketCount> names = {"intra", "ecosystem", "downstream",
                                                           "upstream", "nondependency"};
  return names[std::size_t(b)];
}

inline constexpr Bucket bucket_of(Scope s) {
  switch (s) {
    case Scope::IntraProject: return Bucket::Intra;
    case Scope::Downstream: return Bucket::Downstream;
    case Scope::Upstream: return Bucket::Upstream;
    case Scope::NonDependency: return Bucket::NonDependency;
  }
  return Bucket::NonDependency;
}

struct ContributionCounts {
  std::int64_t prs_submitted = 0;
  std::int64_t prs_merged = 0;
  std::int64_t pr_comments = 0;
  std::int64_t issues_submitted = 0;
  std::int64_t issue_comments = 0;

  /// 0 when nothing was submitted.
  double pr_merge_ratio() const {
    return prs_submitted > 0 ? double(prs_merged) / double(prs_submitted) : 0.0;
  }

  ContributionCounts& operator+=(const ContributionCounts& o) {
    prs_submitted += o.prs_submitted;
    prs_merged += o.prs_merged;
    pr_comments += o.pr_comments;
    issues_submitted += o.issues_submitted;
    issue_comments += o.issue_comments;
    return *this;
  }
  friend bool operator==(const ContributionCounts&, const ContributionCounts&) = default;
};

struct ScopedContributions {
  std::array<ContributionCounts, kBucketCount> by{};

  const ContributionCounts& operator[](Bucket b) const { return by[std::size_t(b)]; }
  ContributionCounts& operator[](Bucket b) { return by[std::size_t(b)]; }
};

struct ControlVars {
  std::int64_t commit_count = 0;
  double age_minutes = 0;
  std::int64_t integrator_experience = 0;
  bool self_integrated = false;
  bool has_comments = false;
  bool external_comment = false;
  bool has_hash_reference = false;
  bool is_newcomer = true;
  bool integrator_missing = false;  // diagnostic, not exported as a feature
};

struct FeatureRow {
  std::string pr_id;
  ProjectId project;
  UserId submitter;
  bool merged = false;
  ControlVars controls;
  ScopedContributions contributions;
  double centrality = 0;
  double direct_collab = 0;
};

struct PipelineConfig {
  std::int64_t window_days = 90;
  std::int64_t cap = 688;
  double cap_fraction = 0.02;
  double vif_threshold = 5;
  double spearman_threshold = 0.5;
  double cooks_multiplier = 4;
  std::uint64_t rng_seed = 0;
  unsigned threads = 1;

  Timestamp window_seconds() const { return window_days * kSecondsPerDay; }
  void validate() const {
    if (window_days <= 0 || cap <= 0 || cap_fraction <= 0 || vif_threshold <= 0 ||
        spearman_threshold <= 0 || cooks_multiplier <= 0)
      throw DataError("pipeline thresholds must be positive");
  }
};

/// Per-user and per-project lookups over a filtered corpus, built once and
/// shared read-only by all feature queries.
class CorpusIndex {
 public:
  struct Record {
    Timestamp closed_at;
    const ProjectId* project;
    ContributionCounts counts;
  };

  explicit CorpusIndex(const std::vector<ActivityEvent>& events) {
    for (const auto& ev : events) {
      if (!ev.closed_at) continue;
      const Timestamp closed = *ev.closed_at;
      std::map<UserId, ContributionCounts> touched;
      auto& mine = touched[ev.submitter];
      if (ev.is_pr()) {
        mine.prs_submitted = 1;
        mine.prs_merged = ev.was_merged() ? 1 : 0;
        if (ev.was_merged()) merged_[key(ev.submitter, ev.project)].push_back(closed);
        if (ev.integrator) closed_by_[key(*ev.integrator, ev.project)].push_back(closed);
      } else {
        mine.issues_submitted = 1;
      }
      for (const auto& c : ev.comments) {
        auto& cc = touched[c.author];
        (ev.is_pr() ? cc.pr_comments : cc.issue_comments) += 1;
      }
      for (auto& [user, counts] : touched)
        by_user_[user.str()].push_back({closed, &ev.project, counts});
    }
    auto by_time = [](const Record& a, const Record& b) { return a.closed_at < b.closed_at; };
    for (auto& [_, recs] : by_user_) std::stable_sort(recs.begin(), recs.end(), by_time);
    for (auto& [_, ts] : merged_) std::sort(ts.begin(), ts.end());
    for (auto& [_, ts] : closed_by_) std::sort(ts.begin(), ts.end());
  }

  /// Records of `user` with closed_at in [from, to).
  std::pair<const Record*, const Record*> records(const UserId& user, Timestamp from,
                                                  Timestamp to) const {
    auto it = by_user_.find(user.str());
    if (it == by_user_.end() || from >= to) return {nullptr, nullptr};
    const auto& v = it->second;
    auto cmp = [](const Record& r, Timestamp x) { return r.closed_at < x; };
    auto lo = std::lower_bound(v.begin(), v.end(), from, cmp);
    auto hi = std::lower_bound(lo, v.end(), to, cmp);
    return {v.data() + (lo - v.begin()), v.data() + (hi - v.begin())};
  }

  /// Merged PRs by user in project closed in [from, to).
  std::int64_t merged_prs(const UserId& user, const ProjectId& project, Timestamp from,
                          Timestamp to) const {
    return count_in(merged_, key(user, project), from, to);
  }

  /// PRs in project closed by integrator in [from, to).
  std::int64_t integrated_prs(const UserId& integrator, const ProjectId& project, Timestamp from,
                              Timestamp to) const {
    return count_in(closed_by_, key(integrator, project), from, to);
  }

 private:
  static std::string key(const UserId& u, const ProjectId& p) {
    std::string k = u.str();
    k += '\n';
    k += p.str();
    return k;
  }

  static std::int64_t count_in(const std::unordered_map<std::string, std::vector<Timestamp>>& m,
                               const std::string& k, Timestamp from, Timestamp to) {
    auto it = m.find(k);
    if (it == m.end() || from >= to) return 0;
    const auto& v = it->second;
    return std::lower_bound(v.begin(), v.end(), to) - std::lower_bound(v.begin(), v.end(), from);
  }

  std::unordered_map<std::string, std::vector<Record>> by_user_;
  std::unordered_map<std::string, std::vector<Timestamp>> merged_;
  std::unordered_map<std::string, std::vector<Timestamp>> closed_by_;
};

/// Past activity of `user` in the window [t - window, t), bucketed by the
/// scope of each activity's project relative to `focal`.
inline ScopedContributions contribution_counts(const CorpusIndex& index, const DependencyGraph& deps,
                                               const UserId& user, const ProjectId& focal,
                                               Timestamp t, std::int64_t window_days) {
  ScopedContributions out;
  auto [lo, hi] = index.records(user, t - window_days * kSecondsPerDay, t);
  for (auto r = lo; r != hi; ++r) {
    const Bucket b = bucket_of(deps.classify(focal, *r->project));
    out[b] += r->counts;
    if (b != Bucket::Intra) out[Bucket::Ecosystem] += r->counts;
  }
  return out;
}

inline ScopedContributions contribution_counts(const std::vector<ActivityEvent>& events,
                                               const DependencyGraph& deps, const UserId& user,
                                               const ProjectId& focal, Timestamp t,
                                               std::int64_t window_days) {
  return contribution_counts(CorpusIndex(events), deps, user, focal, t, window_days);
}

/// True unless the user had a PR merged in the project before t (all history).
inline bool is_newcomer(const CorpusIndex& index, const UserId& user, const ProjectId& project,
                        Timestamp t) {
  return index.merged_prs(user, project, kNoLowerBound, t) == 0;
}

inline bool is_newcomer(const std::vector<ActivityEvent>& events, const UserId& user,
                        const ProjectId& project, Timestamp t) {
  return is_newcomer(CorpusIndex(events), user, project, t);
}

/// Control variables for a closed PR. `not_before` bounds the integrator
/// experience count; contributor status and the newcomer flag use all history.
inline ControlVars control_vars(const ActivityEvent& pr, const CorpusIndex& index,
                                Timestamp not_before = kNoLowerBound) {
  if (!pr.is_pr()) throw DataError("control_vars requires a pull request: " + pr.id);
  const Timestamp closed = pr.closed();
  ControlVars cv;
  cv.commit_count = pr.commit_count.value_or(0);
  cv.age_minutes = double(closed - pr.created_at) / 60.0;
  cv.has_comments = !pr.comments.empty();
  cv.has_hash_reference =
      pr.title.find('#') != std::string::npos || pr.description.find('#') != std::string::npos;
  cv.is_newcomer = is_newcomer(index, pr.submitter, pr.project, closed);

  if (pr.integrator) {
    cv.integrator_experience = index.integrated_prs(*pr.integrator, pr.project, not_before, closed);
    cv.self_integrated = *pr.integrator == pr.submitter;
  } else {
    cv.integrator_missing = true;
  }

  for (const auto& c : pr.comments) {
    if (c.author == pr.submitter || (pr.integrator && c.author == *pr.integrator)) continue;
    if (index.merged_prs(c.author, pr.project, kNoLowerBound, closed) > 0) continue;
    cv.external_comment = true;
    break;
  }
  return cv;
}

inline ControlVars control_vars(const ActivityEvent& pr, const std::vector<ActivityEvent>& events) {
  return control_vars(pr, CorpusIndex(events));
}

/// One feature row per closed PR in `events`, in input order. Rows are
/// computed independently, so the result does not depend on cfg.threads.
inline std::vector<FeatureRow> assemble_matrix(const std::vector<ActivityEvent>& events,
                                               const DependencyGraph& deps,
                                               const MultiLayerTemporalGraph& graph,
                                               const PipelineConfig& cfg,
                                               std::vector<std::string>* diagnostics = nullptr) {
  cfg.validate();
  const CorpusIndex index(events);
  const LayerWeights weights =
      graph.edge_count() > 0 ? layer_weights(graph) : LayerWeights::uniform();

  std::vector<const ActivityEvent*> prs;
  for (const auto& ev : events)
    if (ev.is_pr() && ev.closed_at) prs.push_back(&ev);

  std::vector<FeatureRow> rows(prs.size());
  auto compute = [&](std::size_t i) {
    const ActivityEvent& pr = *prs[i];
    const Timestamp t = pr.closed();
    const Timestamp from = t - cfg.window_seconds();
    FeatureRow& row = rows[i];
    row.pr_id = pr.id;
    row.project = pr.project;
    row.submitter = pr.submitter;
    row.merged = pr.was_merged();
    row.controls = control_vars(pr, index, from);
    row.contributions = contribution_counts(index, deps, pr.submitter, pr.project, t, cfg.window_days);
    row.centrality = second_order_centrality(graph, weights, pr.submitter, pr.project, t, from);
    row.direct_collab =
        pr.integrator ? link_strength(graph, weights, pr.submitter, *pr.integrator, pr.project, t, from)
                      : 0.0;
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, unsigned(prs.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < prs.size(); ++i) compute(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < prs.size(); i += threads) compute(i);
      });
  }

  if (diagnostics)
    for (const auto& row : rows)
      if (row.controls.integrator_missing)
        diagnostics->push_back("missing integrator: " + row.pr_id);
  return rows;
}

// ---------------------------------------------------------------------------
// Column layout shared by the CSV export and the statistical passes.

enum class ColumnKind { Count, Real, Ratio, Boolean };

struct ColumnSpec {
  std::string name;
  ColumnKind kind;
  /// Add-one log transform before scaling.
  bool long_tailed;
};

inline constexpr std::array<const char*, 5> kContributionTypes = {
    "prs_submitted", "pr_merge_ratio", "pr_comments", "issues_submitted", "issue_comments"};

/// The 35 model variables in export order.
inline const std::vector<ColumnSpec>& feature_columns() {
  static const std::vector<ColumnSpec> cols = [] {
    std::vector<ColumnSpec> c = {
        {"ctrl_commit_count", ColumnKind::Count, true},
        {"ctrl_age_minutes", ColumnKind::Real, true},
        {"ctrl_integrator_experience", ColumnKind::Count, true},
        {"ctrl_self_integrated", ColumnKind::Boolean, false},
        {"ctrl_has_comments", ColumnKind::Boolean, false},
        {"ctrl_external_comment", ColumnKind::Boolean, false},
        {"ctrl_has_hash_reference", ColumnKind::Boolean, false},
        {"ctrl_is_newcomer", ColumnKind::Boolean, false},
    };
    for (auto b : kAllBuckets)
      for (const char* type : kContributionTypes) {
        const bool ratio = std::string_view(type) == "pr_merge_ratio";
        c.push_back({std::string(bucket_name(b)) + "_" + type,
                     ratio ? ColumnKind::Ratio : ColumnKind::Count, !ratio});
      }
    c.push_back({"centrality", ColumnKind::Real, true});
    c.push_back({"direct_collab", ColumnKind::Real, true});
    return c;
  }();
  return cols;
}

inline std::vector<double> feature_values(const FeatureRow& r) {
  const auto& cv = r.controls;
  std::vector<double> v = {double(cv.commit_count),      cv.age_minutes,
                           double(cv.integrator_experience), double(cv.self_integrated),
                           double(cv.has_comments),      double(cv.external_comment),
                           double(cv.has_hash_reference), double(cv.is_newcomer)};
  for (auto b : kAllBuckets) {
    const auto& c = r.contributions[b];
    v.insert(v.end(), {double(c.prs_submitted), c.pr_merge_ratio(), double(c.pr_comments),
                       double(c.issues_submitted), double(c.issue_comments)});
  }
  v.push_back(r.centrality);
  v.push_back(r.direct_collab);
  return v;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_cell(double x, ColumnKind kind) {
  if (kind == ColumnKind::Count || kind == ColumnKind::Boolean)
    return std::to_string(std::int64_t(x));
  return format_real(x);
}

}  // namespace detail

inline void write_feature_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
  const auto& cols = feature_columns();
  out << "pr_id,project,submitter";
  for (const auto& c : cols) out << ',' << c.name;
  out << ",label_merged\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.pr_id) << ',' << detail::csv_field(r.project.str()) << ','
        << detail::csv_field(r.submitter.str());
    const auto values = feature_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i)
      out << ',' << detail::format_cell(values[i], cols[i].kind);
    out << ',' << (r.merged ? 1 : 0) << '\n';
  }
}

}  // namespace ecocontrib

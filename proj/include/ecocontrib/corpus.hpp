#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecocontrib/types.hpp"

namespace ecocontrib {

enum class ActivityKind { PullRequest, Issue };

struct Comment {
  UserId author;
  Timestamp at = 0;
  bool is_bot = false;
};

struct Review {
  UserId reviewer;
  Timestamp at = 0;
  bool is_bot = false;
};

/// A pull request or issue with its discussion. Optional fields may be absent
/// in raw input; filter_activities() removes events that lack what the
/// feature pipeline reads.
struct ActivityEvent {
  ActivityKind kind = ActivityKind::PullRequest;
  std::string id;
  ProjectId project;
  UserId submitter;
  bool submitter_is_bot = false;
  Timestamp created_at = 0;
  std::optional<Timestamp> closed_at;
  std::optional<bool> merged;             // PullRequest only
  std::optional<UserId> integrator;       // PullRequest only
  std::optional<std::int64_t> commit_count;  // PullRequest only
  std::string title;
  std::string description;
  std::vector<Comment> comments;
  std::vector<Review> reviews;  // PullRequest only

  bool is_pr() const noexcept { return kind == ActivityKind::PullRequest; }
  /// Only valid on filtered events.
  Timestamp closed() const { return closed_at.value(); }
  bool was_merged() const { return merged.value_or(false); }
};

struct ParseDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ParseResult {
  std::vector<ActivityEvent> events;
  std::vector<ParseDiagnostic> diagnostics;
};

namespace detail {

using nlohmann::json;

struct FieldError {
  std::string message;
};

inline const json* find_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

inline std::string required_string(const json& obj, const char* key) {
  const json* v = find_field(obj, key);
  if (!v) throw FieldError{std::string("missing field: ") + key};
  if (!v->is_string()) throw FieldError{std::string("field is not a string: ") + key};
  auto s = v->get<std::string>();
  if (s.empty()) throw FieldError{std::string("empty field: ") + key};
  return s;
}

inline Timestamp to_timestamp(const json& v, const char* key) {
  if (v.is_string()) {
    if (auto t = parse_iso8601(v.get_ref<const std::string&>())) return *t;
  }
  throw FieldError{std::string("bad timestamp: ") + key};
}

inline Timestamp required_time(const json& obj, const char* key) {
  const json* v = find_field(obj, key);
  if (!v) throw FieldError{std::string("missing field: ") + key};
  return to_timestamp(*v, key);
}

inline bool optional_bool(const json& obj, const char* key) {
  const json* v = find_field(obj, key);
  if (!v) return false;
  if (!v->is_boolean()) throw FieldError{std::string("field is not a boolean: ") + key};
  return v->get<bool>();
}

inline std::string optional_string(const json& obj, const char* key) {
  const json* v = find_field(obj, key);
  if (!v) return {};
  if (!v->is_string()) throw FieldError{std::string("field is not a string: ") + key};
  return v->get<std::string>();
}

inline ActivityEvent event_from_json(const json& j) {
  if (!j.is_object()) throw FieldError{"record is not an object"};
  ActivityEvent ev;
  const auto kind = required_string(j, "kind");
  if (kind == "pull_request" || kind == "PullRequest")
    ev.kind = ActivityKind::PullRequest;
  else if (kind == "issue" || kind == "Issue")
    ev.kind = ActivityKind::Issue;
  else
    throw FieldError{"unknown kind: " + kind};

  ev.id = required_string(j, "id");
  ev.project = ProjectId{required_string(j, "project")};
  ev.submitter = UserId{required_string(j, "submitter")};
  ev.submitter_is_bot = optional_bool(j, "submitter_is_bot");
  ev.created_at = required_time(j, "created_at");
  if (const json* v = find_field(j, "closed_at")) {
    ev.closed_at = to_timestamp(*v, "closed_at");
    if (*ev.closed_at < ev.created_at) throw FieldError{"closed_at precedes created_at"};
  }
  ev.title = optional_string(j, "title");
  ev.description = optional_string(j, "description");

  for (const char* pr_only : {"merged", "integrator", "commit_count", "reviews"}) {
    if (!ev.is_pr() && find_field(j, pr_only))
      throw FieldError{std::string("field not allowed for issue: ") + pr_only};
  }
  if (ev.is_pr()) {
    if (const json* v = find_field(j, "merged")) {
      if (!v->is_boolean()) throw FieldError{"field is not a boolean: merged"};
      ev.merged = v->get<bool>();
    }
    if (const json* v = find_field(j, "integrator")) {
      if (!v->is_string() || v->get_ref<const std::string&>().empty())
        throw FieldError{"bad field: integrator"};
      ev.integrator = UserId{v->get<std::string>()};
    }
    if (const json* v = find_field(j, "commit_count")) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
        throw FieldError{"bad field: commit_count"};
      ev.commit_count = v->get<std::int64_t>();
    }
  }

  if (const json* v = find_field(j, "comments")) {
    if (!v->is_array()) throw FieldError{"field is not an array: comments"};
    for (const auto& c : *v) {
      if (!c.is_object()) throw FieldError{"comment is not an object"};
      ev.comments.push_back({UserId{required_string(c, "author")}, required_time(c, "at"),
                             optional_bool(c, "is_bot")});
    }
  }
  if (const json* v = find_field(j, "reviews")) {
    if (!v->is_array()) throw FieldError{"field is not an array: reviews"};
    for (const auto& r : *v) {
      if (!r.is_object()) throw FieldError{"review is not an object"};
      ev.reviews.push_back({UserId{required_string(r, "reviewer")}, required_time(r, "at"),
                            optional_bool(r, "is_bot")});
    }
  }
  return ev;
}

}  // namespace detail

inline nlohmann::json to_json(const ActivityEvent& ev) {
  nlohmann::json j;
  j["kind"] = ev.is_pr() ? "pull_request" : "issue";
  j["id"] = ev.id;
  j["project"] = ev.project.str();
  j["submitter"] = ev.submitter.str();
  if (ev.submitter_is_bot) j["submitter_is_bot"] = true;
  j["created_at"] = format_iso8601(ev.created_at);
  if (ev.closed_at) j["closed_at"] = format_iso8601(*ev.closed_at);
  if (ev.is_pr()) {
    if (ev.merged) j["merged"] = *ev.merged;
    if (ev.integrator) j["integrator"] = ev.integrator->str();
    if (ev.commit_count) j["commit_count"] = *ev.commit_count;
  }
  j["title"] = ev.title;
  j["description"] = ev.description;
  auto comments = nlohmann::json::array();
  for (const auto& c : ev.comments) {
    nlohmann::json cj{{"author", c.author.str()}, {"at", format_iso8601(c.at)}};
    if (c.is_bot) cj["is_bot"] = true;
    comments.push_back(std::move(cj));
  }
  j["comments"] = std::move(comments);
  if (ev.is_pr()) {
    auto reviews = nlohmann::json::array();
    for (const auto& r : ev.reviews) {
      nlohmann::json rj{{"reviewer", r.reviewer.str()}, {"at", format_iso8601(r.at)}};
      if (r.is_bot) rj["is_bot"] = true;
      reviews.push_back(std::move(rj));
    }
    j["reviews"] = std::move(reviews);
  }
  return j;
}

/// Reads newline-delimited JSON events. Malformed lines are skipped and
/// reported with their line number; blank lines are ignored.
inline ParseResult parse_events(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      result.events.push_back(detail::event_from_json(j));
    } catch (const detail::FieldError& e) {
      result.diagnostics.push_back({lineno, e.message});
    } catch (const nlohmann::json::exception& e) {
      result.diagnostics.push_back({lineno, std::string("invalid JSON: ") + e.what()});
    }
  }
  if (in.bad()) throw std::runtime_error("I/O error while reading events");
  return result;
}

inline ParseResult parse_events_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open events file: " + path.string());
  return parse_events(in);
}

inline void write_events(std::ostream& out, const std::vector<ActivityEvent>& events) {
  for (const auto& ev : events) out << to_json(ev).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Filtering and bot detection

struct FilterConfig {
  std::vector<std::filesystem::path> bot_lists;
  std::int64_t heavy_user_threshold = 400;
  bool drop_ghost = true;
  std::string ghost_login = "ghost";
};

struct BotDetection {
  std::set<UserId> bots;
  /// Heavy users for manual inspection; never removed automatically.
  std::set<UserId> review_list;
};

/// One login per line; '#' starts a comment.
inline std::vector<UserId> load_bot_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read bot list: " + path.string());
  std::vector<UserId> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.emplace_back(line.substr(b, e - b + 1));
  }
  return out;
}

inline BotDetection detect_bots(const std::vector<ActivityEvent>& events, const FilterConfig& cfg) {
  if (cfg.heavy_user_threshold < 1) throw DataError("heavy_user_threshold must be >= 1");
  BotDetection out;
  for (const auto& path : cfg.bot_lists)
    for (auto& u : load_bot_list(path)) out.bots.insert(std::move(u));

  std::map<UserId, std::int64_t> closed_prs;
  for (const auto& ev : events) {
    if (ev.submitter_is_bot) out.bots.insert(ev.submitter);
    for (const auto& c : ev.comments)
      if (c.is_bot) out.bots.insert(c.author);
    for (const auto& r : ev.reviews)
      if (r.is_bot) out.bots.insert(r.reviewer);
    if (ev.is_pr() && ev.closed_at) ++closed_prs[ev.submitter];
  }
  for (const auto& [user, n] : closed_prs)
    if (n > cfg.heavy_user_threshold && !out.bots.contains(user)) out.review_list.insert(user);
  return out;
}

enum class RemovalReason { Ghost = 0, NotClosed = 1, MissingData = 2, Bot = 3 };
inline constexpr std::array<const char*, 4> kRemovalReasonNames = {"ghost", "not_closed",
                                                                    "missing_data", "bot"};

struct FilterReport {
  std::size_t input = 0;
  std::size_t retained = 0;
  std::array<std::size_t, 4> removed{};  // indexed by RemovalReason

  std::size_t removed_total() const { return removed[0] + removed[1] + removed[2] + removed[3]; }
};

/// First failing criterion, or nullopt when the event is kept.
inline std::optional<RemovalReason> removal_reason(const ActivityEvent& ev, const FilterConfig& cfg,
                                                   const std::set<UserId>& bots) {
  if (cfg.drop_ghost && ev.submitter.str() == cfg.ghost_login) return RemovalReason::Ghost;
  if (!ev.closed_at) return RemovalReason::NotClosed;
  if (ev.submitter.empty() || (ev.is_pr() && (!ev.merged || !ev.commit_count)))
    return RemovalReason::MissingData;
  if (bots.contains(ev.submitter)) return RemovalReason::Bot;
  return std::nullopt;
}

inline std::vector<ActivityEvent> filter_activities(const std::vector<ActivityEvent>& events,
                                                    const FilterConfig& cfg,
                                                    const std::set<UserId>& bots,
                                                    FilterReport* report = nullptr) {
  std::vector<ActivityEvent> kept;
  FilterReport local;
  local.input = events.size();
  for (const auto& ev : events) {
    if (auto why = removal_reason(ev, cfg, bots))
      ++local.removed[std::size_t(*why)];
    else
      kept.push_back(ev);
  }
  local.retained = kept.size();
  if (report) *report = local;
  return kept;
}

}  // namespace ecocontrib

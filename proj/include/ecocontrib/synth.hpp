#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecocontrib/corpus.hpp"
#include "ecocontrib/depgraph.hpp"
#include "ecocontrib/types.hpp"

namespace ecocontrib {

/// Ground-truth acceptance model and volume settings for a synthetic corpus.
///
/// Acceptance of every PR is a Bernoulli draw with probability
/// logistic(intercept + sum(coef * feature)), where the features are
/// computed from the corpus history generated so far:
///   ecosystem_prs_submitted, downstream_prs_submitted,
///   upstream_prs_submitted, nondependency_prs_submitted,
///   intra_issues_submitted   log1p of 90-day counts
///   direct_collab            log1p of 90-day ecosystem co-participations
///                            of submitter and integrator
///   ctrl_is_newcomer, ctrl_self_integrated, ctrl_has_comments   0/1
struct SynthProfile {
  double intercept = 0.0;
  std::map<std::string, double> coefficients;
  std::int64_t pull_requests = 0;  // 0: 10 per user
  std::int64_t issues = -1;        // -1: half the PR count
  double comments_per_activity = 1.5;
  double bot_fraction = 0.02;
  double ghost_fraction = 0.005;

  static const std::set<std::string>& known_features() {
    static const std::set<std::string> k = {
        "ecosystem_prs_submitted", "downstream_prs_submitted", "upstream_prs_submitted",
        "nondependency_prs_submitted", "intra_issues_submitted", "direct_collab",
        "ctrl_is_newcomer", "ctrl_self_integrated", "ctrl_has_comments"};
    return k;
  }

  static SynthProfile from_json(const nlohmann::json& j) {
    auto bad = [](const std::string& why) { return DataError("invalid profile: " + why); };
    if (!j.is_object()) throw bad("not a JSON object");
    SynthProfile p;
    auto num = [&](const char* key, auto& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_number()) throw bad(std::string(key) + " is not a number");
      out = j[key].get<std::remove_reference_t<decltype(out)>>();
    };
    num("intercept", p.intercept);
    num("pull_requests", p.pull_requests);
    num("issues", p.issues);
    num("comments_per_activity", p.comments_per_activity);
    num("bot_fraction", p.bot_fraction);
    num("ghost_fraction", p.ghost_fraction);
    if (j.contains("coefficients")) {
      if (!j["coefficients"].is_object()) throw bad("coefficients is not an object");
      for (const auto& [k, v] : j["coefficients"].items()) {
        if (!known_features().contains(k)) throw bad("unknown coefficient: " + k);
        if (!v.is_number()) throw bad("coefficient is not a number: " + k);
        p.coefficients[k] = v.get<double>();
      }
    }
    for (const auto& [k, _] : j.items())
      if (k != "intercept" && k != "coefficients" && k != "pull_requests" && k != "issues" &&
          k != "comments_per_activity" && k != "bot_fraction" && k != "ghost_fraction")
        throw bad("unknown key: " + k);
    if (p.pull_requests < 0) throw bad("pull_requests must be >= 0");
    if (p.comments_per_activity < 0) throw bad("comments_per_activity must be >= 0");
    if (p.bot_fraction < 0 || p.bot_fraction >= 1 || p.ghost_fraction < 0 || p.ghost_fraction >= 1)
      throw bad("fractions must lie in [0, 1)");
    return p;
  }

  static SynthProfile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read effect profile: " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("invalid profile: " + std::string(e.what()));
    }
  }
};

struct SynthOptions {
  std::int64_t users = 200;
  std::int64_t projects = 20;
  std::int64_t days = 365;
  std::uint64_t seed = 0;
  Timestamp start = 1577836800;  // 2020-01-01T00:00:00Z
};

struct SynthCorpus {
  std::vector<ActivityEvent> events;  // ordered by created_at
  DependencyGraph deps;
  std::vector<UserId> bots;
  std::string ghost_login = "ghost";
};

namespace detail {

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = eng_(); while (r >= limit);
    return r % n;
  }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  /// Geometric count on {0, 1, ...} with the given mean.
  std::int64_t geometric(double mean) {
    if (mean <= 0) return 0;
    const double q = mean / (1.0 + mean);
    std::int64_t k = 0;
    while (uniform() < q) ++k;
    return k;
  }
  /// Index drawn proportionally to cumulative weights.
  std::size_t pick(const std::vector<double>& cumulative) {
    const double x = uniform() * cumulative.back();
    return std::size_t(std::upper_bound(cumulative.begin(), cumulative.end(), x) -
                       cumulative.begin()) % cumulative.size();
  }

 private:
  std::mt19937_64 eng_;
};

inline std::vector<double> cumulative_zipf(std::size_t n, double s) {
  std::vector<double> c(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) c[i] = acc += 1.0 / std::pow(double(i + 1), s);
  return c;
}

}  // namespace detail

/// Generates a corpus whose PR outcomes follow the profile's logistic model.
inline SynthCorpus generate_synthetic(const SynthOptions& opt, const SynthProfile& profile) {
  if (opt.users < 2 || opt.projects < 1 || opt.days < 1)
    throw DataError("synth needs users >= 2, projects >= 1, days >= 1");
  detail::SynthRng rng(opt.seed);
  const auto n_users = std::size_t(opt.users), n_projects = std::size_t(opt.projects);

  std::vector<UserId> users;
  for (std::size_t i = 0; i < n_users; ++i) users.emplace_back("user" + std::to_string(i));
  std::vector<ProjectId> projects;
  for (std::size_t j = 0; j < n_projects; ++j)
    projects.emplace_back("org" + std::to_string(j) + "/pkg" + std::to_string(j));

  const auto project_cum = detail::cumulative_zipf(n_projects, 0.9);
  const auto user_cum = detail::cumulative_zipf(n_users, 0.7);

  SynthCorpus out;
  // Dependencies point from a project towards more popular (lower-index) ones.
  for (std::size_t j = 1; j < n_projects; ++j) {
    const auto k = rng.below(4);
    const std::vector<double> prefix(project_cum.begin(), project_cum.begin() + std::ptrdiff_t(j));
    for (std::uint64_t d = 0; d < k; ++d) out.deps.add(projects[j], projects[rng.pick(prefix)]);
  }

  std::vector<std::vector<std::size_t>> home(n_users);
  std::vector<std::vector<std::size_t>> members(n_projects);
  for (std::size_t u = 0; u < n_users; ++u) {
    const auto k = 1 + rng.geometric(1.0);
    for (std::int64_t i = 0; i < std::min<std::int64_t>(k, 5); ++i) {
      const auto p = rng.pick(project_cum);
      if (std::find(home[u].begin(), home[u].end(), p) == home[u].end()) {
        home[u].push_back(p);
        members[p].push_back(u);
      }
    }
  }
  std::vector<std::vector<std::size_t>> maintainers(n_projects);
  for (std::size_t p = 0; p < n_projects; ++p) {
    auto pool = members[p];
    if (pool.empty()) pool.push_back(rng.below(n_users));
    const auto k = std::min<std::size_t>(pool.size(), 1 + rng.below(3));
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      maintainers[p].push_back(pool[i]);
    }
  }

  const std::int64_t n_prs = profile.pull_requests > 0 ? profile.pull_requests : 10 * opt.users;
  const std::int64_t n_issues = profile.issues >= 0 ? profile.issues : n_prs / 2;
  const Timestamp span = opt.days * kSecondsPerDay;
  const UserId bot{"synth-bot[bot]"};
  out.bots.push_back(bot);

  auto pick_participant = [&](std::size_t p) -> std::size_t {
    const double x = rng.uniform();
    if (x < 0.4 && !maintainers[p].empty()) return maintainers[p][rng.below(maintainers[p].size())];
    if (x < 0.8 && !members[p].empty()) return members[p][rng.below(members[p].size())];
    return rng.pick(user_cum);
  };

  for (std::int64_t a = 0; a < n_prs + n_issues; ++a) {
    ActivityEvent ev;
    ev.kind = a < n_prs ? ActivityKind::PullRequest : ActivityKind::Issue;
    const auto u = rng.pick(user_cum);
    const auto p = (rng.uniform() < 0.8 && !home[u].empty()) ? home[u][rng.below(home[u].size())]
                                                             : rng.pick(project_cum);
    ev.id = projects[p].str() + (ev.is_pr() ? "#pr" : "#issue") + std::to_string(a);
    ev.project = projects[p];
    ev.submitter = users[u];
    ev.created_at = opt.start + Timestamp(rng.below(std::uint64_t(span)));
    ev.closed_at = ev.created_at + 60 + Timestamp(rng.exponential(3.0 * kSecondsPerDay));
    const auto duration = *ev.closed_at - ev.created_at;
    for (auto c = rng.geometric(profile.comments_per_activity); c > 0; --c)
      ev.comments.push_back({users[pick_participant(p)],
                             ev.created_at + Timestamp(rng.below(std::uint64_t(duration)))});
    std::sort(ev.comments.begin(), ev.comments.end(),
              [](const Comment& x, const Comment& y) { return x.at < y.at; });
    if (ev.is_pr()) {
      ev.commit_count = 1 + rng.geometric(2.0);
      const auto& m = maintainers[p];
      ev.integrator = users[m[rng.below(m.size())]];
      for (auto r = rng.below(3); r > 0; --r)
        ev.reviews.push_back({users[m[rng.below(m.size())]],
                              ev.created_at + Timestamp(rng.below(std::uint64_t(duration)))});
      std::sort(ev.reviews.begin(), ev.reviews.end(),
                [](const Review& x, const Review& y) { return x.at < y.at; });
      if (rng.uniform() < 0.3) ev.description = "Fixes #" + std::to_string(rng.below(1000));
      ev.title = "Change " + std::to_string(a);
      if (rng.uniform() < profile.bot_fraction) {
        ev.submitter = bot;
        ev.comments.clear();
      }
    } else {
      ev.title = "Issue " + std::to_string(a);
      if (rng.uniform() < profile.ghost_fraction) ev.submitter = UserId{out.ghost_login};
    }
    out.events.push_back(std::move(ev));
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const ActivityEvent& x, const ActivityEvent& y) { return x.created_at < y.created_at; });

  // Label PRs in closing order from the history that closed strictly earlier.
  std::vector<std::size_t> by_close(out.events.size());
  for (std::size_t i = 0; i < by_close.size(); ++i) by_close[i] = i;
  std::stable_sort(by_close.begin(), by_close.end(), [&](auto x, auto y) {
    return *out.events[x].closed_at < *out.events[y].closed_at;
  });

  struct Past {
    Timestamp closed;
    const ProjectId* project;
    bool pr;
  };
  std::map<std::string, std::vector<Past>> submitted;  // by submitter
  std::map<std::pair<std::string, std::string>, std::vector<Past>> together;  // by user pair
  std::set<std::pair<std::string, std::string>> merged_in;  // (user, project)
  const Timestamp window = 90 * kSecondsPerDay;

  auto participants = [](const ActivityEvent& ev) {
    std::set<std::string> s{ev.submitter.str()};
    if (ev.integrator) s.insert(ev.integrator->str());
    for (const auto& c : ev.comments) s.insert(c.author.str());
    for (const auto& r : ev.reviews) s.insert(r.reviewer.str());
    return s;
  };
  auto commit = [&](const ActivityEvent& ev) {
    submitted[ev.submitter.str()].push_back({*ev.closed_at, &ev.project, ev.is_pr()});
    if (ev.is_pr() && *ev.merged) merged_in.emplace(ev.submitter.str(), ev.project.str());
    const auto ps = participants(ev);
    for (auto i = ps.begin(); i != ps.end(); ++i)
      for (auto j = std::next(i); j != ps.end(); ++j)
        together[{*i, *j}].push_back({*ev.closed_at, &ev.project, ev.is_pr()});
  };

  std::size_t committed = 0;
  for (std::size_t k = 0; k < by_close.size(); ++k) {
    auto& ev = out.events[by_close[k]];
    const Timestamp t = *ev.closed_at;
    while (committed < k && *out.events[by_close[committed]].closed_at < t)
      commit(out.events[by_close[committed++]]);
    if (!ev.is_pr()) continue;

    std::map<std::string, double> f;
    std::int64_t eco = 0, down = 0, up = 0, nondep = 0, intra_issues = 0;
    if (auto it = submitted.find(ev.submitter.str()); it != submitted.end()) {
      for (auto r = it->second.rbegin(); r != it->second.rend() && r->closed >= t - window; ++r) {
        if (*r->project == ev.project) {
          intra_issues += !r->pr;
          continue;
        }
        if (!r->pr) continue;
        ++eco;
        switch (out.deps.classify(ev.project, *r->project)) {
          case Scope::Downstream: ++down; break;
          case Scope::Upstream: ++up; break;
          default: ++nondep; break;
        }
      }
    }
    std::int64_t collab = 0;
    if (ev.integrator && *ev.integrator != ev.submitter) {
      auto key = std::minmax(ev.submitter.str(), ev.integrator->str());
      if (auto it = together.find({key.first, key.second}); it != together.end())
        for (auto r = it->second.rbegin(); r != it->second.rend() && r->closed >= t - window; ++r)
          collab += *r->project != ev.project;
    }
    f["ecosystem_prs_submitted"] = std::log1p(double(eco));
    f["downstream_prs_submitted"] = std::log1p(double(down));
    f["upstream_prs_submitted"] = std::log1p(double(up));
    f["nondependency_prs_submitted"] = std::log1p(double(nondep));
    f["intra_issues_submitted"] = std::log1p(double(intra_issues));
    f["direct_collab"] = std::log1p(double(collab));
    f["ctrl_is_newcomer"] = merged_in.contains({ev.submitter.str(), ev.project.str()}) ? 0.0 : 1.0;
    f["ctrl_self_integrated"] = ev.integrator && *ev.integrator == ev.submitter ? 1.0 : 0.0;
    f["ctrl_has_comments"] = ev.comments.empty() ? 0.0 : 1.0;

    double eta = profile.intercept;
    for (const auto& [name, coef] : profile.coefficients) eta += coef * f[name];
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    ev.merged = rng.uniform() < prob;
  }
  return out;
}

inline void write_synthetic(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "events.jsonl");
    write_events(f, corpus.events);
  }
  {
    std::ofstream f(dir / "deps.csv");
    write_dependency_graph(f, corpus.deps);
  }
  std::ofstream f(dir / "bots.txt");
  f << "# accounts generated as bots\n";
  for (const auto& b : corpus.bots) f << b.str() << '\n';
}

}  // namespace ecocontrib

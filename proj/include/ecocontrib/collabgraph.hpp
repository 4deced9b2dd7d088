#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ecocontrib/corpus.hpp"
#include "ecocontrib/types.hpp"

namespace ecocontrib {

enum class Layer : std::uint8_t { PrReview, PrComment, PrDiscussion, IssueComment, IssueDiscussion };

inline constexpr std::size_t kLayerCount = 5;
inline constexpr std::array<Layer, kLayerCount> kAllLayers = {
    Layer::PrReview, Layer::PrComment, Layer::PrDiscussion, Layer::IssueComment,
    Layer::IssueDiscussion};

inline constexpr const char* layer_name(Layer l) {
  constexpr std::array<const char*, kLayerCount> names = {
      "pr_review", "pr_comment", "pr_discussion", "issue_comment", "issue_discussion"};
  return names[std::size_t(l)];
}

inline constexpr Timestamp kNoLowerBound = std::numeric_limits<Timestamp>::min();

/// Undirected collaboration <u, v, project, t> in one layer.
struct CollabEdge {
  UserId u;
  UserId v;
  ProjectId project;
  Timestamp t = 0;
  Layer layer = Layer::PrReview;
};

/// Per-layer non-negative weights summing to one.
struct LayerWeights {
  std::array<double, kLayerCount> w{};

  double operator[](Layer l) const { return w[std::size_t(l)]; }
  double& operator[](Layer l) { return w[std::size_t(l)]; }

  static LayerWeights uniform() {
    LayerWeights lw;
    lw.w.fill(1.0 / kLayerCount);
    return lw;
  }
};

/// Temporal multi-layer collaboration graph. Immutable once built; every
/// query is a const read and may run concurrently.
class MultiLayerTemporalGraph {
 public:
  MultiLayerTemporalGraph() = default;

  /// Self-loops are discarded.
  static MultiLayerTemporalGraph from_edges(std::vector<CollabEdge> edges) {
    MultiLayerTemporalGraph g;
    for (auto& e : edges) {
      if (e.u == e.v) continue;
      g.edges_[std::size_t(e.layer)].push_back(std::move(e));
    }
    g.finalize();
    return g;
  }

  const std::vector<CollabEdge>& edges(Layer l) const { return edges_[std::size_t(l)]; }
  std::size_t edge_count(Layer l) const { return edges_[std::size_t(l)].size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& layer : edges_) n += layer.size();
    return n;
  }
  const std::vector<UserId>& vertices() const noexcept { return users_; }
  bool has_user(const UserId& u) const { return user_index_.contains(u.str()); }

  /// Number of u-v edges in layer l with not_before <= t' < t and project != focal.
  std::uint64_t pair_edge_count(Layer l, const UserId& u, const UserId& v, const ProjectId& focal,
                                Timestamp t, Timestamp not_before = kNoLowerBound) const {
    const auto ui = find_user(u), vi = find_user(v);
    if (ui == kMissing || vi == kMissing || ui == vi) return 0;
    const auto& map = pairs_[std::size_t(l)];
    auto it = map.find(pair_key(ui, vi));
    if (it == map.end()) return 0;
    const auto focal_idx = find_project(focal);
    const auto [lo, hi] = time_range(it->second, not_before, t);
    std::uint64_t n = 0;
    for (auto p = lo; p != hi; ++p)
      if (p->project != focal_idx) ++n;
    return n;
  }

  /// Raw second-order sums for one user: for every layer pair (lambda, mu),
  /// the total of |N'_mu(v, t')| over u's eligible lambda-neighbour
  /// occurrences, plus the occurrence count per lambda.
  struct SecondOrderSums {
    std::array<std::uint64_t, kLayerCount> occurrences{};
    std::array<std::array<std::uint64_t, kLayerCount>, kLayerCount> neighbour_degree{};
  };

  SecondOrderSums second_order_sums(const UserId& u, const ProjectId& focal, Timestamp t,
                                    Timestamp not_before = kNoLowerBound) const {
    SecondOrderSums s;
    const auto ui = find_user(u);
    if (ui == kMissing) return s;
    const auto focal_idx = find_project(focal);
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      const auto& adj = adjacency_[l][ui];
      const auto [lo, hi] = time_range(adj, not_before, t);
      for (auto e = lo; e != hi; ++e) {
        if (e->project == focal_idx) continue;
        ++s.occurrences[l];
        for (std::size_t m = 0; m < kLayerCount; ++m)
          s.neighbour_degree[l][m] += degree_before(m, e->other, e->t, not_before);
      }
    }
    return s;
  }

 private:
  static constexpr std::uint32_t kMissing = std::numeric_limits<std::uint32_t>::max();

  struct HalfEdge {
    Timestamp t;
    std::uint32_t other;
    std::uint32_t project;
  };

  static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
  }

  using HalfEdgeIter = std::vector<HalfEdge>::const_iterator;

  static std::pair<HalfEdgeIter, HalfEdgeIter> time_range(const std::vector<HalfEdge>& v,
                                                          Timestamp from, Timestamp to) {
    auto by_time = [](const HalfEdge& e, Timestamp x) { return e.t < x; };
    auto lo = std::lower_bound(v.begin(), v.end(), from, by_time);
    auto hi = std::lower_bound(lo, v.end(), to, by_time);
    if (hi < lo) hi = lo;
    return {lo, hi};
  }

  /// |{v's edges in layer m with not_before <= t'' < before}|
  std::uint64_t degree_before(std::size_t m, std::uint32_t v, Timestamp before,
                              Timestamp not_before) const {
    const auto& adj = adjacency_[m][v];
    const auto [lo, hi] = time_range(adj, not_before, before);
    return std::uint64_t(hi - lo);
  }

  std::uint32_t find_user(const UserId& u) const {
    auto it = user_index_.find(u.str());
    return it == user_index_.end() ? kMissing : it->second;
  }
  std::uint32_t find_project(const ProjectId& p) const {
    auto it = project_index_.find(p.str());
    return it == project_index_.end() ? kMissing : it->second;
  }

  std::uint32_t intern_user(const UserId& u) {
    auto [it, fresh] = user_index_.try_emplace(u.str(), std::uint32_t(users_.size()));
    if (fresh) users_.push_back(u);
    return it->second;
  }
  std::uint32_t intern_project(const ProjectId& p) {
    auto [it, fresh] = project_index_.try_emplace(p.str(), std::uint32_t(project_index_.size()));
    return it->second;
  }

  void finalize() {
    for (auto& layer : edges_)
      std::stable_sort(layer.begin(), layer.end(),
                       [](const CollabEdge& a, const CollabEdge& b) { return a.t < b.t; });
    for (const auto& layer : edges_)
      for (const auto& e : layer) {
        intern_user(e.u);
        intern_user(e.v);
        intern_project(e.project);
      }
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      auto& adj = adjacency_[l];
      adj.assign(users_.size(), {});
      for (const auto& e : edges_[l]) {
        const auto a = find_user(e.u), b = find_user(e.v), p = find_project(e.project);
        adj[a].push_back({e.t, b, p});
        adj[b].push_back({e.t, a, p});
        pairs_[l][pair_key(a, b)].push_back({e.t, b, p});
      }
      // Edges were appended in time order, so every list is already sorted.
    }
  }

  std::array<std::vector<CollabEdge>, kLayerCount> edges_;
  std::vector<UserId> users_;
  std::unordered_map<std::string, std::uint32_t> user_index_;
  std::unordered_map<std::string, std::uint32_t> project_index_;
  std::array<std::vector<std::vector<HalfEdge>>, kLayerCount> adjacency_;
  std::array<std::unordered_map<std::uint64_t, std::vector<HalfEdge>>, kLayerCount> pairs_;
};

namespace detail {

inline void add_activity_edges(const ActivityEvent& ev, std::vector<CollabEdge>& out) {
  const Layer direct = ev.is_pr() ? Layer::PrComment : Layer::IssueComment;
  const Layer discussion = ev.is_pr() ? Layer::PrDiscussion : Layer::IssueDiscussion;
  auto emit = [&](const UserId& a, const UserId& b, Timestamp t, Layer l) {
    if (a != b) out.push_back({a, b, ev.project, t, l});
  };

  if (ev.is_pr()) {
    for (const auto& r : ev.reviews) emit(r.reviewer, ev.submitter, r.at, Layer::PrReview);
    if (ev.integrator && ev.closed_at)
      emit(*ev.integrator, ev.submitter, *ev.closed_at, Layer::PrReview);
  }
  for (const auto& c : ev.comments) emit(c.author, ev.submitter, c.at, direct);

  // One discussion edge per pair of distinct commenters, stamped when the
  // later of the two first joined.
  std::vector<std::pair<const UserId*, Timestamp>> first_seen;
  for (const auto& c : ev.comments) {
    auto it = std::find_if(first_seen.begin(), first_seen.end(),
                           [&](const auto& f) { return *f.first == c.author; });
    if (it == first_seen.end())
      first_seen.emplace_back(&c.author, c.at);
    else
      it->second = std::min(it->second, c.at);
  }
  for (std::size_t i = 0; i < first_seen.size(); ++i)
    for (std::size_t j = i + 1; j < first_seen.size(); ++j)
      emit(*first_seen[i].first, *first_seen[j].first,
           std::max(first_seen[i].second, first_seen[j].second), discussion);
}

}  // namespace detail

inline MultiLayerTemporalGraph build_graph(const std::vector<ActivityEvent>& events) {
  std::vector<CollabEdge> edges;
  for (const auto& ev : events) detail::add_activity_edges(ev, edges);
  return MultiLayerTemporalGraph::from_edges(std::move(edges));
}

/// Inverse-proportional layer weights over the non-empty layers, normalised
/// to sum to one. Empty layers get weight zero.
inline LayerWeights layer_weights(const MultiLayerTemporalGraph& g) {
  const double total = double(g.edge_count());
  if (total == 0) throw DataError("empty graph");
  LayerWeights lw;
  std::size_t non_empty = 0;
  for (auto l : kAllLayers) non_empty += g.edge_count(l) > 0;
  if (non_empty == 1) {
    for (auto l : kAllLayers) lw[l] = g.edge_count(l) > 0 ? 1.0 : 0.0;
    return lw;
  }
  double sum = 0;
  for (auto l : kAllLayers) {
    if (g.edge_count(l) == 0) continue;
    lw[l] = 1.0 - double(g.edge_count(l)) / total;
    sum += lw[l];
  }
  for (auto l : kAllLayers) lw[l] /= sum;
  return lw;
}

/// Weighted count of past ecosystem collaborations between u and v.
inline double link_strength(const MultiLayerTemporalGraph& g, const LayerWeights& w,
                            const UserId& u, const UserId& v, const ProjectId& focal, Timestamp t,
                            Timestamp not_before = kNoLowerBound) {
  double s = 0;
  for (auto l : kAllLayers) s += w[l] * double(g.pair_edge_count(l, u, v, focal, t, not_before));
  return s;
}

/// Multi-layer second-order degree centrality of u for focal project and time t.
inline double second_order_centrality(const MultiLayerTemporalGraph& g, const LayerWeights& w,
                                      const UserId& u, const ProjectId& focal, Timestamp t,
                                      Timestamp not_before = kNoLowerBound) {
  const auto sums = g.second_order_sums(u, focal, t, not_before);
  double c = 0;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    if (sums.occurrences[l] == 0) continue;
    for (std::size_t m = 0; m < kLayerCount; ++m) {
      const double d = double(sums.neighbour_degree[l][m]) / double(sums.occurrences[l]);
      c += w.w[l] * w.w[m] * d;
    }
  }
  return c;
}

}  // namespace ecocontrib

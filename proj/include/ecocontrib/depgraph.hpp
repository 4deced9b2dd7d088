#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecocontrib/types.hpp"

namespace ecocontrib {

/// Where a past contribution happened relative to the focal project.
enum class Scope { IntraProject, Downstream, Upstream, NonDependency };

inline constexpr const char* scope_name(Scope s) {
  switch (s) {
    case Scope::IntraProject: return "intra";
    case Scope::Downstream: return "downstream";
    case Scope::Upstream: return "upstream";
    case Scope::NonDependency: return "nondependency";
  }
  return "?";
}

struct ManifestDiagnostic {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string message;
};

/// Direct "depends on" relation between projects. Transitive dependencies are
/// never materialised.
class DependencyGraph {
 public:
  DependencyGraph() = default;

  /// Returns false (and stores nothing) for self-edges.
  bool add(const ProjectId& dependent, const ProjectId& dependency) {
    if (dependent == dependency) return false;
    edges_.emplace(dependent, dependency);
    return true;
  }

  bool depends_on(const ProjectId& dependent, const ProjectId& dependency) const {
    return edges_.contains({dependent, dependency});
  }

  std::size_t size() const noexcept { return edges_.size(); }
  const std::set<std::pair<ProjectId, ProjectId>>& edges() const noexcept { return edges_; }

  /// Downstream wins when the two projects depend on each other.
  Scope classify(const ProjectId& focal, const ProjectId& other) const {
    if (focal == other) return Scope::IntraProject;
    if (depends_on(other, focal)) return Scope::Downstream;
    if (depends_on(focal, other)) return Scope::Upstream;
    return Scope::NonDependency;
  }

 private:
  std::set<std::pair<ProjectId, ProjectId>> edges_;
};

inline Scope classify_scope(const DependencyGraph& g, const ProjectId& focal,
                            const ProjectId& other) {
  return g.classify(focal, other);
}

struct ManifestResult {
  DependencyGraph graph;
  std::vector<ManifestDiagnostic> diagnostics;
};

namespace detail {

inline std::string_view trim_field(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace detail

/// Reads a "dependent,dependency" CSV manifest.
inline ManifestResult build_dependency_graph(std::istream& in) {
  ManifestResult out;
  std::string line;
  if (!std::getline(in, line)) return out;
  {
    std::string_view header = line;
    auto comma = header.find(',');
    if (comma == std::string_view::npos ||
        detail::trim_field(header.substr(0, comma)) != "dependent" ||
        detail::trim_field(header.substr(comma + 1)) != "dependency")
      throw DataError("manifest header must be \"dependent,dependency\"");
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::string_view sv = line;
    if (detail::trim_field(sv).empty()) continue;
    auto comma = sv.find(',');
    if (comma == std::string_view::npos || sv.find(',', comma + 1) != std::string_view::npos) {
      out.diagnostics.push_back({row, "expected 2 fields"});
      continue;
    }
    auto a = detail::trim_field(sv.substr(0, comma));
    auto b = detail::trim_field(sv.substr(comma + 1));
    if (a.empty() || b.empty()) {
      out.diagnostics.push_back({row, "empty project id"});
      continue;
    }
    if (!out.graph.add(ProjectId{std::string(a)}, ProjectId{std::string(b)}))
      out.diagnostics.push_back({row, "self-dependency rejected: " + std::string(a)});
  }
  if (in.bad()) throw std::runtime_error("I/O error while reading manifest");
  return out;
}

inline ManifestResult build_dependency_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dependency manifest: " + path.string());
  return build_dependency_graph(in);
}

inline void write_dependency_graph(std::ostream& out, const DependencyGraph& g) {
  out << "dependent,dependency\n";
  for (const auto& [a, b] : g.edges()) out << a.str() << ',' << b.str() << '\n';
}

}  // namespace ecocontrib

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ecocontrib/depgraph.hpp"

using namespace ecocontrib;

namespace {
ProjectId P(const char* s) { return ProjectId{s}; }
}  // namespace

TEST(BuildDependencyGraph, DeduplicatesRows) {
  std::istringstream in("dependent,dependency\nB,A\nB,A\n");
  auto r = build_dependency_graph(in);
  EXPECT_EQ(r.graph.size(), 1u);
  EXPECT_TRUE(r.graph.depends_on(P("B"), P("A")));
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(BuildDependencyGraph, RejectsSelfEdge) {
  std::istringstream in("dependent,dependency\nA,A\n");
  auto r = build_dependency_graph(in);
  EXPECT_EQ(r.graph.size(), 0u);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].row, 1u);
}

TEST(BuildDependencyGraph, NoTransitiveEdges) {
  std::istringstream in("dependent,dependency\nB,A\nC,B\n");
  auto r = build_dependency_graph(in);
  EXPECT_EQ(r.graph.size(), 2u);
  EXPECT_FALSE(r.graph.depends_on(P("C"), P("A")));
  EXPECT_EQ(r.graph.classify(P("A"), P("C")), Scope::NonDependency);
}

TEST(BuildDependencyGraph, MalformedRowsReported) {
  std::istringstream in("dependent,dependency\nB,A\nonlyone\nx,y,z\n,A\n");
  auto r = build_dependency_graph(in);
  EXPECT_EQ(r.graph.size(), 1u);
  ASSERT_EQ(r.diagnostics.size(), 3u);
  EXPECT_EQ(r.diagnostics[0].row, 2u);
  EXPECT_EQ(r.diagnostics[1].row, 3u);
  EXPECT_EQ(r.diagnostics[2].row, 4u);
}

TEST(BuildDependencyGraph, BadHeaderThrows) {
  std::istringstream in("from,to\nB,A\n");
  EXPECT_THROW(build_dependency_graph(in), DataError);
}

TEST(ClassifyScope, WorkedExample) {
  DependencyGraph g;
  g.add(P("B"), P("A"));
  EXPECT_EQ(classify_scope(g, P("A"), P("B")), Scope::Downstream);
  EXPECT_EQ(classify_scope(g, P("B"), P("A")), Scope::Upstream);
  EXPECT_EQ(classify_scope(g, P("A"), P("C")), Scope::NonDependency);
  EXPECT_EQ(classify_scope(g, P("A"), P("A")), Scope::IntraProject);
}

TEST(ClassifyScope, MutualDependencyIsDownstreamBothWays) {
  DependencyGraph g;
  g.add(P("A"), P("B"));
  g.add(P("B"), P("A"));
  EXPECT_EQ(g.classify(P("A"), P("B")), Scope::Downstream);
  EXPECT_EQ(g.classify(P("B"), P("A")), Scope::Downstream);
}

TEST(ClassifyScope, PartitionAndDualityOnRandomAcyclicGraphs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + int(rng() % 12);
    DependencyGraph g;
    // Edges only from higher to lower index keep the graph acyclic.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (rng() % 3 == 0) g.add(ProjectId{"p" + std::to_string(i)}, ProjectId{"p" + std::to_string(j)});
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const ProjectId pa{"p" + std::to_string(a)}, pb{"p" + std::to_string(b)};
        const auto s = g.classify(pa, pb);
        if (a == b) {
          EXPECT_EQ(s, Scope::IntraProject);
          continue;
        }
        EXPECT_NE(s, Scope::IntraProject);
        const auto back = g.classify(pb, pa);
        EXPECT_EQ(s == Scope::Downstream, back == Scope::Upstream);
        EXPECT_EQ(s == Scope::NonDependency, back == Scope::NonDependency);
      }
  }
}

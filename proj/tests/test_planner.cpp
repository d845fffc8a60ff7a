#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "gara/planner.hpp"
#include "gara/rng.hpp"

using namespace gara;
using agents::TransitionRecord;
using geometry::Box;
using geometry::Partition;
using maze::State;
using planner::GoalGraph;

namespace {

// Lane of `n` unit cells along x; handy for graphs with many nodes.
Partition lane(int n) {
  Partition p;
  p.extent = Box{{0.0, 0.0, -1.0, -1.0}, {static_cast<double>(n), 1.0, 1.0, 1.0}};
  for (int i = 0; i < n; ++i) {
    p.boxes.push_back(Box{{static_cast<double>(i), 0.0, -1.0, -1.0},
                          {static_cast<double>(i + 1), 1.0, 1.0, 1.0}});
  }
  return p;
}

TransitionRecord hop(int i, int j, double r_ext) {
  TransitionRecord rec;
  rec.s_init = State{i + 0.5, 0.5, 0, 0};
  rec.s_end = State{j + 0.5, 0.5, 0, 0};
  rec.g_s = i;
  rec.g_d = j;
  rec.r_ext = r_ext;
  return rec;
}

GoalGraph graph_from_hops(
    int n, const std::vector<std::pair<std::pair<int, int>, double>>& hops) {
  GoalGraph g;
  g.n = n;
  for (const auto& [edge, r] : hops) {
    auto& info = g.edges[edge];
    info.max_r_ext = std::max(info.max_r_ext, r);
    info.count += 1;
  }
  return g;
}

}  // namespace

TEST_CASE("build_graph: nodes per cell, weights from max external reward") {
  const Partition p = lane(4);

  const GoalGraph empty = planner::build_graph(p, {});
  CHECK(empty.n == 4);
  CHECK(empty.edges.empty());

  std::vector<TransitionRecord> mem{hop(0, 1, 0.0)};
  GoalGraph g = planner::build_graph(p, mem);
  REQUIRE(g.edges.count({0, 1}) == 1);
  CHECK(g.edges.at({0, 1}).weight() == doctest::Approx(1.0));

  mem.push_back(hop(0, 1, 1.0));
  g = planner::build_graph(p, mem);
  CHECK(g.edges.at({0, 1}).weight() == doctest::Approx(0.5));
  CHECK(g.edges.at({0, 1}).count == 2);

  // Records are re-resolved by locating endpoints, not by stored indices.
  TransitionRecord stale = hop(2, 3, 0.0);
  stale.g_s = 0;
  stale.g_d = 0;
  g = planner::build_graph(p, std::vector<TransitionRecord>{stale});
  CHECK(g.edges.count({2, 3}) == 1);
}

TEST_CASE("edge weight never increases as higher rewards arrive") {
  Rng rng(8);
  planner::EdgeInfo info;
  double prev = info.weight();
  for (int i = 0; i < 100; ++i) {
    info.max_r_ext = std::max(info.max_r_ext, rng.uniform());
    CHECK(info.weight() <= prev + 1e-15);
    CHECK(info.weight() > 0.0);
    CHECK(info.weight() <= 1.0);
    prev = info.weight();
  }
}

TEST_CASE("shortest_path: trivial, unreachable, and lexicographic ties") {
  GoalGraph g = graph_from_hops(5, {{{0, 1}, 0.0},
                                    {{1, 4}, 0.0},
                                    {{0, 2}, 0.0},
                                    {{2, 4}, 0.0}});

  const auto self = planner::shortest_path(g, 3, 3);
  REQUIRE(self.has_value());
  CHECK(*self == std::vector<int>{3});
  CHECK(planner::path_cost(g, *self) == 0.0);

  CHECK(!planner::shortest_path(g, 4, 0).has_value());

  // Two equal-cost routes 0-1-4 and 0-2-4: the smaller sequence wins.
  const auto tie = planner::shortest_path(g, 0, 4);
  REQUIRE(tie.has_value());
  CHECK(*tie == std::vector<int>{0, 1, 4});
}

TEST_CASE("dijkstra agrees with exhaustive enumeration on random digraphs") {
  Rng rng(2718);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(7));
    GoalGraph g;
    g.n = n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || rng.uniform() > 0.45) continue;
        planner::EdgeInfo info;
        info.max_r_ext = rng.uniform();  // weight = 1/(1+r) in (0.5, 1]
        info.count = 1;
        g.edges[{i, j}] = info;
      }
    }
    const int src = static_cast<int>(rng.index(n));
    const int dst = static_cast<int>(rng.index(n));

    // Oracle: depth-first enumeration of all simple paths.
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> stack{src};
    std::vector<bool> used(n, false);
    used[src] = true;
    auto dfs = [&](auto&& self, int u, double cost) -> void {
      if (u == dst) {
        best = std::min(best, cost);
        return;
      }
      for (const auto& [edge, info] : g.edges) {
        if (edge.first != u || used[edge.second]) continue;
        used[edge.second] = true;
        self(self, edge.second, cost + info.weight());
        used[edge.second] = false;
      }
    };
    dfs(dfs, src, 0.0);

    const auto path = planner::shortest_path(g, src, dst);
    if (!path.has_value()) {
      CHECK(std::isinf(best));
    } else {
      REQUIRE(std::isfinite(best));
      CHECK(planner::path_cost(g, *path) == doctest::Approx(best).epsilon(1e-12));
      CHECK(path->front() == src);
      CHECK(path->back() == dst);
    }
  }
}

TEST_CASE("plan_goal follows the published path shape and falls back to random") {
  // Chain 6 -> 0 -> 4 -> 8 -> 16 with rewarding hops; decoy edges cost 1.
  GoalGraph g = graph_from_hops(
      17, {{{6, 0}, 1.0}, {{0, 4}, 1.0}, {{4, 8}, 1.0}, {{8, 16}, 1.0},
           {{6, 5}, 0.0}, {{5, 16}, 0.0}, {{6, 7}, 0.0}, {{7, 8}, 0.0}});

  const auto path = planner::shortest_path(g, 6, 16);
  REQUIRE(path.has_value());
  CHECK(*path == std::vector<int>{6, 0, 4, 8, 16});

  Rng rng(1);
  CHECK(planner::plan_goal(g, 6, 16, rng) == 0);

  // Unreachable target: uniform fallback to some other cell.
  for (int i = 0; i < 20; ++i) {
    const int pick = planner::plan_goal(g, 16, 6, rng);
    CHECK(pick != 16);
    CHECK(pick >= 0);
    CHECK(pick < 17);
  }
  // Degenerate current == target.
  for (int i = 0; i < 20; ++i) CHECK(planner::plan_goal(g, 3, 3, rng) != 3);
}

TEST_CASE("best_reward_target picks the cell with the richest incoming edge") {
  GoalGraph g = graph_from_hops(5, {{{0, 1}, 0.0}, {{1, 2}, 0.0}});
  CHECK(!planner::best_reward_target(g).has_value());

  g = graph_from_hops(5, {{{0, 1}, 0.0}, {{1, 4}, 1.0}, {{1, 3}, 0.5}});
  const auto target = planner::best_reward_target(g);
  REQUIRE(target.has_value());
  CHECK(*target == 4);
}

TEST_CASE("dot export lists nodes and labeled edges") {
  GoalGraph g = graph_from_hops(3, {{{0, 1}, 1.0}});
  const std::string dot = planner::to_dot(g);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("0 -> 1") != std::string::npos);
  CHECK(dot.find("w=0.5000, n=1") != std::string::npos);
  CHECK(dot.find("2 [label=\"2\"]") != std::string::npos);
}

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gara/agents.hpp"
#include "gara/geometry.hpp"
#include "gara/rng.hpp"

namespace gara::planner {

struct EdgeInfo {
  double max_r_ext = 0.0;
  int count = 0;

  double weight() const { return 1.0 / (1.0 + max_r_ext); }  // in (0, 1]
};

// Directed graph over partition cells; an edge exists only when at least one
// recorded segment transitioned between the two cells.
struct GoalGraph {
  int n = 0;
  std::map<std::pair<int, int>, EdgeInfo> edges;
};

// One node per cell; records are re-resolved against the current partition
// by locating their endpoints, so refinement never orphans the graph.
GoalGraph build_graph(const geometry::Partition& p,
                      std::span<const agents::TransitionRecord> memory);

// Minimum-total-weight directed path (Dijkstra; weights positive). Cost ties
// break toward the lexicographically smallest node sequence. Absent when dst
// is unreachable.
std::optional<std::vector<int>> shortest_path(const GoalGraph& g, int src, int dst);

double path_cost(const GoalGraph& g, std::span<const int> path);

// Second node of the shortest path current -> target; when no such path with
// at least two nodes exists, a uniform random cell other than current.
int plan_goal(const GoalGraph& g, int current, int target, Rng& rng);

// Cell with the highest incoming max_r_ext, or absent before any external
// reward has been recorded.
std::optional<int> best_reward_target(const GoalGraph& g);

// DOT rendering with edge labels "w=..., n=...".
std::string to_dot(const GoalGraph& g);

}  // namespace gara::planner

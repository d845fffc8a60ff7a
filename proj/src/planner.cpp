#include "gara/planner.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gara::planner {

GoalGraph build_graph(const geometry::Partition& p,
                      std::span<const agents::TransitionRecord> memory) {
  GoalGraph g;
  g.n = static_cast<int>(p.size());
  for (const agents::TransitionRecord& rec : memory) {
    const int i = static_cast<int>(geometry::locate(p, rec.s_init.as_array()));
    const int j = static_cast<int>(geometry::locate(p, rec.s_end.as_array()));
    EdgeInfo& e = g.edges[{i, j}];
    e.max_r_ext = std::max(e.max_r_ext, rec.r_ext);
    e.count += 1;
  }
  return g;
}

std::optional<std::vector<int>> shortest_path(const GoalGraph& g, int src, int dst) {
  if (src < 0 || src >= g.n || dst < 0 || dst >= g.n) {
    throw std::invalid_argument("shortest_path: node out of range");
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.n, inf);
  std::vector<std::vector<int>> path(g.n);
  std::vector<bool> settled(g.n, false);
  dist[src] = 0.0;
  path[src] = {src};

  auto relax = [&](int u) {
    bool changed = false;
    for (const auto& [edge, info] : g.edges) {
      if (edge.first != u) continue;
      const int v = edge.second;
      const double nd = dist[u] + info.weight();
      if (nd < dist[v]) {
        dist[v] = nd;
        path[v] = path[u];
        path[v].push_back(v);
        changed = true;
      } else if (nd == dist[v]) {
        std::vector<int> cand = path[u];
        cand.push_back(v);
        if (cand < path[v]) {
          path[v] = std::move(cand);
          changed = true;
        }
      }
    }
    return changed;
  };

  for (int round = 0; round < g.n; ++round) {
    int u = -1;
    for (int i = 0; i < g.n; ++i) {
      if (!settled[i] && dist[i] < inf && (u < 0 || dist[i] < dist[u])) u = i;
    }
    if (u < 0) break;
    settled[u] = true;
    relax(u);
  }
  // Equal-cost predecessors may settle after their successors; sweep until
  // the lexicographic tie-break is stable.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int u = 0; u < g.n; ++u) {
      if (dist[u] < inf && relax(u)) changed = true;
    }
  }

  if (dist[dst] == inf) return std::nullopt;
  return path[dst];
}

double path_cost(const GoalGraph& g, std::span<const int> path) {
  double cost = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto it = g.edges.find({path[i], path[i + 1]});
    if (it == g.edges.end()) {
      throw std::invalid_argument("path_cost: missing edge");
    }
    cost += it->second.weight();
  }
  return cost;
}

int plan_goal(const GoalGraph& g, int current, int target, Rng& rng) {
  if (current < 0 || current >= g.n) {
    throw std::invalid_argument("plan_goal: node out of range");
  }
  if (target >= 0 && target < g.n && target != current) {
    const auto path = shortest_path(g, current, target);
    if (path && path->size() >= 2) return (*path)[1];
  }
  if (g.n == 1) return current;
  const int pick = static_cast<int>(rng.index(std::size_t(g.n) - 1));
  return pick >= current ? pick + 1 : pick;
}

std::optional<int> best_reward_target(const GoalGraph& g) {
  std::optional<int> best;
  double best_r = 0.0;
  for (const auto& [edge, info] : g.edges) {
    if (info.max_r_ext > 0.0 &&
        (!best || info.max_r_ext > best_r ||
         (info.max_r_ext == best_r && edge.second < *best))) {
      best = edge.second;
      best_r = info.max_r_ext;
    }
  }
  return best;
}

std::string to_dot(const GoalGraph& g) {
  std::ostringstream out;
  out << "digraph goals {\n";
  for (int i = 0; i < g.n; ++i) {
    out << "  " << i << " [label=\"" << i << "\"];\n";
  }
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& [edge, info] : g.edges) {
    out << "  " << edge.first << " -> " << edge.second << " [label=\"w="
        << info.weight() << ", n=" << info.count << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace gara::planner

#include "gara/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "gara/rng.hpp"

namespace gara::harness {

using geometry::Box;
using geometry::Partition;

Variant variant_from_string(const std::string& s) {
  if (s == "gara") return Variant::gara;
  if (s == "gara_planning") return Variant::gara_planning;
  if (s == "handcrafted") return Variant::handcrafted;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gara: return "gara";
    case Variant::gara_planning: return "gara_planning";
    case Variant::handcrafted: return "handcrafted";
  }
  return "?";
}

void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config json must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "t_re") cfg.split.t_re = value.get<double>();
    else if (key == "t_unre") cfg.split.t_unre = value.get<double>();
    else if (key == "k") cfg.k = value.get<int>();
    else if (key == "eps_decay") cfg.low.eps_decay = value.get<double>();
    else if (key == "lr_low") cfg.low.lr = value.get<double>();
    else if (key == "lr_fk") cfg.fwd.lr = value.get<double>();
    else if (key == "gamma_lo") cfg.low.gamma = value.get<double>();
    else if (key == "gamma_hi") cfg.gamma_high = value.get<double>();
    else if (key == "dbscan_eps") cfg.dbscan.eps = value.get<double>();
    else if (key == "dbscan_min_pts") cfg.dbscan.min_pts = value.get<int>();
    else if (key == "W") cfg.stability_window = value.get<int>();
    else if (key == "stability_tol") cfg.stability_tol = value.get<double>();
    else if (key == "min_width") cfg.split.min_width = value.get<double>();
    else if (key == "max_leaves") cfg.split.max_leaves = value.get<int>();
    else if (key == "replay_capacity") cfg.low.replay_capacity = value.get<std::size_t>();
    else if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
    else if (key == "target_update") cfg.low.target_update = value.get<int>();
    else if (key == "n_eps") cfg.n_eps = value.get<int>();
    else if (key == "max_steps") cfg.max_steps = value.get<int>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "maze") cfg.maze = value.get<std::string>();
    else if (key == "variant") cfg.variant = variant_from_string(value.get<std::string>());
    else if (key == "alpha_high") cfg.alpha_high = value.get<double>();
    else if (key == "eps_high_min") cfg.eps_high_min = value.get<double>();
    else if (key == "transfer_partition") cfg.transfer_partition = value.get<std::string>();
    else if (key == "audit") cfg.audit = value.get<bool>();
    else throw std::invalid_argument("unknown config key: " + key);
  }
}

geometry::Partition handcrafted_partition(const maze::MazeConfig& cfg) {
  const Box extent = maze::state_extent(cfg);
  auto cell = [&](double x0, double y0, double x1, double y1) {
    return Box{{x0, y0, -1.0, -1.0}, {x1, y1, 1.0, 1.0}};
  };
  Partition p;
  p.extent = extent;
  if (cfg.name == "u_shaped" || cfg.name == "u_shaped_switched") {
    p.boxes = {cell(0, 0, 10, 5), cell(0, 5, 10, 10)};
  } else if (cfg.name == "four_rooms") {
    p.boxes = {cell(0, 0, 5, 5), cell(5, 0, 10, 5), cell(0, 5, 5, 10),
               cell(5, 5, 10, 10)};
  } else if (cfg.name == "n_shaped") {
    p.boxes = {cell(0, 0, 10, 6.5), cell(0, 6.5, 10, 13.5), cell(0, 13.5, 10, 20)};
  } else if (cfg.name == "two_paths") {
    p.boxes = {cell(0, 0, 2, 10), cell(2, 0, 8, 1), cell(2, 1, 8, 8),
               cell(2, 8, 8, 10), cell(8, 0, 10, 10)};
  } else {
    throw std::invalid_argument("no handcrafted partition for maze: " + cfg.name);
  }
  return p;
}

void save_partition(const Partition& p, const std::string& path, long long step) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write partition file: " + path);
  out << geometry::partition_to_json(p, step).dump(2) << "\n";
}

Partition load_partition(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open partition file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed partition file " + path + ": " + e.what());
  }
  return geometry::partition_from_json(j);
}

std::vector<double> rolling_success(std::span<const std::uint8_t> successes,
                                    int window) {
  std::vector<double> out(successes.size(), 0.0);
  double acc = 0.0;
  for (std::size_t e = 0; e < successes.size(); ++e) {
    acc += successes[e];
    if (e >= static_cast<std::size_t>(window)) acc -= successes[e - window];
    const double span = std::min<std::size_t>(e + 1, window);
    out[e] = acc / span;
  }
  return out;
}

void export_curves(std::span<const RunReport> reports, const std::string& path) {
  if (reports.empty()) throw std::invalid_argument("export_curves: no reports");
  std::size_t n_eps = reports.front().successes.size();
  for (const RunReport& r : reports) {
    n_eps = std::min(n_eps, r.successes.size());
  }

  std::vector<std::vector<double>> rolled;
  rolled.reserve(reports.size());
  for (const RunReport& r : reports) rolled.push_back(rolling_success(r.successes));

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curves file: " + path);
  out << "episode,mean_success,std_success,env_steps\n";
  for (std::size_t e = 0; e < n_eps; ++e) {
    double mean = 0.0, steps = 0.0;
    for (std::size_t s = 0; s < reports.size(); ++s) {
      mean += rolled[s][e];
      steps += static_cast<double>(reports[s].env_steps[e]);
    }
    mean /= static_cast<double>(reports.size());
    steps /= static_cast<double>(reports.size());
    double var = 0.0;
    for (std::size_t s = 0; s < reports.size(); ++s) {
      const double d = rolled[s][e] - mean;
      var += d * d;
    }
    var /= static_cast<double>(reports.size());
    out << (e + 1) << "," << mean << "," << std::sqrt(var) << "," << steps << "\n";
  }
}

namespace {

nlohmann::json state_to_json(const maze::State& s) {
  return nlohmann::json::array({s.x, s.y, s.vx, s.vy});
}

nlohmann::json record_to_json(const agents::TransitionRecord& rec) {
  return nlohmann::json{{"s_init", state_to_json(rec.s_init)}, {"g_s", rec.g_s},
                        {"s_end", state_to_json(rec.s_end)},   {"g_d", rec.g_d},
                        {"r_ext", rec.r_ext},                  {"done", rec.done},
                        {"episode", rec.episode}};
}

}  // namespace

nlohmann::json report_to_json(const RunReport& report, bool include_timing) {
  nlohmann::json j;
  j["maze"] = report.maze;
  j["variant"] = to_string(report.variant);
  j["seed"] = report.seed;
  j["episodes"] = report.successes.size();
  j["successes"] = report.successes;
  j["env_steps"] = report.env_steps;
  j["total_env_steps"] = report.total_env_steps;
  j["final_partition"] = geometry::partition_to_json(report.final_partition,
                                                     report.total_env_steps);
  j["snapshots"] = nlohmann::json::array();
  for (const PartitionSnapshot& snap : report.snapshots) {
    j["snapshots"].push_back(geometry::partition_to_json(snap.partition, snap.step));
  }
  j["q_table"] = nlohmann::json::array();
  for (int s = 0; s < report.final_q.n; ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (int d = 0; d < report.final_q.n; ++d) row.push_back(report.final_q.at(s, d));
    j["q_table"].push_back(row);
  }
  if (include_timing) j["wall_time_s"] = report.wall_time_s;
  return j;
}

void save_report(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << report_to_json(report).dump(2) << "\n";
}

void dump_memory_jsonl(std::span<const agents::TransitionRecord> memory,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write memory file: " + path);
  for (const agents::TransitionRecord& rec : memory) {
    out << record_to_json(rec).dump() << "\n";
  }
}

void dump_replay_jsonl(std::span<const agents::ReplayEntry> replay,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write replay file: " + path);
  for (const agents::ReplayEntry& e : replay) {
    out << nlohmann::json{{"state", e.state},         {"enc", e.enc},
                          {"action", e.action},       {"reward", e.reward},
                          {"next_state", e.next_state}, {"terminal", e.terminal}}
               .dump()
        << "\n";
  }
}

void export_qtable_csv(const agents::QTable& q, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write q-table file: " + path);
  out << "src,dst,value\n";
  for (int s = 0; s < q.n; ++s) {
    for (int d = 0; d < q.n; ++d) {
      out << s << "," << d << "," << q.at(s, d) << "\n";
    }
  }
}

namespace {

void validate_config(const RunConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (cfg.max_steps < cfg.k) throw std::invalid_argument("config: max_steps < k");
  if (cfg.n_eps < 0) throw std::invalid_argument("config: negative n_eps");
  if (!reachability::is_valid(cfg.split)) {
    throw std::invalid_argument("config: invalid split thresholds");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("config: batch_size zero");
  if (cfg.stability_window < 1) throw std::invalid_argument("config: W must be >= 1");
}

// Cells ordered by how many of the given states they contain, most first;
// ties to the lowest index. Also reports each cell's share.
std::vector<std::pair<int, double>> cells_by_mass(
    const Partition& p, std::span<const maze::State> states) {
  std::vector<int> count(p.size(), 0);
  for (const maze::State& s : states) {
    ++count[geometry::locate(p, s.as_array())];
  }
  std::vector<std::pair<int, double>> order;
  for (std::size_t i = 0; i < p.size(); ++i) {
    order.emplace_back(static_cast<int>(i),
                       static_cast<double>(count[i]) /
                           std::max<std::size_t>(1, states.size()));
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return order;
}

void audit_partition_change(const Partition& old_p, const Partition& new_p) {
  if (!geometry::is_partition_valid(new_p)) {
    throw std::runtime_error("partition audit: invariants violated after refinement");
  }
  if (!geometry::refines(new_p, old_p)) {
    throw std::runtime_error("partition audit: refinement chain broken");
  }
  if (new_p.size() < old_p.size()) {
    throw std::runtime_error("partition audit: cell count decreased");
  }
}

}  // namespace

RunReport run_training(const RunConfig& cfg) {
  validate_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();

  const bool from_file = cfg.maze.size() > 5 &&
                         cfg.maze.substr(cfg.maze.size() - 5) == ".json";
  const maze::MazeConfig env =
      from_file ? maze::load_maze_file(cfg.maze) : maze::load_maze(cfg.maze);
  const Box extent = maze::state_extent(env);

  Partition partition;
  if (cfg.variant == Variant::handcrafted) {
    partition = cfg.handcrafted_partition.empty()
                    ? handcrafted_partition(env)
                    : load_partition(cfg.handcrafted_partition);
  } else if (!cfg.transfer_partition.empty()) {
    partition = load_partition(cfg.transfer_partition);
  } else {
    partition = geometry::trivial_partition(extent);
  }
  if (partition.extent != extent) {
    throw std::runtime_error("initial partition extent does not match the maze");
  }

  Rng env_rng = Rng::labeled(cfg.seed, "env");
  Rng low_rng = Rng::labeled(cfg.seed, "low");
  Rng high_rng = Rng::labeled(cfg.seed, "high");
  Rng fk_rng = Rng::labeled(cfg.seed, "fk");

  const std::size_t state_dim = extent.dim();
  const std::size_t enc_dim = 2 * state_dim;
  agents::LowAgent low(state_dim, enc_dim, cfg.low, low_rng);
  agents::ForwardConfig fwd_cfg = cfg.fwd;
  agents::ForwardModel fm(state_dim, enc_dim, fwd_cfg, cfg.stability_window,
                          cfg.stability_tol, fk_rng);
  agents::QTable q(static_cast<int>(partition.size()), cfg.alpha_high, cfg.gamma_high);

  std::ofstream trace_out;
  reachability::TraceFn trace_fn;
  if (!cfg.reach_trace_path.empty()) {
    trace_out.open(cfg.reach_trace_path);
    if (!trace_out) throw std::runtime_error("cannot write reach trace file");
    trace_fn = [&trace_out](const Box& box, const Box& image, double r,
                            std::string_view verdict) {
      trace_out << nlohmann::json{{"box", geometry::box_to_json(box)},
                                  {"image", geometry::box_to_json(image)},
                                  {"r", r},
                                  {"verdict", std::string(verdict)}}
                       .dump()
                << "\n";
    };
  }
  const reachability::TraceFn* trace = trace_fn ? &trace_fn : nullptr;

  RunReport report;
  report.maze = cfg.maze;
  report.variant = cfg.variant;
  report.seed = cfg.seed;
  report.snapshots.push_back({0, partition});

  std::vector<agents::TransitionRecord> memory;
  // Records from this index on carry cell indices valid for the current
  // partition (everything since the last refinement).
  std::size_t mem_valid_begin = 0;
  double eps_high = cfg.eps_high0;
  bool reward_seen = false;
  long long env_steps = 0;

  planner::GoalGraph graph;

  auto pick_goal = [&](int g_s) {
    if (cfg.variant == Variant::gara_planning) {
      const std::optional<int> target = planner::best_reward_target(graph);
      if (target) return planner::plan_goal(graph, g_s, *target, high_rng);
      // Cold start: no external reward recorded yet, explore uniformly.
      if (graph.n <= 1) return g_s;
      const int pick = static_cast<int>(high_rng.index(std::size_t(graph.n) - 1));
      return pick >= g_s ? pick + 1 : pick;
    }
    // While the Q-table is identically zero there is nothing to exploit and
    // greedy ties would pin the goal to the lowest cell; anneal only once an
    // external reward has been seen.
    const int goal = agents::select_goal_high(q, g_s, eps_high, high_rng);
    if (reward_seen) {
      eps_high = std::max(cfg.eps_high_min, eps_high * cfg.eps_high_decay);
    }
    return goal;
  };

  for (int ep = 1; ep <= cfg.n_eps; ++ep) {
    if (cfg.variant == Variant::gara_planning) {
      graph = planner::build_graph(partition, memory);
    }

    maze::State s = maze::reset(env, env_rng.next_u64());
    const std::size_t ep_records_begin = memory.size();
    std::vector<maze::State> visited;
    visited.reserve(cfg.max_steps);
    std::set<std::pair<int, int>> episode_edges;

    int g_s = static_cast<int>(geometry::locate(partition, s.as_array()));
    int g_d = pick_goal(g_s);
    episode_edges.insert({g_s, g_d});

    maze::State seg_start = s;
    double seg_max_r = 0.0;
    bool done = false;
    bool success = false;

    for (int t = 1; t <= cfg.max_steps; ++t) {
      const std::vector<double> enc = geometry::goal_encoding(partition.boxes[g_d], extent);
      const std::vector<double> s_norm = geometry::normalize_point(s.as_array(), extent);
      const maze::Action a = low.act(s_norm, enc, low_rng);
      const maze::StepResult res = maze::step(s, a, env);
      ++env_steps;

      const int landed = static_cast<int>(geometry::locate(partition, res.state.as_array()));
      const bool in_goal = landed == g_d;
      const double r_low = agents::reward_low(in_goal, res.reward);
      low.remember({s_norm, enc, static_cast<int>(a), r_low,
                    geometry::normalize_point(res.state.as_array(), extent),
                    res.done || in_goal});
      low.learn(cfg.batch_size, low_rng);

      visited.push_back(res.state);
      seg_max_r = std::max(seg_max_r, res.reward);
      if (res.reward > 0.0) reward_seen = true;
      s = res.state;
      done = res.done;
      success = success || done;

      const bool boundary = (t % cfg.k == 0) || in_goal || done;
      if (cfg.step_trace) {
        cfg.step_trace({ep, t, boundary && !done, in_goal, done, g_s, g_d});
      }
      if (boundary) {
        const agents::TransitionRecord rec{seg_start, g_s,     s,  g_d,
                                           seg_max_r, done, ep};
        memory.push_back(rec);
        agents::update_high(q, rec, landed);
        if (done) break;
        seg_start = s;
        g_s = landed;
        g_d = pick_goal(g_s);
        episode_edges.insert({g_s, g_d});
        seg_max_r = 0.0;
      }
    }

    report.successes.push_back(success ? 1 : 0);
    report.env_steps.push_back(env_steps);

    if (cfg.variant == Variant::handcrafted) continue;  // fixed representation

    const std::span<const agents::TransitionRecord> ep_records(
        memory.data() + ep_records_begin, memory.size() - ep_records_begin);
    // Branch guard: reachability analysis runs when the episode ended with
    // its destination reached (or with the exit found); episodes that end
    // stuck take the density fallback and carve out explored structure.
    bool destination_reached = success;
    if (!destination_reached && !ep_records.empty()) {
      const agents::TransitionRecord& last = ep_records.back();
      destination_reached =
          static_cast<int>(geometry::locate(partition, last.s_end.as_array())) ==
          last.g_d;
    }

    Partition refined = partition;
    const bool refine_branch = partition.size() > 1 && destination_reached;
    if (refine_branch) {
      ++report.refine_episodes;
      const std::span<const agents::TransitionRecord> valid(
          memory.data() + mem_valid_begin, memory.size() - mem_valid_begin);
      agents::update_forward_model(fm, valid, ep_records_begin - mem_valid_begin,
                                   partition, fk_rng);
      refined = reachability::refine_goals(partition, episode_edges, fm.net,
                                           fm.stats, cfg.split, trace);
    } else {
      ++report.cluster_episodes;
      // Cold-start split: separate the states reached so far (the segment
      // endpoints in the memory) from the rest of a frequently visited cell.
      // Cells are tried by their share of the recent memory; cells holding
      // only a sliver of it are not worth carving, which caps the carve rate
      // as the partition grows.
      const std::size_t from = memory.size() > 4000 ? memory.size() - 4000 : 0;
      const int cell = cells_by_mass(partition, visited).front().first;
      std::vector<maze::State> in_cell;
      for (std::size_t i = from; i < memory.size(); ++i) {
        const maze::State& v = memory[i].s_end;
        if (static_cast<int>(geometry::locate(partition, v.as_array())) == cell) {
          in_cell.push_back(v);
        }
      }
      refined = agents::cluster_refine(partition, in_cell, cell, cfg.dbscan);
    }

    if (refined.boxes != partition.boxes) {
      if (refine_branch) ++report.refine_changes;
      else ++report.cluster_changes;
      if (cfg.audit) audit_partition_change(partition, refined);
      q = agents::remap_qtable(q, partition, refined);
      fm.stats = agents::remap_stats(fm.stats, partition, refined);
      partition = std::move(refined);
      report.snapshots.push_back({env_steps, partition});
      mem_valid_begin = memory.size();
    }
  }

  report.total_env_steps = env_steps;
  report.final_partition = partition;
  report.final_q = q;
  report.memory = std::move(memory);
  if (cfg.keep_replay) report.replay = low.replay();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace gara::harness

#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gara/agents.hpp"
#include "gara/geometry.hpp"
#include "gara/maze.hpp"
#include "gara/planner.hpp"
#include "gara/reachability.hpp"

namespace gara::harness {

enum class Variant { gara, gara_planning, handcrafted };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

// Step-level trace for tests: fired once per environment step.
struct StepEvent {
  int episode = 0;
  int t = 0;  // 1-based step index within the episode
  bool resampled = false;
  bool in_goal = false;
  bool done = false;
  int g_s = 0;
  int g_d = 0;
};

struct RunConfig {
  std::string maze = "u_shaped";  // built-in name, or a path ending in .json
  Variant variant = Variant::gara;
  int n_eps = 300;
  int k = 5;
  int max_steps = 200;
  std::uint64_t seed = 1;
  std::size_t batch_size = 64;

  agents::LowConfig low;
  agents::ForwardConfig fwd;
  reachability::SplitConfig split;
  agents::DbscanConfig dbscan;

  double alpha_high = 0.1;
  double gamma_high = 0.9;
  double eps_high0 = 1.0;
  double eps_high_min = 0.05;
  double eps_high_decay = 0.9995;

  int stability_window = 5;
  double stability_tol = 0.1;

  std::string transfer_partition;     // path; loaded as the initial partition
  std::string handcrafted_partition;  // path; default handcrafted fixture otherwise

  bool audit = false;            // partition invariants checked after every change
  bool keep_replay = false;      // copy the replay buffer into the report
  std::string reach_trace_path;  // JSONL of image computations, when set

  std::function<void(const StepEvent&)> step_trace;
};

// Overrides defaults from a JSON object. Recognized keys: t_re, t_unre, k,
// eps_decay, lr_low, lr_fk, gamma_lo, gamma_hi, dbscan_eps, dbscan_min_pts,
// W, stability_tol, min_width, max_leaves, replay_capacity, batch_size,
// target_update, plus n_eps, max_steps, seed, maze, variant, alpha_high,
// eps_high_min, transfer_partition, audit.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

struct PartitionSnapshot {
  long long step = 0;  // cumulative env steps when the partition changed
  geometry::Partition partition;
};

struct RunReport {
  std::string maze;
  Variant variant = Variant::gara;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> successes;      // per episode
  std::vector<long long> env_steps;         // cumulative, at each episode end
  long long total_env_steps = 0;
  int refine_episodes = 0;   // episodes that took the reachability branch
  int cluster_episodes = 0;  // episodes that took the density fallback
  int refine_changes = 0;    // how many of each actually changed the partition
  int cluster_changes = 0;
  std::vector<PartitionSnapshot> snapshots;  // includes the initial partition
  geometry::Partition final_partition;
  agents::QTable final_q;
  std::vector<agents::TransitionRecord> memory;
  std::vector<agents::ReplayEntry> replay;
  double wall_time_s = 0.0;
};

// The full training loop. Deterministic given the config (seed included).
RunReport run_training(const RunConfig& cfg);

// Built-in fixed goal representations (rooms split at walls, no velocity
// splits), matching the JSON fixtures under data/handcrafted/.
geometry::Partition handcrafted_partition(const maze::MazeConfig& cfg);

void save_partition(const geometry::Partition& p, const std::string& path,
                    long long step = 0);
geometry::Partition load_partition(const std::string& path);

// CSV with columns episode, mean_success, std_success, env_steps; success is
// a rolling mean over a 20-episode window, aggregated across runs.
void export_curves(std::span<const RunReport> reports, const std::string& path);
std::vector<double> rolling_success(std::span<const std::uint8_t> successes,
                                    int window = 20);

nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);
void save_report(const RunReport& report, const std::string& path);
void dump_memory_jsonl(std::span<const agents::TransitionRecord> memory,
                       const std::string& path);
void dump_replay_jsonl(std::span<const agents::ReplayEntry> replay,
                       const std::string& path);
void export_qtable_csv(const agents::QTable& q, const std::string& path);

}  // namespace gara::harness

#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gara/geometry.hpp"
#include "gara/maze.hpp"
#include "gara/reachability.hpp"
#include "gara/rng.hpp"
#include "gara/tinynet.hpp"

namespace gara::agents {

using geometry::goal_encoding;

// One completed high-level segment: at most k low-level steps, or fewer when
// the goal set was entered or the episode ended.
struct TransitionRecord {
  maze::State s_init;
  int g_s = 0;  // cell of s_init at record time
  maze::State s_end;
  int g_d = 0;  // intended destination cell at record time
  double r_ext = 0.0;  // max external reward over the segment
  bool done = false;
  int episode = 0;
};

// Tabular Q over (source cell, destination cell).
struct QTable {
  int n = 0;
  double alpha = 0.1;
  double gamma = 0.9;
  std::vector<double> q;  // n x n, row-major

  QTable() = default;
  QTable(int cells, double alpha_, double gamma_)
      : n(cells), alpha(alpha_), gamma(gamma_), q(std::size_t(cells) * cells, 0.0) {}

  double& at(int s, int d) { return q[std::size_t(s) * n + d]; }
  double at(int s, int d) const { return q[std::size_t(s) * n + d]; }
};

// Epsilon-greedy over destinations other than the current cell; greedy ties
// resolve to the lowest index. A single-cell table returns the cell itself.
int select_goal_high(const QTable& q, int g_s, double eps_hi, Rng& rng);

// Q(g_s, g_d) += alpha * (r_ext + gamma * max_a Q(g_reached, a) - Q);
// terminal segments bootstrap with zero.
void update_high(QTable& q, const TransitionRecord& rec, int g_reached);

// Children of a split cell inherit the parent's row and column values.
QTable remap_qtable(const QTable& q, const geometry::Partition& old_p,
                    const geometry::Partition& new_p);

// Keep error windows of cells whose box survived the refinement; drop the rest.
reachability::EdgeErrorStats remap_stats(const reachability::EdgeErrorStats& stats,
                                         const geometry::Partition& old_p,
                                         const geometry::Partition& new_p);

// Low-level reward: goal-entry indicator plus the external reward.
inline double reward_low(bool in_goal, double r_ext) {
  return (in_goal ? 1.0 : 0.0) + r_ext;
}

struct ReplayEntry {
  std::vector<double> state;  // normalized
  std::vector<double> enc;    // goal encoding, never a cell index
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;  // normalized
  bool terminal = false;           // episode done or goal entered
};

struct LowConfig {
  std::vector<std::size_t> hidden = {16, 32};
  double lr = 0.01;
  double gamma = 0.95;
  double eps0 = 1.0;
  double eps_min = 0.01;
  double eps_decay = 0.9995;
  std::size_t replay_capacity = 100000;
  int target_update = 20;
};

// Goal-conditioned DQN: the goal encoding is an extra network input, so one
// network serves every goal and survives partition refinement.
class LowAgent {
 public:
  LowAgent(std::size_t state_dim, std::size_t enc_dim, const LowConfig& cfg,
           Rng& init_rng);

  // Epsilon-greedy action, then eps <- max(eps_min, eps * eps_decay).
  maze::Action act(std::span<const double> state_norm,
                   std::span<const double> enc, Rng& rng);

  void remember(ReplayEntry e);

  // One DQN step on a sampled minibatch; absent when replay is too small.
  std::optional<double> learn(std::size_t batch_size, Rng& rng);

  double epsilon() const { return eps_; }
  std::size_t replay_size() const { return replay_.size(); }
  const std::vector<ReplayEntry>& replay() const { return replay_; }
  const tinynet::Mlp& online() const { return online_; }
  tinynet::Mlp& online() { return online_; }
  tinynet::Mlp& target() { return target_; }

 private:
  LowConfig cfg_;
  tinynet::Mlp online_, target_;
  std::vector<ReplayEntry> replay_;
  std::size_t replay_head_ = 0;
  double eps_;
  long learn_count_ = 0;
};

struct ForwardConfig {
  std::vector<std::size_t> hidden = {16, 16};
  double lr = 0.1;
  std::size_t minibatch = 32;
  int epochs = 4;  // passes over the episode's records per update
};

// k-step forward model: predicts the normalized state reached after running
// the low-level policy toward a goal for one segment.
struct ForwardModel {
  tinynet::Mlp net;
  reachability::EdgeErrorStats stats;
  ForwardConfig cfg;

  ForwardModel(std::size_t state_dim, std::size_t enc_dim,
               const ForwardConfig& cfg_, int stability_window,
               double stability_tol, Rng& init_rng);
};

// Trains the net on records[train_begin:] (the last episode), then records a
// validation MSE per edge visited by those records into the error stats. The
// error pools each edge's recent records from the whole span, so consecutive
// windows overlap and a converged model shows up as a flat series. Cell
// indices must be valid for p across the entire span. Returns the per-edge
// MSE map; an empty training slice is a no-op.
std::map<std::pair<int, int>, double> update_forward_model(
    ForwardModel& fm, std::span<const TransitionRecord> records,
    std::size_t train_begin, const geometry::Partition& p, Rng& rng);

struct DbscanConfig {
  double eps = 0.05;  // normalized coordinates
  int min_pts = 5;
  // A cluster bounding box only replaces the cell when it is meaningfully
  // smaller than the cell itself.
  double max_fill = 0.9;
  // The largest cluster must hold at least this share of the points before
  // it is worth carving out.
  double min_cluster_fraction = 0.2;
  // Bounding-box faces this close (normalized) to a cell face snap onto it,
  // so carving never leaves hairline slabs along walls.
  double snap_tol = 0.02;
  // Carved boxes are widened to at least this normalized width per
  // dimension; wall-pinned states otherwise yield sliver cells.
  double min_box_width = 0.1;
  // Cells below this share of the extent volume are left alone; density
  // splitting is for structuring large unexplored regions, not confetti.
  double min_cell_volume = 0.01;
};

// Labels per point: cluster id from 0, or -1 for noise. Deterministic given
// the point order.
std::vector<int> dbscan(std::span<const std::vector<double>> points, double eps,
                        int min_pts);

// Density-based fallback split: bound the largest cluster of visited states
// and carve it out of the cell. Returns the partition unchanged when no
// cluster exists or its bounding box nearly fills the cell.
geometry::Partition cluster_refine(const geometry::Partition& p,
                                   std::span<const maze::State> visited,
                                   int cell, const DbscanConfig& cfg);

}  // namespace gara::agents

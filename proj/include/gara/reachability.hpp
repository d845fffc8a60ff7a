#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "gara/geometry.hpp"
#include "gara/tinynet.hpp"

namespace gara::reachability {

struct SplitConfig {
  double t_re = 0.9;      // above: piece classified reached
  double t_unre = 0.1;    // below: piece classified unreached
  double min_width = 0.02;  // normalized; halving stops below 2x this
  int max_leaves = 64;      // bound on image computations per split
  // A split that still has more pieces than this after coalescing did not
  // separate reached from unreached regions; the source is kept whole.
  int max_pieces = 16;
};

bool is_valid(const SplitConfig& cfg);  // 0 <= t_unre < t_re <= 1, min_width > 0

// Recent validation errors of the forward model, per (source, destination)
// cell pair. A fixed-length window; refinement waits until it is both full
// and flat.
struct EdgeErrorStats {
  int window = 5;
  double stability_tol = 0.1;
  std::map<std::pair<int, int>, std::deque<double>> errors;

  void record(std::pair<int, int> edge, double mse);
};

// True iff the edge has a full window and (max-min)/max < stability_tol
// (or the window is identically zero).
bool is_stable(const EdgeErrorStats& stats, std::pair<int, int> edge);

// Optional observer for each image computation: source box, image box,
// volume ratio r, and the verdict ("reached" / "unreached" / "split").
using TraceFn = std::function<void(const geometry::Box&, const geometry::Box&,
                                   double, std::string_view)>;

// Sound enclosure of the forward model's image of g for a fixed goal
// encoding, intersected with the state extent. The encoding enters as a
// degenerate interval: the goal is a parameter of the query, not an
// uncertain input.
geometry::Box fnn_reach(const tinynet::Mlp& fk, const geometry::Box& g,
                        std::span<const double> goal_encoding,
                        const geometry::Box& extent);

struct SplitOutcome {
  std::vector<geometry::Box> reached;
  std::vector<geometry::Box> unreached;
};

// Worklist preimage splitting. Each popped piece is classified by
// r = Volume(image ∩ g_d) / Volume(image): above t_re reached, below t_unre
// unreached, otherwise halved along its widest normalized dimension. Pieces
// at min_width, or once the image budget is spent, classify by r >= 0.5.
// The output tiles g_s exactly.
SplitOutcome split_set(const geometry::Box& g_s, const geometry::Box& g_d,
                       const tinynet::Mlp& fk, const SplitConfig& cfg,
                       const geometry::Box& extent,
                       const TraceFn* trace = nullptr);

// For every visited edge with stable error, split the source cell against
// the (original) destination and splice the pieces into the partition.
// Sources already replaced this round are re-resolved by containment.
// Edges are processed in ascending (src, dst) order.
geometry::Partition refine_goals(const geometry::Partition& p,
                                 const std::set<std::pair<int, int>>& edges,
                                 const tinynet::Mlp& fk,
                                 const EdgeErrorStats& stats,
                                 const SplitConfig& cfg,
                                 const TraceFn* trace = nullptr);

}  // namespace gara::reachability

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

namespace gara::geometry {

// Axis-aligned interval product. The unit of goal abstraction.
struct Box {
  std::vector<double> lo, hi;

  std::size_t dim() const { return lo.size(); }
  double width(std::size_t d) const { return hi[d] - lo[d]; }
  double center(std::size_t d) const { return 0.5 * (lo[d] + hi[d]); }
  std::vector<double> center() const;

  bool operator==(const Box&) const = default;
};

bool is_valid(const Box& b);  // lo <= hi element-wise, all finite

// Product of side lengths; 0 if any side has zero width.
double volume(const Box& b);

// Element-wise max of lows / min of highs; empty when any lo > hi.
std::optional<Box> intersect(const Box& a, const Box& b);

// Two boxes sharing the midpoint face on `dim`; union is b exactly.
std::pair<Box, Box> halve(const Box& b, std::size_t dim);

bool contains_point(const Box& b, std::span<const double> p);  // closed
bool contains_box(const Box& outer, const Box& inner);         // closed
bool interiors_overlap(const Box& a, const Box& b);

// <= 2*dim boxes that together with b tile g exactly (guillotine cuts per
// axis). Zero-width slabs are dropped. Requires b inside g.
std::vector<Box> complement_decompose(const Box& g, const Box& b);

// The union of a and b when they share a full face; empty otherwise.
std::optional<Box> merge_adjacent(const Box& a, const Box& b);

// Greedily merges face-adjacent boxes until no pair merges; the union of the
// list is unchanged.
std::vector<Box> coalesce(std::vector<Box> boxes);

// Finite list of interior-disjoint boxes covering `extent`.
struct Partition {
  std::vector<Box> boxes;
  Box extent;

  std::size_t size() const { return boxes.size(); }
  bool operator==(const Partition&) const = default;
};

Partition trivial_partition(const Box& extent);

// Index of the box containing s. Boxes are half-open [lo, hi) with the
// extent's upper faces closed; boundary ties resolve to the lowest index.
std::size_t locate(const Partition& p, std::span<const double> s);

// New partition with boxes[idx] removed and `pieces` appended. Pieces must
// tile boxes[idx] exactly (disjoint interiors, volume sum equal).
Partition replace_box(const Partition& p, std::size_t idx,
                      const std::vector<Box>& pieces);

bool is_partition_valid(const Partition& p, double rel_tol = 1e-6);

// True when every box of `finer` is contained in some box of `coarser`.
bool refines(const Partition& finer, const Partition& coarser);

// Normalized coordinates: each dimension rescaled to [0,1] by the extent, so
// position and velocity dimensions weigh equally in widths and ratios.
double normalized_width(const Box& b, const Box& extent, std::size_t d);
std::size_t widest_dim(const Box& b, const Box& extent);  // ties -> lowest
std::vector<double> normalize_point(std::span<const double> s, const Box& extent);
Box normalize_box(const Box& b, const Box& extent);
Box denormalize_box(const Box& b, const Box& extent);

// Fixed encoding of a goal box: [lo, hi] in normalized coordinates
// (2*dim values). Injective over boxes of one extent.
std::vector<double> goal_encoding(const Box& g, const Box& extent);

// JSON forms: a box is [[lo...],[hi...]]; a partition snapshot is
// {extent, boxes, step}.
nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j);
nlohmann::json partition_to_json(const Partition& p, long long step = 0);
Partition partition_from_json(const nlohmann::json& j);

}  // namespace gara::geometry

#include "gara/reachability.hpp"

#include <algorithm>
#include <stdexcept>

namespace gara::reachability {

using geometry::Box;
using geometry::Partition;

bool is_valid(const SplitConfig& cfg) {
  return 0.0 <= cfg.t_unre && cfg.t_unre < cfg.t_re && cfg.t_re <= 1.0 &&
         cfg.min_width > 0.0 && cfg.max_leaves >= 1;
}

void EdgeErrorStats::record(std::pair<int, int> edge, double mse) {
  auto& buf = errors[edge];
  buf.push_back(mse);
  while (static_cast<int>(buf.size()) > window) buf.pop_front();
}

bool is_stable(const EdgeErrorStats& stats, std::pair<int, int> edge) {
  const auto it = stats.errors.find(edge);
  if (it == stats.errors.end()) return false;
  const auto& buf = it->second;
  if (static_cast<int>(buf.size()) < stats.window) return false;
  const double mx = *std::max_element(buf.begin(), buf.end());
  if (mx == 0.0) return true;
  const double mn = *std::min_element(buf.begin(), buf.end());
  return (mx - mn) / mx < stats.stability_tol;
}

Box fnn_reach(const tinynet::Mlp& fk, const Box& g,
              std::span<const double> goal_encoding, const Box& extent) {
  const Box gn = geometry::normalize_box(g, extent);
  tinynet::IntervalVector in;
  in.lo.reserve(gn.dim() + goal_encoding.size());
  in.hi.reserve(gn.dim() + goal_encoding.size());
  in.lo.insert(in.lo.end(), gn.lo.begin(), gn.lo.end());
  in.hi.insert(in.hi.end(), gn.hi.begin(), gn.hi.end());
  in.lo.insert(in.lo.end(), goal_encoding.begin(), goal_encoding.end());
  in.hi.insert(in.hi.end(), goal_encoding.begin(), goal_encoding.end());

  const tinynet::IntervalVector out = interval_forward(fk, in);

  // Clamp into the normalized extent [0,1]^d; empty overlaps collapse onto
  // the nearest face.
  Box img;
  img.lo.resize(out.lo.size());
  img.hi.resize(out.hi.size());
  for (std::size_t d = 0; d < out.lo.size(); ++d) {
    img.lo[d] = std::clamp(out.lo[d], 0.0, 1.0);
    img.hi[d] = std::clamp(out.hi[d], 0.0, 1.0);
  }
  return geometry::denormalize_box(img, extent);
}

namespace {

double overlap_ratio(const Box& image, const Box& g_d) {
  const double vol = geometry::volume(image);
  if (vol == 0.0) {
    const std::vector<double> c = image.center();
    return geometry::contains_point(g_d, c) ? 1.0 : 0.0;
  }
  const auto inter = geometry::intersect(image, g_d);
  if (!inter) return 0.0;
  return geometry::volume(*inter) / vol;
}

}  // namespace

SplitOutcome split_set(const Box& g_s, const Box& g_d, const tinynet::Mlp& fk,
                       const SplitConfig& cfg, const Box& extent,
                       const TraceFn* trace) {
  if (!is_valid(cfg)) throw std::invalid_argument("split_set: invalid config");
  const std::vector<double> enc = geometry::goal_encoding(g_d, extent);

  SplitOutcome out;
  std::vector<Box> worklist{g_s};
  // Every queued box consumes exactly one image computation; splitting adds
  // one to the commitment, so total image calls never exceed max_leaves.
  int committed = 1;

  enum class Verdict { reached, unreached, split };

  while (!worklist.empty()) {
    Box g = std::move(worklist.back());
    worklist.pop_back();

    const Box image = fnn_reach(fk, g, enc, extent);
    const double r = overlap_ratio(image, g_d);

    Verdict verdict;
    if (r > cfg.t_re) {
      verdict = Verdict::reached;
    } else if (r < cfg.t_unre) {
      verdict = Verdict::unreached;
    } else {
      const std::size_t dim = geometry::widest_dim(g, extent);
      const bool can_split =
          committed < cfg.max_leaves &&
          geometry::normalized_width(g, extent, dim) >= 2.0 * cfg.min_width;
      if (can_split) {
        verdict = Verdict::split;
        ++committed;
      } else {
        verdict = r >= 0.5 ? Verdict::reached : Verdict::unreached;
      }
    }

    if (trace && *trace) {
      (*trace)(g, image, r,
               verdict == Verdict::split
                   ? "split"
                   : verdict == Verdict::reached ? "reached" : "unreached");
    }

    switch (verdict) {
      case Verdict::split: {
        auto [left, right] = geometry::halve(g, geometry::widest_dim(g, extent));
        worklist.push_back(std::move(right));
        worklist.push_back(std::move(left));
        break;
      }
      case Verdict::reached:
        out.reached.push_back(std::move(g));
        break;
      case Verdict::unreached:
        out.unreached.push_back(std::move(g));
        break;
    }
  }
  // Same-verdict fragments merge back where they share a face; the reached
  // and unreached sets are unchanged, just coarser.
  out.reached = geometry::coalesce(std::move(out.reached));
  out.unreached = geometry::coalesce(std::move(out.unreached));
  return out;
}

Partition refine_goals(const Partition& p,
                       const std::set<std::pair<int, int>>& edges,
                       const tinynet::Mlp& fk, const EdgeErrorStats& stats,
                       const SplitConfig& cfg, const TraceFn* trace) {
  Partition result = p;
  for (const auto& edge : edges) {
    const auto [src, dst] = edge;
    if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= p.size() ||
        static_cast<std::size_t>(dst) >= p.size()) {
      throw std::invalid_argument("refine_goals: edge references invalid cell");
    }
    if (!is_stable(stats, edge)) continue;

    const Box& original_src = p.boxes[src];
    const Box& g_d = p.boxes[dst];

    // Cells currently covering the original source; just the source itself
    // unless an earlier edge already split it.
    std::vector<Box> sources;
    for (const Box& b : result.boxes) {
      if (geometry::contains_box(original_src, b)) sources.push_back(b);
    }

    for (const Box& source : sources) {
      SplitOutcome split = split_set(source, g_d, fk, cfg, result.extent, trace);
      std::vector<Box> pieces = std::move(split.reached);
      pieces.insert(pieces.end(), split.unreached.begin(), split.unreached.end());
      if (pieces.size() <= 1) continue;  // nothing to splice
      if (static_cast<int>(pieces.size()) > cfg.max_pieces) continue;

      const auto it = std::find(result.boxes.begin(), result.boxes.end(), source);
      if (it == result.boxes.end()) continue;
      result = geometry::replace_box(
          result, static_cast<std::size_t>(it - result.boxes.begin()), pieces);
    }
  }
  return result;
}

}  // namespace gara::reachability

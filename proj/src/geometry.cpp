#include "gara/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gara::geometry {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double rel_close(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace

std::vector<double> Box::center() const {
  std::vector<double> c(dim());
  for (std::size_t d = 0; d < dim(); ++d) c[d] = center(d);
  return c;
}

bool is_valid(const Box& b) {
  if (b.lo.size() != b.hi.size() || b.lo.empty()) return false;
  for (std::size_t d = 0; d < b.dim(); ++d) {
    if (!std::isfinite(b.lo[d]) || !std::isfinite(b.hi[d])) return false;
    if (b.lo[d] > b.hi[d]) return false;
  }
  return true;
}

double volume(const Box& b) {
  double v = 1.0;
  for (std::size_t d = 0; d < b.dim(); ++d) v *= b.width(d);
  return v;
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  require(a.dim() == b.dim(), "intersect: dimension mismatch");
  Box r;
  r.lo.resize(a.dim());
  r.hi.resize(a.dim());
  for (std::size_t d = 0; d < a.dim(); ++d) {
    r.lo[d] = std::max(a.lo[d], b.lo[d]);
    r.hi[d] = std::min(a.hi[d], b.hi[d]);
    if (r.lo[d] > r.hi[d]) return std::nullopt;
  }
  return r;
}

std::pair<Box, Box> halve(const Box& b, std::size_t dim) {
  require(dim < b.dim(), "halve: dimension out of range");
  require(b.hi[dim] > b.lo[dim], "halve: zero-width dimension");
  const double mid = b.center(dim);
  Box left = b, right = b;
  left.hi[dim] = mid;
  right.lo[dim] = mid;
  return {left, right};
}

bool contains_point(const Box& b, std::span<const double> p) {
  if (p.size() != b.dim()) return false;
  for (std::size_t d = 0; d < b.dim(); ++d) {
    if (p[d] < b.lo[d] || p[d] > b.hi[d]) return false;
  }
  return true;
}

bool contains_box(const Box& outer, const Box& inner) {
  if (outer.dim() != inner.dim()) return false;
  for (std::size_t d = 0; d < outer.dim(); ++d) {
    if (inner.lo[d] < outer.lo[d] || inner.hi[d] > outer.hi[d]) return false;
  }
  return true;
}

bool interiors_overlap(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) return false;
  for (std::size_t d = 0; d < a.dim(); ++d) {
    if (std::max(a.lo[d], b.lo[d]) >= std::min(a.hi[d], b.hi[d])) return false;
  }
  return true;
}

std::vector<Box> complement_decompose(const Box& g, const Box& b) {
  require(contains_box(g, b), "complement_decompose: box not inside region");
  std::vector<Box> out;
  Box cur = g;
  for (std::size_t d = 0; d < g.dim(); ++d) {
    if (b.lo[d] > cur.lo[d]) {
      Box slab = cur;
      slab.hi[d] = b.lo[d];
      out.push_back(std::move(slab));
      cur.lo[d] = b.lo[d];
    }
    if (b.hi[d] < cur.hi[d]) {
      Box slab = cur;
      slab.lo[d] = b.hi[d];
      out.push_back(std::move(slab));
      cur.hi[d] = b.hi[d];
    }
  }
  return out;
}

std::optional<Box> merge_adjacent(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) return std::nullopt;
  std::size_t joint = a.dim();
  for (std::size_t d = 0; d < a.dim(); ++d) {
    if (a.lo[d] == b.lo[d] && a.hi[d] == b.hi[d]) continue;
    if (joint != a.dim()) return std::nullopt;  // differ on two dimensions
    if (a.hi[d] != b.lo[d] && b.hi[d] != a.lo[d]) return std::nullopt;
    joint = d;
  }
  if (joint == a.dim()) return std::nullopt;  // identical boxes
  Box out = a;
  out.lo[joint] = std::min(a.lo[joint], b.lo[joint]);
  out.hi[joint] = std::max(a.hi[joint], b.hi[joint]);
  return out;
}

std::vector<Box> coalesce(std::vector<Box> boxes) {
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
        if (auto m = merge_adjacent(boxes[i], boxes[j])) {
          boxes[i] = *m;
          boxes.erase(boxes.begin() + j);
          merged = true;
        }
      }
    }
  }
  return boxes;
}

Partition trivial_partition(const Box& extent) {
  require(is_valid(extent), "trivial_partition: invalid extent");
  return Partition{{extent}, extent};
}

namespace {

// Half-open membership [lo, hi), with hi closed where it coincides with the
// extent's upper face; makes cell ownership unique on shared faces.
bool cell_contains(const Box& b, std::span<const double> s, const Box& extent) {
  for (std::size_t d = 0; d < b.dim(); ++d) {
    if (s[d] < b.lo[d]) return false;
    if (s[d] > b.hi[d]) return false;
    if (s[d] == b.hi[d] && b.hi[d] != extent.hi[d]) return false;
  }
  return true;
}

}  // namespace

std::size_t locate(const Partition& p, std::span<const double> s) {
  require(contains_point(p.extent, s), "locate: state outside extent");
  for (std::size_t i = 0; i < p.boxes.size(); ++i) {
    if (cell_contains(p.boxes[i], s, p.extent)) return i;
  }
  throw std::logic_error("locate: partition does not cover state");
}

Partition replace_box(const Partition& p, std::size_t idx,
                      const std::vector<Box>& pieces) {
  require(idx < p.boxes.size(), "replace_box: index out of range");
  require(!pieces.empty(), "replace_box: empty piece list");
  const Box& target = p.boxes[idx];
  double sum = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    require(is_valid(pieces[i]) && pieces[i].dim() == target.dim(),
            "replace_box: invalid piece");
    require(contains_box(target, pieces[i]), "replace_box: piece outside target");
    sum += volume(pieces[i]);
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      require(!interiors_overlap(pieces[i], pieces[j]),
              "replace_box: overlapping pieces");
    }
  }
  require(rel_close(sum, volume(target)) <= 1e-6, "replace_box: pieces do not tile");

  Partition out;
  out.extent = p.extent;
  out.boxes.reserve(p.boxes.size() - 1 + pieces.size());
  for (std::size_t i = 0; i < p.boxes.size(); ++i) {
    if (i != idx) out.boxes.push_back(p.boxes[i]);
  }
  for (const Box& piece : pieces) out.boxes.push_back(piece);
  return out;
}

bool is_partition_valid(const Partition& p, double rel_tol) {
  if (!is_valid(p.extent) || p.boxes.empty()) return false;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.boxes.size(); ++i) {
    const Box& b = p.boxes[i];
    if (!is_valid(b) || b.dim() != p.extent.dim()) return false;
    if (!contains_box(p.extent, b)) return false;
    sum += volume(b);
    for (std::size_t j = i + 1; j < p.boxes.size(); ++j) {
      if (interiors_overlap(b, p.boxes[j])) return false;
    }
  }
  return rel_close(sum, volume(p.extent)) <= rel_tol;
}

bool refines(const Partition& finer, const Partition& coarser) {
  if (finer.extent != coarser.extent) return false;
  for (const Box& b : finer.boxes) {
    bool covered = false;
    for (const Box& c : coarser.boxes) {
      if (contains_box(c, b)) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

double normalized_width(const Box& b, const Box& extent, std::size_t d) {
  return b.width(d) / extent.width(d);
}

std::size_t widest_dim(const Box& b, const Box& extent) {
  std::size_t best = 0;
  double best_w = -1.0;
  for (std::size_t d = 0; d < b.dim(); ++d) {
    const double w = normalized_width(b, extent, d);
    if (w > best_w) {
      best_w = w;
      best = d;
    }
  }
  return best;
}

std::vector<double> normalize_point(std::span<const double> s, const Box& extent) {
  std::vector<double> out(s.size());
  for (std::size_t d = 0; d < s.size(); ++d) {
    out[d] = (s[d] - extent.lo[d]) / extent.width(d);
  }
  return out;
}

Box normalize_box(const Box& b, const Box& extent) {
  Box out;
  out.lo.resize(b.dim());
  out.hi.resize(b.dim());
  for (std::size_t d = 0; d < b.dim(); ++d) {
    out.lo[d] = (b.lo[d] - extent.lo[d]) / extent.width(d);
    out.hi[d] = (b.hi[d] - extent.lo[d]) / extent.width(d);
  }
  return out;
}

Box denormalize_box(const Box& b, const Box& extent) {
  Box out;
  out.lo.resize(b.dim());
  out.hi.resize(b.dim());
  for (std::size_t d = 0; d < b.dim(); ++d) {
    out.lo[d] = extent.lo[d] + b.lo[d] * extent.width(d);
    out.hi[d] = extent.lo[d] + b.hi[d] * extent.width(d);
  }
  return out;
}

std::vector<double> goal_encoding(const Box& g, const Box& extent) {
  const Box n = normalize_box(g, extent);
  std::vector<double> enc;
  enc.reserve(2 * g.dim());
  enc.insert(enc.end(), n.lo.begin(), n.lo.end());
  enc.insert(enc.end(), n.hi.begin(), n.hi.end());
  return enc;
}

nlohmann::json box_to_json(const Box& b) {
  return nlohmann::json::array({b.lo, b.hi});
}

Box box_from_json(const nlohmann::json& j) {
  require(j.is_array() && j.size() == 2, "box json must be [[lo...],[hi...]]");
  Box b;
  b.lo = j[0].get<std::vector<double>>();
  b.hi = j[1].get<std::vector<double>>();
  require(is_valid(b), "box json has invalid bounds");
  return b;
}

nlohmann::json partition_to_json(const Partition& p, long long step) {
  nlohmann::json j;
  j["extent"] = box_to_json(p.extent);
  j["boxes"] = nlohmann::json::array();
  for (const Box& b : p.boxes) j["boxes"].push_back(box_to_json(b));
  j["step"] = step;
  return j;
}

Partition partition_from_json(const nlohmann::json& j) {
  require(j.contains("extent") && j.contains("boxes"), "partition json incomplete");
  Partition p;
  p.extent = box_from_json(j.at("extent"));
  for (const auto& bj : j.at("boxes")) p.boxes.push_back(box_from_json(bj));
  require(is_partition_valid(p), "partition json violates partition invariants");
  return p;
}

}  // namespace gara::geometry

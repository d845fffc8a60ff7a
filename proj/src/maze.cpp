#include "gara/maze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "gara/rng.hpp"

namespace gara::maze {

namespace {

using geometry::Box;

constexpr double kContactMargin = 1e-6;

Box box2(double x0, double y0, double x1, double y1) {
  return Box{{x0, y0}, {x1, y1}};
}

MazeConfig u_shaped() {
  MazeConfig cfg;
  cfg.name = "u_shaped";
  cfg.bounds = box2(0, 0, 10, 10);
  cfg.walls = {box2(0, 4.5, 7, 5.5)};
  cfg.start_region = box2(0, 9, 1, 10);  // top-left corner
  cfg.exit_region = box2(0, 0, 1, 1);    // bottom-left corner
  return cfg;
}

MazeConfig u_shaped_switched() {
  MazeConfig cfg = u_shaped();
  cfg.name = "u_shaped_switched";
  std::swap(cfg.start_region, cfg.exit_region);
  return cfg;
}

MazeConfig four_rooms() {
  MazeConfig cfg;
  cfg.name = "four_rooms";
  cfg.bounds = box2(0, 0, 10, 10);
  cfg.walls = {
      // horizontal wall band y in [4.5, 5.5]; doors at x [2,3] and x [7,8]
      box2(0, 4.5, 2, 5.5),
      box2(3, 4.5, 4.5, 5.5),
      box2(5.5, 4.5, 7, 5.5),
      box2(8, 4.5, 10, 5.5),
      // vertical wall band x in [4.5, 5.5]; door at y [2,3], top half solid
      box2(4.5, 0, 5.5, 2),
      box2(4.5, 3, 5.5, 4.5),
      box2(4.5, 5.5, 5.5, 10),
      // center block where the bands cross
      box2(4.5, 4.5, 5.5, 5.5),
  };
  cfg.start_region = box2(0, 0, 1, 1);    // bottom-left room corner
  cfg.exit_region = box2(9, 9, 10, 10);    // top-right room corner
  return cfg;
}

MazeConfig n_shaped() {
  MazeConfig cfg;
  cfg.name = "n_shaped";
  cfg.bounds = box2(0, 0, 10, 20);
  cfg.walls = {
      box2(0, 6, 7, 7),     // gap on the right
      box2(3, 13, 10, 14),  // gap on the left
  };
  cfg.start_region = box2(0, 0, 1, 1);
  cfg.exit_region = box2(9, 19, 10, 20);
  return cfg;
}

MazeConfig two_paths() {
  MazeConfig cfg;
  cfg.name = "two_paths";
  cfg.bounds = box2(0, 0, 10, 10);
  // Central block: wide corridor above, narrow shortcut below.
  cfg.walls = {box2(2, 1, 8, 8)};
  cfg.start_region = box2(0, 4, 1, 5);
  cfg.exit_region = box2(9, 4, 10, 5);
  return cfg;
}

struct Hit {
  double t = 0;
  int axis = 0;     // 0 = x, 1 = y
  double face = 0;  // coordinate of the contacted surface on that axis
  double dir = 0;   // sign of motion along the axis at contact
};

// First entry of the segment p + t*d, t in [0,1], into the open rectangle.
bool wall_entry(const double p[2], const double d[2], const Box& w, Hit& hit) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int axis = -1;
  double face = 0, dir = 0;
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (p[a] <= w.lo[a] || p[a] >= w.hi[a]) return false;
      continue;
    }
    double t0 = (w.lo[a] - p[a]) / d[a];
    double t1 = (w.hi[a] - p[a]) / d[a];
    double f = d[a] > 0 ? w.lo[a] : w.hi[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      axis = a;
      face = f;
      dir = d[a];
    }
    tmax = std::min(tmax, t1);
  }
  if (axis < 0) return false;  // no moving axis constrains entry
  if (tmin > tmax || tmax <= 0.0) return false;
  if (tmin < 0.0 || tmin > 1.0) return false;
  hit = Hit{tmin, axis, face, dir};
  return true;
}

}  // namespace

std::vector<std::string> builtin_maze_names() {
  return {"u_shaped", "four_rooms", "n_shaped", "two_paths", "u_shaped_switched"};
}

MazeConfig load_maze(const std::string& name) {
  if (name == "u_shaped") return u_shaped();
  if (name == "four_rooms") return four_rooms();
  if (name == "n_shaped") return n_shaped();
  if (name == "two_paths") return two_paths();
  if (name == "u_shaped_switched") return u_shaped_switched();
  throw std::invalid_argument("unknown maze: " + name);
}

MazeConfig maze_from_json(const nlohmann::json& j, const std::string& name) {
  MazeConfig cfg;
  cfg.name = name;
  cfg.bounds = geometry::box_from_json(j.at("bounds"));
  for (const auto& wj : j.at("walls")) {
    cfg.walls.push_back(geometry::box_from_json(wj));
  }
  cfg.start_region = geometry::box_from_json(j.at("start_region"));
  cfg.exit_region = geometry::box_from_json(j.at("exit_region"));
  if (cfg.bounds.dim() != 2 || cfg.start_region.dim() != 2 || cfg.exit_region.dim() != 2) {
    throw std::invalid_argument("maze json: boxes must be 2-d");
  }
  if (!geometry::contains_box(cfg.bounds, cfg.start_region) ||
      !geometry::contains_box(cfg.bounds, cfg.exit_region)) {
    throw std::invalid_argument("maze json: start/exit outside bounds");
  }
  return cfg;
}

MazeConfig load_maze_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open maze file: " + path);
  nlohmann::json j;
  in >> j;
  return maze_from_json(j, path);
}

nlohmann::json maze_to_json(const MazeConfig& cfg) {
  nlohmann::json j;
  j["bounds"] = geometry::box_to_json(cfg.bounds);
  j["walls"] = nlohmann::json::array();
  for (const auto& w : cfg.walls) j["walls"].push_back(geometry::box_to_json(w));
  j["start_region"] = geometry::box_to_json(cfg.start_region);
  j["exit_region"] = geometry::box_to_json(cfg.exit_region);
  return j;
}

geometry::Box state_extent(const MazeConfig& cfg) {
  return geometry::Box{{cfg.bounds.lo[0], cfg.bounds.lo[1], -1.0, -1.0},
                       {cfg.bounds.hi[0], cfg.bounds.hi[1], 1.0, 1.0}};
}

State reset(const MazeConfig& cfg, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  State s;
  s.x = cfg.start_region.lo[0] + rng.uniform() * cfg.start_region.width(0);
  s.y = cfg.start_region.lo[1] + rng.uniform() * cfg.start_region.width(1);
  s.vx = 0.0;
  s.vy = 0.0;
  return s;
}

bool inside_any_wall(const MazeConfig& cfg, double x, double y) {
  for (const Box& w : cfg.walls) {
    if (x > w.lo[0] && x < w.hi[0] && y > w.lo[1] && y < w.hi[1]) return true;
  }
  return false;
}

StepResult step(const State& s, Action a, const MazeConfig& cfg) {
  double ax = 0.0, ay = 0.0;
  switch (a) {
    case Action::up: ay = 0.1; break;
    case Action::down: ay = -0.1; break;
    case Action::left: ax = -0.1; break;
    case Action::right: ax = 0.1; break;
  }
  double vx = std::clamp(s.vx + ax, -1.0, 1.0);
  double vy = std::clamp(s.vy + ay, -1.0, 1.0);

  const double p[2] = {s.x, s.y};
  const double d[2] = {vx * cfg.dt, vy * cfg.dt};

  double nx = s.x + d[0];
  double ny = s.y + d[1];

  if (d[0] != 0.0 || d[1] != 0.0) {
    std::vector<Hit> hits;
    Hit h;
    for (const Box& w : cfg.walls) {
      if (wall_entry(p, d, w, h)) hits.push_back(h);
    }
    for (int axis = 0; axis < 2; ++axis) {
      if (d[axis] > 0.0) {
        const double t = (cfg.bounds.hi[axis] - p[axis]) / d[axis];
        if (t >= 0.0 && t <= 1.0) hits.push_back(Hit{t, axis, cfg.bounds.hi[axis], d[axis]});
      } else if (d[axis] < 0.0) {
        const double t = (cfg.bounds.lo[axis] - p[axis]) / d[axis];
        if (t >= 0.0 && t <= 1.0) hits.push_back(Hit{t, axis, cfg.bounds.lo[axis], d[axis]});
      }
    }
    if (!hits.empty()) {
      double t_first = std::numeric_limits<double>::infinity();
      for (const Hit& hit : hits) t_first = std::min(t_first, hit.t);
      nx = p[0] + t_first * d[0];
      ny = p[1] + t_first * d[1];
      for (const Hit& hit : hits) {
        if (hit.t != t_first) continue;
        const double off = hit.dir > 0 ? -kContactMargin : kContactMargin;
        if (hit.axis == 0) {
          nx = hit.face + off;
          vx = 0.0;
        } else {
          ny = hit.face + off;
          vy = 0.0;
        }
      }
    }
  }

  nx = std::clamp(nx, cfg.bounds.lo[0], cfg.bounds.hi[0]);
  ny = std::clamp(ny, cfg.bounds.lo[1], cfg.bounds.hi[1]);

  StepResult out;
  out.state = State{nx, ny, vx, vy};
  const double pos[2] = {nx, ny};
  if (geometry::contains_point(cfg.exit_region, pos)) {
    out.reward = 1.0;
    out.done = true;
  }
  return out;
}

}  // namespace gara::maze

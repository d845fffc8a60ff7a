#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "gara/geometry.hpp"

namespace gara::maze {

// Full observed state of the point-mass agent.
struct State {
  double x = 0, y = 0, vx = 0, vy = 0;

  std::array<double, 4> as_array() const { return {x, y, vx, vy}; }
  bool operator==(const State&) const = default;
};

// Each action nudges the acceleration of one axis by 0.1 for this step.
enum class Action { up = 0, down = 1, left = 2, right = 3 };
inline constexpr int kNumActions = 4;

struct MazeConfig {
  std::string name;
  geometry::Box bounds;       // 2-d, over (x, y)
  std::vector<geometry::Box> walls;
  geometry::Box start_region;  // 2-d
  geometry::Box exit_region;   // 2-d
  double dt = 1.0;
};

// Built-in geometries: u_shaped, four_rooms, n_shaped, two_paths,
// u_shaped_switched. Unknown names are a configuration error.
MazeConfig load_maze(const std::string& name);
std::vector<std::string> builtin_maze_names();

// Geometry from a JSON file: {bounds, walls[], start_region, exit_region},
// boxes as [[lo...],[hi...]] pairs.
MazeConfig load_maze_file(const std::string& path);
nlohmann::json maze_to_json(const MazeConfig& cfg);
MazeConfig maze_from_json(const nlohmann::json& j, const std::string& name);

// State space of the maze: bounds x [-1,1] x [-1,1].
geometry::Box state_extent(const MazeConfig& cfg);

// Uniform position in start_region, zero velocity. Deterministic per seed.
State reset(const MazeConfig& cfg, std::uint64_t rng_seed);

struct StepResult {
  State state;
  double reward = 0.0;  // 1 exactly when the step ends inside exit_region
  bool done = false;
};

// Pure function of (state, action, config). Velocities follow the clamp rule
// v' = max(min(v + a, 1), -1); motion is clipped at the first wall or bound
// contact (minus a 1e-6 margin) with the normal velocity component zeroed.
StepResult step(const State& s, Action a, const MazeConfig& cfg);

bool inside_any_wall(const MazeConfig& cfg, double x, double y);  // open interiors

}  // namespace gara::maze

#include "gara/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gara::agents {

using geometry::Box;
using geometry::Partition;
using tinynet::Activation;
using tinynet::Mlp;
using tinynet::Sample;

int select_goal_high(const QTable& q, int g_s, double eps_hi, Rng& rng) {
  if (g_s < 0 || g_s >= q.n) throw std::invalid_argument("select_goal_high: bad cell");
  if (q.n == 1) return g_s;
  if (rng.uniform() < eps_hi) {
    // uniform over cells other than g_s
    int pick = static_cast<int>(rng.index(std::size_t(q.n) - 1));
    return pick >= g_s ? pick + 1 : pick;
  }
  int best = -1;
  double best_v = 0.0;
  for (int d = 0; d < q.n; ++d) {
    if (d == g_s) continue;
    const double v = q.at(g_s, d);
    if (best < 0 || v > best_v) {
      best = d;
      best_v = v;
    }
  }
  return best;
}

void update_high(QTable& q, const TransitionRecord& rec, int g_reached) {
  if (rec.g_s < 0 || rec.g_s >= q.n || rec.g_d < 0 || rec.g_d >= q.n ||
      g_reached < 0 || g_reached >= q.n) {
    throw std::invalid_argument("update_high: cell out of range");
  }
  double bootstrap = 0.0;
  if (!rec.done && q.n > 1) {
    bool first = true;
    for (int d = 0; d < q.n; ++d) {
      if (d == g_reached) continue;
      const double v = q.at(g_reached, d);
      if (first || v > bootstrap) {
        bootstrap = v;
        first = false;
      }
    }
  }
  double& cell = q.at(rec.g_s, rec.g_d);
  cell += q.alpha * (rec.r_ext + q.gamma * bootstrap - cell);
}

namespace {

// Parent of a refined cell in the coarser partition, found by its center.
std::vector<int> parent_map(const Partition& old_p, const Partition& new_p) {
  std::vector<int> parent(new_p.size());
  for (std::size_t i = 0; i < new_p.size(); ++i) {
    const std::vector<double> c = new_p.boxes[i].center();
    parent[i] = static_cast<int>(geometry::locate(old_p, c));
  }
  return parent;
}

}  // namespace

QTable remap_qtable(const QTable& q, const Partition& old_p, const Partition& new_p) {
  if (static_cast<int>(old_p.size()) != q.n) {
    throw std::invalid_argument("remap_qtable: table size does not match partition");
  }
  const std::vector<int> parent = parent_map(old_p, new_p);
  QTable out(static_cast<int>(new_p.size()), q.alpha, q.gamma);
  for (int s = 0; s < out.n; ++s) {
    for (int d = 0; d < out.n; ++d) {
      out.at(s, d) = q.at(parent[s], parent[d]);
    }
  }
  return out;
}

reachability::EdgeErrorStats remap_stats(const reachability::EdgeErrorStats& stats,
                                         const Partition& old_p,
                                         const Partition& new_p) {
  // Old index -> new index for cells whose box is unchanged.
  std::vector<int> fwd(old_p.size(), -1);
  for (std::size_t i = 0; i < old_p.size(); ++i) {
    const auto it = std::find(new_p.boxes.begin(), new_p.boxes.end(), old_p.boxes[i]);
    if (it != new_p.boxes.end()) {
      fwd[i] = static_cast<int>(it - new_p.boxes.begin());
    }
  }
  reachability::EdgeErrorStats out;
  out.window = stats.window;
  out.stability_tol = stats.stability_tol;
  for (const auto& [edge, buf] : stats.errors) {
    const int s = fwd[edge.first], d = fwd[edge.second];
    if (s >= 0 && d >= 0) out.errors[{s, d}] = buf;
  }
  return out;
}

LowAgent::LowAgent(std::size_t state_dim, std::size_t enc_dim, const LowConfig& cfg,
                   Rng& init_rng)
    : cfg_(cfg), eps_(cfg.eps0) {
  std::vector<std::size_t> dims{state_dim + enc_dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(maze::kNumActions);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::linear;
  online_ = tinynet::make_mlp(dims, acts, init_rng);
  target_ = online_;
}

maze::Action LowAgent::act(std::span<const double> state_norm,
                           std::span<const double> enc, Rng& rng) {
  int choice;
  if (rng.uniform() < eps_) {
    choice = static_cast<int>(rng.index(maze::kNumActions));
  } else {
    std::vector<double> x(state_norm.begin(), state_norm.end());
    x.insert(x.end(), enc.begin(), enc.end());
    const std::vector<double> qv = tinynet::forward(online_, x);
    choice = 0;
    for (int i = 1; i < maze::kNumActions; ++i) {
      if (qv[i] > qv[choice]) choice = i;
    }
  }
  eps_ = std::max(cfg_.eps_min, eps_ * cfg_.eps_decay);
  return static_cast<maze::Action>(choice);
}

void LowAgent::remember(ReplayEntry e) {
  if (replay_.size() < cfg_.replay_capacity) {
    replay_.push_back(std::move(e));
  } else {
    replay_[replay_head_] = std::move(e);
    replay_head_ = (replay_head_ + 1) % cfg_.replay_capacity;
  }
}

std::optional<double> LowAgent::learn(std::size_t batch_size, Rng& rng) {
  if (replay_.size() < batch_size) return std::nullopt;

  std::vector<Sample> batch;
  batch.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const ReplayEntry& e = replay_[rng.index(replay_.size())];
    std::vector<double> x(e.state);
    x.insert(x.end(), e.enc.begin(), e.enc.end());

    double target = e.reward;
    if (!e.terminal) {
      std::vector<double> xn(e.next_state);
      xn.insert(xn.end(), e.enc.begin(), e.enc.end());
      const std::vector<double> qn = tinynet::forward(target_, xn);
      target += cfg_.gamma * *std::max_element(qn.begin(), qn.end());
    }

    // Train only the taken action: every other output keeps its current
    // prediction as target, so its residual (and gradient) is zero.
    std::vector<double> y = tinynet::forward(online_, x);
    y[e.action] = target;
    batch.emplace_back(std::move(x), std::move(y));
  }

  const double loss = tinynet::train_batch(online_, batch, cfg_.lr);
  if (++learn_count_ % cfg_.target_update == 0) target_ = online_;
  return loss;
}

ForwardModel::ForwardModel(std::size_t state_dim, std::size_t enc_dim,
                           const ForwardConfig& cfg_, int stability_window,
                           double stability_tol, Rng& init_rng)
    : cfg(cfg_) {
  std::vector<std::size_t> dims{state_dim + enc_dim};
  dims.insert(dims.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  dims.push_back(state_dim);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::linear;
  net = tinynet::make_mlp(dims, acts, init_rng);
  stats.window = stability_window;
  stats.stability_tol = stability_tol;
}

std::map<std::pair<int, int>, double> update_forward_model(
    ForwardModel& fm, std::span<const TransitionRecord> records,
    std::size_t train_begin, const Partition& p, Rng& rng) {
  std::map<std::pair<int, int>, double> per_edge;
  if (train_begin >= records.size()) return per_edge;

  const Box& extent = p.extent;
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const TransitionRecord& rec : records) {
    std::vector<double> x = geometry::normalize_point(rec.s_init.as_array(), extent);
    const std::vector<double> enc = goal_encoding(p.boxes[rec.g_d], extent);
    x.insert(x.end(), enc.begin(), enc.end());
    samples.emplace_back(std::move(x),
                         geometry::normalize_point(rec.s_end.as_array(), extent));
  }

  std::vector<std::size_t> order(records.size() - train_begin);
  std::iota(order.begin(), order.end(), train_begin);
  for (int epoch = 0; epoch < fm.cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {  // Fisher-Yates
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    for (std::size_t at = 0; at < order.size(); at += fm.cfg.minibatch) {
      std::vector<Sample> mb;
      for (std::size_t i = at; i < std::min(at + fm.cfg.minibatch, order.size()); ++i) {
        mb.push_back(samples[order[i]]);
      }
      tinynet::train_batch(fm.net, mb, fm.cfg.lr);
    }
  }

  // Validation error per edge the last episode visited, pooled over that
  // edge's recent records (newest kEvalPool of them).
  constexpr std::size_t kEvalPool = 64;
  std::set<std::pair<int, int>> visited;
  for (std::size_t i = train_begin; i < records.size(); ++i) {
    visited.insert({records[i].g_s, records[i].g_d});
  }
  for (const auto& edge : visited) {
    std::vector<Sample> pool;
    for (std::size_t i = records.size(); i-- > 0 && pool.size() < kEvalPool;) {
      if (std::pair<int, int>{records[i].g_s, records[i].g_d} == edge) {
        pool.push_back(samples[i]);
      }
    }
    const double mse = tinynet::mse_loss(fm.net, pool);
    per_edge[edge] = mse;
    fm.stats.record(edge, mse);
  }
  return per_edge;
}

std::vector<int> dbscan(std::span<const std::vector<double>> points, double eps,
                        int min_pts) {
  const std::size_t n = points.size();
  std::vector<int> label(n, -1);
  std::vector<bool> visited(n, false);
  const double eps2 = eps * eps;

  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        const double d = points[i][k] - points[j][k];
        d2 += d * d;
      }
      if (d2 <= eps2) out.push_back(j);
    }
    return out;
  };

  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    std::vector<std::size_t> seeds = neighbors(i);
    if (static_cast<int>(seeds.size()) < min_pts) continue;  // noise (for now)

    label[i] = cluster;
    for (std::size_t at = 0; at < seeds.size(); ++at) {
      const std::size_t j = seeds[at];
      if (label[j] == -1) label[j] = cluster;  // border point
      if (visited[j]) continue;
      visited[j] = true;
      label[j] = cluster;
      const std::vector<std::size_t> more = neighbors(j);
      if (static_cast<int>(more.size()) >= min_pts) {
        seeds.insert(seeds.end(), more.begin(), more.end());
      }
    }
    ++cluster;
  }
  return label;
}

Partition cluster_refine(const Partition& p, std::span<const maze::State> visited,
                         int cell, const DbscanConfig& cfg) {
  if (cell < 0 || static_cast<std::size_t>(cell) >= p.size()) {
    throw std::invalid_argument("cluster_refine: cell out of range");
  }
  if (visited.empty()) return p;
  if (geometry::volume(p.boxes[cell]) <
      cfg.min_cell_volume * geometry::volume(p.extent)) {
    return p;
  }

  std::vector<std::vector<double>> pts;
  pts.reserve(visited.size());
  for (const maze::State& s : visited) {
    pts.push_back(geometry::normalize_point(s.as_array(), p.extent));
  }
  const std::vector<int> labels = dbscan(pts, cfg.eps, cfg.min_pts);

  int n_clusters = 0;
  for (int l : labels) n_clusters = std::max(n_clusters, l + 1);
  if (n_clusters == 0) return p;

  std::vector<int> count(n_clusters, 0);
  for (int l : labels) {
    if (l >= 0) ++count[l];
  }
  std::vector<int> by_size(n_clusters);
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](int a, int b) { return count[a] > count[b]; });

  const Box& cell_box = p.boxes[cell];

  // Carve the biggest cluster whose bounding box passes the gates; sprawling
  // clusters whose box nearly fills the cell are skipped in favor of denser
  // knots.
  for (const int chosen : by_size) {
    if (count[chosen] <
        std::max<double>(cfg.min_pts, cfg.min_cluster_fraction *
                                          static_cast<double>(visited.size()))) {
      break;  // sizes only get smaller from here
    }
    Box bbox;
    bbox.lo.assign(cell_box.dim(), std::numeric_limits<double>::infinity());
    bbox.hi.assign(cell_box.dim(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < visited.size(); ++i) {
      if (labels[i] != chosen) continue;
      const auto arr = visited[i].as_array();
      for (std::size_t d = 0; d < cell_box.dim(); ++d) {
        bbox.lo[d] = std::min(bbox.lo[d], arr[d]);
        bbox.hi[d] = std::max(bbox.hi[d], arr[d]);
      }
    }
    // Points live inside the cell; clamp guards the boundary, and faces close
    // to a cell face snap onto it so no hairline slabs are left behind.
    for (std::size_t d = 0; d < cell_box.dim(); ++d) {
      bbox.lo[d] = std::max(bbox.lo[d], cell_box.lo[d]);
      bbox.hi[d] = std::min(bbox.hi[d], cell_box.hi[d]);
      const double floor_w = cfg.min_box_width * p.extent.width(d);
      if (bbox.width(d) < floor_w) {  // widen symmetrically, inside the cell
        const double grow = 0.5 * (floor_w - bbox.width(d));
        bbox.lo[d] = std::max(cell_box.lo[d], bbox.lo[d] - grow);
        bbox.hi[d] = std::min(cell_box.hi[d], bbox.lo[d] + floor_w);
      }
      const double snap = cfg.snap_tol * p.extent.width(d);
      if (bbox.lo[d] - cell_box.lo[d] < snap) bbox.lo[d] = cell_box.lo[d];
      if (cell_box.hi[d] - bbox.hi[d] < snap) bbox.hi[d] = cell_box.hi[d];
    }

    if (geometry::volume(bbox) <= 0.0) continue;
    if (geometry::volume(bbox) > cfg.max_fill * geometry::volume(cell_box)) continue;

    std::vector<Box> pieces{bbox};
    const std::vector<Box> rest = geometry::complement_decompose(cell_box, bbox);
    pieces.insert(pieces.end(), rest.begin(), rest.end());
    return geometry::replace_box(p, static_cast<std::size_t>(cell), pieces);
  }
  return p;
}

}  // namespace gara::agents

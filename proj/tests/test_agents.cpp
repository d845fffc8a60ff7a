#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "gara/agents.hpp"
#include "gara/rng.hpp"

using namespace gara;
using agents::QTable;
using agents::TransitionRecord;
using geometry::Box;
using geometry::Partition;
using maze::State;

namespace {

const Box kExtent{{0, 0, -1, -1}, {10, 10, 1, 1}};

Partition grid_partition(int cells_x) {
  Partition p = geometry::trivial_partition(kExtent);
  for (int i = 1; i < cells_x; ++i) {
    // Split the last cell repeatedly along x.
    const std::size_t idx = p.size() - 1;
    const Box& b = p.boxes[idx];
    Box left = b, right = b;
    const double cut =
        kExtent.lo[0] + kExtent.width(0) * static_cast<double>(i) / cells_x;
    left.hi[0] = cut;
    right.lo[0] = cut;
    p = geometry::replace_box(p, idx, {left, right});
  }
  return p;
}

}  // namespace

TEST_CASE("goal_encoding length, endpoints, and injectivity") {
  CHECK(agents::goal_encoding(kExtent, kExtent) ==
        std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
  auto [a, b] = geometry::halve(kExtent, 2);
  const auto ea = agents::goal_encoding(a, kExtent);
  const auto eb = agents::goal_encoding(b, kExtent);
  CHECK(ea.size() == 8);
  CHECK(ea != eb);
}

TEST_CASE("select_goal_high: tie-break, argmax, and uniform exploration") {
  Rng rng(3);
  QTable q(6, 0.1, 0.9);

  CHECK(agents::select_goal_high(q, 2, 0.0, rng) == 0);  // all zeros: lowest
  CHECK(agents::select_goal_high(q, 0, 0.0, rng) == 1);  // lowest non-self

  q.at(2, 5) = 1.0;
  CHECK(agents::select_goal_high(q, 2, 0.0, rng) == 5);  // unique argmax

  QTable singleton(1, 0.1, 0.9);
  CHECK(agents::select_goal_high(singleton, 0, 0.5, rng) == 0);

  // Pure exploration is uniform over the other cells (chi-squared, df = 4).
  std::vector<int> counts(6, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const int pick = agents::select_goal_high(q, 2, 1.0, rng);
    REQUIRE(pick != 2);
    ++counts[pick];
  }
  const double expected = draws / 5.0;
  double chi2 = 0.0;
  for (int d = 0; d < 6; ++d) {
    if (d == 2) continue;
    const double diff = counts[d] - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 18.47);  // critical value at p = 0.001
}

TEST_CASE("update_high: textbook arithmetic") {
  QTable q(4, 0.1, 0.9);
  TransitionRecord rec;
  rec.g_s = 0;
  rec.g_d = 1;

  SUBCASE("terminal reward") {
    rec.r_ext = 1.0;
    rec.done = true;
    agents::update_high(q, rec, 1);
    CHECK(q.at(0, 1) == doctest::Approx(0.1));
  }
  SUBCASE("zero reward is a fixed point") {
    rec.r_ext = 0.0;
    rec.done = false;
    agents::update_high(q, rec, 1);
    CHECK(q.at(0, 1) == 0.0);
  }
  SUBCASE("bootstrap from the landed cell") {
    q.at(1, 3) = 1.0;  // max over destinations from the landed cell
    rec.r_ext = 0.0;
    rec.done = false;
    agents::update_high(q, rec, 1);
    CHECK(q.at(0, 1) == doctest::Approx(0.09));
  }
}

TEST_CASE("reward_low is the goal indicator plus the external reward") {
  CHECK(agents::reward_low(false, 0.0) == 0.0);
  CHECK(agents::reward_low(true, 0.0) == 1.0);
  CHECK(agents::reward_low(true, 1.0) == 2.0);
}

TEST_CASE("low agent: greedy argmax, epsilon schedule, and floor") {
  Rng init(9);
  agents::LowConfig cfg;
  agents::LowAgent agent(4, 8, cfg, init);
  CHECK(agent.epsilon() == 1.0);  // starts fully exploratory

  // Force a known Q output: zero every weight, set output biases.
  for (auto& layer : agent.online().layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  agent.online().layers.back().b = {0.0, 3.0, 1.0, 2.0};

  // Push epsilon to the floor so the policy is pure argmax.
  Rng rng(4);
  std::vector<double> s(4, 0.5), enc(8, 0.5);
  for (int i = 0; i < 20000; ++i) agent.act(s, enc, rng);
  CHECK(agent.epsilon() == doctest::Approx(0.01));
  CHECK(std::max(0.01, std::pow(0.9995, 10000)) == doctest::Approx(0.01));

  int counts[4] = {0, 0, 0, 0};
  for (int i = 0; i < 200; ++i) {
    ++counts[static_cast<int>(agent.act(s, enc, rng))];
  }
  CHECK(counts[1] > 190);  // index of the maximal Q-value
}

TEST_CASE("low agent learn: targets, terminal bootstrap, and skip on small replay") {
  Rng init(11);
  agents::LowConfig cfg;
  cfg.target_update = 1000;  // keep the target net fixed during the test
  agents::LowAgent agent(4, 8, cfg, init);
  Rng rng(5);

  CHECK(!agent.learn(1, rng).has_value());  // empty replay: skip

  for (auto& layer : agent.online().layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  agent.target() = agent.online();

  agents::ReplayEntry e;
  e.state.assign(4, 0.2);
  e.enc.assign(8, 0.3);
  e.action = 2;
  e.reward = 1.0;
  e.next_state.assign(4, 0.4);
  e.terminal = true;
  agent.remember(e);

  // Terminal: target is exactly r = 1; online Q is 0, so loss = 1.
  const auto loss = agent.learn(1, rng);
  REQUIRE(loss.has_value());
  CHECK(*loss == doctest::Approx(1.0));

  // Non-terminal: target = r + gamma * max target-Q = 0 + 0.95 * 2 = 1.9.
  agents::LowAgent agent2(4, 8, cfg, init);
  for (auto& layer : agent2.online().layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  agent2.target() = agent2.online();
  agent2.target().layers.back().b.assign(4, 2.0);
  e.terminal = false;
  e.reward = 0.0;
  agent2.remember(e);
  const auto loss2 = agent2.learn(1, rng);
  REQUIRE(loss2.has_value());
  CHECK(*loss2 == doctest::Approx(1.9 * 1.9));
}

TEST_CASE("replay is bounded by its capacity") {
  Rng init(13);
  agents::LowConfig cfg;
  cfg.replay_capacity = 50;
  agents::LowAgent agent(4, 8, cfg, init);
  agents::ReplayEntry e;
  e.state.assign(4, 0.0);
  e.enc.assign(8, 0.0);
  e.next_state.assign(4, 0.0);
  for (int i = 0; i < 500; ++i) agent.remember(e);
  CHECK(agent.replay_size() == 50);
}

TEST_CASE("forward model overfits a single repeated sample") {
  Rng init(21);
  agents::ForwardConfig fcfg;
  agents::ForwardModel fm(4, 8, fcfg, 5, 0.1, init);

  const Partition p = grid_partition(2);
  TransitionRecord rec;
  rec.s_init = State{2.0, 3.0, 0.1, -0.2};
  rec.g_s = 0;
  rec.s_end = State{4.0, 5.0, 0.3, 0.1};
  rec.g_d = 1;

  Rng rng(2);
  std::vector<TransitionRecord> records(8, rec);
  std::map<std::pair<int, int>, double> last;
  for (int epoch = 0; epoch < 400; ++epoch) {
    last = agents::update_forward_model(fm, records, 0, p, rng);
  }
  REQUIRE(last.count({0, 1}) == 1);
  CHECK(last.at({0, 1}) >= 0.0);
  CHECK(last.at({0, 1}) < 1e-3);
  CHECK(fm.stats.errors.at({0, 1}).size() == 5);  // window bound

  CHECK(agents::update_forward_model(fm, {}, 0, p, rng).empty());  // no-op
}

TEST_CASE("dbscan matches a brute-force reference and is deterministic") {
  Rng rng(33);

  // Independent reference: full neighbor matrix + explicit FIFO expansion.
  auto reference = [](const std::vector<std::vector<double>>& pts, double eps,
                      int min_pts) {
    const std::size_t n = pts.size();
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double d2 = 0;
        for (std::size_t k = 0; k < pts[i].size(); ++k) {
          const double d = pts[i][k] - pts[j][k];
          d2 += d * d;
        }
        if (d2 <= eps * eps) adj[i][j] = true;
      }
    }
    auto degree = [&](std::size_t i) {
      int c = 0;
      for (std::size_t j = 0; j < n; ++j) c += adj[i][j];
      return c;
    };
    std::vector<int> label(n, -1);
    std::vector<bool> seen(n, false);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (seen[i]) continue;
      seen[i] = true;
      if (degree(i) < min_pts) continue;
      label[i] = cluster;
      std::vector<std::size_t> queue;
      for (std::size_t j = 0; j < n; ++j) {
        if (adj[i][j]) queue.push_back(j);
      }
      for (std::size_t at = 0; at < queue.size(); ++at) {
        const std::size_t j = queue[at];
        if (label[j] == -1) label[j] = cluster;
        if (seen[j]) continue;
        seen[j] = true;
        label[j] = cluster;
        if (degree(j) >= min_pts) {
          for (std::size_t m = 0; m < n; ++m) {
            if (adj[j][m]) queue.push_back(m);
          }
        }
      }
      ++cluster;
    }
    return label;
  };

  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t dim = fixture % 2 == 0 ? 2 : 4;
    const std::size_t n = 40 + rng.index(160);
    std::vector<std::vector<double>> pts;
    const int blobs = 1 + static_cast<int>(rng.index(3));
    std::vector<std::vector<double>> centers;
    for (int b = 0; b < blobs; ++b) {
      std::vector<double> c(dim);
      for (auto& v : c) v = rng.uniform();
      centers.push_back(c);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> p(dim);
      if (rng.uniform() < 0.8) {
        const auto& c = centers[rng.index(centers.size())];
        for (std::size_t d = 0; d < dim; ++d) {
          p[d] = c[d] + rng.uniform(-0.03, 0.03);
        }
      } else {
        for (auto& v : p) v = rng.uniform();
      }
      pts.push_back(p);
    }
    const double eps = 0.05;
    const int min_pts = 5;
    const auto ours = agents::dbscan(pts, eps, min_pts);
    CHECK(ours == reference(pts, eps, min_pts));
    CHECK(ours == agents::dbscan(pts, eps, min_pts));  // determinism
  }
}

TEST_CASE("cluster_refine: noise only, full cell, and a dominant blob") {
  const Partition p = geometry::trivial_partition(kExtent);
  agents::DbscanConfig cfg;
  Rng rng(51);

  SUBCASE("all points noise") {
    std::vector<State> scattered;
    for (int i = 0; i < 30; ++i) {
      scattered.push_back(State{rng.uniform(0, 10), rng.uniform(0, 10),
                                rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    CHECK(agents::cluster_refine(p, scattered, 0, cfg).boxes == p.boxes);
  }

  SUBCASE("uniform fill keeps the cell") {
    // Dense uniform coverage: one big cluster whose bounding box nearly
    // fills the cell, so no split is worthwhile.
    std::vector<State> fill;
    agents::DbscanConfig wide = cfg;
    wide.eps = 0.6;
    for (int i = 0; i < 300; ++i) {
      fill.push_back(State{rng.uniform(0, 10), rng.uniform(0, 10),
                           rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    CHECK(agents::cluster_refine(p, fill, 0, wide).boxes == p.boxes);
  }

  SUBCASE("two blobs: the larger one is carved out") {
    std::vector<State> pts;
    for (int i = 0; i < 60; ++i) {  // left blob, larger
      pts.push_back(State{1.0 + rng.uniform(-0.2, 0.2),
                          1.0 + rng.uniform(-0.2, 0.2),
                          rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)});
    }
    for (int i = 0; i < 20; ++i) {  // right blob
      pts.push_back(State{8.0 + rng.uniform(-0.2, 0.2),
                          8.0 + rng.uniform(-0.2, 0.2),
                          rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)});
    }
    const Partition refined = agents::cluster_refine(p, pts, 0, cfg);
    REQUIRE(refined.size() > 1);
    CHECK(refined.size() <= 1 + 2 * 4 + 1);
    CHECK(geometry::is_partition_valid(refined));
    CHECK(geometry::refines(refined, p));
    // The carved box bounds the left blob.
    const std::size_t idx =
        geometry::locate(refined, std::vector<double>{1.0, 1.0, 0.0, 0.0});
    CHECK(refined.boxes[idx].hi[0] < 2.0);
  }
}

TEST_CASE("qtable remap: children inherit the parent's row and column") {
  Partition old_p = grid_partition(2);  // two cells along x
  QTable q(2, 0.1, 0.9);
  q.at(0, 1) = 0.7;
  q.at(1, 0) = 0.3;
  q.at(1, 1) = 0.5;

  // Split cell 1 into two halves along y.
  auto [low, high] = geometry::halve(old_p.boxes[1], 1);
  const Partition new_p = geometry::replace_box(old_p, 1, {low, high});

  const QTable out = agents::remap_qtable(q, old_p, new_p);
  REQUIRE(out.n == 3);
  // new index 0 = old 0; new 1, 2 = children of old 1.
  CHECK(out.at(0, 1) == 0.7);
  CHECK(out.at(0, 2) == 0.7);
  CHECK(out.at(1, 0) == 0.3);
  CHECK(out.at(2, 0) == 0.3);
  CHECK(out.at(1, 2) == 0.5);
  CHECK(out.at(2, 1) == 0.5);
  CHECK(out.at(0, 0) == 0.0);
}

TEST_CASE("edge stats remap keeps intact cells and drops split ones") {
  Partition old_p = grid_partition(3);
  reachability::EdgeErrorStats stats;
  stats.record({0, 1}, 0.5);
  stats.record({1, 2}, 0.25);

  auto [low, high] = geometry::halve(old_p.boxes[1], 1);
  const Partition new_p = geometry::replace_box(old_p, 1, {low, high});
  // Old cells 0 and 2 keep their boxes; old cell 1's box is gone.
  const auto out = agents::remap_stats(stats, old_p, new_p);
  CHECK(out.errors.size() == 0);  // both edges touched cell 1

  reachability::EdgeErrorStats stats2;
  stats2.record({0, 2}, 0.125);
  const auto out2 = agents::remap_stats(stats2, old_p, new_p);
  REQUIRE(out2.errors.size() == 1);
  CHECK(out2.errors.begin()->second.front() == 0.125);
}

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gara/harness.hpp"
#include "gara/planner.hpp"

namespace fs = std::filesystem;
using gara::harness::RunConfig;
using gara::harness::RunReport;

namespace {

int run_train(const RunConfig& base, int seeds, std::uint64_t seed_base,
              const std::string& out_dir, bool dump_replay, int threads) {
  std::vector<RunConfig> cfgs;
  for (int i = 0; i < seeds; ++i) {
    RunConfig c = base;
    c.seed = seed_base + static_cast<std::uint64_t>(i);
    c.keep_replay = dump_replay;
    cfgs.push_back(std::move(c));
  }

  std::vector<RunReport> reports(cfgs.size());
  std::vector<std::string> errors(cfgs.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= cfgs.size()) return;
        i = next++;
      }
      try {
        reports[i] = gara::harness::run_training(cfgs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(cfgs.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: seed " << cfgs[i].seed << ": " << errors[i] << "\n";
      return 1;
    }
  }

  const fs::path run_dir =
      fs::path(out_dir) / (fs::path(base.maze).stem().string() + "_" +
                           gara::harness::to_string(base.variant));
  fs::create_directories(run_dir);
  gara::harness::export_curves(reports, (run_dir / "curves.csv").string());

  for (const RunReport& r : reports) {
    const fs::path seed_dir = run_dir / ("seed_" + std::to_string(r.seed));
    fs::create_directories(seed_dir);
    gara::harness::save_report(r, (seed_dir / "report.json").string());
    gara::harness::dump_memory_jsonl(r.memory, (seed_dir / "memory.jsonl").string());
    gara::harness::export_qtable_csv(r.final_q, (seed_dir / "qtable.csv").string());
    for (const auto& snap : r.snapshots) {
      gara::harness::save_partition(
          snap.partition,
          (seed_dir / ("partition_" + std::to_string(snap.step) + ".json")).string(),
          snap.step);
    }
    gara::harness::save_partition(r.final_partition,
                                  (seed_dir / "partition_final.json").string(),
                                  r.total_env_steps);
    const auto graph = gara::planner::build_graph(r.final_partition, r.memory);
    std::ofstream dot(seed_dir / "graph.dot");
    dot << gara::planner::to_dot(graph);
    if (dump_replay) {
      gara::harness::dump_replay_jsonl(r.replay, (seed_dir / "replay.jsonl").string());
    }

    int wins = 0;
    for (auto s : r.successes) wins += s;
    std::cout << "seed " << r.seed << ": " << wins << "/" << r.successes.size()
              << " successful episodes, " << r.final_partition.size()
              << " cells, " << r.total_env_steps << " env steps ("
              << r.wall_time_s << " s)\n";
  }
  std::cout << "wrote " << (run_dir / "curves.csv").string() << "\n";
  return 0;
}

std::string arrow_for(double lo, double hi, double full_lo, double full_hi,
                      const char* pos, const char* neg) {
  if (lo == full_lo && hi == full_hi) return "";
  if (lo >= 0.0) return pos;
  if (hi <= 0.0) return neg;
  return "";
}

int run_inspect(const std::string& path) {
  const auto p = gara::harness::load_partition(path);
  std::cout << p.size() << " cells over extent x [" << p.extent.lo[0] << ", "
            << p.extent.hi[0] << "] y [" << p.extent.lo[1] << ", "
            << p.extent.hi[1] << "]\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& b = p.boxes[i];
    std::ostringstream line;
    line << "cell " << i << ": x [" << b.lo[0] << ", " << b.hi[0] << "]  y ["
         << b.lo[1] << ", " << b.hi[1] << "]";
    std::string arrows;
    if (b.dim() >= 4) {
      arrows += arrow_for(b.lo[2], b.hi[2], p.extent.lo[2], p.extent.hi[2], "->", "<-");
      const std::string vy =
          arrow_for(b.lo[3], b.hi[3], p.extent.lo[3], p.extent.hi[3], "^", "v");
      if (!vy.empty()) arrows += (arrows.empty() ? "" : " ") + vy;
      if (b.lo[2] != p.extent.lo[2] || b.hi[2] != p.extent.hi[2]) {
        line << "  vx [" << b.lo[2] << ", " << b.hi[2] << "]";
      }
      if (b.lo[3] != p.extent.lo[3] || b.hi[3] != p.extent.hi[3]) {
        line << "  vy [" << b.lo[3] << ", " << b.hi[3] << "]";
      }
    }
    if (!arrows.empty()) line << "  " << arrows;
    std::cout << line.str() << "\n";
  }
  return 0;
}

int run_export_graph(const std::string& partition_path, const std::string& memory_path,
                     const std::string& out_path) {
  const auto p = gara::harness::load_partition(partition_path);
  std::ifstream in(memory_path);
  if (!in) throw std::runtime_error("cannot open memory file: " + memory_path);
  std::vector<gara::agents::TransitionRecord> memory;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    gara::agents::TransitionRecord rec;
    const auto si = j.at("s_init").get<std::vector<double>>();
    const auto se = j.at("s_end").get<std::vector<double>>();
    rec.s_init = {si.at(0), si.at(1), si.at(2), si.at(3)};
    rec.s_end = {se.at(0), se.at(1), se.at(2), se.at(3)};
    rec.g_s = j.at("g_s").get<int>();
    rec.g_d = j.at("g_d").get<int>();
    rec.r_ext = j.at("r_ext").get<double>();
    rec.done = j.at("done").get<bool>();
    rec.episode = j.at("episode").get<int>();
    memory.push_back(rec);
  }
  const auto graph = gara::planner::build_graph(p, memory);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write dot file: " + out_path);
  out << gara::planner::to_dot(graph);
  std::cout << "wrote " << out_path << " (" << graph.n << " nodes, "
            << graph.edges.size() << " edges)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical RL over a learned box partition of the state space"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train one or more seeds and export curves");
  std::string maze = "u_shaped";
  std::string variant = "gara";
  int episodes = 300;
  int seeds = 1;
  std::uint64_t seed_base = 1;
  std::string out_dir = "out";
  std::string transfer;
  std::string config_path;
  std::string handcrafted;
  bool dump_replay = false;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  train->add_option("--maze", maze, "Built-in maze name or path to a .json geometry");
  train->add_option("--variant", variant, "gara | gara_planning | handcrafted");
  train->add_option("--episodes", episodes, "Episodes per seed");
  train->add_option("--seeds", seeds, "Number of seeds to run");
  train->add_option("--seed-base", seed_base, "First seed value");
  train->add_option("--out-dir", out_dir, "Output directory");
  train->add_option("--transfer", transfer, "Partition JSON to start from");
  train->add_option("--config", config_path, "JSON file overriding hyperparameters");
  train->add_option("--handcrafted-partition", handcrafted,
                    "Partition JSON for the handcrafted variant");
  train->add_flag("--dump-replay", dump_replay, "Also write replay.jsonl per seed");
  train->add_option("--threads", threads, "Worker threads across seeds");

  // export-graph
  auto* exg = app.add_subcommand("export-graph",
                                 "Build the goal graph from a memory dump and write DOT");
  std::string exg_partition, exg_memory, exg_out = "graph.dot";
  exg->add_option("--partition", exg_partition, "Partition JSON")->required();
  exg->add_option("--memory", exg_memory, "memory.jsonl from a training run")->required();
  exg->add_option("--out", exg_out, "Output DOT path");

  // inspect-partition
  auto* insp = app.add_subcommand("inspect-partition",
                                  "Readable cell listing with velocity-sign arrows");
  std::string insp_partition;
  insp->add_option("--partition", insp_partition, "Partition JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunConfig cfg;
      cfg.maze = maze;
      cfg.variant = gara::harness::variant_from_string(variant);
      cfg.n_eps = episodes;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config file: " + config_path);
        nlohmann::json j;
        in >> j;
        gara::harness::apply_config_json(cfg, j);
      }
      // explicit flags win over the config file
      if (train->count("--maze")) cfg.maze = maze;
      if (train->count("--variant")) {
        cfg.variant = gara::harness::variant_from_string(variant);
      }
      if (train->count("--episodes")) cfg.n_eps = episodes;
      if (!transfer.empty()) cfg.transfer_partition = transfer;
      if (!handcrafted.empty()) cfg.handcrafted_partition = handcrafted;
      return run_train(cfg, seeds, seed_base, out_dir, dump_replay, threads);
    }
    if (exg->parsed()) return run_export_graph(exg_partition, exg_memory, exg_out);
    if (insp->parsed()) return run_inspect(insp_partition);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

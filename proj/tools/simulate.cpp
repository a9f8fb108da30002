// simulate: command-line driver for single runs, the seed suite, SVG
// rendering and synthetic map export.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "taxisim/errors.hpp"
#include "taxisim/experiment.hpp"
#include "taxisim/geojson.hpp"
#include "taxisim/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace taxisim;

namespace {

ExperimentConfig config_from(const std::string& path) {
  if (path.empty()) return ExperimentConfig{};
  return load_config(path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

int report(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return kind == "InternalError" ? 3 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taxi dispatch traffic simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;

  auto* run = app.add_subcommand("run", "Run one seeded experiment");
  std::uint64_t seed = 2;
  std::string policy = "periodic";
  bool run_checks = false;
  run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--seed", seed, "Random seed")->required();
  run->add_option("--policy", policy, "periodic|static")->check(CLI::IsMember({"periodic", "static"}));
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--check-invariants", run_checks, "Verify simulation invariants every tick");

  auto* suite = app.add_subcommand("suite", "Run every seed under both policies");
  unsigned threads = 0;
  bool suite_checks = false;
  suite->add_option("--config", config_path, "Experiment config (JSON)");
  suite->add_option("--out", out, "Output directory")->required();
  suite->add_option("--threads", threads, "Worker threads (default: SIM_THREADS or all cores)");
  suite->add_flag("--check-invariants", suite_checks, "Verify simulation invariants every tick");

  auto* render = app.add_subcommand("render", "Render a snapshot, summary or results file to SVG");
  std::string input;
  render->add_option("--input", input, "snapshot.json, summary.json or results.csv")->required();
  render->add_option("--out", out, "Output SVG file")->required();

  auto* gen = app.add_subcommand("gen-map", "Write a synthetic grid map as GeoJSON");
  int rows = 8, cols = 8;
  double cell_km = 0.18;
  std::uint64_t map_seed = 1;
  gen->add_option("--rows", rows)->required();
  gen->add_option("--cols", cols)->required();
  gen->add_option("--cell-km", cell_km)->required();
  gen->add_option("--seed", map_seed)->required();
  gen->add_option("--out", out, "Output GeoJSON file")->required();

  auto* defaults = app.add_subcommand("config", "Print the default experiment config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig config = config_from(config_path);
      const fs::path dir(out);
      ensure_dir(dir);
      std::optional<json> snapshot;
      RunOptions options;
      options.check_invariants = run_checks;
      options.on_crash = [&](const World& world) { snapshot = snapshot_json(world); };
      const ExperimentResult result = run_experiment(config, seed, parse_policy(policy), options);
      json doc = result_json(result);
      doc["wall_time_s"] = result.wall_time_s;
      write_text(dir / "result.json", doc.dump(2) + "\n");
      write_text(dir / "results.csv", results_csv(std::span(&result, 1)));
      if (snapshot) {
        write_text(dir / "snapshot.json", snapshot->dump() + "\n");
        write_text(dir / "map.svg", render_map_svg(*snapshot));
      }
      std::cout << "seed " << seed << " " << policy << ": called taxi " << result.called_taxi_id << " arrived #"
                << result.called_taxi_rank << " of " << result.arrivals.size() << " (t_end " << result.t_end_s
                << " s)\n";
    } else if (*suite) {
      const ExperimentConfig config = config_from(config_path);
      SuiteOptions options;
      options.threads = threads;
      options.check_invariants = suite_checks;
      const SuiteSummary summary = run_suite(config, options);
      const fs::path dir(out);
      write_suite_outputs(summary, dir);
      write_text(dir / "ranks.svg", render_histogram_svg(summary.policies));
      for (const auto& p : summary.policies) {
        std::cout << to_string(p.policy) << ": " << p.completed << " runs, top-3 rate " << p.top3_rate
                  << ", median rank " << p.median_rank << ", sign-test p " << p.sign_test_p << "\n";
      }
      for (const auto& f : summary.failures) {
        std::cerr << json{{"seed", f.seed}, {"policy", to_string(f.policy)}, {"error", f.kind}, {"message", f.message}}
                         .dump()
                  << "\n";
      }
    } else if (*render) {
      render_svg(input, out);
    } else if (*gen) {
      Rng rng(map_seed);
      const auto records = synthetic_grid_records(rows, cols, cell_km, rng);
      const Projection projection(GeoPoint{38.9072, -77.0369});
      write_text(out, records_to_geojson(records, projection).dump(1) + "\n");
    } else if (*defaults) {
      std::cout << json(ExperimentConfig{}).dump(2) << "\n";
    }
  } catch (const Error& e) {
    return report(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report("InternalError", e.what());
  }
  return EXIT_SUCCESS;
}

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "hippo/data.hpp"
#include "hippo/experiment.hpp"

using namespace hippo;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kVerify = 3, kDivergence = 4 };

ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = load_config(path);
  if (seed) {
    cfg.activation.seed = *seed;
    cfg.run.mode_seed = *seed;
    if (!cfg.sweep.seeds.empty()) cfg.sweep.seeds = {*seed};
  }
  return cfg;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ActivationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ModelError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const GraphError& e) {
    std::cerr << "graph error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous hybrid primal-dual protocol: simulator and verification tools"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed_override;
  unsigned threads = 0;

  auto* run_cmd = app.add_subcommand("run", "run the configured experiment or sweep");
  run_cmd->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out_dir, "output directory (default: output.dir)");
  run_cmd->add_option("--seed-override", seed_override, "replace activation, mode and sweep seeds");
  run_cmd->add_option("--threads", threads, "parallel runs (default: sweep.threads)");

  auto* verify_cmd = app.add_subcommand("verify", "run the desk-scale property suite");
  verify_cmd->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--seed-override", seed_override, "replace the activation seed");

  auto* oracle_cmd = app.add_subcommand("solve-oracle", "solve the centralized problem");
  oracle_cmd->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  std::size_t agents = 10;
  double probability = 0.3;
  std::uint64_t graph_seed = 0;
  std::string graph_out;
  auto* graph_cmd = app.add_subcommand("gen-graph", "draw a connected Erdos-Renyi graph");
  graph_cmd->add_option("--agents", agents, "number of agents")->check(CLI::Range(2, 1000000));
  graph_cmd->add_option("--probability", probability, "edge probability")->check(CLI::Range(0.0, 1.0));
  graph_cmd->add_option("--seed", graph_seed, "rng seed");
  graph_cmd->add_option("--out", graph_out, "edge list file (default: stdout)");

  auto* inspect_cmd = app.add_subcommand("inspect-config", "validate a config and print the effective settings");
  inspect_cmd->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  if (*run_cmd) {
    return guarded([&] {
      const auto cfg = load(config_path, seed_override);
      const auto bp = build_problem(cfg);
      const auto dir = out_dir.empty() ? cfg.output.dir : out_dir;
      const auto res = run_experiment(cfg, bp, dir, threads ? threads : cfg.sweep.threads);
      for (const auto& f : res.files) std::cout << dir << '/' << f << '\n';
      if (res.diverged) {
        for (const auto& r : res.runs)
          if (r.trace.diverged_at) std::cerr << "divergence: " << r.file << " at iteration " << *r.trace.diverged_at << '\n';
        return static_cast<int>(kDivergence);
      }
      return static_cast<int>(kOk);
    });
  }
  if (*verify_cmd) {
    return guarded([&] {
      const auto cfg = load(config_path, seed_override);
      const auto bp = build_problem(cfg);
      const auto rep = verify(cfg, bp);
      for (const auto& c : rep.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
      return static_cast<int>(rep.passed() ? kOk : kVerify);
    });
  }
  if (*oracle_cmd) {
    return guarded([&] {
      const auto cfg = load(config_path, std::nullopt);
      const auto bp = build_problem(cfg);
      std::cout.precision(17);
      std::cout << "x* =";
      for (Eigen::Index k = 0; k < bp.oracle.x.size(); ++k) std::cout << ' ' << bp.oracle.x(k);
      std::cout << "\nl(x*) = " << bp.oracle.value << "\nresidual = " << bp.oracle.residual
                << "\niterations = " << bp.oracle.iterations << "\nconverged = " << (bp.oracle.converged ? "yes" : "no")
                << '\n';
      return static_cast<int>(bp.oracle.converged ? kOk : kVerify);
    });
  }
  if (*graph_cmd) {
    return guarded([&] {
      const auto topo = generate_connected_gnp(agents, probability, graph_seed);
      if (graph_out.empty()) {
        write_edge_list(std::cout, topo);
      } else {
        std::ofstream out(graph_out);
        if (!out) throw std::runtime_error("cannot write " + graph_out);
        write_edge_list(out, topo);
      }
      std::cerr << "redraws: " << topo.redraws() << '\n';
      return static_cast<int>(kOk);
    });
  }
  if (*inspect_cmd) {
    return guarded([&] {
      std::cout << describe(load(config_path, std::nullopt));
      return static_cast<int>(kOk);
    });
  }
  return kOk;
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hippo/activation.hpp"
#include "hippo/protocol.hpp"

namespace hippo {

/// Experiment description read from an INI-style file:
///
///   [section]
///   key = value        # comment
///
/// Lists are comma separated. Every key is optional; unknown sections or
/// keys are errors. See README for the schema.
struct ExperimentConfig {
  struct Data {
    std::string source = "synthetic";  // synthetic | libsvm
    std::string path;
    std::optional<std::size_t> declared_dim;
    std::size_t rows = 3000;
    std::size_t dim = 6;
    double noise = 0.1;
    double condition = 1.0;
    std::uint64_t seed = 2024;
    bool normalize = false;
    std::optional<std::uint64_t> shuffle_seed;
    double ridge = 0.0;
  } data;

  struct Graph {
    std::string kind = "gnp";  // gnp | path | complete | file
    std::size_t agents = 50;
    double probability = 0.1;
    std::uint64_t seed = 7;
    std::string path;
  } graph;

  struct ProblemSpec {
    std::string regularizer = "l1";  // l1 | zero | box
    std::optional<double> gamma;     // unset: 0.1 |sum_i A_i^T b_i|_inf
    double lower = -1.0;
    double upper = 1.0;
  } problem;

  HyperParams hyper;
  bool mu_z_set = false;
  Freshness freshness = Freshness::Fresh;

  struct Activation {
    std::string kind = "synchronous";
    std::vector<double> probabilities{0.5};
    double fraction = 1.0;
    std::vector<double> rates{1.0};
    std::uint64_t seed = 0;
  } activation;

  struct Run {
    std::size_t iterations = 1000;
    double tolerance = 1e-10;
    std::size_t trace_every = 1;
    double newton_fraction = 0.0;
    std::vector<std::size_t> newton_agents;  // 0-based after parsing
    bool explicit_agents = false;
    std::uint64_t mode_seed = 0;
    bool deferred = false;
    bool lyapunov = false;
    unsigned agent_threads = 1;
  } run;

  struct Sweep {
    std::vector<double> newton_fractions;
    std::vector<double> fractions;
    std::vector<std::uint64_t> seeds;
    unsigned threads = 1;
  } sweep;

  struct Output {
    std::string dir = "out";
    bool plots = true;
  } output;

  struct Verify {
    std::size_t iterations = 100;
    std::size_t seeds = 50;
    std::size_t contraction_iterations = 3000;
  } verify;

  /// (section.key, value) in file order, for the metadata echo.
  std::vector<std::pair<std::string, std::string>> echo;
  std::string source_text;
};

/// Throws ConfigError with the field path ("hyper.mu_z: ...").
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Cross-field checks that need no data (agent indices, ranges, theorem mode).
void validate(const ExperimentConfig& cfg);

ActivationScheme make_activation(const ExperimentConfig& cfg, double fraction, std::uint64_t seed);

/// Canonical "section.key = value" listing of every effective setting.
std::string describe(const ExperimentConfig& cfg);

}  // namespace hippo

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hippo/graph.hpp"

namespace hippo {

class ActivationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActivationKind { Synchronous, SingleUniform, PerAgentBernoulli, FractionUniform, PoissonClocks };

std::string to_string(ActivationKind kind);

/// Rule for drawing the active agents of each iteration.
struct ActivationScheme {
  ActivationKind kind = ActivationKind::Synchronous;
  /// PerAgentBernoulli: one probability per agent (a single value is broadcast).
  std::vector<double> probabilities;
  /// FractionUniform: C in (0, 1].
  double fraction = 1.0;
  /// PoissonClocks: one rate per agent (a single value is broadcast).
  std::vector<double> rates;
  std::uint64_t seed = 0;

  static ActivationScheme synchronous() { return {}; }
  static ActivationScheme single_uniform(std::uint64_t seed);
  static ActivationScheme bernoulli(std::vector<double> p, std::uint64_t seed);
  static ActivationScheme fraction_uniform(double c, std::uint64_t seed);
  static ActivationScheme poisson(std::vector<double> rates, std::uint64_t seed);

  /// Rejects schemes where some agent can never activate.
  void validate(std::size_t agents) const;
};

struct ActivationRecord {
  std::uint64_t t = 0;
  /// Sorted active agents.
  std::vector<std::size_t> agents;
  /// Per-agent flag (diagonal of X).
  std::vector<char> agent_mask;
  /// Per-edge flag (diagonal of Y), induced from the agents.
  std::vector<char> edge_mask;
};

/// Edge k = (i, j) is active iff agent i or agent j is active.
std::vector<char> induced_edge_activation(const std::vector<char>& agent_mask,
                                          const Topology& topology);

/// Deterministic sampler: the draw for iteration t depends only on (seed, t).
class Activator {
 public:
  Activator(ActivationScheme scheme, const Topology& topology);

  ActivationRecord sample(std::uint64_t t) const;
  const ActivationScheme& scheme() const { return scheme_; }

 private:
  ActivationScheme scheme_;
  const Topology* topology_;
};

struct ExpectedActivation {
  std::vector<double> agent;  // p_i^X
  std::vector<double> edge;   // p_k^Y under the induced rule
  double p_min = 0.0;
};

ExpectedActivation expected_activation(const ActivationScheme& scheme, const Topology& topology);

}  // namespace hippo

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hippo/graph.hpp"
#include "hippo/model.hpp"

namespace hippo {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class UpdateMode { Gradient, Newton };

/// How Delta_ii is chosen per agent.
///   Uniform: Delta_ii = epsilon (or the per-agent override).
///   NewtonZero: as Uniform, but Delta_ii = 0 for agents in Newton mode.
enum class DeltaPolicy { Uniform, NewtonZero };

/// Which neighbor values the dual update reads when several agents are active.
///   Fresh: values broadcast in the current iteration (read after the barrier).
///   Snapshot: values held at the start of the iteration.
enum class Freshness { Fresh, Snapshot };

/// Who applies the dual increment of an edge with one inactive endpoint.
///   Local: only the active agent updates its phi (inactive agents are untouched).
///   Edge: the inactive neighbor mirrors the increment when it receives the
///         broadcast, so sum_i phi_i stays zero and phi = E_s^T alpha holds for
///         the induced edge activation.
enum class DualScope { Local, Edge };

std::string to_string(UpdateMode mode);
std::string to_string(DeltaPolicy policy);
std::string to_string(Freshness policy);
std::string to_string(DualScope scope);

struct HyperParams {
  double mu_z = 2.0;
  double mu_theta = 1.0;
  double epsilon = 1.0;
  /// Empty, or one Delta_ii per agent (not allowed in theorem mode).
  std::vector<double> delta_overrides;
  /// 0-based selector agent l.
  std::size_t selector = 0;
  /// Enforces mu_z = 2 mu_theta and Delta_ii = epsilon for every agent.
  bool theorem_mode = false;
  DeltaPolicy delta_policy = DeltaPolicy::Uniform;
  DualScope dual_scope = DualScope::Local;

  static HyperParams theorem(double mu_theta, double epsilon, std::size_t selector = 0);

  /// Throws ConfigError naming the offending field.
  void validate(std::size_t agents) const;
  double delta(std::size_t agent, UpdateMode mode) const;
};

/// Gradient/Newton choice per agent, optionally varying with the iteration.
class ModeAssignment {
 public:
  using Schedule = std::function<UpdateMode(std::size_t agent, std::uint64_t t)>;

  ModeAssignment() = default;
  explicit ModeAssignment(std::vector<UpdateMode> modes) : modes_(std::move(modes)) {}

  static ModeAssignment all(std::size_t agents, UpdateMode mode);
  /// Newton agents are the first ceil(q m) entries of a seeded permutation.
  static ModeAssignment newton_fraction(std::size_t agents, double q, std::uint64_t seed);
  /// 0-based agent ids that run Newton; everyone else runs Gradient.
  static ModeAssignment newton_agents(std::size_t agents, const std::vector<std::size_t>& ids);

  void set_schedule(Schedule schedule) { schedule_ = std::move(schedule); }

  UpdateMode at(std::size_t agent, std::uint64_t t) const {
    return schedule_ ? schedule_(agent, t) : modes_.at(agent);
  }
  std::size_t agents() const { return modes_.size(); }
  std::size_t newton_count() const;
  const std::vector<UpdateMode>& base() const { return modes_; }

 private:
  std::vector<UpdateMode> modes_;
  Schedule schedule_;
};

/// v = [x; phi; theta; lambda] plus each agent's buffer of neighbor iterates.
struct NetworkState {
  std::vector<Vec> x;
  std::vector<Vec> phi;
  Vec theta;
  Vec lambda;
  /// buffers[i][a] holds the latest x received from topology.neighbors(i)[a].
  std::vector<std::vector<Vec>> buffers;

  /// Zero state; every agent has already broadcast x^0 = 0.
  static NetworkState zeros(const Topology& topology, Eigen::Index dim);

  Eigen::Index dim() const { return theta.size(); }
  std::size_t agents() const { return x.size(); }
};

/// Everything an agent needs besides the state.
struct Problem {
  const Topology* topology = nullptr;
  std::span<const LocalObjective> objectives;
  Regularizer regularizer;
  HyperParams hyper;

  const Topology& graph() const { return *topology; }
  const LocalObjective& objective(std::size_t i) const { return objectives[i]; }
  Eigen::Index dim() const { return objectives.front().dim(); }
};

/// Right-hand side of the per-agent linear system:
/// grad f_i(x_i) + phi_i + (mu_z/2) sum_j (x_i - x_j) + [i = l](lambda + mu_theta (x_l - theta)).
Vec local_lagrangian_gradient(std::size_t i, const NetworkState& state, const Problem& problem);

/// Solves (J_ii + mu_z |N_i| + [i = l] mu_theta + Delta_ii) u = g, with J_ii the
/// local Hessian at x_i (Newton) or zero (Gradient).
Vec solve_local_system(std::size_t i, UpdateMode mode, const Vec& g, const Vec& xi,
                       const Problem& problem);

/// solve_local_system at the agent's current iterate.
Vec update_direction(std::size_t i, UpdateMode mode, const Vec& g, const NetworkState& state,
                     const Problem& problem);

/// x_i^{t+1} computed from the pre-step state (no writes).
struct PrimalStep {
  std::size_t agent = 0;
  UpdateMode mode = UpdateMode::Gradient;
  Vec x_prev;
  Vec x_next;
};

PrimalStep primal_update(std::size_t i, UpdateMode mode, const NetworkState& state,
                         const Problem& problem);

/// Writes x_i and delivers it to every neighbor's buffer.
void commit_broadcast(NetworkState& state, const Topology& topology, std::size_t i, const Vec& x_next);

/// phi_i += (mu_z/2) sum_j (x_i - x_j), neighbor values taken from `buffers`.
void dual_update(std::size_t i, NetworkState& state, const Problem& problem,
                 const std::vector<std::vector<Vec>>& buffers);

/// theta = prox(x_l + lambda/mu_theta); lambda += mu_theta (x_l - theta).
void regularizer_step(NetworkState& state, const HyperParams& hp, const Regularizer& reg);

struct BroadcastRecord {
  std::size_t agent = 0;
  Vec x;
};

/// One agent running the full local routine on its own: primal step,
/// broadcast, dual update, and the (theta, lambda) pair when it is the selector.
BroadcastRecord agent_step(std::size_t i, NetworkState& state, const Problem& problem, UpdateMode mode);

/// One iteration for a set of active agents. Primal steps read the pre-step
/// state, broadcasts are committed at a barrier, then dual updates run.
/// With threads > 1 the primal steps are computed concurrently; results are
/// identical to the sequential schedule.
std::vector<PrimalStep> protocol_iteration(NetworkState& state, const Problem& problem,
                                           std::span<const std::size_t> active,
                                           const ModeAssignment& modes, std::uint64_t t,
                                           Freshness freshness, unsigned threads = 1);

/// Every agent active once (the operator T).
std::vector<PrimalStep> synchronous_step(NetworkState& state, const Problem& problem,
                                         const ModeAssignment& modes, std::uint64_t t);

struct ErrorTerm {
  Vec e;
  /// Pi_ii for this step.
  double pi = 0.0;
  /// Pi_ii * |x_next - x_prev|, the bound on |e|.
  double bound = 0.0;
};

/// Linearization error grad f(x_prev) - grad f(x_next) + J (x_next - x_prev).
ErrorTerm error_term(const Vec& x_prev, const Vec& x_next, UpdateMode mode,
                     const LocalObjective& obj, const ConvexityConstants& constants);

}  // namespace hippo

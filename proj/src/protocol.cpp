#include "hippo/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

namespace hippo {

std::string to_string(UpdateMode mode) {
  return mode == UpdateMode::Newton ? "newton" : "gradient";
}

std::string to_string(DeltaPolicy policy) {
  return policy == DeltaPolicy::NewtonZero ? "newton_zero" : "uniform";
}

std::string to_string(Freshness policy) {
  return policy == Freshness::Snapshot ? "snapshot" : "fresh";
}

std::string to_string(DualScope scope) {
  return scope == DualScope::Edge ? "edge" : "local";
}

HyperParams HyperParams::theorem(double mu_theta, double epsilon, std::size_t selector) {
  HyperParams hp;
  hp.mu_theta = mu_theta;
  hp.mu_z = 2.0 * mu_theta;
  hp.epsilon = epsilon;
  hp.selector = selector;
  hp.theorem_mode = true;
  return hp;
}

void HyperParams::validate(std::size_t agents) const {
  if (!(mu_z > 0.0)) throw ConfigError("hyper.mu_z must be positive");
  if (!(mu_theta > 0.0)) throw ConfigError("hyper.mu_theta must be positive");
  if (!(epsilon >= 0.0)) throw ConfigError("hyper.epsilon must be nonnegative");
  if (selector >= agents) throw ConfigError("hyper.selector is not an agent of the network");
  if (!delta_overrides.empty()) {
    if (delta_overrides.size() != agents)
      throw ConfigError("hyper.delta_overrides needs one value per agent");
    for (double d : delta_overrides)
      if (!(d >= 0.0)) throw ConfigError("hyper.delta_overrides must be nonnegative");
  }
  if (theorem_mode) {
    if (std::abs(mu_z - 2.0 * mu_theta) > 1e-12 * std::max(1.0, mu_z))
      throw ConfigError("hyper.mu_z must equal 2 * hyper.mu_theta in theorem mode");
    if (!delta_overrides.empty())
      throw ConfigError("hyper.delta_overrides is not allowed in theorem mode");
    if (delta_policy != DeltaPolicy::Uniform)
      throw ConfigError("hyper.delta_policy must be uniform in theorem mode");
  }
}

double HyperParams::delta(std::size_t agent, UpdateMode mode) const {
  if (delta_policy == DeltaPolicy::NewtonZero && mode == UpdateMode::Newton) return 0.0;
  if (!delta_overrides.empty()) return delta_overrides.at(agent);
  return epsilon;
}

ModeAssignment ModeAssignment::all(std::size_t agents, UpdateMode mode) {
  return ModeAssignment(std::vector<UpdateMode>(agents, mode));
}

ModeAssignment ModeAssignment::newton_fraction(std::size_t agents, double q, std::uint64_t seed) {
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("newton fraction q must lie in [0, 1]");
  std::vector<std::size_t> order(agents);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = static_cast<std::size_t>(
      std::max(0.0, std::ceil(q * static_cast<double>(agents) - 1e-9)));
  std::vector<UpdateMode> modes(agents, UpdateMode::Gradient);
  for (std::size_t a = 0; a < std::min(count, agents); ++a) modes[order[a]] = UpdateMode::Newton;
  return ModeAssignment(std::move(modes));
}

ModeAssignment ModeAssignment::newton_agents(std::size_t agents, const std::vector<std::size_t>& ids) {
  std::vector<UpdateMode> modes(agents, UpdateMode::Gradient);
  for (auto i : ids) {
    if (i >= agents) throw ConfigError("newton agent id out of range");
    modes[i] = UpdateMode::Newton;
  }
  return ModeAssignment(std::move(modes));
}

std::size_t ModeAssignment::newton_count() const {
  return static_cast<std::size_t>(std::count(modes_.begin(), modes_.end(), UpdateMode::Newton));
}

NetworkState NetworkState::zeros(const Topology& topology, Eigen::Index dim) {
  NetworkState s;
  const std::size_t m = topology.agents();
  s.x.assign(m, Vec::Zero(dim));
  s.phi.assign(m, Vec::Zero(dim));
  s.theta = Vec::Zero(dim);
  s.lambda = Vec::Zero(dim);
  s.buffers.resize(m);
  for (std::size_t i = 0; i < m; ++i) s.buffers[i].assign(topology.degree(i), Vec::Zero(dim));
  return s;
}

Vec local_lagrangian_gradient(std::size_t i, const NetworkState& state, const Problem& problem) {
  const auto& topo = problem.graph();
  const auto& hp = problem.hyper;
  const auto& xi = state.x[i];
  Vec g = problem.objective(i).gradient(xi) + state.phi[i];

  const auto& buf = state.buffers.at(i);
  if (buf.size() != topo.degree(i))
    throw ProtocolError("agent " + std::to_string(i + 1) + ": buffer does not cover its neighbors");
  Vec spread = Vec::Zero(xi.size());
  for (std::size_t a = 0; a < buf.size(); ++a) {
    if (buf[a].size() != xi.size())
      throw ProtocolError("agent " + std::to_string(i + 1) + ": no buffered value from agent " +
                          std::to_string(topo.neighbors(i)[a] + 1));
    spread += xi - buf[a];
  }
  g += 0.5 * hp.mu_z * spread;
  if (i == hp.selector) g += state.lambda + hp.mu_theta * (xi - state.theta);
  return g;
}

Vec update_direction(std::size_t i, UpdateMode mode, const Vec& g, const NetworkState& state,
                     const Problem& problem) {
  return solve_local_system(i, mode, g, state.x[i], problem);
}

Vec solve_local_system(std::size_t i, UpdateMode mode, const Vec& g, const Vec& xi,
                       const Problem& problem) {
  const auto& hp = problem.hyper;
  const double shift = hp.mu_z * static_cast<double>(problem.graph().degree(i)) +
                       (i == hp.selector ? hp.mu_theta : 0.0) + hp.delta(i, mode);
  if (mode == UpdateMode::Gradient) {
    if (!(shift > 0.0))
      throw ConfigError("agent " + std::to_string(i + 1) + ": gradient step has zero curvature");
    return g / shift;
  }
  Mat h = problem.objective(i).hessian(xi);
  h.diagonal().array() += shift;
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success)
    throw ConfigError("agent " + std::to_string(i + 1) + ": Newton system is not positive definite");
  return llt.solve(g);
}

PrimalStep primal_update(std::size_t i, UpdateMode mode, const NetworkState& state,
                         const Problem& problem) {
  const Vec g = local_lagrangian_gradient(i, state, problem);
  const Vec u = update_direction(i, mode, g, state, problem);
  return {i, mode, state.x[i], state.x[i] - u};
}

void commit_broadcast(NetworkState& state, const Topology& topology, std::size_t i, const Vec& x_next) {
  state.x[i] = x_next;
  const auto& nb = topology.neighbors(i);
  for (auto j : nb) {
    const auto& nj = topology.neighbors(j);
    const auto pos = static_cast<std::size_t>(std::lower_bound(nj.begin(), nj.end(), i) - nj.begin());
    state.buffers[j][pos] = x_next;
  }
}

void dual_update(std::size_t i, NetworkState& state, const Problem& problem,
                 const std::vector<std::vector<Vec>>& buffers) {
  const auto& xi = state.x[i];
  Vec spread = Vec::Zero(xi.size());
  for (const auto& xj : buffers.at(i)) spread += xi - xj;
  state.phi[i] += 0.5 * problem.hyper.mu_z * spread;
}

void regularizer_step(NetworkState& state, const HyperParams& hp, const Regularizer& reg) {
  const Vec& xl = state.x[hp.selector];
  state.theta = reg.prox(xl + state.lambda / hp.mu_theta, hp.mu_theta);
  state.lambda += hp.mu_theta * (xl - state.theta);
}

BroadcastRecord agent_step(std::size_t i, NetworkState& state, const Problem& problem, UpdateMode mode) {
  auto step = primal_update(i, mode, state, problem);
  commit_broadcast(state, problem.graph(), i, step.x_next);
  dual_update(i, state, problem, state.buffers);
  if (i == problem.hyper.selector) regularizer_step(state, problem.hyper, problem.regularizer);
  return {i, std::move(step.x_next)};
}

std::vector<PrimalStep> protocol_iteration(NetworkState& state, const Problem& problem,
                                           std::span<const std::size_t> active,
                                           const ModeAssignment& modes, std::uint64_t t,
                                           Freshness freshness, unsigned threads) {
  std::vector<PrimalStep> steps(active.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a)
      steps[a] = primal_update(active[a], modes.at(active[a], t), state, problem);
  };
  if (threads <= 1 || active.size() < 2) {
    work(0, active.size());
  } else {
    const std::size_t workers = std::min<std::size_t>(threads, active.size());
    const std::size_t chunk = (active.size() + workers - 1) / workers;
    std::vector<std::future<void>> jobs;
    for (std::size_t begin = 0; begin < active.size(); begin += chunk)
      jobs.push_back(std::async(std::launch::async, work, begin, std::min(active.size(), begin + chunk)));
    for (auto& j : jobs) j.get();
  }

  std::vector<std::vector<Vec>> snapshot;
  if (freshness == Freshness::Snapshot) snapshot = state.buffers;

  // barrier: deliver every broadcast before any dual update
  for (const auto& s : steps) commit_broadcast(state, problem.graph(), s.agent, s.x_next);

  const auto& view = freshness == Freshness::Snapshot ? snapshot : state.buffers;
  bool selector_active = false;
  for (const auto& s : steps) {
    dual_update(s.agent, state, problem, view);
    selector_active = selector_active || s.agent == problem.hyper.selector;
  }
  if (problem.hyper.dual_scope == DualScope::Edge) {
    std::vector<char> active_mask(state.agents(), 0);
    for (const auto& s : steps) active_mask[s.agent] = 1;
    const double half = 0.5 * problem.hyper.mu_z;
    for (const auto& s : steps)
      for (auto j : problem.graph().neighbors(s.agent))
        if (!active_mask[j]) state.phi[j] += half * (state.x[j] - state.x[s.agent]);
  }
  if (selector_active) regularizer_step(state, problem.hyper, problem.regularizer);
  return steps;
}

std::vector<PrimalStep> synchronous_step(NetworkState& state, const Problem& problem,
                                         const ModeAssignment& modes, std::uint64_t t) {
  std::vector<std::size_t> all(state.agents());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return protocol_iteration(state, problem, all, modes, t, Freshness::Fresh);
}

ErrorTerm error_term(const Vec& x_prev, const Vec& x_next, UpdateMode mode,
                     const LocalObjective& obj, const ConvexityConstants& constants) {
  ErrorTerm out;
  const Vec step = x_next - x_prev;
  out.e = obj.gradient_difference(x_prev, x_next);
  if (mode == UpdateMode::Newton) out.e += obj.hessian(x_prev) * step;
  const double len = step.norm();
  out.pi = mode == UpdateMode::Newton ? std::min(2.0 * constants.M_f, 0.5 * constants.L_f * len)
                                      : constants.M_f;
  out.bound = out.pi * len;
  return out;
}

}  // namespace hippo

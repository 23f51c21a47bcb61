#include "hippo/activation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hippo {
namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t m, const char* what) {
  if (v.size() == 1) return std::vector<double>(m, v.front());
  if (v.size() != m)
    throw ActivationError(std::string(what) + ": expected 1 or " + std::to_string(m) + " values");
  return v;
}

std::size_t fraction_count(double c, std::size_t m) {
  const auto k = static_cast<std::size_t>(std::ceil(c * static_cast<double>(m) - 1e-9));
  return std::clamp<std::size_t>(k, 1, m);
}

}  // namespace

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Synchronous: return "synchronous";
    case ActivationKind::SingleUniform: return "single";
    case ActivationKind::PerAgentBernoulli: return "bernoulli";
    case ActivationKind::FractionUniform: return "fraction";
    case ActivationKind::PoissonClocks: return "poisson";
  }
  return "unknown";
}

ActivationScheme ActivationScheme::single_uniform(std::uint64_t seed) {
  ActivationScheme s;
  s.kind = ActivationKind::SingleUniform;
  s.seed = seed;
  return s;
}

ActivationScheme ActivationScheme::bernoulli(std::vector<double> p, std::uint64_t seed) {
  ActivationScheme s;
  s.kind = ActivationKind::PerAgentBernoulli;
  s.probabilities = std::move(p);
  s.seed = seed;
  return s;
}

ActivationScheme ActivationScheme::fraction_uniform(double c, std::uint64_t seed) {
  ActivationScheme s;
  s.kind = ActivationKind::FractionUniform;
  s.fraction = c;
  s.seed = seed;
  return s;
}

ActivationScheme ActivationScheme::poisson(std::vector<double> rates, std::uint64_t seed) {
  ActivationScheme s;
  s.kind = ActivationKind::PoissonClocks;
  s.rates = std::move(rates);
  s.seed = seed;
  return s;
}

void ActivationScheme::validate(std::size_t agents) const {
  if (agents == 0) throw ActivationError("activation needs at least one agent");
  switch (kind) {
    case ActivationKind::Synchronous:
    case ActivationKind::SingleUniform:
      return;
    case ActivationKind::PerAgentBernoulli:
      for (double p : broadcast(probabilities, agents, "bernoulli probabilities"))
        if (!(p > 0.0 && p <= 1.0))
          throw ActivationError("every agent needs activation probability in (0, 1]");
      return;
    case ActivationKind::FractionUniform:
      if (!(fraction > 0.0 && fraction <= 1.0))
        throw ActivationError("active fraction C must lie in (0, 1]");
      return;
    case ActivationKind::PoissonClocks:
      for (double r : broadcast(rates, agents, "poisson rates"))
        if (!(r > 0.0 && std::isfinite(r)))
          throw ActivationError("every Poisson clock needs a positive rate");
      return;
  }
}

std::vector<char> induced_edge_activation(const std::vector<char>& agent_mask,
                                          const Topology& topology) {
  std::vector<char> edges(topology.edge_count(), 0);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = topology.edge(k);
    edges[k] = (agent_mask.at(e.source) || agent_mask.at(e.destination)) ? 1 : 0;
  }
  return edges;
}

Activator::Activator(ActivationScheme scheme, const Topology& topology)
    : scheme_(std::move(scheme)), topology_(&topology) {
  scheme_.validate(topology.agents());
  if (scheme_.kind == ActivationKind::PerAgentBernoulli)
    scheme_.probabilities = broadcast(scheme_.probabilities, topology.agents(), "probabilities");
  if (scheme_.kind == ActivationKind::PoissonClocks)
    scheme_.rates = broadcast(scheme_.rates, topology.agents(), "rates");
}

ActivationRecord Activator::sample(std::uint64_t t) const {
  const std::size_t m = topology_->agents();
  // one independent stream per (seed, iteration)
  std::seed_seq seq{static_cast<std::uint32_t>(scheme_.seed), static_cast<std::uint32_t>(scheme_.seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  std::mt19937_64 rng(seq);

  ActivationRecord rec;
  rec.t = t;
  rec.agent_mask.assign(m, 0);
  switch (scheme_.kind) {
    case ActivationKind::Synchronous:
      std::fill(rec.agent_mask.begin(), rec.agent_mask.end(), 1);
      break;
    case ActivationKind::SingleUniform: {
      std::uniform_int_distribution<std::size_t> pick(0, m - 1);
      rec.agent_mask[pick(rng)] = 1;
      break;
    }
    case ActivationKind::PerAgentBernoulli: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t i = 0; i < m; ++i) rec.agent_mask[i] = u(rng) < scheme_.probabilities[i] ? 1 : 0;
      break;
    }
    case ActivationKind::FractionUniform: {
      std::vector<std::size_t> ids(m);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
      std::shuffle(ids.begin(), ids.end(), rng);
      const std::size_t k = fraction_count(scheme_.fraction, m);
      for (std::size_t a = 0; a < k; ++a) rec.agent_mask[ids[a]] = 1;
      break;
    }
    case ActivationKind::PoissonClocks: {
      // memoryless clocks: the next tick belongs to the smallest exponential draw
      std::size_t best = 0;
      double best_time = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        std::exponential_distribution<double> clock(scheme_.rates[i]);
        const double tick = clock(rng);
        if (i == 0 || tick < best_time) {
          best = i;
          best_time = tick;
        }
      }
      rec.agent_mask[best] = 1;
      break;
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (rec.agent_mask[i]) rec.agents.push_back(i);
  rec.edge_mask = induced_edge_activation(rec.agent_mask, *topology_);
  return rec;
}

ExpectedActivation expected_activation(const ActivationScheme& scheme, const Topology& topology) {
  scheme.validate(topology.agents());
  const std::size_t m = topology.agents();
  const double md = static_cast<double>(m);
  ExpectedActivation out;
  out.agent.assign(m, 0.0);
  out.edge.assign(topology.edge_count(), 0.0);

  auto edge_prob = [&](std::size_t i, std::size_t j) -> double {
    switch (scheme.kind) {
      case ActivationKind::Synchronous:
        return 1.0;
      case ActivationKind::SingleUniform:
        return 2.0 / md;
      case ActivationKind::PerAgentBernoulli:
        return 1.0 - (1.0 - out.agent[i]) * (1.0 - out.agent[j]);
      case ActivationKind::FractionUniform: {
        const double k = static_cast<double>(fraction_count(scheme.fraction, m));
        if (m < 2) return 1.0;
        return 1.0 - ((md - k) * (md - k - 1.0)) / (md * (md - 1.0));
      }
      case ActivationKind::PoissonClocks:
        return out.agent[i] + out.agent[j];
    }
    return 0.0;
  };

  switch (scheme.kind) {
    case ActivationKind::Synchronous:
      std::fill(out.agent.begin(), out.agent.end(), 1.0);
      break;
    case ActivationKind::SingleUniform:
      std::fill(out.agent.begin(), out.agent.end(), 1.0 / md);
      break;
    case ActivationKind::PerAgentBernoulli:
      out.agent = broadcast(scheme.probabilities, m, "probabilities");
      break;
    case ActivationKind::FractionUniform:
      std::fill(out.agent.begin(), out.agent.end(),
                static_cast<double>(fraction_count(scheme.fraction, m)) / md);
      break;
    case ActivationKind::PoissonClocks: {
      const auto r = broadcast(scheme.rates, m, "rates");
      const double total = std::accumulate(r.begin(), r.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i) out.agent[i] = r[i] / total;
      break;
    }
  }
  for (std::size_t k = 0; k < topology.edge_count(); ++k) {
    const auto& e = topology.edge(k);
    out.edge[k] = edge_prob(e.source, e.destination);
  }
  out.p_min = *std::min_element(out.agent.begin(), out.agent.end());
  for (double p : out.edge) out.p_min = std::min(out.p_min, p);
  return out;
}

}  // namespace hippo

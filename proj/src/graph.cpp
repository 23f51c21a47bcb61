#include "hippo/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>

namespace hippo {

Topology::Topology(std::size_t agents, std::vector<Edge> edges) : agents_(agents) {
  if (agents == 0) throw GraphError("topology needs at least one agent");
  for (auto& e : edges) {
    if (e.source == e.destination)
      throw GraphError("self-loop at agent " + std::to_string(e.source + 1));
    if (e.source >= agents || e.destination >= agents)
      throw GraphError("edge endpoint out of range");
    if (e.source > e.destination) std::swap(e.source, e.destination);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw GraphError("duplicate edge in topology");
  if (!is_connected(agents, edges)) throw GraphError("topology is not connected");

  edges_ = std::move(edges);
  neighbors_.assign(agents_, {});
  incident_.assign(agents_, {});
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto [i, j] = edges_[k];
    neighbors_[i].push_back(j);
    incident_[i].push_back(k);
    neighbors_[j].push_back(i);
    incident_[j].push_back(k);
  }
  // keep neighbor lists sorted, carrying the edge index along
  for (std::size_t i = 0; i < agents_; ++i) {
    std::vector<std::size_t> order(neighbors_[i].size());
    for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return neighbors_[i][a] < neighbors_[i][b]; });
    std::vector<std::size_t> nb, inc;
    for (auto a : order) {
      nb.push_back(neighbors_[i][a]);
      inc.push_back(incident_[i][a]);
    }
    neighbors_[i] = std::move(nb);
    incident_[i] = std::move(inc);
  }
}

Topology Topology::path(std::size_t agents) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < agents; ++i) edges.push_back({i, i + 1});
  return Topology(agents, std::move(edges));
}

Topology Topology::complete(std::size_t agents) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < agents; ++i)
    for (std::size_t j = i + 1; j < agents; ++j) edges.push_back({i, j});
  return Topology(agents, std::move(edges));
}

std::size_t Topology::max_degree() const {
  std::size_t best = 0;
  for (const auto& nb : neighbors_) best = std::max(best, nb.size());
  return best;
}

bool is_connected(std::size_t agents, const std::vector<Edge>& edges) {
  if (agents == 0) return false;
  std::vector<std::vector<std::size_t>> adj(agents);
  for (const auto& e : edges) {
    adj[e.source].push_back(e.destination);
    adj[e.destination].push_back(e.source);
  }
  std::vector<char> seen(agents, 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == agents;
}

Topology generate_connected_gnp(std::size_t agents, double probability, std::uint64_t seed,
                                std::size_t max_attempts) {
  if (agents < 2) throw GraphError("random graph needs at least 2 agents");
  if (!(probability > 0.0 && probability <= 1.0))
    throw GraphError("edge probability must lie in (0, 1]");

  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(probability);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < agents; ++i)
      for (std::size_t j = i + 1; j < agents; ++j)
        if (coin(rng)) edges.push_back({i, j});
    if (is_connected(agents, edges)) {
      Topology t(agents, std::move(edges));
      t.set_redraws(attempt);
      return t;
    }
  }
  std::ostringstream msg;
  msg << "no connected G(" << agents << ", " << probability << ") sample after " << max_attempts
      << " draws (seed " << seed << "); increase the edge probability";
  throw GraphError(msg.str());
}

void write_edge_list(std::ostream& out, const Topology& topology) {
  out << topology.agents() << ' ' << topology.edge_count() << '\n';
  for (const auto& e : topology.edges()) out << e.source + 1 << ' ' << e.destination + 1 << '\n';
}

Topology read_edge_list(std::istream& in) {
  std::size_t m = 0, n = 0;
  if (!(in >> m >> n)) throw GraphError("edge list: missing \"m n\" header");
  std::vector<Edge> edges;
  edges.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    long long i = 0, j = 0;
    if (!(in >> i >> j)) throw GraphError("edge list: expected " + std::to_string(n) + " edges");
    if (i < 1 || j < 1) throw GraphError("edge list: indices are 1-based");
    edges.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)});
  }
  return Topology(m, std::move(edges));
}

IncidenceSet build_incidence(const Topology& topology) {
  const auto m = static_cast<Eigen::Index>(topology.agents());
  const auto n = static_cast<Eigen::Index>(topology.edge_count());
  IncidenceSet inc;
  inc.source = Eigen::MatrixXd::Zero(n, m);
  inc.destination = Eigen::MatrixXd::Zero(n, m);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& e = topology.edge(static_cast<std::size_t>(k));
    inc.source(k, static_cast<Eigen::Index>(e.source)) = 1.0;
    inc.destination(k, static_cast<Eigen::Index>(e.destination)) = 1.0;
  }
  inc.signed_inc = inc.source - inc.destination;
  inc.unsigned_inc = inc.source + inc.destination;
  inc.signed_lap = inc.signed_inc.transpose() * inc.signed_inc;
  inc.unsigned_lap = inc.unsigned_inc.transpose() * inc.unsigned_inc;
  inc.degrees.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    inc.degrees(i) = static_cast<double>(topology.degree(static_cast<std::size_t>(i)));
  return inc;
}

SpectralConstants spectral_constants(const IncidenceSet& inc, std::size_t selector) {
  const auto m = inc.signed_inc.cols();
  const auto n = inc.signed_inc.rows();
  if (selector >= static_cast<std::size_t>(m)) throw GraphError("selector agent out of range");

  SpectralConstants out;
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> lu(inc.unsigned_lap, Eigen::EigenvaluesOnly);
    out.sigma_max_lu = lu.eigenvalues().maxCoeff();
    out.sigma_min_lu = lu.eigenvalues().minCoeff();
  }

  // [E_s; S^T] is (n+1) x m; eigenvalues of its outer Gram matrix
  Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(n + 1, m);
  stacked.topRows(n) = inc.signed_inc;
  stacked(n, static_cast<Eigen::Index>(selector)) = 1.0;
  const Eigen::MatrixXd gram = stacked * stacked.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double largest = ev.maxCoeff();
  const double cutoff = 1e-9 * largest;
  double smallest = 0.0;
  bool found = false;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > cutoff && (!found || ev(k) < smallest)) {
      smallest = ev(k);
      found = true;
    }
  }
  if (!found || largest <= 0.0) throw GraphError("stacked incidence has no positive eigenvalue");
  // A disconnected graph leaves extra zero modes in E_s; with the selector row
  // the rank must be exactly m.
  const auto positive = std::count_if(ev.data(), ev.data() + ev.size(),
                                      [&](double v) { return v > cutoff; });
  if (positive != m) throw GraphError("stacked incidence is rank deficient (disconnected graph?)");
  out.sigma_min_plus = smallest;
  return out;
}

}  // namespace hippo

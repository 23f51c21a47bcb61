#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hippo {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected edge with source < destination (0-based agent indices).
struct Edge {
  std::size_t source;
  std::size_t destination;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Connected, undirected network of agents.
///
/// Edges are kept in lexicographic order with source < destination, so edge
/// indices are stable and match the i < j convention used for the induced
/// edge activation. Agents and edges are 0-based in memory; the text format
/// is 1-based.
class Topology {
 public:
  /// Validates and normalizes the edge list. Throws GraphError on self-loops,
  /// out-of-range endpoints, duplicates or a disconnected graph.
  Topology(std::size_t agents, std::vector<Edge> edges);

  static Topology path(std::size_t agents);
  static Topology complete(std::size_t agents);

  std::size_t agents() const { return agents_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t k) const { return edges_[k]; }

  /// Neighbors of agent i in increasing index order.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  /// Edge indices incident to agent i, aligned with neighbors(i).
  const std::vector<std::size_t>& incident_edges(std::size_t i) const { return incident_[i]; }
  std::size_t degree(std::size_t i) const { return neighbors_[i].size(); }
  std::size_t max_degree() const;

  /// Number of full resamples needed by the generator (0 for hand-built graphs).
  std::size_t redraws() const { return redraws_; }
  void set_redraws(std::size_t r) { redraws_ = r; }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.agents_ == b.agents_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t agents_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::vector<std::size_t>> incident_;
  std::size_t redraws_ = 0;
};

/// True when every agent is reachable from agent 0.
bool is_connected(std::size_t agents, const std::vector<Edge>& edges);

/// Erdos-Renyi G(m, p), resampled in full until connected.
Topology generate_connected_gnp(std::size_t agents, double probability, std::uint64_t seed,
                                std::size_t max_attempts = 10000);

/// Edge-list text format: first line "m n", then n lines "i j" (1-based).
void write_edge_list(std::ostream& out, const Topology& topology);
Topology read_edge_list(std::istream& in);

/// Incidence skeleton at agent granularity (the d-dimensional identity lift is
/// applied blockwise by callers).
struct IncidenceSet {
  Eigen::MatrixXd source;       // A_s, n x m
  Eigen::MatrixXd destination;  // A_d, n x m
  Eigen::MatrixXd signed_inc;   // E_s = A_s - A_d
  Eigen::MatrixXd unsigned_inc; // E_u = A_s + A_d
  Eigen::MatrixXd signed_lap;   // L_s = E_s^T E_s
  Eigen::MatrixXd unsigned_lap; // L_u = E_u^T E_u
  Eigen::VectorXd degrees;      // diagonal of D
};

IncidenceSet build_incidence(const Topology& topology);

struct SpectralConstants {
  double sigma_max_lu = 0.0;
  double sigma_min_lu = 0.0;
  /// Smallest positive eigenvalue of [E_s; S^T][E_s^T, S].
  double sigma_min_plus = 0.0;
};

/// Eigenvalues are taken on the m-sized skeleton. `selector` is 0-based.
SpectralConstants spectral_constants(const IncidenceSet& inc, std::size_t selector);

}  // namespace hippo

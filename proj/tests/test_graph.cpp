#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <queue>
#include <random>
#include <sstream>

#include "hippo/graph.hpp"

using namespace hippo;

namespace {

// independent reachability check
bool bfs_connected(std::size_t m, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> adj(m);
  for (const auto& e : edges) {
    adj[e.source].push_back(e.destination);
    adj[e.destination].push_back(e.source);
  }
  std::vector<char> seen(m, 0);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!q.empty()) {
    auto v = q.front();
    q.pop();
    for (auto w : adj[v])
      if (!seen[w]) seen[w] = 1, ++count, q.push(w);
  }
  return count == m;
}

double power_iteration(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.rows());
  v(0) += 0.1;
  double lam = 0;
  for (int k = 0; k < 5000; ++k) {
    Eigen::VectorXd w = a * v;
    lam = v.dot(w) / v.dot(v);
    v = w.normalized();
  }
  return lam;
}

}  // namespace

TEST_CASE("two agents with p = 1 give the single edge") {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const auto t = generate_connected_gnp(2, 1.0, seed);
    REQUIRE(t.edge_count() == 1);
    CHECK(t.edge(0) == Edge{0, 1});
  }
}

TEST_CASE("50-agent draw is connected with a plausible edge count") {
  const auto t = generate_connected_gnp(50, 0.1, 7);
  CHECK(t.edge_count() >= 49);
  CHECK(t.edge_count() <= 1225);
  CHECK(bfs_connected(t.agents(), t.edges()));
}

TEST_CASE("generated graphs agree with breadth-first search") {
  const auto t = generate_connected_gnp(5, 0.5, 42);
  CHECK(bfs_connected(5, t.edges()));
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = generate_connected_gnp(6, 0.4, seed);
    CHECK(bfs_connected(6, g.edges()));
    CHECK(is_connected(6, g.edges()));
  }
}

TEST_CASE("generator is deterministic and reports its budget") {
  CHECK(generate_connected_gnp(12, 0.3, 5) == generate_connected_gnp(12, 0.3, 5));
  CHECK_THROWS_AS(generate_connected_gnp(30, 0.01, 1, 3), GraphError);
  CHECK_THROWS_AS(generate_connected_gnp(1, 0.5, 1), GraphError);
  CHECK_THROWS_AS(generate_connected_gnp(5, 0.0, 1), GraphError);
}

TEST_CASE("topology validation") {
  CHECK_THROWS_AS(Topology(3, {{0, 0}, {0, 1}, {1, 2}}), GraphError);
  CHECK_THROWS_AS(Topology(3, {{0, 1}, {1, 0}, {1, 2}}), GraphError);
  CHECK_THROWS_AS(Topology(3, {{0, 1}, {1, 3}}), GraphError);
  CHECK_THROWS_AS(Topology(4, {{0, 1}, {2, 3}}), GraphError);
  const Topology t(3, {{2, 1}, {1, 0}});
  CHECK(t.edge(0) == Edge{0, 1});
  CHECK(t.edge(1) == Edge{1, 2});
  std::size_t degree_sum = 0;
  for (std::size_t i = 0; i < 3; ++i) degree_sum += t.degree(i);
  CHECK(degree_sum == 2 * t.edge_count());
}

TEST_CASE("path incidence matrices") {
  const auto inc = build_incidence(Topology::path(3));
  Eigen::MatrixXd es(2, 3), ls(3, 3), eu(2, 3), lu(3, 3);
  es << 1, -1, 0, 0, 1, -1;
  ls << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  eu << 1, 1, 0, 0, 1, 1;
  lu << 1, 1, 0, 1, 2, 1, 0, 1, 1;
  CHECK(inc.signed_inc == es);
  CHECK(inc.signed_lap == ls);
  CHECK(inc.unsigned_inc == eu);
  CHECK(inc.unsigned_lap == lu);
}

TEST_CASE("incidence invariants on random graphs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = generate_connected_gnp(6, 0.5, seed);
    const auto inc = build_incidence(t);
    for (Eigen::Index k = 0; k < inc.source.rows(); ++k) {
      CHECK(inc.source.row(k).sum() == 1.0);
      CHECK(inc.destination.row(k).sum() == 1.0);
      CHECK(inc.source.row(k).maxCoeff() == 1.0);
      CHECK(inc.destination.row(k).maxCoeff() == 1.0);
    }
    CHECK((inc.signed_inc * Eigen::VectorXd::Ones(6)).norm() == 0.0);
    const Eigen::MatrixXd two_d = 2.0 * inc.degrees.asDiagonal().toDenseMatrix();
    CHECK((two_d - inc.signed_lap - inc.unsigned_lap).cwiseAbs().maxCoeff() == 0.0);

    // signed Laplacian from degrees and adjacency
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(6, 6);
    for (const auto& e : t.edges()) {
      lap(e.source, e.destination) = lap(e.destination, e.source) = -1.0;
      lap(e.source, e.source) += 1.0;
      lap(e.destination, e.destination) += 1.0;
    }
    CHECK(inc.signed_lap == lap);

    // E_s x = 0 only for consensus vectors: the nullspace is one-dimensional
    Eigen::FullPivLU<Eigen::MatrixXd> lu(inc.signed_inc);
    const Eigen::MatrixXd kernel = lu.kernel();
    REQUIRE(kernel.cols() == 1);
    const Eigen::VectorXd k0 = kernel.col(0) / kernel(0, 0);
    CHECK((k0 - Eigen::VectorXd::Ones(6)).norm() < 1e-12);

    const auto sc = spectral_constants(inc, 0);
    CHECK(sc.sigma_min_plus > 0.0);
    CHECK(sc.sigma_max_lu <= 2.0 * static_cast<double>(t.max_degree()) + 1e-12);
  }
}

TEST_CASE("single edge spectral constants") {
  const auto sc = spectral_constants(build_incidence(Topology::path(2)), 0);
  CHECK(sc.sigma_max_lu == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("path of three: sigma_min+ against characteristic polynomial roots") {
  // [E_s; S^T][E_s^T, S] for l = 1 is [[2,-1,1],[-1,2,0],[1,0,1]]
  // char poly: x^3 - 5x^2 + 6x - 1
  const auto sc = spectral_constants(build_incidence(Topology::path(3)), 0);
  auto p = [](double x) { return x * x * x - 5 * x * x + 6 * x - 1; };
  // the smallest root lies in (0, 0.5); bisection
  double lo = 0.0, hi = 0.5;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (p(lo) * p(mid) <= 0 ? hi : lo) = mid;
  }
  CHECK(sc.sigma_min_plus == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
}

TEST_CASE("complete graph sigma_max(L_u) against power iteration") {
  const auto inc = build_incidence(Topology::complete(3));
  const auto sc = spectral_constants(inc, 0);
  CHECK(sc.sigma_max_lu == doctest::Approx(power_iteration(inc.unsigned_lap)).epsilon(1e-10));
  CHECK(sc.sigma_max_lu == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("edge list round trip") {
  const auto t = generate_connected_gnp(8, 0.4, 3);
  std::stringstream ss;
  write_edge_list(ss, t);
  const auto back = read_edge_list(ss);
  CHECK(back == t);
  std::istringstream bad("3 2\n1 2\n2 4\n");
  CHECK_THROWS_AS(read_edge_list(bad), GraphError);
}

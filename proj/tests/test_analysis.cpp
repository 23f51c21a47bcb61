#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "hippo/analysis.hpp"
#include "oracles.hpp"

using namespace hippo;

namespace {

std::vector<LocalObjective> random_objectives(std::size_t m, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LocalObjective> objs;
  for (std::size_t i = 0; i < m; ++i) objs.emplace_back(oracle::gaussian(6, d, rng), oracle::gaussian(6, rng));
  return objs;
}

}  // namespace

TEST_CASE("centralized LASSO against plain ISTA") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const auto objs = random_objectives(5, 4, seed);
    const auto reg = Regularizer::l1(0.3 * default_l1_weight(objs) / 0.1);
    const auto sol = solve_centralized(objs, reg);
    CHECK(sol.converged);
    CHECK(sol.residual <= 1e-10);
    const GlobalObjective g(objs, reg);
    const Vec ref = oracle::ista_lasso(g.hessian, g.linear, reg.weight);
    CHECK((sol.x - ref).norm() < 1e-9);
    CHECK(sol.value == doctest::Approx(g.value(ref)).epsilon(1e-12));
  }
}

TEST_CASE("two-dimensional problem against a grid search") {
  const auto objs = random_objectives(3, 2, 9);
  const auto reg = Regularizer::l1(2.0);
  const GlobalObjective g(objs, reg);
  const auto sol = solve_centralized(objs, reg);
  // coarse grid, then a fine grid around the coarse winner
  auto search = [&](Vec center, double half, double step) {
    Vec best = center;
    double best_val = g.value(center);
    for (double a = -half; a <= half; a += step)
      for (double b = -half; b <= half; b += step) {
        Vec p = center + Vec::Map(std::array<double, 2>{a, b}.data(), 2);
        if (const double v = g.value(p); v < best_val) best_val = v, best = p;
      }
    return best;
  };
  Vec x = search(Vec::Zero(2), 3.0, 0.01);
  x = search(x, 0.02, 1e-4);
  CHECK((sol.x - x).lpNorm<Eigen::Infinity>() <= 2e-4);
  CHECK(g.value(sol.x) <= g.value(x) + 1e-12);
}

TEST_CASE("box and zero regularizers") {
  const auto objs = random_objectives(4, 3, 5);
  const auto zero = solve_centralized(objs, Regularizer::zero());
  const GlobalObjective g(objs, Regularizer::zero());
  CHECK((zero.x - g.hessian.fullPivLu().solve(g.linear)).norm() < 1e-10);
  const auto box = solve_centralized(objs, Regularizer::box(-0.05, 0.05));
  CHECK(box.residual <= 1e-10);
  CHECK(box.x.cwiseAbs().maxCoeff() <= 0.05 + 1e-15);
}

TEST_CASE("gap equals the difference of objective values") {
  const auto objs = random_objectives(3, 3, 6);
  const GlobalObjective g(objs, Regularizer::l1(0.5));
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    const Vec x = oracle::gaussian(3, rng), y = oracle::gaussian(3, rng);
    CHECK(g.gap(x, y) == doctest::Approx(g.value(x) - g.value(y)).epsilon(1e-10));
  }
}

TEST_CASE("saddle tuple satisfies the optimality conditions") {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto topo = generate_connected_gnp(5, 0.6, seed);
    const auto objs = random_objectives(5, 2, seed);
    const auto reg = Regularizer::l1(1.0);
    const auto sol = solve_centralized(objs, reg);
    const auto star = star_tuple(sol.x, objs, topo, 2);
    const auto kkt = kkt_residuals(star, objs, topo, 2, reg);
    CHECK(kkt.max() <= 1e-9);
    // minimum norm: alpha* is orthogonal to the cycle space (E_s alpha lives in range(E_s))
    const auto inc = build_incidence(topo);
    Eigen::VectorXd a0(topo.edge_count());
    for (std::size_t k = 0; k < topo.edge_count(); ++k) a0(k) = star.alpha[k](0);
    Eigen::FullPivLU<Mat> lu(inc.signed_inc.transpose());
    const Mat cycles = lu.kernel();
    if (lu.dimensionOfKernel() > 0) CHECK((cycles.transpose() * a0).norm() < 1e-9);
  }
}

TEST_CASE("rate constant term by term") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.05, 20.0);
  for (int draw = 0; draw < 20; ++draw) {
    const ConvexityConstants c{u(rng), 0.0, 0.0};
    ConvexityConstants cc = c;
    cc.M_f = c.m_f + u(rng);
    const SpectralConstants sp{u(rng), 0.0, u(rng) / 10.0};
    const auto hp = HyperParams::theorem(u(rng), u(rng));
    const auto tc = theoretical_eta(cc, sp, hp);
    const auto terms = oracle::eta_terms({cc.m_f, cc.M_f, hp.epsilon, hp.mu_theta, sp.sigma_max_lu, sp.sigma_min_plus});
    for (int k = 0; k < 5; ++k) CHECK(std::abs(tc.terms[k] - terms[k]) <= 1e-12 * std::max(1.0, terms[k]));
    CHECK(tc.eta == doctest::Approx(oracle::eta({cc.m_f, cc.M_f, hp.epsilon, hp.mu_theta, sp.sigma_max_lu,
                                                 sp.sigma_min_plus}))
                        .epsilon(1e-12));
    CHECK(tc.rate(0.25) == doctest::Approx(1.0 - 0.25 * tc.eta / (1.0 + tc.eta)));
    CHECK(tc.scaling[1] == 2.0 * hp.mu_z);
    CHECK(tc.scaling[2] == 2.0 / hp.mu_z);
  }
}

TEST_CASE("rate constant preconditions") {
  const ConvexityConstants c{1.0, 4.0, 0.0};
  const SpectralConstants sp{3.0, 0.0, 0.2};
  auto hp = HyperParams::theorem(1.0, 2.0);
  hp.mu_z = 3.0;
  CHECK_THROWS_AS(theoretical_eta(c, sp, hp), ConfigError);
  hp = HyperParams::theorem(1.0, 0.0);
  const auto tc = theoretical_eta(c, sp, hp);
  CHECK(tc.epsilon_term_dropped);
  CHECK(std::isinf(tc.terms[3]));
  hp = HyperParams::theorem(1.0, 2.0);
  hp.delta_policy = DeltaPolicy::NewtonZero;
  CHECK_THROWS_AS(theoretical_eta(c, sp, hp), ConfigError);
}

TEST_CASE("Lyapunov value by hand") {
  // two agents, one edge, d = 1
  const auto topo = Topology::path(2);
  AnalysisTuple v, s;
  v.x = {Vec::Constant(1, 1.0), Vec::Constant(1, 2.0)};
  v.z = {Vec::Constant(1, 3.0)};
  v.alpha = {Vec::Constant(1, -1.0)};
  v.theta = Vec::Constant(1, 0.5);
  v.lambda = Vec::Constant(1, 2.0);
  s.x = {Vec::Zero(1), Vec::Zero(1)};
  s.z = {Vec::Zero(1)};
  s.alpha = {Vec::Zero(1)};
  s.theta = Vec::Zero(1);
  s.lambda = Vec::Zero(1);
  TheoremConstants tc;
  tc.scaling = {2.0, 4.0, 1.0, 1.0, 1.0};  // eps = 2, mu_z = 1, mu_theta = 1
  ExpectedActivation p;
  p.agent = {0.5, 0.5};
  p.edge = {1.0};
  // x: 2 (1 + 4) / 0.5 = 20; z: 4 * 9 = 36; alpha: 1; theta: 0.25 / 0.5; lambda: 4 / 0.5
  CHECK(lyapunov(v, s, tc, p, topo, 0) == doctest::Approx(20.0 + 36.0 + 1.0 + 0.5 + 8.0));
  p.edge = {0.0};
  CHECK_THROWS_AS(lyapunov(v, s, tc, p, topo, 0), ActivationError);
}

TEST_CASE("full-mask operator matches the synchronous protocol on a tree") {
  const auto topo = Topology::path(4);
  const auto objs = random_objectives(4, 2, 3);
  Problem pb{&topo, objs, Regularizer::l1(0.5), HyperParams::theorem(1.0, 10.0)};
  const auto modes = ModeAssignment::newton_agents(4, {1, 2});
  auto st = NetworkState::zeros(topo, 2);
  std::vector<Vec> alpha(3, Vec::Zero(2));
  auto tuple = lift_state(st, alpha, topo);
  for (std::uint64_t t = 0; t < 30; ++t) {
    tuple = apply_operator(tuple, pb, modes, t);
    synchronous_step(st, pb, modes, t);
    for (std::size_t i = 0; i < 4; ++i) CHECK((tuple.x[i] - st.x[i]).norm() < 1e-10);
    const auto phi = signed_transpose_apply(tuple.alpha, topo, 2);
    for (std::size_t i = 0; i < 4; ++i) CHECK((phi[i] - st.phi[i]).norm() < 1e-10);
    CHECK((tuple.lambda - st.lambda).norm() < 1e-10);
  }
}

TEST_CASE("saddle identity holds along synchronous trajectories") {
  const auto topo = generate_connected_gnp(5, 0.6, 4);
  const auto objs = random_objectives(5, 2, 4);
  const auto reg = Regularizer::l1(0.8);
  Problem pb{&topo, objs, reg, HyperParams::theorem(1.0, 8.0, 1)};
  const auto sol = solve_centralized(objs, reg);
  const auto star = star_tuple(sol.x, objs, topo, 1);
  const auto modes = ModeAssignment::newton_fraction(5, 0.4, 2);
  auto tuple = lift_state(NetworkState::zeros(topo, 2), std::vector<Vec>(topo.edge_count(), Vec::Zero(2)), topo);
  for (std::uint64_t t = 0; t < 25; ++t) {
    const auto next = apply_operator(tuple, pb, modes, t);
    for (double r : saddle_identity_residual(tuple, next, star, pb, modes, t)) CHECK(r < 1e-9);
    tuple = next;
  }
}

TEST_CASE("masked update touches only the active blocks") {
  const auto topo = Topology::path(3);
  AnalysisTuple a, b;
  a.x.assign(3, Vec::Zero(1));
  a.z.assign(2, Vec::Zero(1));
  a.alpha.assign(2, Vec::Zero(1));
  a.theta = a.lambda = Vec::Zero(1);
  b.x.assign(3, Vec::Ones(1));
  b.z.assign(2, Vec::Ones(1));
  b.alpha.assign(2, Vec::Ones(1));
  b.theta = b.lambda = Vec::Ones(1);
  masked_update(a, b, {0, 0, 1}, induced_edge_activation({0, 0, 1}, topo), 0);
  CHECK(a.x[0](0) == 0.0);
  CHECK(a.x[2](0) == 1.0);
  CHECK(a.z[0](0) == 0.0);
  CHECK(a.z[1](0) == 1.0);
  CHECK(a.alpha[1](0) == 1.0);
  CHECK(a.theta(0) == 0.0);
}

TEST_CASE("contraction statistics on synthetic sequences") {
  std::vector<std::vector<double>> runs;
  for (int s = 0; s < 4; ++s) {
    std::vector<double> r{1.0 + s};
    for (int t = 0; t < 50; ++t) r.push_back(r.back() * 0.5);
    runs.push_back(r);
  }
  const auto ok = contraction_check(runs, 0.6);
  CHECK(ok.evaluated == 50);
  CHECK(ok.exceedances == 0);
  CHECK(ok.mean_ratio[7] == doctest::Approx(0.5));
  CHECK(ok.standard_error[7] == doctest::Approx(0.0));
  CHECK(ok.fitted_slope == doctest::Approx(std::log(0.5)));
  const auto bad = contraction_check(runs, 0.4);
  CHECK(bad.exceed_fraction == 1.0);
  // ratios stop once a seed falls below the floor
  CHECK(contraction_check(runs, 0.6, 1e-6).evaluated == 20);
  std::ostringstream csv;
  ok.write_csv(csv);
  CHECK(csv.str().rfind("t,mean_ratio,standard_error,bound,exceeds\n", 0) == 0);

  const auto start = contraction_check({{0.0, 0.0}, {0.0, 0.0}}, 0.9);
  CHECK(start.converged_at_start);
}

TEST_CASE("protocol state KKT residuals vanish at convergence") {
  const auto topo = Topology::path(3);
  const auto objs = random_objectives(3, 2, 8);
  const auto reg = Regularizer::l1(0.5);
  Problem pb{&topo, objs, reg, HyperParams::theorem(1.0, 1.0)};
  auto st = NetworkState::zeros(topo, 2);
  const auto modes = ModeAssignment::all(3, UpdateMode::Newton);
  for (std::uint64_t t = 0; t < 3000; ++t) synchronous_step(st, pb, modes, t);
  CHECK(kkt_residuals(st, objs, topo, 0, reg).max() < 1e-8);
  const auto sol = solve_centralized(objs, reg);
  for (const auto& x : st.x) CHECK((x - sol.x).norm() < 1e-8);
}

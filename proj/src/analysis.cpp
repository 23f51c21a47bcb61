#include "hippo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

namespace hippo {
namespace {

double prox_residual(const GlobalObjective& g, const Vec& x, double step_inv) {
  return (x - g.regularizer.prox(x - g.gradient(x) / step_inv, step_inv)).norm();
}

// Exact minimizer on the active set suggested by x, if it is consistent.
std::optional<Vec> polish(const GlobalObjective& g, const Vec& x) {
  const auto d = x.size();
  const auto& reg = g.regularizer;
  std::vector<Eigen::Index> free_ids;
  Vec fixed = Vec::Zero(d);
  Vec shift = Vec::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    switch (reg.kind) {
      case RegularizerKind::Zero:
        free_ids.push_back(k);
        break;
      case RegularizerKind::L1:
        if (x(k) != 0.0) {
          free_ids.push_back(k);
          shift(k) = reg.weight * (x(k) > 0.0 ? 1.0 : -1.0);
        }
        break;
      case RegularizerKind::Box:
        if (x(k) <= reg.lower) fixed(k) = reg.lower;
        else if (x(k) >= reg.upper) fixed(k) = reg.upper;
        else free_ids.push_back(k);
        break;
    }
  }
  Vec out = fixed;
  if (free_ids.empty()) return out;
  const auto f = static_cast<Eigen::Index>(free_ids.size());
  Mat hff(f, f);
  Vec rhs(f);
  const Vec coupling = g.hessian * fixed;
  for (Eigen::Index a = 0; a < f; ++a) {
    rhs(a) = g.linear(free_ids[a]) - shift(free_ids[a]) - coupling(free_ids[a]);
    for (Eigen::Index b = 0; b < f; ++b) hff(a, b) = g.hessian(free_ids[a], free_ids[b]);
  }
  Eigen::LLT<Mat> llt(hff);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vec sol = llt.solve(rhs);
  for (Eigen::Index a = 0; a < f; ++a) {
    const auto k = free_ids[a];
    if (reg.kind == RegularizerKind::L1 && sol(a) * x(k) <= 0.0) return std::nullopt;
    if (reg.kind == RegularizerKind::Box && (sol(a) < reg.lower || sol(a) > reg.upper)) return std::nullopt;
    out(k) = sol(a);
  }
  return out;
}

Vec edge_sum_unsigned(const std::vector<Vec>& z, const Topology& topology, std::size_t i, Eigen::Index d) {
  Vec s = Vec::Zero(d);
  for (auto k : topology.incident_edges(i)) s += z[k];
  return s;
}

}  // namespace

GlobalObjective::GlobalObjective(std::span<const LocalObjective> objectives, Regularizer reg)
    : constant(0.0), regularizer(reg) {
  if (objectives.empty()) throw ModelError("no local objectives");
  const auto d = objectives.front().dim();
  hessian = Mat::Zero(d, d);
  linear = Vec::Zero(d);
  for (const auto& obj : objectives) {
    hessian += obj.hessian(linear);
    linear += obj.linear_term();
    constant += 0.5 * obj.response().squaredNorm();
  }
}

double GlobalObjective::gap(const Vec& x, const Vec& x_ref) const {
  const Vec delta = x - x_ref;
  return 0.5 * delta.dot(hessian * delta) + gradient(x_ref).dot(delta) + regularizer.value(x) -
         regularizer.value(x_ref);
}

OracleSolution solve_centralized(std::span<const LocalObjective> objectives, const Regularizer& reg,
                                 double tol, std::size_t max_iterations) {
  GlobalObjective g(objectives, reg);
  Eigen::SelfAdjointEigenSolver<Mat> es(g.hessian, Eigen::EigenvaluesOnly);
  const double lip = es.eigenvalues().maxCoeff();
  const double strong = es.eigenvalues().minCoeff();
  if (!(strong > 0.0)) throw ModelError("centralized objective is not strongly convex");
  const double momentum = (std::sqrt(lip) - std::sqrt(strong)) / (std::sqrt(lip) + std::sqrt(strong));

  OracleSolution sol;
  Vec x = Vec::Zero(g.linear.size());
  Vec y = x;
  Vec best = x;
  double best_res = prox_residual(g, x, lip);
  std::size_t k = 0;
  for (; k < max_iterations && best_res > tol; ++k) {
    const Vec next = reg.prox(y - g.gradient(y) / lip, lip);
    // gradient-based restart keeps the momentum from overshooting
    if ((y - next).dot(next - x) > 0.0) y = next;
    else y = next + momentum * (next - x);
    x = next;
    const double res = prox_residual(g, x, lip);
    if (res < best_res) {
      best_res = res;
      best = x;
    }
  }
  if (auto refined = polish(g, best)) {
    const double res = prox_residual(g, *refined, lip);
    if (res <= best_res) {
      best = *refined;
      best_res = res;
    }
  }
  sol.x = best;
  sol.residual = best_res;
  sol.iterations = k;
  sol.converged = best_res <= tol;
  sol.value = g.value(best);
  return sol;
}

AnalysisTuple lift_state(const NetworkState& state, const std::vector<Vec>& alpha, const Topology& topology) {
  AnalysisTuple t;
  t.x = state.x;
  t.z.reserve(topology.edge_count());
  for (const auto& e : topology.edges()) t.z.push_back(0.5 * (state.x[e.source] + state.x[e.destination]));
  t.alpha = alpha;
  t.theta = state.theta;
  t.lambda = state.lambda;
  return t;
}

std::vector<Vec> signed_transpose_apply(const std::vector<Vec>& alpha, const Topology& topology,
                                        Eigen::Index dim) {
  std::vector<Vec> out(topology.agents(), Vec::Zero(dim));
  for (std::size_t k = 0; k < topology.edge_count(); ++k) {
    const auto& e = topology.edge(k);
    out[e.source] += alpha[k];
    out[e.destination] -= alpha[k];
  }
  return out;
}

AnalysisTuple star_tuple(const Vec& x_star, std::span<const LocalObjective> objectives,
                         const Topology& topology, std::size_t selector) {
  const auto d = x_star.size();
  const auto m = static_cast<Eigen::Index>(topology.agents());
  const auto n = static_cast<Eigen::Index>(topology.edge_count());

  Mat sys = Mat::Zero(m * d, n * d + d);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& e = topology.edge(static_cast<std::size_t>(k));
    sys.block(static_cast<Eigen::Index>(e.source) * d, k * d, d, d).setIdentity();
    sys.block(static_cast<Eigen::Index>(e.destination) * d, k * d, d, d) = -Mat::Identity(d, d);
  }
  sys.block(static_cast<Eigen::Index>(selector) * d, n * d, d, d).setIdentity();
  Vec rhs(m * d);
  for (Eigen::Index i = 0; i < m; ++i)
    rhs.segment(i * d, d) = -objectives[static_cast<std::size_t>(i)].gradient(x_star);
  const Vec dual = sys.completeOrthogonalDecomposition().solve(rhs);

  AnalysisTuple star;
  star.x.assign(topology.agents(), x_star);
  star.z.assign(topology.edge_count(), x_star);
  for (Eigen::Index k = 0; k < n; ++k) star.alpha.push_back(dual.segment(k * d, d));
  star.theta = x_star;
  star.lambda = dual.tail(d);
  return star;
}

double KktResiduals::max() const {
  return std::max({stationarity, consensus, edge, selector, subgradient});
}

double consensus_residual(const std::vector<Vec>& x, const Topology& topology) {
  double sq = 0.0;
  for (const auto& e : topology.edges()) sq += (x[e.source] - x[e.destination]).squaredNorm();
  return std::sqrt(sq);
}

namespace {

KktResiduals residuals_with_dual(const std::vector<Vec>& x, const std::vector<Vec>& es_alpha,
                                 const Vec& theta, const Vec& lambda,
                                 std::span<const LocalObjective> objectives, const Topology& topology,
                                 std::size_t selector, const Regularizer& reg) {
  KktResiduals r;
  double sq = 0.0;
  for (std::size_t i = 0; i < topology.agents(); ++i) {
    Vec s = objectives[i].gradient(x[i]) + es_alpha[i];
    if (i == selector) s += lambda;
    sq += s.squaredNorm();
  }
  r.stationarity = std::sqrt(sq);
  r.consensus = consensus_residual(x, topology);
  r.selector = (x[selector] - theta).norm();
  r.subgradient = reg.subdifferential_gap(theta, lambda);
  return r;
}

}  // namespace

KktResiduals kkt_residuals(const AnalysisTuple& tuple, std::span<const LocalObjective> objectives,
                           const Topology& topology, std::size_t selector, const Regularizer& reg) {
  const auto d = tuple.theta.size();
  auto r = residuals_with_dual(tuple.x, signed_transpose_apply(tuple.alpha, topology, d), tuple.theta,
                               tuple.lambda, objectives, topology, selector, reg);
  double sq = 0.0;
  for (std::size_t k = 0; k < topology.edge_count(); ++k) {
    const auto& e = topology.edge(k);
    sq += (tuple.x[e.source] + tuple.x[e.destination] - 2.0 * tuple.z[k]).squaredNorm();
  }
  r.edge = std::sqrt(sq);
  return r;
}

KktResiduals kkt_residuals(const NetworkState& state, std::span<const LocalObjective> objectives,
                           const Topology& topology, std::size_t selector, const Regularizer& reg) {
  return residuals_with_dual(state.x, state.phi, state.theta, state.lambda, objectives, topology, selector,
                             reg);
}

TheoremConstants theoretical_eta(const ConvexityConstants& consts, const SpectralConstants& spectral,
                                 const HyperParams& hp) {
  if (std::abs(hp.mu_z - 2.0 * hp.mu_theta) > 1e-12 * std::max(1.0, hp.mu_z))
    throw ConfigError("rate constants need mu_z = 2 * mu_theta");
  if (!hp.delta_overrides.empty() || hp.delta_policy != DeltaPolicy::Uniform)
    throw ConfigError("rate constants need a uniform Delta = epsilon I");
  const double mf = consts.m_f, Mf = consts.M_f, eps = hp.epsilon, mt = hp.mu_theta;
  const double smax = spectral.sigma_max_lu, splus = spectral.sigma_min_plus;

  TheoremConstants tc;
  tc.terms[0] = (2.0 * mf * Mf / (mf + Mf)) / (eps + mt * (smax + 2.0));
  tc.terms[1] = 0.5;
  tc.terms[2] = 0.4 * mt * splus / (mf + Mf);
  if (eps > 0.0) {
    tc.terms[3] = mt * splus / (5.0 * eps);
  } else {
    tc.terms[3] = std::numeric_limits<double>::infinity();
    tc.epsilon_term_dropped = true;
  }
  tc.terms[4] = splus / (5.0 * std::max(1.0, smax));
  tc.eta = *std::min_element(tc.terms.begin(), tc.terms.end());
  tc.scaling = {eps, 2.0 * hp.mu_z, 2.0 / hp.mu_z, mt, 1.0 / mt};
  return tc;
}

double lyapunov(const AnalysisTuple& tuple, const AnalysisTuple& star, const TheoremConstants& constants,
                const ExpectedActivation& probabilities, const Topology& topology, std::size_t selector) {
  const auto& w = constants.scaling;
  auto positive = [](double p) {
    if (!(p > 0.0)) throw ActivationError("lyapunov weight needs positive activation probabilities");
    return p;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < topology.agents(); ++i)
    total += w[0] * (tuple.x[i] - star.x[i]).squaredNorm() / positive(probabilities.agent[i]);
  for (std::size_t k = 0; k < topology.edge_count(); ++k) {
    const double pk = positive(probabilities.edge[k]);
    total += w[1] * (tuple.z[k] - star.z[k]).squaredNorm() / pk;
    total += w[2] * (tuple.alpha[k] - star.alpha[k]).squaredNorm() / pk;
  }
  const double pl = positive(probabilities.agent[selector]);
  total += w[3] * (tuple.theta - star.theta).squaredNorm() / pl;
  total += w[4] * (tuple.lambda - star.lambda).squaredNorm() / pl;
  return total;
}

AnalysisTuple apply_operator(const AnalysisTuple& tuple, const Problem& problem, const ModeAssignment& modes,
                             std::uint64_t t) {
  const auto& topo = problem.graph();
  const auto& hp = problem.hyper;
  const auto d = tuple.theta.size();
  const auto es_alpha = signed_transpose_apply(tuple.alpha, topo, d);

  AnalysisTuple out;
  out.x.resize(topo.agents());
  for (std::size_t i = 0; i < topo.agents(); ++i) {
    const Vec& xi = tuple.x[i];
    // A^T (A x - B z) restricted to agent i: |N_i| x_i - sum_k z_k
    const Vec coupling = static_cast<double>(topo.degree(i)) * xi - edge_sum_unsigned(tuple.z, topo, i, d);
    Vec g = problem.objective(i).gradient(xi) + es_alpha[i] + hp.mu_z * coupling;
    if (i == hp.selector) g += tuple.lambda + hp.mu_theta * (xi - tuple.theta);
    const auto mode = modes.at(i, t);
    out.x[i] = xi - solve_local_system(i, mode, g, xi, problem);
  }
  out.z.resize(topo.edge_count());
  out.alpha.resize(topo.edge_count());
  for (std::size_t k = 0; k < topo.edge_count(); ++k) {
    const auto& e = topo.edge(k);
    out.z[k] = 0.5 * (out.x[e.source] + out.x[e.destination]);
    out.alpha[k] = tuple.alpha[k] + 0.5 * hp.mu_z * (out.x[e.source] - out.x[e.destination]);
  }
  const Vec& xl = out.x[hp.selector];
  out.theta = problem.regularizer.prox(xl + tuple.lambda / hp.mu_theta, hp.mu_theta);
  out.lambda = tuple.lambda + hp.mu_theta * (xl - out.theta);
  return out;
}

void masked_update(AnalysisTuple& tuple, const AnalysisTuple& image, const std::vector<char>& agent_mask,
                   const std::vector<char>& edge_mask, std::size_t selector) {
  for (std::size_t i = 0; i < tuple.x.size(); ++i)
    if (agent_mask[i]) tuple.x[i] = image.x[i];
  for (std::size_t k = 0; k < tuple.z.size(); ++k) {
    if (edge_mask[k]) {
      tuple.z[k] = image.z[k];
      tuple.alpha[k] = image.alpha[k];
    }
  }
  if (agent_mask[selector]) {
    tuple.theta = image.theta;
    tuple.lambda = image.lambda;
  }
}

std::vector<double> saddle_identity_residual(const AnalysisTuple& prev, const AnalysisTuple& next,
                                             const AnalysisTuple& star, const Problem& problem,
                                             const ModeAssignment& modes, std::uint64_t t) {
  const auto& topo = problem.graph();
  const auto& hp = problem.hyper;
  const auto d = prev.theta.size();
  std::vector<Vec> dalpha(topo.edge_count()), dz(topo.edge_count());
  for (std::size_t k = 0; k < topo.edge_count(); ++k) {
    dalpha[k] = next.alpha[k] - star.alpha[k];
    dz[k] = next.z[k] - prev.z[k];
  }
  const auto es_dalpha = signed_transpose_apply(dalpha, topo, d);

  std::vector<double> out(topo.agents());
  for (std::size_t i = 0; i < topo.agents(); ++i) {
    const auto mode = modes.at(i, t);
    const auto& obj = problem.objective(i);
    // the error term needs M_f only for its bound; the vector is what matters here
    const auto err = error_term(prev.x[i], next.x[i], mode, obj, ConvexityConstants{});
    Vec r = err.e + obj.gradient_difference(next.x[i], star.x[i]) +
            hp.delta(i, mode) * (next.x[i] - prev.x[i]) + es_dalpha[i] +
            hp.mu_z * edge_sum_unsigned(dz, topo, i, d);
    if (i == hp.selector) r += next.lambda - star.lambda + hp.mu_theta * (next.theta - prev.theta);
    out[i] = r.norm();
  }
  return out;
}

std::vector<double> lyapunov_trajectory(const Problem& problem, const ModeAssignment& modes,
                                        const ActivationScheme& scheme, const AnalysisTuple& star,
                                        const TheoremConstants& constants, std::size_t iterations,
                                        ContractionProcess process) {
  const auto& topo = problem.graph();
  const auto d = problem.dim();
  const auto probs = expected_activation(scheme, topo);
  const Activator activator(scheme, topo);
  const std::size_t l = problem.hyper.selector;

  std::vector<double> values;
  values.reserve(iterations + 1);
  std::vector<Vec> alpha(topo.edge_count(), Vec::Zero(d));
  auto state = NetworkState::zeros(topo, d);
  auto tuple = lift_state(state, alpha, topo);
  values.push_back(lyapunov(tuple, star, constants, probs, topo, l));

  for (std::size_t t = 0; t < iterations; ++t) {
    const auto rec = activator.sample(t);
    if (process == ContractionProcess::Operator) {
      const auto image = apply_operator(tuple, problem, modes, t);
      masked_update(tuple, image, rec.agent_mask, rec.edge_mask, l);
    } else {
      protocol_iteration(state, problem, rec.agents, modes, t, Freshness::Fresh);
      for (std::size_t k = 0; k < topo.edge_count(); ++k) {
        if (!rec.edge_mask[k]) continue;
        const auto& e = topo.edge(k);
        alpha[k] += 0.5 * problem.hyper.mu_z * (state.x[e.source] - state.x[e.destination]);
      }
      tuple = lift_state(state, alpha, topo);
    }
    values.push_back(lyapunov(tuple, star, constants, probs, topo, l));
  }
  return values;
}

ContractionReport contraction_check(const std::vector<std::vector<double>>& runs, double bound, double floor) {
  ContractionReport rep;
  rep.bound = bound;
  rep.seeds = runs.size();
  if (runs.empty()) return rep;
  std::size_t length = runs.front().size();
  for (const auto& r : runs) length = std::min(length, r.size());
  if (length == 0) return rep;
  if (std::all_of(runs.begin(), runs.end(), [](const auto& r) { return r[0] == 0.0; })) {
    rep.converged_at_start = true;
    return rep;
  }

  const double k = static_cast<double>(runs.size());
  std::size_t t = 0;
  for (; t + 1 < length; ++t) {
    bool defined = true;
    for (const auto& r : runs)
      if (!(r[t] > floor * r[0])) defined = false;
    if (!defined) break;
    double mean = 0.0;
    std::vector<double> ratios;
    ratios.reserve(runs.size());
    for (const auto& r : runs) ratios.push_back(r[t + 1] / r[t]);
    for (double v : ratios) mean += v;
    mean /= k;
    double var = 0.0;
    for (double v : ratios) var += (v - mean) * (v - mean);
    const double se = runs.size() > 1 ? std::sqrt(var / (k - 1.0) / k) : 0.0;
    rep.mean_ratio.push_back(mean);
    rep.standard_error.push_back(se);
    if (mean > bound + 3.0 * se) ++rep.exceedances;
  }
  rep.evaluated = t;
  if (rep.evaluated > 0) rep.exceed_fraction = static_cast<double>(rep.exceedances) / static_cast<double>(t);

  // log of the seed-averaged value over the evaluated window
  const std::size_t points = rep.evaluated + 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t s = 0; s < points; ++s) {
    double avg = 0.0;
    for (const auto& r : runs) avg += r[s];
    avg /= k;
    const double x = static_cast<double>(s), y = std::log(avg);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double np = static_cast<double>(points);
  const double denom = np * sxx - sx * sx;
  rep.fitted_slope = denom > 0.0 ? (np * sxy - sx * sy) / denom : 0.0;
  rep.fitted_ratio = std::exp(rep.fitted_slope);
  return rep;
}

void ContractionReport::write_csv(std::ostream& out) const {
  out << "t,mean_ratio,standard_error,bound,exceeds\n";
  for (std::size_t t = 0; t < mean_ratio.size(); ++t) {
    const bool over = mean_ratio[t] > bound + 3.0 * standard_error[t];
    out << t << ',' << mean_ratio[t] << ',' << standard_error[t] << ',' << bound << ',' << (over ? 1 : 0)
        << '\n';
  }
}

}  // namespace hippo

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "hippo/activation.hpp"
#include "hippo/graph.hpp"
#include "hippo/model.hpp"
#include "hippo/protocol.hpp"

namespace hippo {

/// l(x) = sum_i f_i(x) + g(x), aggregated into one quadratic.
struct GlobalObjective {
  Mat hessian;      // sum_i (A_i^T A_i + rho I)
  Vec linear;       // sum_i A_i^T b_i
  double constant;  // sum_i |b_i|^2 / 2
  Regularizer regularizer;

  GlobalObjective(std::span<const LocalObjective> objectives, Regularizer reg);

  double smooth_value(const Vec& x) const { return 0.5 * x.dot(hessian * x) - linear.dot(x) + constant; }
  double value(const Vec& x) const { return smooth_value(x) + regularizer.value(x); }
  Vec gradient(const Vec& x) const { return hessian * x - linear; }
  /// l(x) - l(x_ref) expanded around x_ref (no cancellation in the smooth part).
  double gap(const Vec& x, const Vec& x_ref) const;
};

struct OracleSolution {
  Vec x;
  double value = 0.0;
  /// |x - prox_{g/L}(x - grad/L)| at the returned point.
  double residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Accelerated proximal gradient on the centralized problem, followed by an
/// exact solve on the detected active set when that lowers the residual.
OracleSolution solve_centralized(std::span<const LocalObjective> objectives, const Regularizer& reg,
                                 double tol = 1e-12, std::size_t max_iterations = 1000000);

/// v_alpha = [x; z; alpha; theta; lambda], blockwise.
struct AnalysisTuple {
  std::vector<Vec> x;      // m blocks
  std::vector<Vec> z;      // n blocks
  std::vector<Vec> alpha;  // n blocks
  Vec theta;
  Vec lambda;
};

/// Builds the tuple from the protocol state and tracked edge duals; z = E_u x / 2.
AnalysisTuple lift_state(const NetworkState& state, const std::vector<Vec>& alpha,
                         const Topology& topology);

/// E_s^T alpha, per agent.
std::vector<Vec> signed_transpose_apply(const std::vector<Vec>& alpha, const Topology& topology,
                                        Eigen::Index dim);

/// Saddle point: x_i = z_k = theta = x*, and (alpha*, lambda*) the minimum-norm
/// solution of E_s^T alpha + S lambda = -grad F(x*).
AnalysisTuple star_tuple(const Vec& x_star, std::span<const LocalObjective> objectives,
                         const Topology& topology, std::size_t selector);

struct KktResiduals {
  double stationarity = 0.0;  // |grad F(x) + E_s^T alpha + S lambda|
  double consensus = 0.0;     // |E_s x|
  double edge = 0.0;          // |E_u x - 2 z|
  double selector = 0.0;      // |S^T x - theta|
  double subgradient = 0.0;   // dist(lambda, dg(theta))

  double max() const;
};

KktResiduals kkt_residuals(const AnalysisTuple& tuple, std::span<const LocalObjective> objectives,
                           const Topology& topology, std::size_t selector, const Regularizer& reg);
/// Same residuals on the protocol state (phi stands in for E_s^T alpha, z is implicit).
KktResiduals kkt_residuals(const NetworkState& state, std::span<const LocalObjective> objectives,
                           const Topology& topology, std::size_t selector, const Regularizer& reg);

/// |E_s x| computed per edge.
double consensus_residual(const std::vector<Vec>& x, const Topology& topology);

struct TheoremConstants {
  double eta = 0.0;
  /// The five candidates of the min, in order; the epsilon term is +inf when dropped.
  std::array<double, 5> terms{};
  bool epsilon_term_dropped = false;
  /// Weights on (x, z, alpha, theta, lambda).
  std::array<double, 5> scaling{};

  /// 1 - p_min eta / (1 + eta).
  double rate(double p_min) const { return 1.0 - p_min * eta / (1.0 + eta); }
};

TheoremConstants theoretical_eta(const ConvexityConstants& consts, const SpectralConstants& spectral,
                                 const HyperParams& hp);

/// Scaled squared distance to the saddle point, each block divided by its
/// activation probability.
double lyapunov(const AnalysisTuple& tuple, const AnalysisTuple& star, const TheoremConstants& constants,
                const ExpectedActivation& probabilities, const Topology& topology, std::size_t selector);

/// One application of the operator T to the analysis tuple (three-block form:
/// the x-step sees z through mu_z (D x - E_u^T z)).
AnalysisTuple apply_operator(const AnalysisTuple& tuple, const Problem& problem,
                             const ModeAssignment& modes, std::uint64_t t);

/// v <- v + Omega (T v - v): only the activated agent/edge blocks take T's value.
void masked_update(AnalysisTuple& tuple, const AnalysisTuple& image, const std::vector<char>& agent_mask,
                   const std::vector<char>& edge_mask, std::size_t selector);

/// Per-agent norm of the identity relating two consecutive synchronous
/// iterates to the saddle point (zero along exact trajectories).
std::vector<double> saddle_identity_residual(const AnalysisTuple& prev, const AnalysisTuple& next,
                                             const AnalysisTuple& star, const Problem& problem,
                                             const ModeAssignment& modes, std::uint64_t t);

/// Which dynamics the Lyapunov trajectories follow.
///   Operator: masked operator updates on the analysis tuple with edge
///             activation induced from the sampled agents.
///   Protocol: the agent protocol, with edge duals tracked on induced edges.
enum class ContractionProcess { Operator, Protocol };

std::vector<double> lyapunov_trajectory(const Problem& problem, const ModeAssignment& modes,
                                        const ActivationScheme& scheme, const AnalysisTuple& star,
                                        const TheoremConstants& constants, std::size_t iterations,
                                        ContractionProcess process);

struct ContractionReport {
  bool converged_at_start = false;
  double bound = 0.0;
  std::size_t seeds = 0;
  /// Number of iterations with a defined ratio for every seed.
  std::size_t evaluated = 0;
  std::vector<double> mean_ratio;
  std::vector<double> standard_error;
  std::size_t exceedances = 0;
  double exceed_fraction = 0.0;
  /// Least-squares slope of log(mean Lyapunov) against t, and exp(slope).
  double fitted_slope = 0.0;
  double fitted_ratio = 0.0;

  void write_csv(std::ostream& out) const;
};

/// `runs[s][t]` is the Lyapunov value of seed s after t iterations. Ratios are
/// evaluated while every seed stays above `floor` times its starting value.
ContractionReport contraction_check(const std::vector<std::vector<double>>& runs, double bound,
                                    double floor = 1e-20);

}  // namespace hippo

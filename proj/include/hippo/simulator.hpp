#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hippo/activation.hpp"
#include "hippo/analysis.hpp"
#include "hippo/protocol.hpp"

namespace hippo {

/// Flop and communication units. These are artifact conventions, not measurements.
struct CostModel {
  static double gradient_step(std::size_t rows, std::size_t dim, std::size_t degree);
  /// Extra cost of a Newton step: Hessian assembly (first call only) plus a Cholesky solve.
  static double newton_extra(std::size_t rows, std::size_t dim, bool first_call);
  static double broadcast(std::size_t dim, std::size_t degree);
};

struct CostLedger {
  std::vector<double> flops;
  std::vector<double> messages;
  std::vector<char> hessian_cached;
  double total_flops = 0.0;
  double total_messages = 0.0;

  explicit CostLedger(std::size_t agents = 0);
  /// Charges one primal step plus its broadcast; returns (flops, messages) added.
  std::pair<double, double> charge(std::size_t agent, UpdateMode mode, std::size_t rows, std::size_t dim,
                                   std::size_t degree);
};

struct TraceRow {
  std::uint64_t t = 0;
  std::size_t active_count = 0;
  /// NaN until normalized in deferred mode.
  double rel_loss = 0.0;
  /// mean_i l(x_i), kept for deferred normalization.
  double mean_loss = 0.0;
  double consensus_res = 0.0;
  double reg_res = 0.0;
  std::optional<double> lyapunov;
  double comm_cost = 0.0;
  double comp_cost = 0.0;
};

struct AuditViolation {
  std::uint64_t t = 0;
  std::size_t agent = 0;
  double error = 0.0;
  double bound = 0.0;
};

/// |e_i| against Pi_ii |x_i^{t+1} - x_i^t| for every step taken.
struct ErrorAudit {
  std::size_t steps = 0;
  double max_excess = -1.0;        // max(|e| - bound) over steps
  double max_newton_error = 0.0;   // max |e| over Newton steps
  std::size_t violations = 0;
  std::vector<AuditViolation> first_violations;  // at most 16 kept

  bool passed(double slack = 1e-12) const { return violations == 0 && max_excess <= slack; }
};

/// Lyapunov tracking during a run. Edge duals are accumulated on the induced edges.
struct LyapunovSetup {
  AnalysisTuple star;
  TheoremConstants constants;
  ExpectedActivation probabilities;
};

struct RunConfig {
  const Topology* topology = nullptr;
  std::span<const LocalObjective> objectives;
  Regularizer regularizer;
  HyperParams hyper;
  ActivationScheme activation;
  ModeAssignment modes;
  std::size_t iterations = 1000;
  /// Stop once the relative loss is at or below this (ignored in deferred mode).
  double tolerance = 1e-10;
  std::size_t trace_every = 1;
  Freshness freshness = Freshness::Fresh;
  unsigned threads = 1;
  /// Centralized optimum; without it the run records raw losses only (deferred mode).
  std::optional<Vec> optimum;
  bool audit = true;
  ConvexityConstants constants;
  std::optional<LyapunovSetup> lyapunov;
  double divergence_threshold = 1e6;
};

struct Trace {
  std::vector<TraceRow> rows;
  NetworkState final_state;
  CostLedger ledger;
  ErrorAudit audit;
  std::size_t iterations_run = 0;
  bool stopped_early = false;
  std::optional<std::uint64_t> diverged_at;
  bool normalized = false;
};

/// Runs the protocol from x^0 = 0 (already broadcast). Deterministic per seed.
Trace run(const RunConfig& config);

/// Deferred normalization with the optimal value l*.
void normalize_trace(Trace& trace, double optimal_value);

/// Header: t,active_count,rel_loss,consensus_res,reg_res,lyapunov,comm_cost,comp_cost
void write_trace_csv(std::ostream& out, const Trace& trace);

/// Shortest round-trip decimal form (empty for NaN is left to the caller).
std::string format_number(double v);

}  // namespace hippo

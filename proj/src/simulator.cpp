#include "hippo/simulator.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

namespace hippo {

double CostModel::gradient_step(std::size_t rows, std::size_t dim, std::size_t degree) {
  const double n = static_cast<double>(rows), d = static_cast<double>(dim);
  return 2.0 * n * d + 4.0 * d * (1.0 + static_cast<double>(degree));
}

double CostModel::newton_extra(std::size_t rows, std::size_t dim, bool first_call) {
  const double n = static_cast<double>(rows), d = static_cast<double>(dim);
  return (first_call ? n * d * d : 0.0) + d * d * d / 3.0;
}

double CostModel::broadcast(std::size_t dim, std::size_t degree) {
  return static_cast<double>(dim) * static_cast<double>(degree);
}

CostLedger::CostLedger(std::size_t agents) : flops(agents, 0.0), messages(agents, 0.0), hessian_cached(agents, 0) {}

std::pair<double, double> CostLedger::charge(std::size_t agent, UpdateMode mode, std::size_t rows,
                                             std::size_t dim, std::size_t degree) {
  double f = CostModel::gradient_step(rows, dim, degree);
  if (mode == UpdateMode::Newton) {
    f += CostModel::newton_extra(rows, dim, !hessian_cached[agent]);
    hessian_cached[agent] = 1;
  }
  const double c = CostModel::broadcast(dim, degree);
  flops[agent] += f;
  messages[agent] += c;
  total_flops += f;
  total_messages += c;
  return {f, c};
}

namespace {

double mean_loss(const std::vector<Vec>& x, const GlobalObjective& g) {
  double s = 0.0;
  for (const auto& xi : x) s += g.value(xi);
  return s / static_cast<double>(x.size());
}

double mean_gap(const std::vector<Vec>& x, const GlobalObjective& g, const Vec& x_star) {
  double s = 0.0;
  for (const auto& xi : x) s += g.gap(xi, x_star);
  return s / static_cast<double>(x.size());
}

bool finite_state(const NetworkState& s) {
  for (const auto& xi : s.x)
    if (!xi.allFinite()) return false;
  return s.lambda.allFinite() && s.theta.allFinite();
}

}  // namespace

Trace run(const RunConfig& cfg) {
  if (cfg.topology == nullptr) throw ConfigError("run: no topology");
  const auto& topo = *cfg.topology;
  if (cfg.objectives.size() != topo.agents()) throw ConfigError("run: one objective per agent is required");
  cfg.hyper.validate(topo.agents());
  cfg.activation.validate(topo.agents());
  if (cfg.modes.agents() != topo.agents()) throw ConfigError("run: mode assignment does not match agent count");
  const std::size_t every = std::max<std::size_t>(1, cfg.trace_every);

  const Problem problem{cfg.topology, cfg.objectives, cfg.regularizer, cfg.hyper};
  const GlobalObjective global(cfg.objectives, cfg.regularizer);
  const auto d = problem.dim();
  const std::size_t l = cfg.hyper.selector;
  const Activator activator(cfg.activation, topo);

  Trace trace;
  trace.ledger = CostLedger(topo.agents());
  auto& state = trace.final_state;
  state = NetworkState::zeros(topo, d);
  std::vector<Vec> alpha(topo.edge_count(), Vec::Zero(d));

  const bool deferred = !cfg.optimum.has_value();
  const double gap0 = deferred ? 0.0 : mean_gap(state.x, global, *cfg.optimum);

  auto record = [&](std::uint64_t t, std::size_t active) {
    TraceRow row;
    row.t = t;
    row.active_count = active;
    row.mean_loss = mean_loss(state.x, global);
    if (deferred) {
      row.rel_loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.rel_loss = gap0 > 0.0 ? mean_gap(state.x, global, *cfg.optimum) / gap0 : 0.0;
      if (t == 0) row.rel_loss = 1.0;
    }
    row.consensus_res = consensus_residual(state.x, topo);
    row.reg_res = (state.x[l] - state.theta).norm();
    if (cfg.lyapunov) {
      const auto tuple = lift_state(state, alpha, topo);
      row.lyapunov = lyapunov(tuple, cfg.lyapunov->star, cfg.lyapunov->constants, cfg.lyapunov->probabilities,
                              topo, l);
    }
    row.comm_cost = trace.ledger.total_messages;
    row.comp_cost = trace.ledger.total_flops;
    trace.rows.push_back(row);
    return row.rel_loss;
  };

  record(0, 0);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const auto rec = activator.sample(t);
    const auto steps = protocol_iteration(state, problem, rec.agents, cfg.modes, t, cfg.freshness, cfg.threads);

    for (const auto& s : steps) {
      trace.ledger.charge(s.agent, s.mode, static_cast<std::size_t>(problem.objective(s.agent).rows()),
                          static_cast<std::size_t>(d), topo.degree(s.agent));
      if (!cfg.audit) continue;
      const auto err = error_term(s.x_prev, s.x_next, s.mode, problem.objective(s.agent), cfg.constants);
      const double en = err.e.norm();
      auto& audit = trace.audit;
      ++audit.steps;
      audit.max_excess = std::max(audit.max_excess, en - err.bound);
      if (s.mode == UpdateMode::Newton) audit.max_newton_error = std::max(audit.max_newton_error, en);
      if (en > err.bound + 1e-12) {
        ++audit.violations;
        if (audit.first_violations.size() < 16) audit.first_violations.push_back({t, s.agent, en, err.bound});
      }
    }
    if (cfg.lyapunov) {
      for (std::size_t k = 0; k < topo.edge_count(); ++k) {
        if (!rec.edge_mask[k]) continue;
        const auto& e = topo.edge(k);
        alpha[k] += 0.5 * cfg.hyper.mu_z * (state.x[e.source] - state.x[e.destination]);
      }
    }
    trace.iterations_run = t + 1;

    const bool finite = finite_state(state);
    const bool last = t + 1 == cfg.iterations;
    double rel = std::numeric_limits<double>::quiet_NaN();
    const bool need_loss = !deferred || (t + 1) % every == 0 || last || !finite;
    if (need_loss) {
      const double gap = deferred ? 0.0 : mean_gap(state.x, global, *cfg.optimum);
      rel = deferred ? rel : (gap0 > 0.0 ? gap / gap0 : 0.0);
    }
    const bool diverged = !finite || (std::isfinite(rel) && rel > cfg.divergence_threshold);
    const bool converged = !deferred && rel <= cfg.tolerance;
    if ((t + 1) % every == 0 || last || diverged || converged) record(t + 1, rec.agents.size());
    if (diverged) {
      trace.diverged_at = t + 1;
      break;
    }
    if (converged) {
      trace.stopped_early = !last;
      break;
    }
  }
  trace.normalized = !deferred;
  return trace;
}

void normalize_trace(Trace& trace, double optimal_value) {
  if (trace.rows.empty()) return;
  const double base = trace.rows.front().mean_loss - optimal_value;
  for (auto& r : trace.rows) r.rel_loss = base > 0.0 ? (r.mean_loss - optimal_value) / base : 0.0;
  trace.rows.front().rel_loss = 1.0;
  trace.normalized = true;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "t,active_count,rel_loss,consensus_res,reg_res,lyapunov,comm_cost,comp_cost\n";
  for (const auto& r : trace.rows) {
    out << r.t << ',' << r.active_count << ',' << format_number(r.rel_loss) << ',' << format_number(r.consensus_res)
        << ',' << format_number(r.reg_res) << ',' << (r.lyapunov ? format_number(*r.lyapunov) : std::string())
        << ',' << format_number(r.comm_cost) << ',' << format_number(r.comp_cost) << '\n';
  }
}

}  // namespace hippo

#include "hippo/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "hippo/data.hpp"
#include "hippo/plot.hpp"
#include "hippo/reference.hpp"

namespace hippo {
namespace fs = std::filesystem;

namespace {

Topology make_topology(const ExperimentConfig& cfg) {
  const auto& g = cfg.graph;
  if (g.kind == "path") return Topology::path(g.agents);
  if (g.kind == "complete") return Topology::complete(g.agents);
  if (g.kind == "file") {
    std::ifstream in(g.path);
    if (!in) throw DataError("cannot open edge list " + g.path);
    return read_edge_list(in);
  }
  return generate_connected_gnp(g.agents, g.probability, g.seed);
}

std::vector<AgentData> make_agent_data(const ExperimentConfig& cfg, std::size_t agents, std::string& note) {
  const auto& d = cfg.data;
  if (d.source == "libsvm") {
    Dataset ds = read_libsvm_file(d.path, d.declared_dim);
    if (d.normalize) ds = standardize(ds);
    note = "libsvm " + d.path + " (" + std::to_string(ds.rows.size()) + " rows, d = " + std::to_string(ds.dim) + ")";
    if (ds.rows.size() < agents) throw DataError("dataset has fewer rows than agents");
    return partition_even(ds, agents, d.shuffle_seed);
  }
  if (d.rows < agents) throw DataError("data.rows is smaller than the number of agents");
  const auto inst = synth_least_squares(1, d.dim, d.rows, d.noise, d.seed, d.condition);
  const auto& all = inst.agents.front();
  note = "synthetic (" + std::to_string(d.rows) + " rows, d = " + std::to_string(d.dim) + ")";
  std::vector<AgentData> parts;
  for (const auto& ids : partition_rows(d.rows, agents, d.shuffle_seed)) {
    AgentData ad{Mat(static_cast<Eigen::Index>(ids.size()), all.a.cols()), Vec(static_cast<Eigen::Index>(ids.size()))};
    for (std::size_t r = 0; r < ids.size(); ++r) {
      ad.a.row(static_cast<Eigen::Index>(r)) = all.a.row(static_cast<Eigen::Index>(ids[r]));
      ad.b(static_cast<Eigen::Index>(r)) = all.b(static_cast<Eigen::Index>(ids[r]));
    }
    parts.push_back(std::move(ad));
  }
  return parts;
}

Regularizer make_regularizer(const ExperimentConfig& cfg, std::span<const LocalObjective> objs) {
  const auto& p = cfg.problem;
  if (p.regularizer == "zero") return Regularizer::zero();
  if (p.regularizer == "box") return Regularizer::box(p.lower, p.upper);
  return Regularizer::l1(p.gamma ? *p.gamma : default_l1_weight(objs));
}

std::string label_for(double q, double fraction, bool sweep_fraction, bool explicit_agents) {
  std::string s = explicit_agents ? "HIPPO-custom" : "HIPPO-" + std::to_string(static_cast<int>(std::lround(q * 100)));
  if (sweep_fraction) s += ", C=" + format_number(fraction);
  return s;
}

ModeAssignment make_modes(const ExperimentConfig& cfg, std::size_t agents, double q, std::uint64_t seed) {
  if (cfg.run.explicit_agents && cfg.sweep.newton_fractions.empty())
    return ModeAssignment::newton_agents(agents, cfg.run.newton_agents);
  return ModeAssignment::newton_fraction(agents, q, seed);
}

double fit_log_slope(const std::vector<std::uint64_t>& t, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(y[k] > 0.0) || !std::isfinite(y[k])) continue;
    const double x = static_cast<double>(t[k]), v = std::log(y[k]);
    sx += x, sy += v, sxx += x * x, sxy += x * v, n += 1;
  }
  const double den = n * sxx - sx * sx;
  return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string sci(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  Topology topo = make_topology(cfg);
  std::string note;
  auto parts = make_agent_data(cfg, topo.agents(), note);
  auto objs = make_objectives(parts, cfg.data.ridge);
  HyperParams hp = cfg.hyper;
  hp.validate(topo.agents());
  for (auto a : cfg.run.newton_agents)
    if (a >= topo.agents()) throw ConfigError("run.newton_agents: agent " + std::to_string(a + 1) + " does not exist");
  const auto constants = estimate_constants(objs);
  const auto reg = make_regularizer(cfg, objs);
  const auto spectral = spectral_constants(build_incidence(topo), hp.selector);
  auto oracle = solve_centralized(objs, reg, 1e-12);
  return BuiltProblem{std::move(topo), std::move(objs), reg, hp, constants, spectral, std::move(oracle), note};
}

AggregateCurve aggregate(const SweepPoint& point, const std::vector<const SweepRun*>& runs) {
  AggregateCurve c;
  c.point = point;
  if (runs.empty()) return c;
  for (const auto* r : runs) c.sources.push_back(r->file);
  const double k = static_cast<double>(runs.size());
  for (std::size_t row = 0;; ++row) {
    bool ok = true;
    for (const auto* r : runs)
      if (row >= r->trace.rows.size() || r->trace.rows[row].t != runs.front()->trace.rows[row].t) ok = false;
    if (!ok) break;
    double rel = 0, comm = 0, comp = 0;
    for (const auto* r : runs) {
      rel += r->trace.rows[row].rel_loss;
      comm += r->trace.rows[row].comm_cost;
      comp += r->trace.rows[row].comp_cost;
    }
    c.t.push_back(runs.front()->trace.rows[row].t);
    c.rel_loss.push_back(rel / k);
    c.comm_cost.push_back(comm / k);
    c.comp_cost.push_back(comp / k);
  }
  c.fitted_ratio = std::exp(fit_log_slope(c.t, c.rel_loss));
  return c;
}

std::vector<std::optional<double>> threshold_crossings(const std::vector<double>& x, const std::vector<double>& y,
                                                       const std::vector<double>& thresholds) {
  std::vector<std::optional<double>> out;
  for (double th : thresholds) {
    std::optional<double> hit;
    for (std::size_t k = 0; k < std::min(x.size(), y.size()); ++k)
      if (y[k] <= th) {
        hit = x[k];
        break;
      }
    out.push_back(hit);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& bp, const std::string& out_dir,
                                unsigned threads) {
  ExperimentResult res;
  const std::size_t m = bp.topology.agents();
  const bool sweep_c = !cfg.sweep.fractions.empty();
  const auto qs = cfg.sweep.newton_fractions.empty() ? std::vector<double>{cfg.run.newton_fraction}
                                                     : cfg.sweep.newton_fractions;
  const auto cs = sweep_c ? cfg.sweep.fractions : std::vector<double>{cfg.activation.fraction};
  const bool seeded = !cfg.sweep.seeds.empty();
  const auto seeds = seeded ? cfg.sweep.seeds : std::vector<std::uint64_t>{cfg.activation.seed};
  const bool explicit_agents = cfg.run.explicit_agents && cfg.sweep.newton_fractions.empty();
  for (double c : cs)
    for (double q : qs) res.points.push_back({q, c, label_for(q, c, sweep_c, explicit_agents)});

  try {
    res.theorem = theoretical_eta(bp.constants, bp.spectral, bp.hyper);
    if (res.theorem->epsilon_term_dropped) res.theorem_note = "epsilon = 0: the mu_theta sigma+ / (5 epsilon) term was dropped";
  } catch (const ConfigError& e) {
    res.theorem_note = e.what();
  }

  struct Job {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < res.points.size(); ++p)
    for (auto s : seeds) jobs.push_back({p, s});
  res.runs.resize(jobs.size());

  auto work = [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& pt = res.points[job.point];
    RunConfig rc;
    rc.topology = &bp.topology;
    rc.objectives = bp.objectives;
    rc.regularizer = bp.regularizer;
    rc.hyper = bp.hyper;
    rc.activation = make_activation(cfg, pt.fraction, job.seed);
    rc.modes = make_modes(cfg, m, pt.q, seeded ? job.seed : cfg.run.mode_seed);
    rc.iterations = cfg.run.iterations;
    rc.tolerance = cfg.run.tolerance;
    rc.trace_every = cfg.run.trace_every;
    rc.freshness = cfg.freshness;
    rc.threads = cfg.run.agent_threads;
    rc.constants = bp.constants;
    if (!cfg.run.deferred) rc.optimum = bp.oracle.x;
    if (cfg.run.lyapunov && res.theorem)
      rc.lyapunov = LyapunovSetup{star_tuple(bp.oracle.x, bp.objectives, bp.topology, bp.hyper.selector), *res.theorem,
                                  expected_activation(rc.activation, bp.topology)};
    auto& out = res.runs[j];
    out.point = pt;
    out.point_index = job.point;
    out.seed = job.seed;
    out.trace = run(rc);
    if (cfg.run.deferred) normalize_trace(out.trace, bp.oracle.value);
    out.file = "traces/q" + format_number(pt.q) + "_C" + format_number(pt.fraction) + "_seed" +
               std::to_string(job.seed) + ".csv";
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) work(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          try {
            work(j);
          } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // join barrier passed: aggregate and write everything in a fixed order
  for (std::size_t p = 0; p < res.points.size(); ++p) {
    std::vector<const SweepRun*> group;
    for (const auto& r : res.runs)
      if (r.point_index == p) group.push_back(&r);
    res.curves.push_back(aggregate(res.points[p], group));
  }
  for (const auto& r : res.runs) res.diverged = res.diverged || r.trace.diverged_at.has_value();

  const fs::path dir(out_dir);
  fs::create_directories(dir / "traces");
  for (const auto& r : res.runs) {
    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    write_file(dir / r.file, csv.str());
    res.files.push_back(r.file);
  }

  std::ostringstream agg;
  agg << "label,q,C,t,rel_loss,comm_cost,comp_cost,seeds\n";
  for (const auto& c : res.curves)
    for (std::size_t k = 0; k < c.t.size(); ++k)
      agg << '"' << c.point.label << "\"," << format_number(c.point.q) << ',' << format_number(c.point.fraction) << ','
          << c.t[k] << ',' << format_number(c.rel_loss[k]) << ',' << format_number(c.comm_cost[k]) << ','
          << format_number(c.comp_cost[k]) << ',' << c.sources.size() << '\n';
  write_file(dir / "aggregate.csv", agg.str());
  res.files.push_back("aggregate.csv");

  if (cfg.output.plots) {
    std::vector<Series> by_round, by_cost;
    for (const auto& c : res.curves) {
      Series a{c.point.label, {}, c.rel_loss}, b{c.point.label, c.comp_cost, c.rel_loss};
      for (auto t : c.t) a.x.push_back(static_cast<double>(t));
      by_round.push_back(std::move(a));
      by_cost.push_back(std::move(b));
    }
    std::ostringstream s1, s2;
    write_svg(s1, {"Relative loss vs communication rounds", "communication rounds", "relative loss"}, by_round);
    write_svg(s2, {"Relative loss vs computation cost", "computation cost (flop units)", "relative loss"}, by_cost);
    write_file(dir / "rel_loss_vs_rounds.svg", s1.str());
    write_file(dir / "rel_loss_vs_cost.svg", s2.str());
    res.files.push_back("rel_loss_vs_rounds.svg");
    res.files.push_back("rel_loss_vs_cost.svg");
  }

  const std::vector<double> decades{1e-1, 1e-2, 1e-3, 1e-4};
  std::ostringstream sum;
  sum << "agents " << m << ", edges " << bp.topology.edge_count() << ", d " << bp.objectives.front().dim() << '\n';
  sum << "data " << bp.data_note << '\n';
  sum << "m_f " << sci(bp.constants.m_f) << ", M_f " << sci(bp.constants.M_f) << ", L_f " << sci(bp.constants.L_f) << '\n';
  sum << "sigma_max(L_u) " << sci(bp.spectral.sigma_max_lu) << ", sigma_min+ " << sci(bp.spectral.sigma_min_plus) << '\n';
  sum << "oracle l(x*) " << format_number(bp.oracle.value) << ", residual " << sci(bp.oracle.residual) << '\n';
  if (res.theorem) sum << "eta " << sci(res.theorem->eta) << '\n';
  else sum << "eta n/a (" << res.theorem_note << ")\n";
  if (!res.theorem_note.empty() && res.theorem) sum << "note " << res.theorem_note << '\n';
  for (std::size_t p = 0; p < res.curves.size(); ++p) {
    const auto& c = res.curves[p];
    const auto scheme = make_activation(cfg, c.point.fraction, seeds.front());
    const double pmin = expected_activation(scheme, bp.topology).p_min;
    if (p == 0) res.p_min = pmin;
    sum << '\n' << c.point.label << " (q " << format_number(c.point.q) << ", C " << format_number(c.point.fraction)
        << ", " << c.sources.size() << " seeds)\n";
    sum << "  p_min " << sci(pmin);
    if (res.theorem) sum << ", theoretical Lyapunov rate " << format_number(res.theorem->rate(pmin));
    sum << ", observed fitted rate " << format_number(c.fitted_ratio) << '\n';
    if (!c.rel_loss.empty()) sum << "  final rel_loss " << sci(c.rel_loss.back()) << " at t " << c.t.back() << '\n';
    std::vector<double> tx;
    for (auto t : c.t) tx.push_back(static_cast<double>(t));
    const auto rounds = threshold_crossings(tx, c.rel_loss, decades);
    const auto costs = threshold_crossings(c.comp_cost, c.rel_loss, decades);
    for (std::size_t k = 0; k < decades.size(); ++k)
      sum << "  reaches " << sci(decades[k]) << ": rounds " << (rounds[k] ? format_number(*rounds[k]) : "never")
          << ", cost " << (costs[k] ? format_number(*costs[k]) : "never") << '\n';
  }
  for (const auto& r : res.runs)
    if (r.trace.diverged_at)
      sum << "\ndiverged: " << r.file << " at t " << *r.trace.diverged_at << '\n';
  write_file(dir / "summary.txt", sum.str());
  res.files.push_back("summary.txt");

  std::ostringstream meta;
  meta << describe(cfg);
  meta << "seeds = ";
  for (std::size_t k = 0; k < seeds.size(); ++k) meta << (k ? "," : "") << seeds[k];
  meta << "\nconstants.m_f = " << format_number(bp.constants.m_f) << "\nconstants.M_f = " << format_number(bp.constants.M_f)
       << "\nconstants.L_f = " << format_number(bp.constants.L_f)
       << "\nspectral.sigma_max_lu = " << format_number(bp.spectral.sigma_max_lu)
       << "\nspectral.sigma_min_plus = " << format_number(bp.spectral.sigma_min_plus)
       << "\nregularizer = " << to_string(bp.regularizer.kind) << "\nregularizer.weight = " << format_number(bp.regularizer.weight)
       << "\noracle.value = " << format_number(bp.oracle.value) << "\noracle.residual = " << format_number(bp.oracle.residual)
       << "\neta = " << (res.theorem ? format_number(res.theorem->eta) : std::string("n/a")) << '\n';
  meta << "cost.gradient_step = 2*n_i*d + 4*d*(1+|N_i|)\n"
          "cost.newton_extra = n_i*d^2 (first call, Hessian cached after) + d^3/3\n"
          "cost.broadcast = d per neighbor\n"
          "cost.note = flop and message units are conventions of this simulator, not measurements\n";
  write_file(dir / "metadata.txt", meta.str());
  res.files.push_back("metadata.txt");
  return res;
}

bool VerifyReport::passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

VerifyReport verify(const ExperimentConfig& cfg, const BuiltProblem& bp) {
  const auto& topo = bp.topology;
  const std::size_t m = topo.agents();
  const auto d = bp.objectives.front().dim();
  if (m > 6 || d > 4) throw ConfigError("verify: desk-scale configs only (at most 6 agents and d <= 4)");
  const std::size_t l = bp.hyper.selector;
  const Problem pb{&bp.topology, bp.objectives, bp.regularizer, bp.hyper};
  const auto modes = make_modes(cfg, m, cfg.run.newton_fraction, cfg.run.mode_seed);
  VerifyReport rep;

  {  // reduced engine against the lifted 3-block ADMM
    auto ref = AdmmReferenceState::zeros(m, topo.edge_count(), d);
    const LiftedOperators ops(topo, l, d);
    auto st = NetworkState::zeros(topo, d);
    double dev = 0, ab = 0, zres = 0, phi = 0;
    std::size_t worst_t = 0;
    for (std::size_t t = 0; t < cfg.verify.iterations; ++t) {
      admm_reference_step(ref, ops, pb, modes, t);
      synchronous_step(st, pb, modes, t);
      double step_dev = std::max((ref.theta - st.theta).lpNorm<Eigen::Infinity>(),
                                 (ref.lambda - st.lambda).lpNorm<Eigen::Infinity>());
      for (std::size_t i = 0; i < m; ++i) {
        step_dev = std::max(step_dev, (ref.block_x(i, d) - st.x[i]).lpNorm<Eigen::Infinity>());
        const Vec phi_ref = (ops.es.transpose() * ref.alpha).segment(static_cast<Eigen::Index>(i) * d, d);
        phi = std::max(phi, (phi_ref - st.phi[i]).lpNorm<Eigen::Infinity>());
      }
      if (step_dev > dev) dev = step_dev, worst_t = t + 1;
      ab = std::max(ab, (ref.alpha + ref.beta).lpNorm<Eigen::Infinity>());
      zres = std::max(zres, (ref.z - 0.5 * ops.eu * ref.x).lpNorm<Eigen::Infinity>());
    }
    std::ostringstream o;
    o << "max (x, theta, lambda) deviation " << sci(dev) << " (t " << worst_t << "), |alpha + beta| " << sci(ab)
      << ", |z - E_u x / 2| " << sci(zres) << ", |E_s^T alpha - phi| " << sci(phi) << " over "
      << cfg.verify.iterations << " iterations";
    rep.checks.push_back({"engine equivalence", dev <= 1e-10 && ab <= 1e-12 && zres <= 1e-12 && phi <= 1e-10, o.str()});
  }

  {  // error bound audit, synchronous and with the configured activation
    std::ostringstream o;
    bool ok = true;
    for (int pass = 0; pass < 2; ++pass) {
      RunConfig rc;
      rc.topology = &topo;
      rc.objectives = bp.objectives;
      rc.regularizer = bp.regularizer;
      rc.hyper = bp.hyper;
      rc.activation = pass == 0 ? ActivationScheme::synchronous() : make_activation(cfg, cfg.activation.fraction, cfg.activation.seed);
      rc.modes = modes;
      rc.iterations = cfg.verify.iterations;
      rc.tolerance = 0.0;
      rc.freshness = cfg.freshness;
      rc.optimum = bp.oracle.x;
      rc.constants = bp.constants;
      const auto tr = run(rc);
      const auto& a = tr.audit;
      const bool good = a.passed() && a.max_newton_error <= 1e-12;
      ok = ok && good;
      o << (pass ? "; " : "") << (pass == 0 ? "synchronous" : "configured activation") << ": " << a.steps
        << " steps, max(|e| - bound) " << sci(a.max_excess) << ", max Newton |e| " << sci(a.max_newton_error);
      for (const auto& v : a.first_violations)
        o << " [t " << v.t << " agent " << v.agent + 1 << " |e| " << sci(v.error) << " > " << sci(v.bound) << "]";
    }
    rep.checks.push_back({"error bound audit", ok, o.str()});
  }

  const auto star = star_tuple(bp.oracle.x, bp.objectives, topo, l);
  {  // optimality and the fixed point
    const auto kkt = kkt_residuals(star, bp.objectives, topo, l, bp.regularizer);
    NetworkState st = NetworkState::zeros(topo, d);
    st.x.assign(m, bp.oracle.x);
    st.phi = signed_transpose_apply(star.alpha, topo, d);
    st.theta = bp.oracle.x;
    st.lambda = star.lambda;
    for (auto& buf : st.buffers)
      for (auto& v : buf) v = bp.oracle.x;
    const NetworkState before = st;
    synchronous_step(st, pb, ModeAssignment::all(m, UpdateMode::Gradient), 0);
    double move = (st.theta - before.theta).norm() + (st.lambda - before.lambda).norm();
    for (std::size_t i = 0; i < m; ++i) move += (st.x[i] - before.x[i]).norm() + (st.phi[i] - before.phi[i]).norm();
    std::ostringstream o;
    o << "oracle residual " << sci(bp.oracle.residual) << ", max KKT residual " << sci(kkt.max())
      << ", one synchronous step from the optimum moves " << sci(move);
    rep.checks.push_back({"KKT at optimum", bp.oracle.residual <= 1e-10 && kkt.max() <= 1e-8 && move <= 1e-10, o.str()});
  }

  {  // expected contraction of the Lyapunov function
    const auto tc = theoretical_eta(bp.constants, bp.spectral, bp.hyper);
    for (int proc = 0; proc < 2; ++proc) {
      Problem p2 = pb;
      if (proc == 1) p2.hyper.dual_scope = DualScope::Edge;
      std::vector<std::vector<double>> runs;
      double bound = 0.0;
      for (std::size_t s = 0; s < cfg.verify.seeds; ++s) {
        const auto scheme = ActivationScheme::single_uniform(cfg.activation.seed + s);
        bound = tc.rate(expected_activation(scheme, topo).p_min);
        runs.push_back(lyapunov_trajectory(p2, modes, scheme, star, tc, cfg.verify.contraction_iterations,
                                           proc == 0 ? ContractionProcess::Operator : ContractionProcess::Protocol));
      }
      const auto r = contraction_check(runs, bound);
      const bool ok = r.converged_at_start || (r.evaluated > 0 && r.exceed_fraction <= 0.05 && r.fitted_slope < 0.0);
      std::ostringstream o;
      o << r.seeds << " seeds, bound " << format_number(bound) << ", " << r.exceedances << " of " << r.evaluated
        << " iterations above bound + 3 SE, fitted ratio " << format_number(r.fitted_ratio);
      if (!ok && topo.edge_count() >= m) o << " (graph has cycles: edge duals keep a cycle-space component)";
      rep.checks.push_back({proc == 0 ? "contraction (operator form)" : "contraction (protocol, edge duals)", ok, o.str()});
    }
  }
  return rep;
}

}  // namespace hippo

#include "hippo/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hippo {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& field, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) throw ConfigError(field + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& field, const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty())
    throw ConfigError(field + ": expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(field + ": expected true or false, got '" + v + "'");
}

std::string one_of(const std::string& field, const std::string& v, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return v;
  std::string msg = field + ": '" + v + "' is not one of";
  for (const char* a : allowed) msg += std::string(" ") + a;
  throw ConfigError(msg);
}

using Setter = std::function<void(ExperimentConfig&, const std::string& field, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto f = [](const std::string& fld, const std::string& v) { return to_double(fld, v); };
    auto u = [](const std::string& fld, const std::string& v) { return to_u64(fld, v); };
    auto dl = [](const std::string& fld, const std::string& v) {
      std::vector<double> out;
      for (const auto& s : split_list(v)) out.push_back(to_double(fld, s));
      return out;
    };
    // data
    t["data.source"] = [](auto& c, auto& k, auto& v) { c.data.source = one_of(k, v, {"synthetic", "libsvm"}); };
    t["data.path"] = [](auto& c, auto&, auto& v) { c.data.path = v; };
    t["data.declared_dim"] = [u](auto& c, auto& k, auto& v) { c.data.declared_dim = u(k, v); };
    t["data.rows"] = [u](auto& c, auto& k, auto& v) { c.data.rows = u(k, v); };
    t["data.dim"] = [u](auto& c, auto& k, auto& v) { c.data.dim = u(k, v); };
    t["data.noise"] = [f](auto& c, auto& k, auto& v) { c.data.noise = f(k, v); };
    t["data.condition"] = [f](auto& c, auto& k, auto& v) { c.data.condition = f(k, v); };
    t["data.seed"] = [u](auto& c, auto& k, auto& v) { c.data.seed = u(k, v); };
    t["data.normalize"] = [](auto& c, auto& k, auto& v) { c.data.normalize = to_bool(k, v); };
    t["data.shuffle_seed"] = [u](auto& c, auto& k, auto& v) { c.data.shuffle_seed = u(k, v); };
    t["data.ridge"] = [f](auto& c, auto& k, auto& v) { c.data.ridge = f(k, v); };
    // graph
    t["graph.kind"] = [](auto& c, auto& k, auto& v) { c.graph.kind = one_of(k, v, {"gnp", "path", "complete", "file"}); };
    t["graph.agents"] = [u](auto& c, auto& k, auto& v) { c.graph.agents = u(k, v); };
    t["graph.probability"] = [f](auto& c, auto& k, auto& v) { c.graph.probability = f(k, v); };
    t["graph.seed"] = [u](auto& c, auto& k, auto& v) { c.graph.seed = u(k, v); };
    t["graph.path"] = [](auto& c, auto&, auto& v) { c.graph.path = v; };
    // problem
    t["problem.regularizer"] = [](auto& c, auto& k, auto& v) { c.problem.regularizer = one_of(k, v, {"l1", "zero", "box"}); };
    t["problem.gamma"] = [f](auto& c, auto& k, auto& v) {
      if (v == "auto") c.problem.gamma.reset();
      else c.problem.gamma = f(k, v);
    };
    t["problem.lower"] = [f](auto& c, auto& k, auto& v) { c.problem.lower = f(k, v); };
    t["problem.upper"] = [f](auto& c, auto& k, auto& v) { c.problem.upper = f(k, v); };
    // hyper
    t["hyper.mu_theta"] = [f](auto& c, auto& k, auto& v) { c.hyper.mu_theta = f(k, v); };
    t["hyper.mu_z"] = [f](auto& c, auto& k, auto& v) {
      c.hyper.mu_z = f(k, v);
      c.mu_z_set = true;
    };
    t["hyper.epsilon"] = [f](auto& c, auto& k, auto& v) { c.hyper.epsilon = f(k, v); };
    t["hyper.selector"] = [u](auto& c, auto& k, auto& v) {
      const auto s = u(k, v);
      if (s == 0) throw ConfigError(k + ": agents are numbered from 1");
      c.hyper.selector = s - 1;
    };
    t["hyper.theorem_mode"] = [](auto& c, auto& k, auto& v) { c.hyper.theorem_mode = to_bool(k, v); };
    t["hyper.delta_policy"] = [](auto& c, auto& k, auto& v) {
      c.hyper.delta_policy = one_of(k, v, {"uniform", "newton_zero"}) == "uniform" ? DeltaPolicy::Uniform
                                                                                   : DeltaPolicy::NewtonZero;
    };
    t["hyper.delta_overrides"] = [dl](auto& c, auto& k, auto& v) { c.hyper.delta_overrides = dl(k, v); };
    t["hyper.dual_scope"] = [](auto& c, auto& k, auto& v) {
      c.hyper.dual_scope = one_of(k, v, {"local", "edge"}) == "local" ? DualScope::Local : DualScope::Edge;
    };
    t["hyper.freshness"] = [](auto& c, auto& k, auto& v) {
      c.freshness = one_of(k, v, {"fresh", "snapshot"}) == "fresh" ? Freshness::Fresh : Freshness::Snapshot;
    };
    // activation
    t["activation.kind"] = [](auto& c, auto& k, auto& v) {
      c.activation.kind = one_of(k, v, {"synchronous", "single", "bernoulli", "fraction", "poisson"});
    };
    t["activation.probability"] = [dl](auto& c, auto& k, auto& v) { c.activation.probabilities = dl(k, v); };
    t["activation.fraction"] = [f](auto& c, auto& k, auto& v) { c.activation.fraction = f(k, v); };
    t["activation.rates"] = [dl](auto& c, auto& k, auto& v) { c.activation.rates = dl(k, v); };
    t["activation.seed"] = [u](auto& c, auto& k, auto& v) { c.activation.seed = u(k, v); };
    // run
    t["run.iterations"] = [u](auto& c, auto& k, auto& v) { c.run.iterations = u(k, v); };
    t["run.tolerance"] = [f](auto& c, auto& k, auto& v) { c.run.tolerance = f(k, v); };
    t["run.trace_every"] = [u](auto& c, auto& k, auto& v) { c.run.trace_every = u(k, v); };
    t["run.newton_fraction"] = [f](auto& c, auto& k, auto& v) { c.run.newton_fraction = f(k, v); };
    t["run.newton_agents"] = [u](auto& c, auto& k, auto& v) {
      c.run.newton_agents.clear();
      for (const auto& s : split_list(v)) {
        const auto id = u(k, s);
        if (id == 0) throw ConfigError(k + ": agents are numbered from 1");
        c.run.newton_agents.push_back(id - 1);
      }
      c.run.explicit_agents = true;
    };
    t["run.mode_seed"] = [u](auto& c, auto& k, auto& v) { c.run.mode_seed = u(k, v); };
    t["run.deferred"] = [](auto& c, auto& k, auto& v) { c.run.deferred = to_bool(k, v); };
    t["run.lyapunov"] = [](auto& c, auto& k, auto& v) { c.run.lyapunov = to_bool(k, v); };
    t["run.agent_threads"] = [u](auto& c, auto& k, auto& v) { c.run.agent_threads = static_cast<unsigned>(u(k, v)); };
    // sweep
    t["sweep.newton_fractions"] = [dl](auto& c, auto& k, auto& v) { c.sweep.newton_fractions = dl(k, v); };
    t["sweep.fractions"] = [dl](auto& c, auto& k, auto& v) { c.sweep.fractions = dl(k, v); };
    t["sweep.seeds"] = [u](auto& c, auto& k, auto& v) {
      c.sweep.seeds.clear();
      for (const auto& s : split_list(v)) c.sweep.seeds.push_back(u(k, s));
    };
    t["sweep.threads"] = [u](auto& c, auto& k, auto& v) { c.sweep.threads = static_cast<unsigned>(u(k, v)); };
    // output
    t["output.dir"] = [](auto& c, auto&, auto& v) { c.output.dir = v; };
    t["output.plots"] = [](auto& c, auto& k, auto& v) { c.output.plots = to_bool(k, v); };
    // verify
    t["verify.iterations"] = [u](auto& c, auto& k, auto& v) { c.verify.iterations = u(k, v); };
    t["verify.seeds"] = [u](auto& c, auto& k, auto& v) { c.verify.seeds = u(k, v); };
    t["verify.contraction_iterations"] = [u](auto& c, auto& k, auto& v) {
      c.verify.contraction_iterations = u(k, v);
    };
    return t;
  }();
  return table;
}

template <class T>
std::string num(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + num(xs[i]);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  cfg.source_text = text;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      static const char* known[] = {"data", "graph", "problem", "hyper", "activation", "run", "sweep", "output", "verify"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = section + "." + trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(key + ": unknown key (" + where + ")");
    if (seen.count(key)) throw ConfigError(key + ": set twice (" + where + ")");
    seen[key] = lineno;
    it->second(cfg, key, value);
    cfg.echo.emplace_back(key, value);
  }
  if (!cfg.mu_z_set) cfg.hyper.mu_z = 2.0 * cfg.hyper.mu_theta;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate(const ExperimentConfig& c) {
  if (c.data.source == "libsvm" && c.data.path.empty()) throw ConfigError("data.path: required for libsvm data");
  if (c.data.dim == 0) throw ConfigError("data.dim: must be positive");
  if (c.data.rows == 0) throw ConfigError("data.rows: must be positive");
  if (!(c.data.noise >= 0.0)) throw ConfigError("data.noise: must be nonnegative");
  if (!(c.data.condition >= 1.0)) throw ConfigError("data.condition: must be at least 1");
  if (!(c.data.ridge >= 0.0)) throw ConfigError("data.ridge: must be nonnegative");
  if (c.graph.kind == "file" && c.graph.path.empty()) throw ConfigError("graph.path: required for graph.kind = file");
  if (c.graph.kind != "file" && c.graph.agents < 2) throw ConfigError("graph.agents: at least 2 agents are needed");
  if (c.graph.kind == "gnp" && !(c.graph.probability > 0.0 && c.graph.probability <= 1.0))
    throw ConfigError("graph.probability: must lie in (0, 1]");
  if (c.problem.gamma && !(*c.problem.gamma >= 0.0)) throw ConfigError("problem.gamma: must be nonnegative");
  if (c.problem.regularizer == "box" && !(c.problem.lower <= c.problem.upper))
    throw ConfigError("problem.lower: must not exceed problem.upper");
  if (c.graph.kind != "file") {
    c.hyper.validate(c.graph.agents);
    for (auto a : c.run.newton_agents)
      if (a >= c.graph.agents) throw ConfigError("run.newton_agents: agent " + std::to_string(a + 1) + " does not exist");
  }
  if (!(c.run.newton_fraction >= 0.0 && c.run.newton_fraction <= 1.0))
    throw ConfigError("run.newton_fraction: must lie in [0, 1]");
  for (double q : c.sweep.newton_fractions)
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("sweep.newton_fractions: every q must lie in [0, 1]");
  for (double f : c.sweep.fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep.fractions: every C must lie in (0, 1]");
  if (!(c.run.tolerance >= 0.0)) throw ConfigError("run.tolerance: must be nonnegative");
  if (c.run.trace_every == 0) throw ConfigError("run.trace_every: must be positive");
  if (c.sweep.threads == 0) throw ConfigError("sweep.threads: must be positive");
  if (c.run.agent_threads == 0) throw ConfigError("run.agent_threads: must be positive");
}

ActivationScheme make_activation(const ExperimentConfig& cfg, double fraction, std::uint64_t seed) {
  const auto& a = cfg.activation;
  if (!cfg.sweep.fractions.empty()) return ActivationScheme::fraction_uniform(fraction, seed);
  if (a.kind == "synchronous") return ActivationScheme::synchronous();
  if (a.kind == "single") return ActivationScheme::single_uniform(seed);
  if (a.kind == "bernoulli") return ActivationScheme::bernoulli(a.probabilities, seed);
  if (a.kind == "fraction") return ActivationScheme::fraction_uniform(fraction, seed);
  return ActivationScheme::poisson(a.rates, seed);
}

std::string describe(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "data.source = " << c.data.source << '\n';
  if (c.data.source == "libsvm") {
    o << "data.path = " << c.data.path << '\n';
    if (c.data.declared_dim) o << "data.declared_dim = " << *c.data.declared_dim << '\n';
    o << "data.normalize = " << (c.data.normalize ? "true" : "false") << '\n';
  } else {
    o << "data.rows = " << c.data.rows << "\ndata.dim = " << c.data.dim << "\ndata.noise = " << num(c.data.noise)
      << "\ndata.condition = " << num(c.data.condition) << "\ndata.seed = " << c.data.seed << '\n';
  }
  if (c.data.shuffle_seed) o << "data.shuffle_seed = " << *c.data.shuffle_seed << '\n';
  o << "data.ridge = " << num(c.data.ridge) << '\n';
  o << "graph.kind = " << c.graph.kind << '\n';
  if (c.graph.kind == "file") o << "graph.path = " << c.graph.path << '\n';
  else o << "graph.agents = " << c.graph.agents << '\n';
  if (c.graph.kind == "gnp") o << "graph.probability = " << num(c.graph.probability) << "\ngraph.seed = " << c.graph.seed << '\n';
  o << "problem.regularizer = " << c.problem.regularizer << '\n';
  o << "problem.gamma = " << (c.problem.gamma ? num(*c.problem.gamma) : std::string("auto")) << '\n';
  if (c.problem.regularizer == "box") o << "problem.lower = " << num(c.problem.lower) << "\nproblem.upper = " << num(c.problem.upper) << '\n';
  o << "hyper.mu_theta = " << num(c.hyper.mu_theta) << "\nhyper.mu_z = " << num(c.hyper.mu_z) << "\nhyper.epsilon = " << num(c.hyper.epsilon)
    << "\nhyper.selector = " << c.hyper.selector + 1 << "\nhyper.theorem_mode = " << (c.hyper.theorem_mode ? "true" : "false")
    << "\nhyper.delta_policy = " << to_string(c.hyper.delta_policy) << "\nhyper.dual_scope = " << to_string(c.hyper.dual_scope)
    << "\nhyper.freshness = " << to_string(c.freshness) << '\n';
  if (!c.hyper.delta_overrides.empty()) o << "hyper.delta_overrides = " << join(c.hyper.delta_overrides) << '\n';
  o << "activation.kind = " << c.activation.kind << "\nactivation.seed = " << c.activation.seed << '\n';
  if (c.activation.kind == "bernoulli") o << "activation.probability = " << join(c.activation.probabilities) << '\n';
  if (c.activation.kind == "fraction") o << "activation.fraction = " << num(c.activation.fraction) << '\n';
  if (c.activation.kind == "poisson") o << "activation.rates = " << join(c.activation.rates) << '\n';
  o << "run.iterations = " << c.run.iterations << "\nrun.tolerance = " << num(c.run.tolerance) << "\nrun.trace_every = "
    << c.run.trace_every << '\n';
  if (c.run.explicit_agents) {
    std::vector<std::size_t> one_based;
    for (auto a : c.run.newton_agents) one_based.push_back(a + 1);
    o << "run.newton_agents = " << join(one_based) << '\n';
  } else {
    o << "run.newton_fraction = " << num(c.run.newton_fraction) << "\nrun.mode_seed = " << c.run.mode_seed << '\n';
  }
  o << "run.deferred = " << (c.run.deferred ? "true" : "false") << "\nrun.lyapunov = " << (c.run.lyapunov ? "true" : "false")
    << "\nrun.agent_threads = " << c.run.agent_threads << '\n';
  o << "sweep.newton_fractions = " << join(c.sweep.newton_fractions) << "\nsweep.fractions = " << join(c.sweep.fractions)
    << "\nsweep.seeds = " << join(c.sweep.seeds) << "\nsweep.threads = " << c.sweep.threads << '\n';
  o << "output.dir = " << c.output.dir << "\noutput.plots = " << (c.output.plots ? "true" : "false") << '\n';
  o << "verify.iterations = " << c.verify.iterations << "\nverify.seeds = " << c.verify.seeds
    << "\nverify.contraction_iterations = " << c.verify.contraction_iterations << '\n';
  return o.str();
}

}  // namespace hippo

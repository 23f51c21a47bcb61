#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "hippo_cli_test";

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result cli(const std::string& args) {
  fs::create_directories(kScratch);
  const auto out = kScratch / "stdout.txt", err = kScratch / "stderr.txt";
  const std::string cmd = std::string(HIPPO_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kScratch);
  const auto p = kScratch / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmall = R"(
[data]
rows = 60
dim = 3
seed = 4

[graph]
kind = gnp
agents = 6
probability = 0.5
seed = 2

[hyper]
mu_theta = 1
epsilon = 30

[run]
iterations = 400
tolerance = 1e-8
)";

}  // namespace

TEST_CASE("verify passes on the shipped desk-scale config") {
  const auto r = cli("verify --config " + std::string(HIPPO_CONFIGS) + "/verify.ini");
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("PASS engine equivalence") != std::string::npos);
}

TEST_CASE("theorem mode with mu_z != 2 mu_theta is rejected before running") {
  const auto p = write_config("broken.ini", "[graph]\nkind = path\nagents = 3\n[data]\nrows = 12\ndim = 2\n"
                                            "[hyper]\ntheorem_mode = true\nmu_theta = 1\nmu_z = 3\n");
  for (const std::string& extra : {std::string("verify"), "run --out " + (kScratch / "never").string()}) {
    const auto r = cli(extra + " --config " + p.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("hyper.mu_z") != std::string::npos);
  }
  CHECK(!fs::exists(kScratch / "never"));
}

TEST_CASE("schema errors carry the field path") {
  auto r = cli("inspect-config --config " + write_config("typo.ini", "[run]\niteratons = 5\n").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("run.iteratons") != std::string::npos);
  r = cli("inspect-config --config " + write_config("bad.ini", "[hyper]\nepsilon = abc\n").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("hyper.epsilon") != std::string::npos);
  r = cli("inspect-config --config " + write_config("sect.ini", "[nope]\na = 1\n").string());
  CHECK(r.code == 1);
  r = cli("run");
  CHECK(r.code == 1);
}

TEST_CASE("data errors exit with code 2") {
  auto r = cli("run --config " +
               write_config("missing.ini", "[data]\nsource = libsvm\npath = /nonexistent/file.svm\n").string());
  CHECK(r.code == 2);
  std::ofstream(kScratch / "broken.svm") << "1 1:0.5 2:1\n2 3:1 2:0\n";
  r = cli("run --config " +
          write_config("malformed.ini", "[data]\nsource = libsvm\npath = " + (kScratch / "broken.svm").string() + "\n")
              .string());
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("single run emits the declared files") {
  const auto dir = kScratch / "single";
  fs::remove_all(dir);
  const auto r = cli("run --config " + write_config("small.ini", kSmall).string() + " --out " + dir.string());
  REQUIRE(r.code == 0);
  for (const char* f : {"aggregate.csv", "summary.txt", "metadata.txt", "rel_loss_vs_rounds.svg", "rel_loss_vs_cost.svg"})
    CHECK(fs::exists(dir / f));
  std::size_t traces = 0;
  for (const auto& e : fs::directory_iterator(dir / "traces")) traces += e.path().extension() == ".csv";
  CHECK(traces == 1);
  const auto trace = slurp(dir / "traces" / "q0_C1_seed0.csv");
  CHECK(trace.rfind("t,active_count,rel_loss,consensus_res,reg_res,lyapunov,comm_cost,comp_cost\n0,0,1,", 0) == 0);
  CHECK(slurp(dir / "metadata.txt").find("hyper.epsilon = 30") != std::string::npos);
}

TEST_CASE("Newton sweep: q = 1 needs no more rounds than q = 0") {
  const auto dir = kScratch / "sweep";
  fs::remove_all(dir);
  // Newton agents drop the proximal term; with it, eps >> |A^T A| makes both modes alike
  std::string text = kSmall;
  text.replace(text.find("epsilon = 30"), 12, "epsilon = 30\ndelta_policy = newton_zero");
  const auto p = write_config("sweep.ini", text + "\n[sweep]\nnewton_fractions = 0, 1\nseeds = 1, 2\n");
  REQUIRE(cli("run --config " + p.string() + " --out " + dir.string()).code == 0);
  const auto agg = slurp(dir / "aggregate.csv");
  CHECK(agg.find("\"HIPPO-0\"") != std::string::npos);
  CHECK(agg.find("\"HIPPO-100\"") != std::string::npos);

  // first t at which each group's seed-averaged loss reaches each decade
  for (double threshold : {1e-1, 1e-2, 1e-3, 1e-4}) {
    std::map<std::string, long> first;
    std::istringstream in(agg);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
      if (std::stod(f[4]) <= threshold && !first.count(f[0])) first[f[0]] = std::stol(f[3]);
    }
    REQUIRE(first.count("\"HIPPO-0\""));
    REQUIRE(first.count("\"HIPPO-100\""));
    CHECK(first["\"HIPPO-100\""] <= first["\"HIPPO-0\""]);
  }
}

TEST_CASE("outputs are identical across repeats and thread counts") {
  const auto p = write_config("det.ini", std::string(kSmall) +
                                             "\n[activation]\nkind = bernoulli\nprobability = 0.5\nseed = 3\n"
                                             "[sweep]\nnewton_fractions = 0, 0.5\nseeds = 1, 2, 3\n");
  const auto a = kScratch / "det_a", b = kScratch / "det_b", c = kScratch / "det_c";
  for (const auto& d : {a, b, c}) fs::remove_all(d);
  REQUIRE(cli("run --config " + p.string() + " --out " + a.string() + " --threads 1").code == 0);
  REQUIRE(cli("run --config " + p.string() + " --out " + b.string() + " --threads 1").code == 0);
  REQUIRE(cli("run --config " + p.string() + " --out " + c.string() + " --threads 4").code == 0);
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / rel), rel.string());
    CHECK_MESSAGE(slurp(e.path()) == slurp(c / rel), rel.string());
    ++compared;
  }
  CHECK(compared >= 11);
}

TEST_CASE("divergence exits with code 4") {
  const auto p = write_config("diverge.ini", "[data]\nrows = 30\ndim = 2\n[graph]\nkind = path\nagents = 3\n"
                                             "[hyper]\nmu_theta = 0.01\nmu_z = 0.02\nepsilon = 0\n"
                                             "[run]\niterations = 3000\n");
  const auto r = cli("run --config " + p.string() + " --out " + (kScratch / "div").string());
  CHECK(r.code == 4);
  CHECK(r.err.find("iteration") != std::string::npos);
}

TEST_CASE("gen-graph writes a readable edge list") {
  const auto out = kScratch / "graph.txt";
  REQUIRE(cli("gen-graph --agents 8 --probability 0.4 --seed 3 --out " + out.string()).code == 0);
  std::istringstream in(slurp(out));
  std::size_t m = 0, n = 0;
  in >> m >> n;
  CHECK(m == 8);
  std::size_t lines = 0;
  for (std::size_t i, j; in >> i >> j;) {
    CHECK(i < j);
    CHECK(j <= 8);
    ++lines;
  }
  CHECK(lines == n);

  const auto p = write_config("file_graph.ini", "[data]\nrows = 40\ndim = 2\n[graph]\nkind = file\npath = " +
                                                    out.string() + "\n[hyper]\nepsilon = 30\n[run]\niterations = 50\n");
  CHECK(cli("run --config " + p.string() + " --out " + (kScratch / "file_graph").string()).code == 0);
}

TEST_CASE("solve-oracle prints the optimum") {
  const auto r = cli("solve-oracle --config " + write_config("oracle.ini", kSmall).string());
  CHECK(r.code == 0);
  CHECK(r.out.find("x* =") == 0);
  CHECK(r.out.find("converged = yes") != std::string::npos);
}

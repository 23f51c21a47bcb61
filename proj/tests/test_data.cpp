#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hippo/data.hpp"

using namespace hippo;

TEST_CASE("parse a small libsvm file") {
  const auto ds = parse_libsvm("1.5 1:2 3:-0.25\n\n-1 2:4\r\n");
  REQUIRE(ds.rows.size() == 2);
  CHECK(ds.dim == 3);
  CHECK(ds.rows[0].label == 1.5);
  CHECK(ds.rows[0].features == std::vector<std::pair<std::size_t, double>>{{0, 2.0}, {2, -0.25}});
  CHECK(ds.rows[1].label == -1.0);
  const auto [a, b] = densify(ds);
  Mat expect(2, 3);
  expect << 2, 0, -0.25, 0, 4, 0;
  CHECK(a == expect);
  CHECK(b(1) == -1.0);
  CHECK(parse_libsvm("0 1:1\n", 5).dim == 5);
}

TEST_CASE("malformed input reports the line") {
  auto message = [](const char* text, std::optional<std::size_t> dim = {}) {
    try {
      parse_libsvm(text, dim);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("1 1:2\n1 3:1 2:1\n").find("line 2") != std::string::npos);
  CHECK(message("1 1:2\nx 1:1\n").find("line 2") != std::string::npos);
  CHECK(message("1 0:2\n").find("line 1") != std::string::npos);
  CHECK(message("1 1:abc\n").find("line 1") != std::string::npos);
  CHECK(message("1 12\n").find("line 1") != std::string::npos);
  CHECK(message("1 1:1\n1 1:1\n1 9:1\n", 4).find("line 3") != std::string::npos);
  CHECK_THROWS_AS(read_libsvm_file("/nonexistent/data.txt"), DataError);
}

TEST_CASE("serialize round trip is exact") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Dataset ds;
  ds.dim = 7;
  for (int r = 0; r < 40; ++r) {
    SparseRow row;
    row.label = n(rng);
    for (std::size_t k = 0; k < 7; ++k)
      if (rng() % 3 == 0) row.features.emplace_back(k, n(rng) * 1e3);
    ds.rows.push_back(row);
  }
  ds.rows.back().features.emplace_back(6, 1.0);  // pin the dimension
  const auto back = parse_libsvm(serialize_libsvm(ds));
  CHECK(back == ds);
}

TEST_CASE("even partition sizes and coverage") {
  for (std::size_t rows : {0u, 3u, 10u, 3000u, 3001u})
    for (std::size_t m : {1u, 3u, 50u}) {
      const auto parts = partition_rows(rows, m, 4);
      REQUIRE(parts.size() == m);
      std::set<std::size_t> seen;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t expect = rows / m + (i < rows % m ? 1 : 0);
        CHECK(parts[i].size() == expect);
        seen.insert(parts[i].begin(), parts[i].end());
      }
      CHECK(seen.size() == rows);
    }
  const auto plain = partition_rows(7, 3, std::nullopt);
  CHECK(plain[0] == std::vector<std::size_t>{0, 1, 2});
  CHECK(plain[2] == std::vector<std::size_t>{5, 6});
  CHECK(partition_rows(100, 4, 1) == partition_rows(100, 4, 1));
  CHECK(partition_rows(100, 4, 1) != partition_rows(100, 4, 2));
  CHECK_THROWS_AS(partition_rows(5, 0, std::nullopt), DataError);
}

TEST_CASE("standardize gives zero mean and unit variance") {
  const auto ds = parse_libsvm("1 1:1 2:5\n2 1:2 2:5\n3 1:6 2:5\n");
  const auto [a, b] = densify(standardize(ds));
  CHECK(std::abs(a.col(0).mean()) < 1e-15);
  CHECK(a.col(0).squaredNorm() / 3.0 == doctest::Approx(1.0));
  CHECK(a.col(1).cwiseAbs().maxCoeff() == 0.0);  // constant column centered only
  CHECK(b(2) == 3.0);
}

TEST_CASE("synthetic instance") {
  const auto inst = synth_least_squares(4, 3, 20, 0.0, 11);
  REQUIRE(inst.agents.size() == 4);
  for (const auto& ad : inst.agents) {
    CHECK(ad.a.rows() == 20);
    CHECK((ad.a * inst.planted - ad.b).norm() < 1e-12);
  }
  const auto again = synth_least_squares(4, 3, 20, 0.0, 11);
  CHECK(again.agents[2].a == inst.agents[2].a);

  // column scaling spreads the Hessian spectrum by roughly the condition factor
  const auto wide = synth_least_squares(1, 4, 4000, 0.1, 2, 100.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(wide.agents[0].a.transpose() * wide.agents[0].a);
  const double ratio = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  CHECK(ratio > 70.0);
  CHECK(ratio < 140.0);
  CHECK_THROWS_AS(synth_least_squares(2, 2, 5, 0.1, 1, 0.5), DataError);

  const auto objs = make_objectives(inst.agents, 0.25);
  CHECK(objs.size() == 4);
  CHECK(objs[1].ridge() == 0.25);
}

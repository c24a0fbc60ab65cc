#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ggtvae/common.hpp"
#include "ggtvae/graph.hpp"
#include "ggtvae/rng.hpp"
#include "ggtvae/spectral.hpp"
#include "test_util.hpp"

using namespace ggtvae;
using namespace testutil;

namespace {

Tensor random_symmetric(std::size_t n, Rng& rng) {
  Tensor m(n, n);
  auto v = m.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      v[i * n + j] = v[j * n + i] = rng.uniform() * 4.0 - 2.0;
  return m;
}

double recon_residual(const Tensor& m, const EighResult& e) {
  const std::size_t n = m.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        s += e.eigenvectors.at(i, k) * e.eigenvalues[k] *
             e.eigenvectors.at(j, k);
      worst = std::max(worst, std::abs(m.at(i, j) - s));
    }
  return worst;
}

double ortho_residual(const Tensor& q) {
  const std::size_t n = q.rows(), k = q.cols();
  double worst = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += q.at(i, a) * q.at(i, b);
      worst = std::max(worst, std::abs(s - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace

TEST_CASE("eigh_symmetric: diagonal matrix") {
  Tensor m(3, 3);
  m.values()[0] = 5.0;
  m.values()[4] = -1.0;
  m.values()[8] = 2.0;
  EighResult e = eigh_symmetric(m);
  CHECK(e.eigenvalues == std::vector<double>{-1.0, 2.0, 5.0});
  // eigenvectors form a signed permutation of the identity
  for (std::size_t c = 0; c < 3; ++c) {
    int nonzero = 0;
    for (std::size_t r = 0; r < 3; ++r)
      if (std::abs(e.eigenvectors.at(r, c)) > 1e-12) ++nonzero;
    CHECK(nonzero == 1);
  }
  CHECK(std::abs(e.eigenvectors.at(1, 0)) == 1.0);  // -1 mode on node 1
}

TEST_CASE("eigh_symmetric: K2 laplacian gives {0,2} and +-[1,1]/sqrt2") {
  Tensor lap = normalized_laplacian(TrainAdjacency::from_edges(2, {{0, 1}}));
  EighResult e = eigh_symmetric(lap);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(e.eigenvalues[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(e.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(e.eigenvectors.at(0, 0)) == doctest::Approx(r));
  CHECK(e.eigenvectors.at(0, 0) == doctest::Approx(e.eigenvectors.at(1, 0)));
  CHECK(e.eigenvectors.at(0, 1) == doctest::Approx(-e.eigenvectors.at(1, 1)));
}

TEST_CASE("eigh_symmetric: random 20x20 residuals below 1e-8") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor m = random_symmetric(20, rng);
    EighResult e = eigh_symmetric(m);
    CHECK(std::is_sorted(e.eigenvalues.begin(), e.eigenvalues.end()));
    CHECK(ortho_residual(e.eigenvectors) < 1e-8);
    CHECK(recon_residual(m, e) < 1e-8);
  }
}

TEST_CASE("eigh_symmetric: rejects non-symmetric and non-square") {
  Tensor m(2, 2);
  m.values()[1] = 1.0;
  m.values()[2] = 1.0 + 1e-6;  // breaks the 1e-9 symmetry gate
  CHECK_THROWS_AS(eigh_symmetric(m), ValueError);
  CHECK_THROWS_AS(eigh_symmetric(Tensor(2, 3)), DimError);
}

TEST_CASE("eigh_symmetric: repeated eigenvalues still reconstruct") {
  // 4x4 with eigenvalue 1 of multiplicity 3 (I + rank-1).
  Tensor m(4, 4);
  auto v = m.values();
  const double u[4] = {0.5, 0.5, 0.5, 0.5};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) v[i * 4 + j] = (i == j ? 1.0 : 0.0) + u[i] * u[j];
  EighResult e = eigh_symmetric(m);
  CHECK(recon_residual(m, e) < 1e-8);
  CHECK(e.eigenvalues[3] == doctest::Approx(2.0));
  for (int i = 0; i < 3; ++i) CHECK(e.eigenvalues[i] == doctest::Approx(1.0));
}

TEST_CASE("laplacian_pe: K2, k=1 canonical column") {
  PositionalEncoding pe =
      laplacian_pe(TrainAdjacency::from_edges(2, {{0, 1}}), 1);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(pe.requested_k == 1);
  CHECK(pe.effective_k == 1);
  REQUIRE(pe.eigenvalues.size() == 1);
  CHECK(pe.eigenvalues[0] == doctest::Approx(2.0));
  CHECK(pe.vectors.at(0, 0) == doctest::Approx(r));   // sign rule: first +
  CHECK(pe.vectors.at(1, 0) == doctest::Approx(-r));
}

TEST_CASE("laplacian_pe: star S4 columns satisfy the eigen equation") {
  TrainAdjacency s4 = TrainAdjacency::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
  Tensor lap = normalized_laplacian(s4);
  PositionalEncoding pe = laplacian_pe(s4, 2);
  REQUIRE(pe.effective_k == 2);
  for (int c = 0; c < 2; ++c) {
    double norm = 0.0, resid = 0.0;
    for (int i = 0; i < 4; ++i) {
      double lp = 0.0;
      for (int j = 0; j < 4; ++j) lp += lap.at(i, j) * pe.vectors.at(j, c);
      resid = std::max(resid,
                       std::abs(lp - pe.eigenvalues[c] * pe.vectors.at(i, c)));
      norm += pe.vectors.at(i, c) * pe.vectors.at(i, c);
    }
    CHECK(resid < 1e-8);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("laplacian_pe: two components drop two zero modes") {
  // two triangles: N=6, two zero eigenvalues, so k=N-2=4 exactly fits
  TrainAdjacency adj = TrainAdjacency::from_edges(
      6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}});
  PositionalEncoding pe = laplacian_pe(adj, 4);
  CHECK(pe.effective_k == 4);
  CHECK(pe.requested_k == 4);
  CHECK(pe.vectors.cols() == 4);
  for (double ev : pe.eigenvalues) CHECK(ev > 1e-8);
}

TEST_CASE("laplacian_pe: padding when k exceeds the nonzero spectrum") {
  // same two triangles, k=5 > 4 available -> one zero-padded column
  TrainAdjacency adj = TrainAdjacency::from_edges(
      6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}});
  PositionalEncoding pe = laplacian_pe(adj, 5);
  CHECK(pe.requested_k == 5);
  CHECK(pe.effective_k == 4);
  CHECK(pe.vectors.cols() == 5);
  for (std::size_t i = 0; i < 6; ++i) CHECK(pe.vectors.at(i, 4) == 0.0);
}

TEST_CASE("laplacian_pe: k >= N rejected") {
  TrainAdjacency adj = TrainAdjacency::from_edges(3, {{0, 1}, {1, 2}});
  CHECK_THROWS_AS(laplacian_pe(adj, 3), ValueError);
  CHECK_THROWS_AS(laplacian_pe(adj, 0), ValueError);
}

TEST_CASE("laplacian_pe: deterministic bitwise, orthogonal columns") {
  Graph g = sbm_graph({8, 8}, 0.5, 0.15, 41);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  PositionalEncoding a = laplacian_pe(adj, 6);
  PositionalEncoding b = laplacian_pe(adj, 6);
  REQUIRE(a.vectors.size() == b.vectors.size());
  CHECK(std::memcmp(a.vectors.values().data(), b.vectors.values().data(),
                    a.vectors.size() * sizeof(double)) == 0);
  CHECK(a.eigenvalues == b.eigenvalues);

  // mutual orthogonality of the effective columns
  for (int c1 = 0; c1 < a.effective_k; ++c1)
    for (int c2 = c1 + 1; c2 < a.effective_k; ++c2) {
      double dot = 0.0;
      for (int i = 0; i < g.n; ++i)
        dot += a.vectors.at(i, c1) * a.vectors.at(i, c2);
      CHECK(std::abs(dot) < 1e-8);
    }

  // sign rule: first entry above the tolerance is positive
  for (int c = 0; c < a.effective_k; ++c) {
    for (int i = 0; i < g.n; ++i) {
      if (std::abs(a.vectors.at(i, c)) > 1e-9) {
        CHECK(a.vectors.at(i, c) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("pe cache: round trip, wrong-key miss, corruption") {
  Graph g = sbm_graph({7, 7}, 0.5, 0.1, 53);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  const std::string hash = adjacency_hash(adj);
  PositionalEncoding pe = laplacian_pe(adj, 5);
  const std::string dir = make_temp_dir();
  const std::string path = dir + "/pe.csv";
  save_pe_cache(pe, hash, path);

  std::optional<PositionalEncoding> hit = load_pe_cache(path, hash, 5);
  REQUIRE(hit.has_value());
  CHECK(hit->requested_k == pe.requested_k);
  CHECK(hit->effective_k == pe.effective_k);
  CHECK(hit->eigenvalues.size() == pe.eigenvalues.size());
  for (std::size_t i = 0; i < pe.eigenvalues.size(); ++i)
    CHECK(hit->eigenvalues[i] == pe.eigenvalues[i]);  // %.17g is exact
  REQUIRE(hit->vectors.rows() == pe.vectors.rows());
  REQUIRE(hit->vectors.cols() == pe.vectors.cols());
  CHECK(std::memcmp(hit->vectors.values().data(), pe.vectors.values().data(),
                    pe.vectors.size() * sizeof(double)) == 0);

  CHECK_FALSE(load_pe_cache(path, "feedfeedfeedfeed", 5).has_value());
  CHECK_FALSE(load_pe_cache(path, hash, 4).has_value());
  CHECK_FALSE(load_pe_cache(dir + "/absent.csv", hash, 5).has_value());

  // corrupt bodies with a valid key line must throw, not mis-load
  std::string body = slurp(path);
  {
    std::ofstream out(path);  // truncate mid-row
    out << body.substr(0, body.size() - 20);
  }
  CHECK_THROWS_AS(load_pe_cache(path, hash, 5), ParseError);
  {
    std::ofstream out(path);
    out << body << "6,0.1,0.1,0.1,0.1,0.1\n";  // extra node row
  }
  CHECK_THROWS_AS(load_pe_cache(path, hash, 5), ParseError);
}

TEST_CASE("pe ignores features; spectrum tracks structure") {
  Graph g = sbm_graph({6, 6}, 0.6, 0.1, 67);
  TrainAdjacency adj = TrainAdjacency::from_edges(g.n, g.edges);
  PositionalEncoding a = laplacian_pe(adj, 4);
  // drop one edge -> different spectrum (generic case)
  std::vector<Edge> fewer(g.edges.begin(), g.edges.end() - 1);
  TrainAdjacency adj2 = TrainAdjacency::from_edges(g.n, fewer);
  PositionalEncoding b = laplacian_pe(adj2, 4);
  bool same = a.eigenvalues.size() == b.eigenvalues.size();
  if (same)
    for (std::size_t i = 0; i < a.eigenvalues.size(); ++i)
      if (a.eigenvalues[i] != b.eigenvalues[i]) same = false;
  CHECK_FALSE(same);
}

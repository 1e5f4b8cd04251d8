#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "hcf/chern.hpp"
#include "hcf/random_fields.hpp"

using namespace hcf;

namespace {

MetricField test_metric(const Lattice& lat, std::uint64_t seed, double amp = 0.15, int bw = 2) {
  return hermitian_perturbation_metric(lat, seed, amp, bw);
}

Eigen::MatrixXcd to_eigen(const MetricField& g, std::size_t p) {
  const int n = g.n();
  Eigen::MatrixXcd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = g.gc(i, j)[p];
  return M;
}

}  // namespace

TEST_CASE("metric field invariants") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 7);
  REQUIRE(g.min_eig() > 0.0);
  // g . ginv = identity
  double resid = 0.0;
  for (std::size_t p = 0; p < lat.points(); ++p) {
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) {
        cplx acc{};
        for (int j = 0; j < 2; ++j) acc += g.gic(i, j)[p] * g.gc(k, j)[p];
        resid = std::max(resid, std::abs(acc - (i == k ? 1.0 : 0.0)));
      }
  }
  REQUIRE(resid <= 1e-13);
  // non-Hermitian input is rejected
  TensorField bad(lat, {HL, AL});
  for (std::size_t p = 0; p < lat.points(); ++p) {
    bad.comp(0)[p] = 1.0;
    bad.comp(3)[p] = 1.0;
    bad.comp(1)[p] = cplx(0.1, 0.05);
    bad.comp(2)[p] = cplx(0.1, 0.05);  // not the conjugate
  }
  REQUIRE(!MetricField::try_make(lat, bad).has_value());
}

TEST_CASE("min eigenvalue matches Eigen") {
  for (int n : {1, 2, 3}) {
    Lattice lat(n, 8, Backend::Spectral);
    MetricField g = test_metric(lat, 11 + n, 0.2, 1);
    Rng pick(99);
    for (int t = 0; t < 10; ++t) {
      const std::size_t p = static_cast<std::size_t>((pick.sym() * 0.5 + 0.5) * (lat.points() - 1));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(to_eigen(g, p));
      REQUIRE(g.min_eig_field()[p] == Catch::Approx(es.eigenvalues().minCoeff()).margin(1e-12));
    }
  }
}

TEST_CASE("trace of identity against flat metric is n") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = flat_metric(lat);
  TensorField id(lat, {HL, AL});
  for (int i = 0; i < 2; ++i)
    for (std::size_t p = 0; p < lat.points(); ++p) id.comp(static_cast<std::size_t>(i) * 2 + i)[p] = 1.0;
  TensorField tr = contract(id, g.ginv(), {{0, 0}, {1, 1}}, g);
  for (std::size_t p = 0; p < lat.points(); ++p)
    REQUIRE(std::abs(tr.comp(0)[p] - cplx(2.0, 0.0)) <= 1e-14);
}

TEST_CASE("g^{i jbar} g_{i jbar} = n for any metric") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 3);
  TensorField tr = contract(g.ginv(), g.g(), {{0, 0}, {1, 1}}, g);
  for (std::size_t p = 0; p < lat.points(); ++p)
    REQUIRE(std::abs(tr.comp(0)[p] - cplx(2.0, 0.0)) <= 1e-13);
}

TEST_CASE("metric contraction against dense linear-algebra oracle") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 5);
  Rng rng(17);
  TensorField h = random_hermitian11(lat, rng, 2);
  TensorField tr = contract(g.ginv(), h, {{0, 0}, {1, 1}}, g);
  Rng pick(23);
  for (int t = 0; t < 10; ++t) {
    const std::size_t p = static_cast<std::size_t>((pick.sym() * 0.5 + 0.5) * (lat.points() - 1));
    Eigen::MatrixXcd G = to_eigen(g, p), H(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) H(i, j) = h.comp(static_cast<std::size_t>(i) * 2 + j)[p];
    const cplx want = (G.inverse() * H).trace();
    REQUIRE(std::abs(tr.comp(0)[p] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("<g, g> = n for any metric") {
  for (int n : {1, 2, 3}) {
    Lattice lat(n, 8, Backend::Spectral);
    MetricField g = test_metric(lat, 31 + n, 0.2, 1);
    auto v = inner(g.g(), g.g(), g);
    for (std::size_t p = 0; p < lat.points(); p += 97)
      REQUIRE(v[p] == Catch::Approx(static_cast<double>(n)).margin(1e-12));
  }
}

TEST_CASE("flat metric has vanishing torsion norms") {
  Lattice lat(2, 8, Backend::Spectral);
  ChernPackage cp = compute_package(flat_metric(lat));
  for (std::size_t p = 0; p < lat.points(); ++p) {
    REQUIRE(std::abs(cp.Tnorm2[p]) <= 1e-24);
    REQUIRE(std::abs(cp.wnorm2[p]) <= 1e-24);
  }
}

TEST_CASE("|T|^2 against a fully unrolled six-index oracle") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 41);
  ChernPackage cp = compute_package(g);
  auto n2 = inner(cp.T_low, cp.T_low, g);
  Rng pick(5);
  for (int t = 0; t < 5; ++t) {
    const std::size_t p = static_cast<std::size_t>((pick.sym() * 0.5 + 0.5) * (lat.points() - 1));
    cplx acc{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int pp = 0; pp < 2; ++pp)
            for (int q = 0; q < 2; ++q)
              for (int r = 0; r < 2; ++r)
                acc += g.gic(i, pp)[p] * g.gic(j, q)[p] * g.gic(r, k)[p] *
                       cp.T_low.at({i, j, k}, p) * std::conj(cp.T_low.at({pp, q, r}, p));
    REQUIRE(std::abs(acc.imag()) <= 1e-14);
    REQUIRE(n2[p] == Catch::Approx(acc.real()).epsilon(1e-12));
    REQUIRE(cp.Tnorm2[p] == Catch::Approx(acc.real()).epsilon(1e-12));
  }
}

TEST_CASE("inner(a, a) is nonnegative pointwise") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 43);
  Rng rng(44);
  TensorField a(lat, {HL, HL, AL});
  for (std::size_t c = 0; c < a.comps(); ++c) {
    auto f = random_complex_scalar(lat, rng, 2);
    std::copy(f.begin(), f.end(), a.comp(c));
  }
  auto v = inner(a, a, g);
  for (std::size_t p = 0; p < lat.points(); ++p) REQUIRE(v[p] >= -1e-16);
}

TEST_CASE("Hermitian-symmetry closure under sums and real scaling") {
  Lattice lat(2, 8, Backend::Spectral);
  Rng rng(51);
  TensorField a = random_hermitian11(lat, rng, 2);
  TensorField b = random_hermitian11(lat, rng, 2);
  TensorField c = a;
  c *= cplx(2.5, 0.0);
  c += b;
  double herm = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (std::size_t p = 0; p < lat.points(); ++p)
        herm = std::max(herm, std::abs(c.at({i, j}, p) - std::conj(c.at({j, i}, p))));
  REQUIRE(herm <= 1e-15);
}

TEST_CASE("covariant derivative reduces to the partial on flat metrics") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField flat = flat_metric(lat);
  ChernPackage cpf = compute_package(flat);
  Rng rng(61);
  TensorField a = random_hermitian11(lat, rng, 2);
  TensorField cdv = cd(cpf, a, Kind::Holomorphic, 0);
  TensorField pdv(lat, a.sig());
  for (std::size_t c = 0; c < a.comps(); ++c) lat.partial(0, Kind::Holomorphic, a.comp(c), pdv.comp(c));
  pdv -= cdv;
  REQUIRE(pdv.sup_abs() <= 1e-13);
}

TEST_CASE("metric compatibility: nabla g = 0") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = test_metric(lat, 71, 0.15, 2);
  ChernPackage cp = compute_package(g);
  for (int d = 0; d < 2; ++d) {
    REQUIRE(cd(cp, g.g(), Kind::Holomorphic, d).sup_abs() <= 1e-10);
    REQUIRE(cd(cp, g.g(), Kind::Antiholomorphic, d).sup_abs() <= 1e-10);
  }
}

TEST_CASE("product rule on contractions to discretization error") {
  // nabla commutes with metric contraction because nabla g = 0, so
  // nabla_d (a . b) = (nabla_d a) . b + a . (nabla_d b) up to the aliasing
  // of the triple product
  Lattice lat(2, 16, Backend::Spectral);
  MetricField g = test_metric(lat, 81, 0.05, 1);
  ChernPackage cp = compute_package(g);
  Rng rng(82);
  TensorField a = random_hermitian11(lat, rng, 1);
  TensorField b = random_hermitian11(lat, rng, 1);
  TensorField ab = contract(a, b, {{1, 0}}, g);  // g^{k jbar} a_{i jbar} b_{k lbar}
  TensorField lhs = cd(cp, ab, Kind::Holomorphic, 0);
  TensorField r1 = contract(cd(cp, a, Kind::Holomorphic, 0), b, {{1, 0}}, g);
  TensorField r2 = contract(a, cd(cp, b, Kind::Holomorphic, 0), {{1, 0}}, g);
  lhs -= r1;
  lhs -= r2;
  REQUIRE(lhs.sup_abs() <= 1e-7);
}

TEST_CASE("contract rejects invalid pairings") {
  Lattice lat(1, 8, Backend::Spectral);
  MetricField g = flat_metric(lat);
  TensorField a(lat, {HL, HL});
  REQUIRE_THROWS_AS(contract(a, a, {{0, 0}}, g), std::invalid_argument);
  TensorField b(lat, {HL, AL});
  REQUIRE_THROWS_AS(inner_c(a, b, g), std::invalid_argument);
}

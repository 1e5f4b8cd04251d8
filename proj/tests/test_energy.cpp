#include <catch2/catch_amalgamated.hpp>

#include "hcf/energy.hpp"
#include "hcf/random_fields.hpp"

using namespace hcf;

TEST_CASE("Kaehler metric: all Q tensors vanish, K = S, k = s") {
  Lattice lat(2, 16, Backend::Spectral);
  MetricField g = kahler_potential_metric(lat, 3, 0.1, 2);
  ChernPackage cp = compute_package(g);
  QPackage qp = compute_q(cp);
  REQUIRE(qp.Q1.sup_abs() <= 1e-18);
  REQUIRE(qp.Q2.sup_abs() <= 1e-18);
  REQUIRE(qp.Q3.sup_abs() <= 1e-18);
  REQUIRE(qp.Q4.sup_abs() <= 1e-18);
  TensorField d = qp.K;
  d -= cp.S;
  REQUIRE(d.sup_abs() <= 1e-18);
  double kr = 0.0;
  for (std::size_t p = 0; p < lat.points(); ++p) kr = std::max(kr, std::abs(qp.k[p] - cp.s[p]));
  REQUIRE(kr <= 1e-15);
}

TEST_CASE("flat metric: F = 0, volume = 1") {
  Lattice lat(2, 8, Backend::Spectral);
  QPackage qp = compute_q(compute_package(flat_metric(lat)));
  REQUIRE(std::abs(qp.F_value) <= 1e-13);
  REQUIRE(qp.volume == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("Q tensors against fully unrolled index-loop oracles") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 23, 0.15, 2);
  ChernPackage cp = compute_package(g);
  QPackage qp = compute_q(cp);
  const int n = 2;
  auto T = [&](int i, int j, int k, std::size_t p) { return cp.T_low.at({i, j, k}, p); };
  auto Tb = [&](int i, int j, int k, std::size_t p) { return std::conj(T(i, j, k, p)); };
  auto GI = [&](int i, int j, std::size_t p) { return g.gic(i, j)[p]; };
  Rng pick(7);
  for (int t = 0; t < 5; ++t) {
    const std::size_t p = static_cast<std::size_t>((pick.sym() * 0.5 + 0.5) * (lat.points() - 1));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx q1{}, q2{}, q3{}, q4{};
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn) {
                q1 += GI(k, l, p) * GI(m, nn, p) * T(i, k, nn, p) * Tb(j, l, m, p);
                q2 += GI(k, l, p) * GI(m, nn, p) * Tb(l, nn, i, p) * T(k, m, j, p);
                q3 += GI(k, l, p) * GI(m, nn, p) * T(i, k, l, p) * Tb(j, nn, m, p);
                q4 += 0.5 * GI(k, l, p) * GI(m, nn, p) *
                      (T(m, k, l, p) * Tb(nn, j, i, p) + Tb(nn, l, k, p) * T(m, i, j, p));
              }
        const double scale = 1e-12;
        REQUIRE(std::abs(qp.Q1.at({i, j}, p) - q1) <= scale * std::max(1.0, std::abs(q1)));
        REQUIRE(std::abs(qp.Q2.at({i, j}, p) - q2) <= scale * std::max(1.0, std::abs(q2)));
        REQUIRE(std::abs(qp.Q3.at({i, j}, p) - q3) <= scale * std::max(1.0, std::abs(q3)));
        REQUIRE(std::abs(qp.Q4.at({i, j}, p) - q4) <= scale * std::max(1.0, std::abs(q4)));
      }
  }
}

TEST_CASE("each Q tensor is Hermitian-symmetric") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 29, 0.15, 2);
  QPackage qp = compute_q(compute_package(g));
  for (const TensorField* q : {&qp.Q1, &qp.Q2, &qp.Q3, &qp.Q4}) {
    double herm = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (std::size_t p = 0; p < lat.points(); ++p)
          herm = std::max(herm, std::abs(q->at({i, j}, p) - std::conj(q->at({j, i}, p))));
    REQUIRE(herm <= 1e-14);
  }
}

TEST_CASE("trace identity: tr_g Q = 1/4 |T|^2 + 1/2 |w|^2") {
  Lattice lat(2, 16, Backend::Spectral);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    MetricField g = hermitian_perturbation_metric(lat, seed, 0.12, 2);
    ChernPackage cp = compute_package(g);
    QPackage qp = compute_q(cp);
    REQUIRE(q_trace_residual(cp, qp) <= 1e-10);
  }
}

TEST_CASE("corrupted Q2 sign breaks the trace identity") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 5, 0.15, 2);
  ChernPackage cp = compute_package(g);
  QPackage bad = compute_q(cp, /*debug_corrupt_q2_sign=*/true);
  REQUIRE(q_trace_residual(cp, bad) > 1e-6);
}

TEST_CASE("Q1 and Q3 are positive semidefinite pointwise") {
  Lattice lat(2, 12, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 31, 0.2, 2);
  QPackage qp = compute_q(compute_package(g));
  REQUIRE(min_eigenvalue(qp.Q1) >= -1e-14);
  REQUIRE(min_eigenvalue(qp.Q3) >= -1e-14);
}

TEST_CASE("k equals s - 1/4|T|^2 - 1/2|w|^2 pointwise") {
  Lattice lat(2, 12, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 37, 0.15, 2);
  ChernPackage cp = compute_package(g);
  QPackage qp = compute_q(cp);
  double resid = 0.0;
  for (std::size_t p = 0; p < lat.points(); ++p)
    resid = std::max(resid,
                     std::abs(qp.k[p] - (cp.s[p] - 0.25 * cp.Tnorm2[p] - 0.5 * cp.wnorm2[p])));
  REQUIRE(resid <= 1e-10);
}

TEST_CASE("F is invariant under constant rescaling of the metric") {
  Lattice lat(2, 12, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 41, 0.15, 2);
  const double f1 = compute_q(compute_package(g)).F_value;
  for (double c : {0.5, 2.0}) {
    TensorField gs = g.g();
    gs *= cplx(c, 0.0);
    const double f2 = compute_q(compute_package(MetricField::make(lat, gs))).F_value;
    REQUIRE(std::abs(f2 - f1) <= 1e-10 * std::max(1.0, std::abs(f1)));
  }
}

TEST_CASE("static residual") {
  Lattice lat(2, 8, Backend::Spectral);
  SECTION("flat metric is static with k = 0") {
    ChernPackage cp = compute_package(flat_metric(lat));
    QPackage qp = compute_q(cp);
    auto [t, s] = static_residual(cp, qp);
    REQUIRE(t <= 1e-12);
    REQUIRE(s <= 1e-12);
  }
  SECTION("scaling preserves staticity") {
    ChernPackage cp = compute_package(flat_metric(lat, 2.0));
    QPackage qp = compute_q(cp);
    auto [t, s] = static_residual(cp, qp);
    REQUIRE(t <= 1e-12);
    REQUIRE(s <= 1e-12);
  }
  SECTION("a perturbed flat metric is strictly non-static") {
    MetricField g = hermitian_perturbation_metric(lat, 43, 0.01, 1);
    ChernPackage cp = compute_package(g);
    QPackage qp = compute_q(cp);
    auto [t, s] = static_residual(cp, qp);
    REQUIRE(t > 1e-4);
    REQUIRE(s > 1e-4);
  }
}

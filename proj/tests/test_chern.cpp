#include <catch2/catch_amalgamated.hpp>

#include "hcf/chern.hpp"
#include "hcf/random_fields.hpp"

using namespace hcf;

TEST_CASE("flat metric: all package fields vanish") {
  Lattice lat(2, 8, Backend::Spectral);
  ChernPackage cp = compute_package(flat_metric(lat));
  REQUIRE(cp.gamma.sup_abs() <= 1e-13);
  REQUIRE(cp.T_low.sup_abs() <= 1e-13);
  REQUIRE(cp.w.sup_abs() <= 1e-13);
  REQUIRE(cp.Om.sup_abs() <= 1e-12);
  REQUIRE(cp.S.sup_abs() <= 1e-12);
  REQUIRE(cp.P.sup_abs() <= 1e-12);
  double smax = 0.0;
  for (double v : cp.s) smax = std::max(smax, std::abs(v));
  REQUIRE(smax <= 1e-12);
}

TEST_CASE("n=3 flat smoke test") {
  Lattice lat(3, 8, Backend::Spectral);
  ChernPackage cp = compute_package(flat_metric(lat));
  REQUIRE(cp.Om.sup_abs() <= 1e-12);
  REQUIRE(check_torsion_cyclic(cp) <= 1e-12);
}

TEST_CASE("package invariants: antisymmetry and Hermitian symmetries") {
  Lattice lat(2, 16, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 2024, 0.1, 2);
  auto herm_resid = [&](const ChernPackage& cp) {
    const std::size_t P = lat.points();
    double a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (std::size_t p = 0; p < P; ++p) {
          for (int k = 0; k < 2; ++k)
            a1 = std::max(a1, std::abs(cp.T_low.at({i, j, k}, p) + cp.T_low.at({j, i, k}, p)));
          a2 = std::max(a2, std::abs(cp.S.at({i, j}, p) - std::conj(cp.S.at({j, i}, p))));
          a2 = std::max(a2, std::abs(cp.P.at({i, j}, p) - std::conj(cp.P.at({j, i}, p))));
          for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l)
              a3 = std::max(a3, std::abs(cp.Om.at({i, j, k, l}, p) -
                                         std::conj(cp.Om.at({j, i, l, k}, p))));
        }
    return std::array<double, 3>{a1, a2, a3};
  };
  // the expanded assembly is Hermitian-symmetric to roundoff; the dGamma
  // route only up to the aliasing of the product rule
  auto re = herm_resid(compute_package(g, CurvaturePath::Expanded));
  REQUIRE(re[0] <= 1e-14);
  REQUIRE(re[1] <= 1e-12);
  REQUIRE(re[2] <= 1e-12);
  auto rd = herm_resid(compute_package(g, CurvaturePath::DGamma));
  REQUIRE(rd[1] <= 1e-6);
  REQUIRE(rd[2] <= 1e-6);
}

TEST_CASE("n=1 has identically vanishing torsion") {
  Lattice lat(1, 16, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 5, 0.2, 3);
  ChernPackage cp = compute_package(g);
  REQUIRE(cp.T_low.sup_abs() <= 1e-15);
  REQUIRE(cp.w.sup_abs() <= 1e-15);
}

TEST_CASE("1-d scalar curvature equals -dd log g pointwise") {
  // n=1, g = (1 + 0.1 cos 2 pi x) delta: S_{1 1bar} = -d_1 d_1bar log g_{1 1bar}
  Lattice lat(1, 32, Backend::Spectral);
  const std::size_t P = lat.points();
  TensorField gt(lat, {HL, AL});
  for (std::size_t p = 0; p < P; ++p)
    gt.comp(0)[p] = 1.0 + 0.1 * std::cos(2.0 * pi * lat.coord(p, 0));
  MetricField g = MetricField::make(lat, gt);
  ChernPackage cp = compute_package(g);
  std::vector<cplx> lg(P), d1(P), d2(P);
  for (std::size_t p = 0; p < P; ++p) lg[p] = std::log(gt.comp(0)[p].real());
  lat.partial(0, Kind::Antiholomorphic, lg.data(), d1.data());
  lat.partial(0, Kind::Holomorphic, d1.data(), d2.data());
  double resid = 0.0;
  for (std::size_t p = 0; p < P; ++p) resid = std::max(resid, std::abs(cp.S.comp(0)[p] + d2[p]));
  REQUIRE(resid <= 1e-10);
}

TEST_CASE("two curvature assembly paths agree") {
  Lattice lat(2, 16, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 77, 0.1, 1);
  ChernPackage cp = compute_package(g, CurvaturePath::DGamma);
  REQUIRE(cp.s_selfcheck <= 1e-10);
  ChernPackage ce = compute_package(g, CurvaturePath::Expanded);
  TensorField diff = cp.Om;
  diff -= ce.Om;
  REQUIRE(diff.sup_abs() <= 1e-10);
  // wider band: the paths separate only at the aliasing level
  MetricField g2 = hermitian_perturbation_metric(lat, 78, 0.1, 2);
  REQUIRE(compute_package(g2, CurvaturePath::DGamma).s_selfcheck <= 1e-6);
}

TEST_CASE("torsion cyclic identity") {
  Lattice lat(2, 16, Backend::Spectral);
  SECTION("flat") {
    REQUIRE(check_torsion_cyclic(compute_package(flat_metric(lat))) <= 1e-13);
  }
  SECTION("Kaehler metric: both sides vanish") {
    MetricField g = kahler_potential_metric(lat, 9, 0.1, 2);
    REQUIRE(check_torsion_cyclic(compute_package(g)) <= 1e-10);
  }
  SECTION("random n=2 metric") {
    // for n=2 every cyclic triple repeats an index, so both sides cancel
    // exactly and the residual probes only the antisymmetry bookkeeping
    MetricField g16 = hermitian_perturbation_metric(lat, 13, 0.08, 2);
    REQUIRE(check_torsion_cyclic(compute_package(g16)) <= 1e-12);
  }
  SECTION("random n=3 metric with grid refinement") {
    Lattice lat8(3, 8, Backend::Spectral);
    MetricField g8 = hermitian_perturbation_metric(lat8, 13, 0.06, 1);
    const double r8 = check_torsion_cyclic(compute_package(g8));
    Lattice lat12(3, 12, Backend::Spectral);
    MetricField g12 = hermitian_perturbation_metric(lat12, 13, 0.06, 1);
    const double r12 = check_torsion_cyclic(compute_package(g12));
    REQUIRE(r12 <= 1e-8);
    REQUIRE(r12 < r8);
  }
}

TEST_CASE("Bianchi identities") {
  Lattice lat(2, 16, Backend::Spectral);
  SECTION("flat") {
    auto [r1, r2] = check_bianchi(compute_package(flat_metric(lat)));
    REQUIRE(r1 <= 1e-12);
    REQUIRE(r2 <= 1e-12);
  }
  SECTION("Kaehler: first identity is the (i,k) symmetry of Omega") {
    MetricField g = kahler_potential_metric(lat, 21, 0.1, 2);
    auto [r1, r2] = check_bianchi(compute_package(g));
    REQUIRE(r1 <= 1e-9);
    REQUIRE(r2 <= 1e-8);
  }
  SECTION("random metric with refinement") {
    MetricField g16 = hermitian_perturbation_metric(lat, 23, 0.08, 2);
    auto [r1, r2] = check_bianchi(compute_package(g16));
    REQUIRE(r1 <= 1e-8);
    REQUIRE(r2 <= 1e-8);
    Lattice lat24(2, 24, Backend::Spectral);
    auto [s1, s2] = check_bianchi(compute_package(hermitian_perturbation_metric(lat24, 23, 0.08, 2)));
    REQUIRE(s1 < r1);
    REQUIRE(s2 < r2);
  }
}

TEST_CASE("P - S relation") {
  Lattice lat(2, 16, Backend::Spectral);
  SECTION("flat") { REQUIRE(check_ps_relation(compute_package(flat_metric(lat))) <= 1e-12); }
  SECTION("Kaehler: P = S directly") {
    MetricField g = kahler_potential_metric(lat, 31, 0.1, 2);
    ChernPackage cp = compute_package(g);
    TensorField diff = cp.P;
    diff -= cp.S;
    REQUIRE(diff.sup_abs() <= 1e-9);
    REQUIRE(check_ps_relation(cp) <= 1e-9);
  }
  SECTION("random metric") {
    MetricField g = hermitian_perturbation_metric(lat, 33, 0.08, 2);
    REQUIRE(check_ps_relation(compute_package(g)) <= 1e-8);
  }
}

TEST_CASE("identity residuals decay at the FD4 order under refinement") {
  auto resid = [&](int N) {
    Lattice lat(2, N, Backend::CentralFD4);
    MetricField g = hermitian_perturbation_metric(lat, 47, 0.08, 1);
    return check_ps_relation(compute_package(g));
  };
  const double r16 = resid(16), r32 = resid(32);
  REQUIRE(std::log2(r16 / r32) >= 3.7);
}

TEST_CASE("Kaehler detection: closed Kaehler form implies vanishing torsion") {
  Lattice lat(2, 16, Backend::Spectral);
  MetricField g = kahler_potential_metric(lat, 55, 0.1, 2);
  ChernPackage cp = compute_package(g);
  REQUIRE(kahler_defect(cp) <= 1e-10);
  REQUIRE(sup_norm(cp.T_low, g) <= 1e-10);
}

TEST_CASE("Chern Laplacian on scalars over the flat metric") {
  // g flat, f = sin(2 pi x1):  g^{1 1bar} d_1 d_1bar f = -pi^2 f
  Lattice lat(1, 16, Backend::Spectral);
  MetricField g = flat_metric(lat);
  ChernPackage cp = compute_package(g);
  TensorField f(lat, IndexSig{});
  for (std::size_t p = 0; p < lat.points(); ++p)
    f.comp(0)[p] = std::sin(2.0 * pi * lat.coord(p, 0));
  TensorField lap = chern_laplacian(f, cp);
  double resid = 0.0;
  for (std::size_t p = 0; p < lat.points(); ++p)
    resid = std::max(resid, std::abs(lap.comp(0)[p] + pi * pi * f.comp(0)[p]));
  REQUIRE(resid <= 1e-10);

  TensorField c(lat, IndexSig{});
  for (std::size_t p = 0; p < lat.points(); ++p) c.comp(0)[p] = 4.2;
  REQUIRE(chern_laplacian(c, cp).sup_abs() <= 1e-12);
}

TEST_CASE("Chern Laplacian product rule on scalars") {
  Lattice lat(2, 12, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 61, 0.1, 1);
  ChernPackage cp = compute_package(g);
  Rng rng(62);
  TensorField f(lat, IndexSig{}), h(lat, IndexSig{});
  {
    auto a = random_real_scalar(lat, rng, 1);
    auto b = random_real_scalar(lat, rng, 1);
    for (std::size_t p = 0; p < lat.points(); ++p) {
      f.comp(0)[p] = a[p];
      h.comp(0)[p] = b[p];
    }
  }
  // Delta(f h) = f Delta h + h Delta f + g^{m nbar}(d_m f d_nbar h + d_m h d_nbar f)
  TensorField fh(lat, IndexSig{});
  for (std::size_t p = 0; p < lat.points(); ++p) fh.comp(0)[p] = f.comp(0)[p] * h.comp(0)[p];
  TensorField lhs = chern_laplacian(fh, cp);
  TensorField lf = chern_laplacian(f, cp);
  TensorField lh = chern_laplacian(h, cp);
  std::vector<cplx> cross(lat.points(), cplx{});
  for (int m = 0; m < 2; ++m) {
    auto dmf = lat.partial(m, Kind::Holomorphic, std::vector<cplx>(f.comp(0), f.comp(0) + lat.points()));
    auto dmh = lat.partial(m, Kind::Holomorphic, std::vector<cplx>(h.comp(0), h.comp(0) + lat.points()));
    for (int nn = 0; nn < 2; ++nn) {
      auto dnf = lat.partial(nn, Kind::Antiholomorphic, std::vector<cplx>(f.comp(0), f.comp(0) + lat.points()));
      auto dnh = lat.partial(nn, Kind::Antiholomorphic, std::vector<cplx>(h.comp(0), h.comp(0) + lat.points()));
      for (std::size_t p = 0; p < lat.points(); ++p)
        cross[p] += cp.g.gic(m, nn)[p] * (dmf[p] * dnh[p] + dmh[p] * dnf[p]);
    }
  }
  double resid = 0.0;
  for (std::size_t p = 0; p < lat.points(); ++p) {
    const cplx want = f.comp(0)[p] * lh.comp(0)[p] + h.comp(0)[p] * lf.comp(0)[p] + cross[p];
    resid = std::max(resid, std::abs(lhs.comp(0)[p] - want));
  }
  REQUIRE(resid <= 1e-9);
}

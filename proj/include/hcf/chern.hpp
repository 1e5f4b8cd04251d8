#pragma once

// Chern connection, torsion, curvature and their traces, computed from a
// metric in one pass, plus the structural identity checks (torsion cyclic
// identity, both Bianchi identities, the P-S relation).
//
// Index conventions (all component arrays are base-n, slot 0 slowest):
//   dg[l][i][j]     = d_l g_{i jbar}
//   dd[l][m][i][j]  = d_l d_{mbar} g_{i jbar}
//   gamma[i][k][l]  = Gamma_{i k}^l = g^{l mbar} d_i g_{k mbar}
//   T_low[i][j][k]  = T_{i j kbar} = d_i g_{j kbar} - d_j g_{i kbar}
//   Om[i][j][k][l]  = Omega_{i jbar k lbar}
// Antiholomorphic first derivatives come from conjugation:
//   d_{lbar} g_{i jbar} = conj(dg[l][j][i]).

#include "hcf/tensor.hpp"

namespace hcf {

// Which assembly builds the stored curvature.  DGamma lowers -d_{jbar}
// Gamma_{i k}^l (the route used in the curvature-trace lemma's proof);
// Expanded uses the algebraically equivalent two-term second-derivative
// form directly.  The two differ only by discretization error; comparing
// them is an index-convention cross-check.
enum class CurvaturePath { DGamma, Expanded };

struct ChernPackage {
  MetricField g;
  TensorField dg;      // coordinate object, storage sig (HL,HL,AL)
  TensorField dd;      // coordinate object, storage sig (HL,AL,HL,AL)
  TensorField gamma;   // (HL,HL,HU)
  TensorField T_low;   // (HL,HL,AL)
  TensorField T_up;    // (HL,HL,HU)
  TensorField w;       // (HL)
  TensorField Om;      // (HL,AL,HL,AL)
  TensorField S;       // (HL,AL), trace of Om over the first pair
  TensorField P;       // (HL,AL), trace of Om over the second pair
  std::vector<double> s;        // scalar Chern curvature
  std::vector<double> Tnorm2;   // |T|^2
  std::vector<double> wnorm2;   // |w|^2
  double s_selfcheck = 0.0;     // sup |S - S(two-term formula)|

  const Lattice& lattice() const { return g.lattice(); }
};

inline ChernPackage compute_package(const MetricField& g, CurvaturePath path = CurvaturePath::DGamma) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  const std::size_t n2 = sn * sn, n3 = n2 * sn, n4 = n3 * sn;

  ChernPackage cp{g,
                  TensorField(lat, {HL, HL, AL}),
                  TensorField(lat, {HL, AL, HL, AL}),
                  TensorField(lat, {HL, HL, HU}),
                  TensorField(lat, {HL, HL, AL}),
                  TensorField(lat, {HL, HL, HU}),
                  TensorField(lat, {HL}),
                  TensorField(lat, {HL, AL, HL, AL}),
                  TensorField(lat, {HL, AL}),
                  TensorField(lat, {HL, AL}),
                  {},
                  {},
                  {}};
  cp.s.assign(P, 0.0);
  cp.Tnorm2.assign(P, 0.0);
  cp.wnorm2.assign(P, 0.0);

  // first derivatives d_l g_{i jbar}
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        lat.partial(l, Kind::Holomorphic, g.gc(i, j),
                    cp.dg.comp((static_cast<std::size_t>(l) * sn + i) * sn + j));

  // mixed second derivatives d_l d_{mbar} g_{i jbar} = d_l conj(dg[m][j][i])
  {
    std::vector<cplx> tmp(P);
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const cplx* src = cp.dg.comp((static_cast<std::size_t>(m) * sn + j) * sn + i);
          for (std::size_t p = 0; p < P; ++p) tmp[p] = std::conj(src[p]);
          for (int l = 0; l < n; ++l)
            lat.partial(l, Kind::Holomorphic, tmp.data(),
                        cp.dd.comp(((static_cast<std::size_t>(l) * sn + m) * sn + i) * sn + j));
        }
  }

  std::vector<const cplx*> giptr(n2), dgptr(n3), ddptr(n4);
  for (std::size_t c = 0; c < n2; ++c) giptr[c] = g.ginv().comp(c);
  for (std::size_t c = 0; c < n3; ++c) dgptr[c] = cp.dg.comp(c);
  for (std::size_t c = 0; c < n4; ++c) ddptr[c] = cp.dd.comp(c);

  TensorField S2(lat, {HL, AL});  // two-term formula for S

  cplx giv[9], dgv[27], Tl[27], Tu[27], Ga[27], wv[3];
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < n2; ++c) giv[c] = giptr[c][p];
    for (std::size_t c = 0; c < n3; ++c) dgv[c] = dgptr[c][p];
    auto DG = [&](int l, int i, int j) { return dgv[(l * n + i) * n + j]; };
    auto GI = [&](int i, int j) { return giv[i * n + j]; };
    auto DD = [&](int l, int m, int i, int j) {
      return ddptr[((static_cast<std::size_t>(l) * sn + m) * sn + i) * sn + j][p];
    };

    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          cplx acc{};
          for (int m = 0; m < n; ++m) acc += GI(l, m) * DG(i, k, m);
          Ga[(i * n + k) * n + l] = acc;
        }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          Tl[(i * n + j) * n + k] = DG(i, j, k) - DG(j, i, k);
          Tu[(i * n + j) * n + k] = Ga[(i * n + j) * n + k] - Ga[(j * n + i) * n + k];
        }
    for (int i = 0; i < n; ++i) {
      cplx acc{};
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) acc += GI(j, l) * Tl[(i * n + j) * n + l];
      wv[i] = acc;
    }

    for (std::size_t c = 0; c < n3; ++c) {
      cp.gamma.comp(c)[p] = Ga[c];
      cp.T_low.comp(c)[p] = Tl[c];
      cp.T_up.comp(c)[p] = Tu[c];
    }
    for (int i = 0; i < n; ++i) cp.w.comp(i)[p] = wv[i];

    // |T|^2 = g^{i pbar} g^{j qbar} g^{r kbar} T_{i j kbar} conj(T_{p q rbar})
    double tn = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (int k = 0; k < n; ++k) {
          cplx acc{};
          for (int pp = 0; pp < n; ++pp)
            for (int q = 0; q < n; ++q) {
              if (pp == q) continue;
              for (int r = 0; r < n; ++r)
                acc += GI(i, pp) * GI(j, q) * GI(r, k) * std::conj(Tl[(pp * n + q) * n + r]);
            }
          tn += (Tl[(i * n + j) * n + k] * acc).real();
        }
      }
    cp.Tnorm2[p] = tn;
    double wn = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) wn += (GI(i, j) * wv[i] * std::conj(wv[j])).real();
    cp.wnorm2[p] = wn;

    // S_{j kbar} = -g^{l mbar} g_{j kbar, l mbar}
    //              + g^{l mbar} g^{p qbar} g_{p kbar, mbar} g_{j qbar, l}
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        cplx acc{};
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m) {
            acc -= GI(l, m) * DD(l, m, j, k);
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q)
                acc += GI(l, m) * GI(pp, q) * std::conj(DG(m, k, pp)) * DG(l, j, q);
          }
        S2.comp(static_cast<std::size_t>(j) * sn + k)[p] = acc;
      }

    if (path == CurvaturePath::Expanded) {
      // Omega_{i jbar k lbar} = -g_{k lbar, i jbar} + g^{p qbar} g_{p lbar, jbar} g_{k qbar, i}
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              cplx acc = -DD(i, j, k, l);
              for (int q = 0; q < n; ++q)
                for (int r = 0; r < n; ++r)
                  acc += GI(q, r) * std::conj(DG(j, l, q)) * DG(i, k, r);
              cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + l)[p] = acc;
            }
    }
  }

  if (path == CurvaturePath::DGamma) {
    // Om = lower(-d_{jbar} Gamma_{i k}^m)
    std::vector<cplx> dgam(P);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          const cplx* gam = cp.gamma.comp((static_cast<std::size_t>(i) * sn + k) * sn + m);
          for (int j = 0; j < n; ++j) {
            lat.partial(j, Kind::Antiholomorphic, gam, dgam.data());
            for (int l = 0; l < n; ++l) {
              cplx* dst = cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + l);
              const cplx* glow = g.gc(m, l);
              if (m == 0)
                for (std::size_t p = 0; p < P; ++p) dst[p] = -dgam[p] * glow[p];
              else
                for (std::size_t p = 0; p < P; ++p) dst[p] -= dgam[p] * glow[p];
            }
          }
        }
  }

  // S = trace of Om over the first index pair; compare with two-term formula
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      cplx* dst = cp.S.comp(static_cast<std::size_t>(j) * sn + k);
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m) {
          const cplx* gi = g.gic(l, m);
          const cplx* om = cp.Om.comp(((static_cast<std::size_t>(l) * sn + m) * sn + j) * sn + k);
          if (l == 0 && m == 0)
            for (std::size_t p = 0; p < P; ++p) dst[p] = gi[p] * om[p];
          else
            for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * om[p];
        }
    }
  {
    double diff = 0.0;
    for (std::size_t c = 0; c < n2; ++c) {
      const cplx* a = cp.S.comp(c);
      const cplx* b = S2.comp(c);
      for (std::size_t p = 0; p < P; ++p) diff = std::max(diff, std::abs(a[p] - b[p]));
    }
    cp.s_selfcheck = diff;
  }

  // P trace and scalar curvature
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx* dst = cp.P.comp(static_cast<std::size_t>(i) * sn + j);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const cplx* gi = g.gic(k, l);
          const cplx* om = cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + l);
          if (k == 0 && l == 0)
            for (std::size_t p = 0; p < P; ++p) dst[p] = gi[p] * om[p];
          else
            for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * om[p];
        }
    }
  for (std::size_t p = 0; p < P; ++p) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        acc += (g.gic(i, j)[p] * cp.S.comp(static_cast<std::size_t>(i) * sn + j)[p]).real();
    cp.s[p] = acc;
  }
  return cp;
}

// Covariant derivative against a package's connection.
inline TensorField cd(const ChernPackage& cp, const TensorField& t, Kind kind, int dir) {
  return covariant_derivative(t, cp.g, cp.gamma, kind, dir);
}

// Chern Laplacian Delta = g^{m nbar} nabla_m nabla_{nbar}.
inline TensorField chern_laplacian(const TensorField& t, const ChernPackage& cp) {
  const Lattice& lat = t.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, t.sig());
  for (int nn = 0; nn < n; ++nn) {
    TensorField u = cd(cp, t, Kind::Antiholomorphic, nn);
    for (int m = 0; m < n; ++m) {
      TensorField v = cd(cp, u, Kind::Holomorphic, m);
      const cplx* gi = cp.g.gic(m, nn);
      for (std::size_t c = 0; c < t.comps(); ++c) {
        cplx* dst = out.comp(c);
        const cplx* src = v.comp(c);
        for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * src[p];
      }
    }
  }
  return out;
}

// nabla_i T_{j k lbar} + nabla_k T_{i j lbar} + nabla_j T_{k i lbar}
//   = T_{ij}^p T_{k p lbar} + T_{jk}^p T_{i p lbar} + T_{ki}^p T_{j p lbar}
inline double check_torsion_cyclic(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  std::vector<TensorField> dT;
  for (int d = 0; d < n; ++d) dT.push_back(cd(cp, cp.T_low, Kind::Holomorphic, d));
  double resid = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (std::size_t p = 0; p < P; ++p) {
            cplx lhs = dT[i].at({j, k, l}, p) + dT[k].at({i, j, l}, p) + dT[j].at({k, i, l}, p);
            cplx rhs{};
            for (int q = 0; q < n; ++q)
              rhs += cp.T_up.at({i, j, q}, p) * cp.T_low.at({k, q, l}, p) +
                     cp.T_up.at({j, k, q}, p) * cp.T_low.at({i, q, l}, p) +
                     cp.T_up.at({k, i, q}, p) * cp.T_low.at({j, q, l}, p);
            resid = std::max(resid, std::abs(lhs - rhs));
          }
  return resid;
}

// First identity in components: Omega_{i jbar k lbar} - Omega_{k jbar i lbar}
//   = nabla_{jbar} T_{k i lbar};
// second: nabla_k Omega_{i jbar a bbar} - nabla_i Omega_{k jbar a bbar}
//   + T_{ki}^p Omega_{p jbar a bbar} = 0.
inline std::pair<double, double> check_bianchi(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  double r1 = 0.0, r2 = 0.0;
  std::vector<TensorField> dTb, dOm;
  for (int d = 0; d < n; ++d) dTb.push_back(cd(cp, cp.T_low, Kind::Antiholomorphic, d));
  for (int d = 0; d < n; ++d) dOm.push_back(cd(cp, cp.Om, Kind::Holomorphic, d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (std::size_t p = 0; p < P; ++p) {
            cplx lhs = cp.Om.at({i, j, k, l}, p) - cp.Om.at({k, j, i, l}, p);
            r1 = std::max(r1, std::abs(lhs - dTb[j].at({k, i, l}, p)));
          }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (std::size_t p = 0; p < P; ++p) {
              cplx v = dOm[k].at({i, j, a, b}, p) - dOm[i].at({k, j, a, b}, p);
              for (int q = 0; q < n; ++q) v += cp.T_up.at({k, i, q}, p) * cp.Om.at({q, j, a, b}, p);
              r2 = std::max(r2, std::abs(v));
            }
  return {r1, r2};
}

// P_{i jbar} - S_{i jbar} = g^{k lbar} ( nabla_{lbar} T_{k i jbar} + nabla_i T_{lbar jbar k} )
inline double check_ps_relation(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  std::vector<TensorField> dTb;
  for (int d = 0; d < n; ++d) dTb.push_back(cd(cp, cp.T_low, Kind::Antiholomorphic, d));
  TensorField Tbar = cp.T_low.conjugate();  // T_{ibar jbar k}, sig (AL,AL,HL)
  std::vector<TensorField> dTbar;
  for (int d = 0; d < n; ++d) dTbar.push_back(cd(cp, Tbar, Kind::Holomorphic, d));
  double resid = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (std::size_t p = 0; p < P; ++p) {
        cplx rhs{};
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            rhs += cp.g.gic(k, l)[p] * (dTb[l].at({k, i, j}, p) + dTbar[i].at({l, j, k}, p));
        resid = std::max(resid, std::abs(cp.P.at({i, j}, p) - cp.S.at({i, j}, p) - rhs));
      }
  return resid;
}

// sup of the d-omega coefficients; zero iff the metric is Kaehler.
inline double kahler_defect(const ChernPackage& cp) {
  return 0.5 * cp.T_low.sup_abs();
}

}  // namespace hcf

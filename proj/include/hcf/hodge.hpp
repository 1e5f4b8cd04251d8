#pragma once

// Form-side operators: the coordinate formulas for d*_g omega,
// dbar*_g omega, d d*_g omega, d*_g d omega, (i/2) d dbar log det g, the
// combination Psi, and the numerical checks of the Hodge decomposition of
// S(., J.) and of the form-side flow equation.
//
// Forms are carried as coefficient fields in the dz/dzbar basis with
// omega = (i/2) g_{i jbar} dz^i wedge dzbar^j.  Each operator below is its
// displayed coordinate formula; the discrete-adjointness test restores
// trust in the transcription.

#include "hcf/energy.hpp"

namespace hcf {

namespace hdetail {
inline cplx dgv(const ChernPackage& cp, int l, int i, int j, std::size_t p) {
  const int n = cp.lattice().n();
  return cp.dg.comp((static_cast<std::size_t>(l) * n + i) * n + j)[p];
}
inline cplx ddv(const ChernPackage& cp, int l, int m, int i, int j, std::size_t p) {
  const int n = cp.lattice().n();
  return cp.dd.comp(((static_cast<std::size_t>(l) * n + m) * n + i) * n + j)[p];
}
}  // namespace hdetail

// (d*_g omega)_{kbar} = (i/2) g^{p qbar} ( d_{qbar} g_{p kbar} - d_{kbar} g_{p qbar} )
inline TensorField del_star_omega(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {AL});
  const cplx ih(0.0, 0.5);
  for (int k = 0; k < n; ++k) {
    cplx* dst = out.comp(k);
    for (std::size_t p = 0; p < P; ++p) {
      cplx acc{};
      for (int pp = 0; pp < n; ++pp)
        for (int q = 0; q < n; ++q)
          acc += cp.g.gic(pp, q)[p] *
                 (std::conj(hdetail::dgv(cp, q, k, pp, p)) - std::conj(hdetail::dgv(cp, k, q, pp, p)));
      dst[p] = ih * acc;
    }
  }
  return out;
}

// (dbar*_g omega)_j = (i/2) g^{p qbar} ( d_p g_{j qbar} - d_j g_{p qbar} )
inline TensorField delbar_star_omega(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL});
  const cplx ih(0.0, 0.5);
  for (int j = 0; j < n; ++j) {
    cplx* dst = out.comp(j);
    for (std::size_t p = 0; p < P; ++p) {
      cplx acc{};
      for (int pp = 0; pp < n; ++pp)
        for (int q = 0; q < n; ++q)
          acc += cp.g.gic(pp, q)[p] * (hdetail::dgv(cp, pp, j, q, p) - hdetail::dgv(cp, j, pp, q, p));
      dst[p] = ih * acc;
    }
  }
  return out;
}

// (d d*_g omega)_{j kbar}
inline TensorField del_delstar_omega(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL, AL});
  const cplx ih(0.0, 0.5);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      cplx* dst = out.comp(static_cast<std::size_t>(j) * n + k);
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q) {
            acc += cp.g.gic(pp, q)[p] *
                   (hdetail::ddv(cp, j, q, pp, k, p) - hdetail::ddv(cp, j, k, pp, q, p));
            for (int r = 0; r < n; ++r)
              for (int s = 0; s < n; ++s)
                acc += cp.g.gic(pp, q)[p] * cp.g.gic(r, s)[p] * hdetail::dgv(cp, j, r, q, p) *
                       (std::conj(hdetail::dgv(cp, k, s, pp, p)) - std::conj(hdetail::dgv(cp, s, k, pp, p)));
          }
        dst[p] = ih * acc;
      }
    }
  return out;
}

// (d*_g d omega)_{j kbar}
inline TensorField delstar_del_omega(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL, AL});
  const cplx ih(0.0, 0.5);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      cplx* dst = out.comp(static_cast<std::size_t>(j) * n + k);
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q) {
            const cplx gipq = cp.g.gic(pp, q)[p];
            acc += gipq * (hdetail::ddv(cp, j, q, pp, k, p) - hdetail::ddv(cp, pp, q, j, k, p));
            for (int r = 0; r < n; ++r)
              for (int s = 0; s < n; ++s) {
                const cplx girs = cp.g.gic(r, s)[p];
                acc += gipq * girs *
                       (std::conj(hdetail::dgv(cp, q, s, pp, p)) - std::conj(hdetail::dgv(cp, s, q, pp, p))) *
                       (hdetail::dgv(cp, r, j, k, p) - hdetail::dgv(cp, j, r, k, p));
                acc += gipq * girs * std::conj(hdetail::dgv(cp, s, q, j, p)) *
                       (hdetail::dgv(cp, r, pp, k, p) - hdetail::dgv(cp, pp, r, k, p));
                acc += gipq * girs * std::conj(hdetail::dgv(cp, s, k, pp, p)) *
                       (hdetail::dgv(cp, r, j, q, p) - hdetail::dgv(cp, j, r, q, p));
              }
          }
        dst[p] = ih * acc;
      }
    }
  return out;
}

// ((i/2) d dbar log det g)_{j kbar}
inline TensorField ddbar_logdet_form(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL, AL});
  const cplx ih(0.0, 0.5);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      cplx* dst = out.comp(static_cast<std::size_t>(j) * n + k);
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q) {
            acc += cp.g.gic(pp, q)[p] * hdetail::ddv(cp, j, k, pp, q, p);
            for (int r = 0; r < n; ++r)
              for (int s = 0; s < n; ++s)
                acc -= cp.g.gic(pp, r)[p] * cp.g.gic(s, q)[p] * hdetail::dgv(cp, j, s, r, p) *
                       std::conj(hdetail::dgv(cp, k, q, pp, p));
          }
        dst[p] = ih * acc;
      }
    }
  return out;
}

// Psi(omega) = d*_g d omega - d d*_g omega - (i/2) d dbar log det g
//              - 2 i ( dbar*_g omega  .|  dbar omega )
// with the contraction realized as the single-index metric pairing
//   g^{p qbar} (dbar*_g omega)_p (dbar omega)_{qbar j kbar},
//   (dbar omega)_{qbar j kbar} = (i/2)( d_{qbar} g_{j kbar} - d_{kbar} g_{j qbar} ).
inline TensorField psi(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out = delstar_del_omega(cp);
  out -= del_delstar_omega(cp);
  out -= ddbar_logdet_form(cp);
  TensorField dbs = delbar_star_omega(cp);
  const cplx ih(0.0, 0.5);
  const cplx m2i(0.0, -2.0);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      cplx* dst = out.comp(static_cast<std::size_t>(j) * n + k);
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int pp = 0; pp < n; ++pp)
          for (int q = 0; q < n; ++q)
            acc += cp.g.gic(pp, q)[p] * dbs.comp(pp)[p] * ih *
                   (std::conj(hdetail::dgv(cp, q, k, j, p)) - std::conj(hdetail::dgv(cp, k, q, j, p)));
        dst[p] += m2i * acc;
      }
    }
  return out;
}

// Coefficient of Q4 in the Hodge decomposition of Xi = S(., J.).  Expanding
// the four operator formulas in general coordinates and cancelling the
// symmetric first-derivative parts leaves
//   Psi = Xi + (i/2)( q4_coefficient * Q4 + 1/2 Q2 ),
// with q4_coefficient = -2; the opposite sign fails by exactly 2 sup|Q4|
// on torsionful metrics (see the sign-mutation test).
inline constexpr double hodgedecomp_q4_coefficient = -2.0;

// sup | Psi - (i/2)(q4_coeff Q4 + 1/2 Q2) - (i/2) S |
inline double check_hodgedecomp(const ChernPackage& cp, const QPackage& qp,
                                double q4_coeff = hodgedecomp_q4_coefficient) {
  const Lattice& lat = cp.lattice();
  const std::size_t P = lat.points();
  TensorField psi_f = psi(cp);
  const cplx ih(0.0, 0.5);
  double resid = 0.0;
  for (std::size_t c = 0; c < psi_f.comps(); ++c) {
    const cplx* pf = psi_f.comp(c);
    const cplx* q2 = qp.Q2.comp(c);
    const cplx* q4 = qp.Q4.comp(c);
    const cplx* s = cp.S.comp(c);
    for (std::size_t p = 0; p < P; ++p)
      resid = std::max(resid, std::abs(pf[p] - ih * (q4_coeff * q4[p] + 0.5 * q2[p]) - ih * s[p]));
  }
  return resid;
}

// Form side of the flow equation:
//   d omega / dt = -Psi + (i/2)(1/2 Q1 + 1/4 Q2 - 1/2 Q3 + (1 + q4_coeff) Q4)
// equals (i/2)(-S + Q); with q4_coeff = -2 the Q4 weight is -1.
inline double check_hcf_form_equation(const ChernPackage& cp, const QPackage& qp,
                                      double q4_coeff = hodgedecomp_q4_coefficient) {
  const Lattice& lat = cp.lattice();
  const std::size_t P = lat.points();
  TensorField psi_f = psi(cp);
  const cplx ih(0.0, 0.5);
  double resid = 0.0;
  for (std::size_t c = 0; c < psi_f.comps(); ++c) {
    const cplx* pf = psi_f.comp(c);
    const cplx* q1 = qp.Q1.comp(c);
    const cplx* q2 = qp.Q2.comp(c);
    const cplx* q3 = qp.Q3.comp(c);
    const cplx* q4 = qp.Q4.comp(c);
    const cplx* s = cp.S.comp(c);
    const cplx* q = qp.Q.comp(c);
    for (std::size_t p = 0; p < P; ++p) {
      const cplx lhs =
          -pf[p] + ih * (0.5 * q1[p] + 0.25 * q2[p] - 0.5 * q3[p] + (1.0 + q4_coeff) * q4[p]);
      const cplx rhs = ih * (-s[p] + q[p]);
      resid = std::max(resid, std::abs(lhs - rhs));
    }
  }
  return resid;
}

// d on (0,1)-forms: (d beta)_{j kbar} = d_j beta_{kbar}
inline TensorField del_01(const TensorField& beta) {
  const Lattice& lat = beta.lattice();
  const int n = lat.n();
  TensorField out(lat, {HL, AL});
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      lat.partial(j, Kind::Holomorphic, beta.comp(k), out.comp(static_cast<std::size_t>(j) * n + k));
  return out;
}

// L2-adjoint of del_01 with respect to the metric pairings and dV = det g:
// (d*_g alpha)_{qbar} = -(1/det g) g_{l qbar} sum_k d_{kbar}( det g *
//                        g^{i kbar} g^{l jbar} alpha_{i jbar} )
inline TensorField del_star_11(const ChernPackage& cp, const TensorField& alpha) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {AL});
  const std::vector<double>& det = cp.g.det();
  std::vector<cplx> F(P), dF(P);
  std::vector<std::vector<cplx>> G(n, std::vector<cplx>(P, cplx{}));
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) {
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            acc += cp.g.gic(i, k)[p] * cp.g.gic(l, j)[p] *
                   alpha.comp(static_cast<std::size_t>(i) * n + j)[p];
        F[p] = det[p] * acc;
      }
      lat.partial(k, Kind::Antiholomorphic, F.data(), dF.data());
      for (std::size_t p = 0; p < P; ++p) G[l][p] += dF[p];
    }
  for (int q = 0; q < n; ++q) {
    cplx* dst = out.comp(q);
    for (std::size_t p = 0; p < P; ++p) {
      cplx acc{};
      for (int l = 0; l < n; ++l) acc += cp.g.gc(l, q)[p] * G[l][p];
      dst[p] = -acc / det[p];
    }
  }
  return out;
}

// w_i = 2 i (dbar*_g omega)_i ; the proportionality constant is measured
// once and frozen here as a regression value.
inline constexpr cplx w_delbar_star_constant{0.0, 2.0};

inline double w_proportionality_residual(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField dbs = delbar_star_omega(cp);
  double resid = 0.0;
  for (int i = 0; i < n; ++i) {
    const cplx* a = cp.w.comp(i);
    const cplx* b = dbs.comp(i);
    for (std::size_t p = 0; p < P; ++p)
      resid = std::max(resid, std::abs(a[p] - w_delbar_star_constant * b[p]));
  }
  return resid;
}

// | (d* alpha, beta) - (alpha, d beta) | / max(|..|, |..|, eps)
inline double adjointness_residual(const ChernPackage& cp, const TensorField& alpha,
                                   const TensorField& beta) {
  const Lattice& lat = cp.lattice();
  TensorField ds = del_star_11(cp, alpha);
  TensorField db = del_01(beta);
  const cplx lhs = lat.integrate(inner_c(ds, beta, cp.g), cp.g.det());
  const cplx rhs = lat.integrate(inner_c(alpha, db, cp.g), cp.g.det());
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
  return std::abs(lhs - rhs) / scale;
}

}  // namespace hcf

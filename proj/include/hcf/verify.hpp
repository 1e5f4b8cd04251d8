#pragma once

// Finite-difference oracle harness: every variational identity (connection,
// curvature, scalar curvature, torsion, |T|^2, |w|^2, their integrals, and
// the functional gradient) is checked against central differences along
// g + a h, with optional Richardson extrapolation; the integration-by-parts
// lemmas are checked as quadrature identities; the evolution equations for
// Omega and T are checked against time-centered differences of short flow
// runs.  The suite collectively pins the inner-product and index
// conventions: a convention error anywhere makes at least one oracle fail
// at O(1).

#include "hcf/flow.hpp"
#include "hcf/hodge.hpp"

namespace hcf {

struct VariationProbe {
  MetricField g;
  TensorField h;  // Hermitian (1,1) direction field
  double da = 1e-4;
  bool richardson = true;
};

enum class VarQuantity {
  Connection,
  Curvature,
  ScalarS,
  Torsion,
  TNorm,
  WNorm,
  IntegralS,
  IntegralTNorm,
  IntegralWNorm,
  FunctionalF
};

inline const char* var_quantity_name(VarQuantity q) {
  switch (q) {
    case VarQuantity::Connection: return "connection";
    case VarQuantity::Curvature: return "curvature";
    case VarQuantity::ScalarS: return "scalar_s";
    case VarQuantity::Torsion: return "torsion";
    case VarQuantity::TNorm: return "T_norm";
    case VarQuantity::WNorm: return "w_norm";
    case VarQuantity::IntegralS: return "integral_s";
    case VarQuantity::IntegralTNorm: return "integral_Tnorm";
    case VarQuantity::IntegralWNorm: return "integral_wnorm";
    case VarQuantity::FunctionalF: return "functional_F";
  }
  return "?";
}

struct VarResult {
  double fd_value = 0.0;       // sup norm (fields) or value (scalars)
  double formula_value = 0.0;
  double rel_err = 0.0;
};

namespace vdetail {

// value of a quantity along the family: tensor components, a real scalar
// field, or a single scalar
struct QVal {
  int kind = 0;  // 0 tensor, 1 field, 2 scalar
  TensorField t;
  std::vector<double> f;
  double v = 0.0;
};

inline QVal lincomb(double a, const QVal& x, double b, const QVal& y) {
  QVal r = x;
  if (x.kind == 0) {
    for (std::size_t i = 0; i < r.t.raw().size(); ++i)
      r.t.raw()[i] = a * x.t.raw()[i] + b * y.t.raw()[i];
  } else if (x.kind == 1) {
    for (std::size_t i = 0; i < r.f.size(); ++i) r.f[i] = a * x.f[i] + b * y.f[i];
  } else {
    r.v = a * x.v + b * y.v;
  }
  return r;
}

inline double qsup(const QVal& x) {
  if (x.kind == 0) return x.t.sup_abs();
  if (x.kind == 1) {
    double m = 0.0;
    for (double v : x.f) m = std::max(m, std::abs(v));
    return m;
  }
  return std::abs(x.v);
}

inline double qdiff(const QVal& x, const QVal& y) {
  return qsup(lincomb(1.0, x, -1.0, y));
}

inline QVal eval_quantity_from(const ChernPackage& cp, VarQuantity q) {
  const MetricField& m = cp.g;
  QVal r;
  switch (q) {
    case VarQuantity::Connection:
      r.kind = 0;
      r.t = cp.gamma;
      return r;
    case VarQuantity::Curvature:
      r.kind = 0;
      r.t = cp.Om;
      return r;
    case VarQuantity::ScalarS:
      r.kind = 1;
      r.f = cp.s;
      return r;
    case VarQuantity::Torsion:
      r.kind = 0;
      r.t = cp.T_low;
      return r;
    case VarQuantity::TNorm:
      r.kind = 1;
      r.f = cp.Tnorm2;
      return r;
    case VarQuantity::WNorm:
      r.kind = 1;
      r.f = cp.wnorm2;
      return r;
    case VarQuantity::IntegralS:
      r.kind = 2;
      r.v = m.lattice().integrate(cp.s, m.det());
      return r;
    case VarQuantity::IntegralTNorm:
      r.kind = 2;
      r.v = m.lattice().integrate(cp.Tnorm2, m.det());
      return r;
    case VarQuantity::IntegralWNorm:
      r.kind = 2;
      r.v = m.lattice().integrate(cp.wnorm2, m.det());
      return r;
    case VarQuantity::FunctionalF: {
      QPackage qp = compute_q(cp);
      r.kind = 2;
      r.v = qp.F_value;
      return r;
    }
  }
  return r;
}

inline QVal eval_quantity(VarQuantity q, const MetricField& m) {
  ChernPackage cp = compute_package(m, CurvaturePath::Expanded);
  return eval_quantity_from(cp, q);
}

inline MetricField shifted(const MetricField& g, double a, const TensorField& h) {
  TensorField gm = g.g();
  for (std::size_t i = 0; i < gm.raw().size(); ++i) gm.raw()[i] += a * h.raw()[i];
  return MetricField::make(g.lattice(), gm);
}

// tr h = g^{i jbar} h_{i jbar}, real for Hermitian h
inline std::vector<double> trace_h(const MetricField& g, const TensorField& h) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  std::vector<double> tr(P, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx* gi = g.gic(i, j);
      const cplx* hv = h.comp(static_cast<std::size_t>(i) * n + j);
      for (std::size_t p = 0; p < P; ++p) tr[p] += (gi[p] * hv[p]).real();
    }
  return tr;
}

// scalar Chern Laplacian g^{m nbar} d_m d_{nbar} f of a real field
inline std::vector<double> scalar_laplacian(const MetricField& g, const std::vector<double>& f) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  std::vector<cplx> fc(P), d1(P), d2(P);
  for (std::size_t p = 0; p < P; ++p) fc[p] = f[p];
  std::vector<double> out(P, 0.0);
  for (int nn = 0; nn < n; ++nn) {
    lat.partial(nn, Kind::Antiholomorphic, fc.data(), d1.data());
    for (int m = 0; m < n; ++m) {
      lat.partial(m, Kind::Holomorphic, d1.data(), d2.data());
      const cplx* gi = g.gic(m, nn);
      for (std::size_t p = 0; p < P; ++p) out[p] += (gi[p] * d2[p]).real();
    }
  }
  return out;
}

// (nabla w)_{i jbar} = d_i conj(w_j)
inline TensorField grad_wbar(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL, AL});
  std::vector<cplx> wb(P);
  for (int j = 0; j < n; ++j) {
    const cplx* w = cp.w.comp(j);
    for (std::size_t p = 0; p < P; ++p) wb[p] = std::conj(w[p]);
    for (int i = 0; i < n; ++i)
      lat.partial(i, Kind::Holomorphic, wb.data(), out.comp(static_cast<std::size_t>(i) * n + j));
  }
  return out;
}

// (div T)_{i jbar} = g^{k lbar} nabla_{lbar} T_{k i jbar}
inline TensorField div_torsion(const ChernPackage& cp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField out(lat, {HL, AL});
  for (int l = 0; l < n; ++l) {
    TensorField dT = cd(cp, cp.T_low, Kind::Antiholomorphic, l);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx* dst = out.comp(static_cast<std::size_t>(i) * n + j);
        for (int k = 0; k < n; ++k) {
          const cplx* gi = cp.g.gic(k, l);
          const cplx* src = dT.comp((static_cast<std::size_t>(k) * n + i) * n + j);
          for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * src[p];
        }
      }
  }
  return out;
}

// analytic first variation (the lemma's right-hand side) at a = 0
inline QVal eval_formula(VarQuantity q, const MetricField& g, const TensorField& h) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  ChernPackage cp = compute_package(g, CurvaturePath::Expanded);

  std::vector<TensorField> DH;  // nabla_i h
  for (int d = 0; d < n; ++d) DH.push_back(cd(cp, h, Kind::Holomorphic, d));

  QVal r;
  switch (q) {
    case VarQuantity::Connection: {
      // d/da Gamma_{i k}^l = g^{l mbar} nabla_i h_{k mbar}
      r.kind = 0;
      r.t = TensorField(lat, {HL, HL, HU});
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            cplx* dst = r.t.comp((static_cast<std::size_t>(i) * sn + k) * sn + l);
            for (int m = 0; m < n; ++m) {
              const cplx* gi = g.gic(l, m);
              const cplx* src = DH[i].comp(static_cast<std::size_t>(k) * sn + m);
              for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * src[p];
            }
          }
      return r;
    }
    case VarQuantity::Curvature: {
      // d/da Omega_{i jbar k lbar} = Omega_{i jbar k}^m h_{m lbar}
      //                              - nabla_{jbar} nabla_i h_{k lbar}
      r.kind = 0;
      r.t = TensorField(lat, {HL, AL, HL, AL});
      for (int i = 0; i < n; ++i) {
        std::vector<TensorField> DDH;  // nabla_{jbar} nabla_i h
        for (int j = 0; j < n; ++j) DDH.push_back(cd(cp, DH[i], Kind::Antiholomorphic, j));
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              cplx* dst = r.t.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + l);
              const cplx* dd2 = DDH[j].comp(static_cast<std::size_t>(k) * sn + l);
              for (std::size_t p = 0; p < P; ++p) dst[p] = -dd2[p];
              for (int m = 0; m < n; ++m)
                for (int q2 = 0; q2 < n; ++q2) {
                  // Omega_{i jbar k}^m = g^{m qbar} Omega_{i jbar k qbar}
                  const cplx* gi = g.gic(m, q2);
                  const cplx* om = cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + q2);
                  const cplx* hv = h.comp(static_cast<std::size_t>(m) * sn + l);
                  for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * om[p] * hv[p];
                }
            }
      }
      return r;
    }
    case VarQuantity::ScalarS: {
      // d/da s = -Delta tr h - <h, S + div T - nabla w>
      r.kind = 1;
      auto tr = trace_h(g, h);
      auto lap = scalar_laplacian(g, tr);
      TensorField X = cp.S;
      X += div_torsion(cp);
      X -= grad_wbar(cp);
      auto pair = inner_c(h, X, g);
      r.f.assign(P, 0.0);
      for (std::size_t p = 0; p < P; ++p) r.f[p] = -lap[p] - pair[p].real();
      return r;
    }
    case VarQuantity::Torsion: {
      // d/da T_{i j kbar} = nabla_i h_{j kbar} - nabla_j h_{i kbar} + T_{ij}^m h_{m kbar}
      r.kind = 0;
      r.t = TensorField(lat, {HL, HL, AL});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            cplx* dst = r.t.comp((static_cast<std::size_t>(i) * sn + j) * sn + k);
            const cplx* a = DH[i].comp(static_cast<std::size_t>(j) * sn + k);
            const cplx* b = DH[j].comp(static_cast<std::size_t>(i) * sn + k);
            for (std::size_t p = 0; p < P; ++p) dst[p] = a[p] - b[p];
            for (int m = 0; m < n; ++m) {
              const cplx* tu = cp.T_up.comp((static_cast<std::size_t>(i) * sn + j) * sn + m);
              const cplx* hv = h.comp(static_cast<std::size_t>(m) * sn + k);
              for (std::size_t p = 0; p < P; ++p) dst[p] += tu[p] * hv[p];
            }
          }
      return r;
    }
    case VarQuantity::TNorm:
    case VarQuantity::IntegralTNorm: {
      // d/da |T|^2 = <h, -2 Q1 + Q2> + 4 <nabla h, T>, with
      // <nabla h, T> = Re g^{i jbar} g^{k lbar} g^{m nbar}
      //                   nabla_i h_{k nbar} conj(T_{j l mbar})
      QPackage qp = compute_q(cp);
      TensorField X = qp.Q2;
      X -= 2.0 * cplx(1.0, 0.0) * qp.Q1;
      auto pair = inner_c(h, X, g);
      std::vector<cplx> grad_pair(P, cplx{});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
              for (int m = 0; m < n; ++m)
                for (int nn = 0; nn < n; ++nn) {
                  const cplx* gi1 = g.gic(i, j);
                  const cplx* gi2 = g.gic(k, l);
                  const cplx* gi3 = g.gic(m, nn);
                  const cplx* dh = DH[i].comp(static_cast<std::size_t>(k) * sn + nn);
                  const cplx* tl = cp.T_low.comp((static_cast<std::size_t>(j) * sn + l) * sn + m);
                  for (std::size_t p = 0; p < P; ++p)
                    grad_pair[p] += gi1[p] * gi2[p] * gi3[p] * dh[p] * std::conj(tl[p]);
                }
      if (q == VarQuantity::TNorm) {
        r.kind = 1;
        r.f.assign(P, 0.0);
        for (std::size_t p = 0; p < P; ++p) r.f[p] = pair[p].real() + 4.0 * grad_pair[p].real();
        return r;
      }
      // integral version: <nabla h, T> integrates by parts to
      // -<h, div T + Q4> with the torsion-twisted divergence; assembled
      // here from nabla_i conj(T) and the w-weighted boundary term
      TensorField Tbar = cp.T_low.conjugate();
      std::vector<TensorField> DTbar;
      for (int d = 0; d < n; ++d) DTbar.push_back(cd(cp, Tbar, Kind::Holomorphic, d));
      std::vector<cplx> divw_pair(P, cplx{});
      for (int i = 0; i < n; ++i)
        for (int pp = 0; pp < n; ++pp)
          for (int j = 0; j < n; ++j)
            for (int q2 = 0; q2 < n; ++q2)
              for (int k = 0; k < n; ++k)
                for (int rr = 0; rr < n; ++rr) {
                  const cplx* gi1 = g.gic(i, pp);
                  const cplx* gi2 = g.gic(j, q2);
                  const cplx* gi3 = g.gic(rr, k);
                  const cplx* hv = h.comp(static_cast<std::size_t>(j) * sn + k);
                  const cplx* dtb = DTbar[i].comp((static_cast<std::size_t>(pp) * sn + q2) * sn + rr);
                  const cplx* tb = Tbar.comp((static_cast<std::size_t>(pp) * sn + q2) * sn + rr);
                  const cplx* wv = cp.w.comp(i);
                  for (std::size_t p = 0; p < P; ++p)
                    divw_pair[p] += gi1[p] * gi2[p] * gi3[p] * hv[p] * (dtb[p] + wv[p] * tb[p]);
                }
      auto tr = trace_h(g, h);
      std::vector<cplx> integrand(P);
      for (std::size_t p = 0; p < P; ++p)
        integrand[p] = pair[p] - 4.0 * divw_pair[p] + tr[p] * cp.Tnorm2[p];
      r.kind = 2;
      r.v = lat.integrate(integrand, g.det()).real();
      return r;
    }
    case VarQuantity::WNorm: {
      // d/da |w|^2 = -<h, Q3> + 2 <nabla tr h - div h, w>
      QPackage qp = compute_q(cp);
      auto pair = inner_c(h, qp.Q3, g);
      auto tr = trace_h(g, h);
      std::vector<cplx> trc(P), dtr(P);
      for (std::size_t p = 0; p < P; ++p) trc[p] = tr[p];
      std::vector<std::vector<cplx>> alpha(n, std::vector<cplx>(P, cplx{}));
      for (int i = 0; i < n; ++i) {
        lat.partial(i, Kind::Holomorphic, trc.data(), dtr.data());
        for (std::size_t p = 0; p < P; ++p) alpha[i][p] = dtr[p];
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) {
            const cplx* gi = g.gic(j, k);
            const cplx* dh = DH[j].comp(static_cast<std::size_t>(i) * sn + k);
            for (std::size_t p = 0; p < P; ++p) alpha[i][p] -= gi[p] * dh[p];
          }
      }
      r.kind = 1;
      r.f.assign(P, 0.0);
      for (std::size_t p = 0; p < P; ++p) {
        cplx aw{};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) aw += g.gic(i, j)[p] * alpha[i][p] * std::conj(cp.w.comp(j)[p]);
        r.f[p] = -pair[p].real() + 2.0 * aw.real();
      }
      return r;
    }
    case VarQuantity::IntegralS: {
      // d/da int s dV = int [ <h, -S - div T + nabla w>
      //                       + tr h (s - div w - |w|^2) ] dV
      TensorField X = cp.S;
      X += div_torsion(cp);
      TensorField gw = grad_wbar(cp);
      X -= gw;
      auto pair = inner_c(h, X, g);
      auto tr = trace_h(g, h);
      std::vector<cplx> integrand(P);
      for (std::size_t p = 0; p < P; ++p) {
        cplx divw{};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            divw += g.gic(i, j)[p] * gw.comp(static_cast<std::size_t>(i) * sn + j)[p];
        integrand[p] = -pair[p] + tr[p] * (cp.s[p] - divw - cp.wnorm2[p]);
      }
      r.kind = 2;
      r.v = lat.integrate(integrand, g.det()).real();
      return r;
    }
    case VarQuantity::IntegralWNorm: {
      // d/da int |w|^2 dV = int [ <h, Q3 + 2 nabla w>
      //                           + tr h ( -2 div w - |w|^2 ) ] dV
      QPackage qp = compute_q(cp);
      TensorField gw = grad_wbar(cp);
      TensorField X = qp.Q3;
      X += 2.0 * cplx(1.0, 0.0) * gw;
      auto pair = inner_c(h, X, g);
      auto tr = trace_h(g, h);
      std::vector<cplx> integrand(P);
      for (std::size_t p = 0; p < P; ++p) {
        cplx divw{};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            divw += g.gic(i, j)[p] * gw.comp(static_cast<std::size_t>(i) * sn + j)[p];
        integrand[p] = pair[p] + tr[p] * (-2.0 * divw - cp.wnorm2[p]);
      }
      r.kind = 2;
      r.v = lat.integrate(integrand, g.det()).real();
      return r;
    }
    case VarQuantity::FunctionalF: {
      // d/da F = V^{(1-n)/n} int <h, -K + (k - c) g> dV,
      // c = ((n-1)/n) (int k dV) / V
      QPackage qp = compute_q(cp);
      const double V = qp.volume;
      const double Ik = lat.integrate(qp.k, g.det());
      const double c = ((n - 1.0) / n) * Ik / V;
      TensorField X = qp.K;
      X *= cplx(-1.0, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          cplx* dst = X.comp(static_cast<std::size_t>(i) * sn + j);
          const cplx* gm = g.gc(i, j);
          for (std::size_t p = 0; p < P; ++p) dst[p] += (qp.k[p] - c) * gm[p];
        }
      auto pair = inner_c(h, X, g);
      r.kind = 2;
      r.v = std::pow(V, (1.0 - n) / n) * lat.integrate(pair, g.det()).real();
      return r;
    }
  }
  return r;
}

}  // namespace vdetail

inline constexpr VarQuantity all_var_quantities[] = {
    VarQuantity::Connection,    VarQuantity::Curvature,     VarQuantity::ScalarS,
    VarQuantity::Torsion,       VarQuantity::TNorm,         VarQuantity::WNorm,
    VarQuantity::IntegralS,     VarQuantity::IntegralTNorm, VarQuantity::IntegralWNorm,
    VarQuantity::FunctionalF};

// Runs several quantities against one probe, sharing the four shifted
// metric evaluations.
inline std::vector<std::pair<VarQuantity, VarResult>> check_variation_suite(
    const std::vector<VarQuantity>& qs, const VariationProbe& probe) {
  const double da = probe.da;
  // probe window validity
  (void)vdetail::shifted(probe.g, 2.0 * da, probe.h);
  (void)vdetail::shifted(probe.g, -2.0 * da, probe.h);

  std::vector<double> shifts = {da, -da};
  if (probe.richardson) {
    shifts.push_back(0.5 * da);
    shifts.push_back(-0.5 * da);
  }
  std::vector<std::pair<VarQuantity, VarResult>> out;
  std::vector<std::vector<vdetail::QVal>> vals(shifts.size());
  for (std::size_t s = 0; s < shifts.size(); ++s) {
    MetricField gs = vdetail::shifted(probe.g, shifts[s], probe.h);
    ChernPackage cp = compute_package(gs, CurvaturePath::Expanded);
    for (VarQuantity q : qs) vals[s].push_back(vdetail::eval_quantity_from(cp, q));
  }
  for (std::size_t k = 0; k < qs.size(); ++k) {
    vdetail::QVal fd = vdetail::lincomb(0.5 / da, vals[0][k], -0.5 / da, vals[1][k]);
    if (probe.richardson) {
      vdetail::QVal fd2 = vdetail::lincomb(1.0 / da, vals[2][k], -1.0 / da, vals[3][k]);
      fd = vdetail::lincomb(4.0 / 3.0, fd2, -1.0 / 3.0, fd);
    }
    vdetail::QVal an = vdetail::eval_formula(qs[k], probe.g, probe.h);
    VarResult r;
    r.fd_value = vdetail::qsup(fd);
    r.formula_value = vdetail::qsup(an);
    const double scale = std::max({r.fd_value, r.formula_value, 1e-30});
    r.rel_err = vdetail::qdiff(fd, an) / scale;
    out.emplace_back(qs[k], r);
  }
  return out;
}

inline VarResult check_variation(VarQuantity q, const VariationProbe& probe) {
  return check_variation_suite({q}, probe).front().second;
}

// ---------------------------------------------------------------------
enum class IbpLemma { Ibp2, Ibp3, Ibp4 };

struct IbpFields {
  std::vector<double> phi;  // real scalar
  TensorField alpha;        // (1,0)-form, sig (HL)
  TensorField beta;         // (1,0)-form, sig (HL)
  TensorField h;            // Hermitian (1,1)
};

inline double check_ibp(IbpLemma which, const MetricField& g, const IbpFields& fields) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  ChernPackage cp = compute_package(g, CurvaturePath::Expanded);

  auto wbar = [&](int j, std::size_t p) { return std::conj(cp.w.comp(j)[p]); };

  cplx lhs{}, rhs{};
  if (which == IbpLemma::Ibp2) {
    // int <nabla phi, alpha> = int phi [ -div alpha - <w, alpha> ]
    std::vector<cplx> phic(P), dphi(P), integrand(P, cplx{});
    for (std::size_t p = 0; p < P; ++p) phic[p] = fields.phi[p];
    for (int i = 0; i < n; ++i) {
      lat.partial(i, Kind::Holomorphic, phic.data(), dphi.data());
      for (int j = 0; j < n; ++j) {
        const cplx* gi = g.gic(i, j);
        const cplx* al = fields.alpha.comp(j);
        for (std::size_t p = 0; p < P; ++p) integrand[p] += gi[p] * dphi[p] * std::conj(al[p]);
      }
    }
    lhs = lat.integrate(integrand, g.det());
    std::vector<cplx> ab(P), dab(P), r2(P, cplx{});
    for (int j = 0; j < n; ++j) {
      const cplx* al = fields.alpha.comp(j);
      for (std::size_t p = 0; p < P; ++p) ab[p] = std::conj(al[p]);
      for (int i = 0; i < n; ++i) {
        lat.partial(i, Kind::Holomorphic, ab.data(), dab.data());
        const cplx* gi = g.gic(i, j);
        for (std::size_t p = 0; p < P; ++p) r2[p] += gi[p] * dab[p];
      }
    }
    for (std::size_t p = 0; p < P; ++p) {
      cplx wa{};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          wa += g.gic(i, j)[p] * cp.w.comp(i)[p] * std::conj(fields.alpha.comp(j)[p]);
      r2[p] = fields.phi[p] * (-r2[p] - wa);
    }
    rhs = lat.integrate(r2, g.det());
  } else if (which == IbpLemma::Ibp3) {
    // int Delta phi dV = int phi [ div w + |w|^2 ] dV
    auto lap = vdetail::scalar_laplacian(g, fields.phi);
    std::vector<cplx> l1(P);
    for (std::size_t p = 0; p < P; ++p) l1[p] = lap[p];
    lhs = lat.integrate(l1, g.det());
    TensorField gw = vdetail::grad_wbar(cp);
    std::vector<cplx> r2(P);
    for (std::size_t p = 0; p < P; ++p) {
      cplx divw{};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          divw += g.gic(i, j)[p] * gw.comp(static_cast<std::size_t>(i) * n + j)[p];
      r2[p] = fields.phi[p] * (divw + cp.wnorm2[p]);
    }
    rhs = lat.integrate(r2, g.det());
  } else {
    // int <div h, beta> = int <h, -nabla beta - w (x) beta>
    std::vector<cplx> l1(P, cplx{});
    for (int k = 0; k < n; ++k) {
      TensorField dh = cd(cp, fields.h, Kind::Antiholomorphic, k);
      for (std::size_t p = 0; p < P; ++p) {
        cplx acc{};
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
              acc += g.gic(l, j)[p] * g.gic(i, k)[p] *
                     dh.comp(static_cast<std::size_t>(i) * n + j)[p] * fields.beta.comp(l)[p];
        l1[p] += acc;
      }
    }
    lhs = lat.integrate(l1, g.det());
    std::vector<cplx> r2(P, cplx{});
    std::vector<std::vector<cplx>> dbeta(n, std::vector<cplx>(P));
    for (int l = 0; l < n; ++l) {
      std::vector<cplx> tmp(P);
      for (int k = 0; k < n; ++k) {
        lat.partial(k, Kind::Antiholomorphic, fields.beta.comp(l), tmp.data());
        for (std::size_t p = 0; p < P; ++p) {
          const cplx v = tmp[p] + fields.beta.comp(l)[p] * wbar(k, p);
          cplx acc{};
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              acc += g.gic(i, k)[p] * g.gic(l, j)[p] * fields.h.comp(static_cast<std::size_t>(i) * n + j)[p];
          r2[p] -= acc * v;
        }
      }
    }
    rhs = lat.integrate(r2, g.det());
  }
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
  return std::abs(lhs - rhs) / scale;
}

// ---------------------------------------------------------------------
enum class EvQuantity { Omega, Torsion };

struct EvolutionCheck {
  double rel_err = 0.0;   // at the requested dt
  double order = 0.0;     // measured convergence order between dt and dt/2
  double lhs_sup = 0.0;   // sup |time-centered difference|
  double rhs_sup = 0.0;   // sup |formula|
};

namespace vdetail {

inline MetricField evolve_plain(const MetricField& g0, double dt) {
  const Lattice& lat = g0.lattice();
  const double cfl = 0.5 * 0.2 * lat.h() * lat.h() * g0.min_eig();
  const int ns = std::max(1, static_cast<int>(std::ceil(std::abs(dt) / cfl)));
  MetricField g = g0;
  for (int s = 0; s < ns; ++s) {
    auto gn = fdetail::rk4(g, dt / ns, FlowVariant::HCF);
    if (!gn) throw std::runtime_error("check_evolution: flow step failed inside the window");
    g = std::move(*gn);
  }
  return g;
}

// the full displayed right-hand side of the Omega evolution equation
inline TensorField omega_ev_rhs(const ChernPackage& cp, const QPackage& qp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  TensorField rhs = chern_laplacian(cp.Om, cp);

  // Omega_{i jbar k}^m = g^{m qbar} Omega_{i jbar k qbar}
  TensorField OmUp(lat, {HL, AL, HL, HU});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          cplx* dst = OmUp.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + m);
          for (int q = 0; q < n; ++q) {
            const cplx* gi = cp.g.gic(m, q);
            const cplx* om = cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + q);
            for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * om[p];
          }
        }

  std::vector<TensorField> dOm_h, dOm_a, dQ_h;
  for (int d = 0; d < n; ++d) dOm_h.push_back(cd(cp, cp.Om, Kind::Holomorphic, d));
  for (int d = 0; d < n; ++d) dOm_a.push_back(cd(cp, cp.Om, Kind::Antiholomorphic, d));
  for (int d = 0; d < n; ++d) dQ_h.push_back(cd(cp, qp.Q, Kind::Holomorphic, d));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      TensorField d2Q = cd(cp, dQ_h[i], Kind::Antiholomorphic, j);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          cplx* dst = rhs.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + l);
          for (std::size_t p = 0; p < P; ++p) {
            cplx acc{};
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn) {
                const cplx gim = cp.g.gic(m, nn)[p];
                for (int q = 0; q < n; ++q) {
                  // T_{nbar jbar}^{qbar} nabla_m Omega_{i qbar k lbar}
                  acc += gim * std::conj(cp.T_up.at({nn, j, q}, p)) * dOm_h[m].at({i, q, k, l}, p);
                  // T_{m i}^q nabla_{jbar} Omega_{q nbar k lbar}
                  acc += gim * cp.T_up.at({m, i, q}, p) * dOm_a[j].at({q, nn, k, l}, p);
                  // Omega * Omega terms; curvature on antiholomorphic
                  // indices is Omega_{a bbar cbar}^{dbar} = conj(Omega_{abar b c}^d)
                  //   = -conj(Omega_{b abar c}^d)
                  acc += gim * (OmUp.at({i, j, m, q}, p) * cp.Om.at({q, nn, k, l}, p) -
                                std::conj(OmUp.at({nn, m, j, q}, p)) * cp.Om.at({i, q, k, l}, p) +
                                OmUp.at({m, j, k, q}, p) * cp.Om.at({i, nn, q, l}, p) -
                                std::conj(OmUp.at({j, m, l, q}, p)) * cp.Om.at({i, nn, k, q}, p));
                }
              }
            // - Omega_{i jbar k}^m (S - Q)_{m lbar} - nabla_{jbar} nabla_i Q_{k lbar}
            for (int m = 0; m < n; ++m)
              acc -= OmUp.at({i, j, k, m}, p) * (cp.S.at({m, l}, p) - qp.Q.at({m, l}, p));
            acc -= d2Q.at({k, l}, p);
            dst[p] += acc;
          }
        }
    }
  return rhs;
}

// the full displayed right-hand side of the torsion evolution equation;
// here the Laplacian is the anti-holomorphic-outside trace
// g^{m nbar} nabla_nbar nabla_m, which is what the torsion equation's
// derivation produces (it differs from g^{m nbar} nabla_m nabla_nbar by a
// traced curvature commutator of size |S||T|)
inline TensorField torsion_ev_rhs(const ChernPackage& cp, const QPackage& qp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  TensorField rhs(lat, {HL, HL, AL});
  for (int m = 0; m < n; ++m) {
    TensorField u = cd(cp, cp.T_low, Kind::Holomorphic, m);
    for (int nn = 0; nn < n; ++nn) {
      TensorField v = cd(cp, u, Kind::Antiholomorphic, nn);
      const cplx* gi = cp.g.gic(m, nn);
      for (std::size_t c = 0; c < v.comps(); ++c) {
        cplx* dst = rhs.comp(c);
        const cplx* src = v.comp(c);
        for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * src[p];
      }
    }
  }

  TensorField OmUp(lat, {HL, AL, HL, HU});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          cplx* dst = OmUp.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + m);
          for (int q = 0; q < n; ++q) {
            const cplx* gi = cp.g.gic(m, q);
            const cplx* om = cp.Om.comp(((static_cast<std::size_t>(i) * sn + j) * sn + k) * sn + q);
            for (std::size_t p = 0; p < P; ++p) dst[p] += gi[p] * om[p];
          }
        }

  std::vector<TensorField> dT_a, dTu_a, dQ_h;
  for (int d = 0; d < n; ++d) dT_a.push_back(cd(cp, cp.T_low, Kind::Antiholomorphic, d));
  for (int d = 0; d < n; ++d) dTu_a.push_back(cd(cp, cp.T_up, Kind::Antiholomorphic, d));
  for (int d = 0; d < n; ++d) dQ_h.push_back(cd(cp, qp.Q, Kind::Holomorphic, d));

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        cplx* dst = rhs.comp((static_cast<std::size_t>(i) * sn + j) * sn + k);
        for (std::size_t p = 0; p < P; ++p) {
          cplx acc{};
          for (int m = 0; m < n; ++m)
            for (int nn = 0; nn < n; ++nn) {
              const cplx gim = cp.g.gic(m, nn)[p];
              for (int q = 0; q < n; ++q) {
                acc += gim * (cp.T_up.at({j, i, q}, p) * dT_a[nn].at({m, q, k}, p) +
                              dTu_a[nn].at({m, j, q}, p) * cp.T_low.at({i, q, k}, p) +
                              cp.T_up.at({m, j, q}, p) * dT_a[nn].at({i, q, k}, p) +
                              dTu_a[nn].at({i, m, q}, p) * cp.T_low.at({j, q, k}, p) +
                              cp.T_up.at({i, m, q}, p) * dT_a[nn].at({j, q, k}, p));
                // curvature-torsion terms, using Omega_{nbar j ..} = -Omega_{j nbar ..}
                // and Omega_{nbar j kbar}^{qbar} = conj(Omega_{n jbar k}^q)
                acc += gim * (-OmUp.at({j, nn, m, q}, p) * cp.T_low.at({i, q, k}, p) +
                              std::conj(OmUp.at({nn, j, k, q}, p)) * cp.T_low.at({i, m, q}, p) +
                              OmUp.at({i, nn, m, q}, p) * cp.T_low.at({j, q, k}, p) -
                              std::conj(OmUp.at({nn, i, k, q}, p)) * cp.T_low.at({j, m, q}, p));
              }
              // - Omega_{p nbar m kbar} T_{ji}^p
              for (int q = 0; q < n; ++q)
                acc -= gim * cp.Om.at({q, nn, m, k}, p) * cp.T_up.at({j, i, q}, p);
            }
          for (int q = 0; q < n; ++q)
            acc -= cp.T_up.at({i, j, q}, p) * (cp.S.at({q, k}, p) - qp.Q.at({q, k}, p));
          acc += dQ_h[i].at({j, k}, p) - dQ_h[j].at({i, k}, p);
          dst[p] += acc;
        }
      }
  return rhs;
}

inline EvolutionCheck evolution_once(EvQuantity which, const MetricField& g0, double dt) {
  ChernPackage cp = compute_package(g0, CurvaturePath::DGamma);
  QPackage qp = compute_q(cp);
  MetricField gp = evolve_plain(g0, dt);
  MetricField gm = evolve_plain(g0, -dt);
  ChernPackage cpp = compute_package(gp, CurvaturePath::DGamma);
  ChernPackage cpm = compute_package(gm, CurvaturePath::DGamma);
  const TensorField& Xp = (which == EvQuantity::Omega) ? cpp.Om : cpp.T_low;
  const TensorField& Xm = (which == EvQuantity::Omega) ? cpm.Om : cpm.T_low;
  TensorField lhs = Xp;
  lhs -= Xm;
  lhs *= cplx(0.5 / dt, 0.0);
  TensorField rhs = (which == EvQuantity::Omega) ? omega_ev_rhs(cp, qp) : torsion_ev_rhs(cp, qp);
  TensorField diff = lhs;
  diff -= rhs;
  EvolutionCheck out;
  out.lhs_sup = lhs.sup_abs();
  out.rhs_sup = rhs.sup_abs();
  out.rel_err = diff.sup_abs() / std::max({out.lhs_sup, out.rhs_sup, 1e-30});
  return out;
}

}  // namespace vdetail

inline EvolutionCheck check_evolution(EvQuantity which, const MetricField& g0, double dt = 1e-3) {
  EvolutionCheck out = vdetail::evolution_once(which, g0, dt);
  const EvolutionCheck e2 = vdetail::evolution_once(which, g0, 0.5 * dt);
  out.order = std::log2(std::max(out.rel_err, 1e-300) / std::max(e2.rel_err, 1e-300));
  return out;
}

}  // namespace hcf

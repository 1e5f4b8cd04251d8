#pragma once

// Quadratic torsion tensors Q^1..Q^4, the combination
// Q = 1/2 Q^1 - 1/4 Q^2 - 1/2 Q^3 + Q^4, the tensor K = S - Q and scalar
// k = tr_g K = s - 1/4 |T|^2 - 1/2 |w|^2, the functional F and the
// static-metric residual.

#include "hcf/chern.hpp"

namespace hcf {

struct QPackage {
  TensorField Q1, Q2, Q3, Q4;  // Hermitian (1,1), sig (HL,AL)
  TensorField Q;               // 1/2 Q1 - 1/4 Q2 - 1/2 Q3 + Q4
  TensorField K;               // S - Q
  std::vector<double> k;       // tr_g K
  double F_value = 0.0;        // int k dV / V^{(n-1)/n}
  double volume = 0.0;         // int det(g) h^{2n}
};

// The debug_corrupt_q2_sign flag flips the sign of Q^2; it exists so the
// check command's mutation test can demonstrate that the trace identity
// catches a mis-transcribed contraction.
inline QPackage compute_q(const ChernPackage& cp, bool debug_corrupt_q2_sign = false) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  const std::size_t n2 = sn * sn, n3 = n2 * sn;

  QPackage qp{TensorField(lat, {HL, AL}), TensorField(lat, {HL, AL}), TensorField(lat, {HL, AL}),
              TensorField(lat, {HL, AL}), TensorField(lat, {HL, AL}), TensorField(lat, {HL, AL})};
  qp.k.assign(P, 0.0);

  std::vector<const cplx*> giptr(n2), tptr(n3);
  for (std::size_t c = 0; c < n2; ++c) giptr[c] = cp.g.ginv().comp(c);
  for (std::size_t c = 0; c < n3; ++c) tptr[c] = cp.T_low.comp(c);

  const double q2sign = debug_corrupt_q2_sign ? -1.0 : 1.0;

  cplx giv[9], Tl[27], wv[3];
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < n2; ++c) giv[c] = giptr[c][p];
    for (std::size_t c = 0; c < n3; ++c) Tl[c] = tptr[c][p];
    for (int i = 0; i < n; ++i) wv[i] = cp.w.comp(i)[p];
    auto GI = [&](int i, int j) { return giv[i * n + j]; };
    auto T = [&](int i, int j, int k) { return Tl[(i * n + j) * n + k]; };

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        // Q1_{i jbar} = g^{k lbar} g^{m nbar} T_{i k nbar} conj(T_{j l mbar})
        cplx q1{};
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                q1 += GI(k, l) * GI(m, nn) * T(i, k, nn) * std::conj(T(j, l, m));
        // Q2_{i jbar} = g^{k lbar} g^{m nbar} conj(T_{l n ibar}) T_{k m jbar}
        cplx q2{};
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn)
                q2 += GI(k, l) * GI(m, nn) * std::conj(T(l, nn, i)) * T(k, m, j);
        q2 *= q2sign;
        // Q3_{i jbar} = w_i conj(w_j)
        const cplx q3 = wv[i] * std::conj(wv[j]);
        // Q4_{i jbar} = 1/2 g^{m nbar} ( w_m conj(T_{n j ibar}) + conj(w_n) T_{m i jbar} )
        cplx q4{};
        for (int m = 0; m < n; ++m)
          for (int nn = 0; nn < n; ++nn)
            q4 += 0.5 * GI(m, nn) * (wv[m] * std::conj(T(nn, j, i)) + std::conj(wv[nn]) * T(m, i, j));

        const std::size_t c = static_cast<std::size_t>(i) * sn + j;
        qp.Q1.comp(c)[p] = q1;
        qp.Q2.comp(c)[p] = q2;
        qp.Q3.comp(c)[p] = q3;
        qp.Q4.comp(c)[p] = q4;
        const cplx q = 0.5 * q1 - 0.25 * q2 - 0.5 * q3 + q4;
        qp.Q.comp(c)[p] = q;
        qp.K.comp(c)[p] = cp.S.comp(c)[p] - q;
      }
    double kk = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        kk += (GI(i, j) * qp.K.comp(static_cast<std::size_t>(i) * sn + j)[p]).real();
    qp.k[p] = kk;
  }

  qp.volume = cp.g.volume();
  const double fk = lat.integrate(qp.k, cp.g.det());
  qp.F_value = fk / std::pow(qp.volume, (n - 1.0) / n);
  return qp;
}

// sup | tr_g(1/2 Q1 - 1/4 Q2 - 1/2 Q3 + Q4) - (1/4 |T|^2 + 1/2 |w|^2) |.
// A sharp internal test of all four Q index patterns.
inline double q_trace_residual(const ChernPackage& cp, const QPackage& qp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  double resid = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    double tr = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        tr += (cp.g.gic(i, j)[p] * qp.Q.comp(static_cast<std::size_t>(i) * n + j)[p]).real();
    resid = std::max(resid, std::abs(tr - (0.25 * cp.Tnorm2[p] + 0.5 * cp.wnorm2[p])));
  }
  return resid;
}

// min over grid of the smallest eigenvalue of a Hermitian (1,1) field
inline double min_eigenvalue(const TensorField& t) {
  const Lattice& lat = t.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  double mn = 0.0;
  cplx m[9];
  for (std::size_t p = 0; p < P; ++p) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m[i * n + j] = t.comp(static_cast<std::size_t>(i) * n + j)[p];
    const double ev = detail::herm_min_eig(m, n);
    mn = (p == 0) ? ev : std::min(mn, ev);
  }
  return mn;
}

// (sup |K - (k/n) g|_g, sup |k - mean k|); both vanish iff g is static.
inline std::pair<double, double> static_residual(const ChernPackage& cp, const QPackage& qp) {
  const Lattice& lat = cp.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField dev = qp.K;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx* dst = dev.comp(static_cast<std::size_t>(i) * n + j);
      const cplx* gm = cp.g.gc(i, j);
      for (std::size_t p = 0; p < P; ++p) dst[p] -= (qp.k[p] / n) * gm[p];
    }
  const double tensor_part = sup_norm(dev, cp.g);
  const double mean = lat.integrate(qp.k, cp.g.det()) / qp.volume;
  double scalar_part = 0.0;
  for (std::size_t p = 0; p < P; ++p) scalar_part = std::max(scalar_part, std::abs(qp.k[p] - mean));
  return {tensor_part, scalar_part};
}

}  // namespace hcf

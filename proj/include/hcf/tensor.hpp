#pragma once

// Typed complex tensor fields over the lattice: index signatures
// (holomorphic/antiholomorphic x upper/lower), algebra, metric
// contraction, Chern covariant derivative, norms and inner products.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>

#include "hcf/lattice.hpp"

namespace hcf {

struct Slot {
  bool anti;   // antiholomorphic index
  bool upper;  // raised index
  bool operator==(const Slot&) const = default;
};

// convenience slot constants
inline constexpr Slot HL{false, false};  // holomorphic lower
inline constexpr Slot HU{false, true};
inline constexpr Slot AL{true, false};
inline constexpr Slot AU{true, true};

struct IndexSig {
  std::array<Slot, 6> slots{};
  int rank = 0;

  IndexSig() = default;
  IndexSig(std::initializer_list<Slot> s) {
    if (s.size() > 6) throw std::invalid_argument("IndexSig: rank > 6");
    for (Slot sl : s) slots[rank++] = sl;
  }
  Slot operator[](int i) const { return slots[i]; }
  bool operator==(const IndexSig& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (!(slots[i] == o.slots[i])) return false;
    return true;
  }
  IndexSig conjugated() const {
    IndexSig r = *this;
    for (int i = 0; i < rank; ++i) r.slots[i].anti = !r.slots[i].anti;
    return r;
  }
};

// Grid-valued complex tensor, component-major: data[c * P + p] where the
// component multi-index c is base-n with slot 0 the most significant digit.
class TensorField {
 public:
  TensorField() = default;
  TensorField(const Lattice& lat, IndexSig sig)
      : lat_(&lat), sig_(sig), comps_(1) {
    for (int i = 0; i < sig.rank; ++i) comps_ *= static_cast<std::size_t>(lat.n());
    data_.assign(comps_ * lat.points(), cplx{});
  }

  const Lattice& lattice() const { return *lat_; }
  const IndexSig& sig() const { return sig_; }
  int rank() const { return sig_.rank; }
  std::size_t comps() const { return comps_; }
  std::size_t points() const { return lat_->points(); }

  cplx* comp(std::size_t c) { return data_.data() + c * points(); }
  const cplx* comp(std::size_t c) const { return data_.data() + c * points(); }
  std::vector<cplx>& raw() { return data_; }
  const std::vector<cplx>& raw() const { return data_; }

  // component index from per-slot indices
  std::size_t cidx(std::initializer_list<int> idx) const {
    assert(static_cast<int>(idx.size()) == sig_.rank);
    std::size_t c = 0;
    for (int v : idx) c = c * lat_->n() + static_cast<std::size_t>(v);
    return c;
  }
  cplx& at(std::initializer_list<int> idx, std::size_t p) { return comp(cidx(idx))[p]; }
  cplx at(std::initializer_list<int> idx, std::size_t p) const { return comp(cidx(idx))[p]; }

  TensorField& operator+=(const TensorField& o) {
    assert(sig_ == o.sig_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  TensorField& operator-=(const TensorField& o) {
    assert(sig_ == o.sig_);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  TensorField& operator*=(cplx a) {
    for (auto& v : data_) v *= a;
    return *this;
  }

  friend TensorField operator+(TensorField a, const TensorField& b) { return a += b; }
  friend TensorField operator-(TensorField a, const TensorField& b) { return a -= b; }
  friend TensorField operator*(cplx a, TensorField t) { return t *= a; }

  // complex conjugate: swaps holomorphy of every slot
  TensorField conjugate() const {
    TensorField r(*lat_, sig_.conjugated());
    for (std::size_t i = 0; i < data_.size(); ++i) r.data_[i] = std::conj(data_[i]);
    return r;
  }

  double sup_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  const Lattice* lat_ = nullptr;
  IndexSig sig_{};
  std::size_t comps_ = 0;
  std::vector<cplx> data_;
};

// Small per-point Hermitian matrix helpers (n <= 3).
namespace detail {

inline double herm_det(const cplx* m, int n) {
  if (n == 1) return m[0].real();
  if (n == 2) return m[0].real() * m[3].real() - std::norm(m[1]);
  // n == 3, indices row-major m[3*i+j]
  const cplx a = m[0], b = m[1], c = m[2], e = m[4], f = m[5], i = m[8];
  // det of Hermitian matrix is real
  return (a * (e * i - f * std::conj(f)) - b * (std::conj(b) * i - f * std::conj(c)) +
          c * (std::conj(b) * std::conj(f) - e * std::conj(c)))
      .real();
}

inline void herm_inverse(const cplx* m, int n, cplx* out) {
  if (n == 1) {
    out[0] = 1.0 / m[0].real();
    return;
  }
  if (n == 2) {
    const double det = herm_det(m, 2);
    out[0] = m[3] / det;
    out[1] = -m[1] / det;
    out[2] = -m[2] / det;
    out[3] = m[0] / det;
    return;
  }
  const double det = herm_det(m, 3);
  auto M = [&](int i, int j) { return m[3 * i + j]; };
  // adjugate / det
  out[0] = (M(1, 1) * M(2, 2) - M(1, 2) * M(2, 1)) / det;
  out[1] = (M(0, 2) * M(2, 1) - M(0, 1) * M(2, 2)) / det;
  out[2] = (M(0, 1) * M(1, 2) - M(0, 2) * M(1, 1)) / det;
  out[3] = (M(1, 2) * M(2, 0) - M(1, 0) * M(2, 2)) / det;
  out[4] = (M(0, 0) * M(2, 2) - M(0, 2) * M(2, 0)) / det;
  out[5] = (M(0, 2) * M(1, 0) - M(0, 0) * M(1, 2)) / det;
  out[6] = (M(1, 0) * M(2, 1) - M(1, 1) * M(2, 0)) / det;
  out[7] = (M(0, 1) * M(2, 0) - M(0, 0) * M(2, 1)) / det;
  out[8] = (M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0)) / det;
}

inline double herm_min_eig(const cplx* m, int n) {
  if (n == 1) return m[0].real();
  if (n == 2) {
    const double a = m[0].real(), d = m[3].real();
    const double mid = 0.5 * (a + d);
    const double rad = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(m[1]));
    return mid - rad;
  }
  // Hermitian 3x3: trigonometric closed form on the shifted matrix
  const double q = (m[0].real() + m[4].real() + m[8].real()) / 3.0;
  cplx B[9];
  for (int i = 0; i < 9; ++i) B[i] = m[i];
  B[0] -= q;
  B[4] -= q;
  B[8] -= q;
  double p2 = 0.0;
  for (int i = 0; i < 9; ++i) p2 += std::norm(B[i]);
  const double p = std::sqrt(p2 / 6.0);
  if (p < 1e-300) return q;
  for (int i = 0; i < 9; ++i) B[i] /= p;
  double r = herm_det(B, 3) / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  // eigenvalues are q + 2 p cos(phi + 2k pi/3); the minimum uses k = 1
  return q + 2.0 * p * std::cos(phi + 2.0 * pi / 3.0);
}

}  // namespace detail

// Positive-definite Hermitian (1,1) metric field with cached inverse,
// determinant and minimum eigenvalue.
class MetricField {
 public:
  // Builds from g_{i jbar} components, validating Hermitian symmetry and
  // positivity.  Throws on invalid input.
  static MetricField make(const Lattice& lat, const TensorField& g) {
    auto m = try_make(lat, g);
    if (!m) throw std::invalid_argument("MetricField: not Hermitian positive-definite");
    return std::move(*m);
  }

  static std::optional<MetricField> try_make(const Lattice& lat, const TensorField& g) {
    if (!(g.sig() == IndexSig{HL, AL})) throw std::invalid_argument("MetricField: signature must be (HL, AL)");
    MetricField m;
    m.lat_ = &lat;
    m.g_ = g;
    const int n = lat.n();
    const std::size_t P = lat.points();
    m.gi_ = TensorField(lat, {HU, AU});
    m.det_.assign(P, 0.0);
    m.lmin_.assign(P, 0.0);
    double herm_err = 0.0, scale = 0.0;
    cplx mat[9], inv[9];
    for (std::size_t p = 0; p < P; ++p) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          mat[n * i + j] = g.comp(static_cast<std::size_t>(n) * i + j)[p];
          scale = std::max(scale, std::abs(mat[n * i + j]));
        }
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
          herm_err = std::max(herm_err, std::abs(mat[n * i + j] - std::conj(mat[n * j + i])));
      const double lm = detail::herm_min_eig(mat, n);
      m.lmin_[p] = lm;
      if (!(lm > 0.0)) return std::nullopt;
      m.det_[p] = detail::herm_det(mat, n);
      detail::herm_inverse(mat, n, inv);
      // g^{i jbar} = conj((G^{-1})_{ij}) so that g^{i jbar} g_{k jbar} = delta_ik
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          m.gi_.comp(static_cast<std::size_t>(n) * i + j)[p] = std::conj(inv[n * i + j]);
    }
    if (herm_err > 1e-12 * std::max(scale, 1.0)) return std::nullopt;
    return m;
  }

  const Lattice& lattice() const { return *lat_; }
  int n() const { return lat_->n(); }
  // g_{i jbar}
  const TensorField& g() const { return g_; }
  // g^{i jbar}: gi(i,j) satisfies sum_j g^{i jbar} g_{k jbar} = delta_ik
  const TensorField& ginv() const { return gi_; }
  const std::vector<double>& det() const { return det_; }
  const std::vector<double>& min_eig_field() const { return lmin_; }
  double min_eig() const {
    double m = lmin_.empty() ? 0.0 : lmin_[0];
    for (double v : lmin_) m = std::min(m, v);
    return m;
  }
  double volume() const { return lat_->integrate(det_); }

  const cplx* gc(int i, int j) const { return g_.comp(static_cast<std::size_t>(n()) * i + j); }
  const cplx* gic(int i, int j) const { return gi_.comp(static_cast<std::size_t>(n()) * i + j); }

 private:
  const Lattice* lat_ = nullptr;
  TensorField g_, gi_;
  std::vector<double> det_, lmin_;
};

// ----------------------------------------------------------------------
// Metric raising: slotwise transform so that <A,B> = sum raised(A) conj(B).
// For each slot the pairing factor against the conjugated partner is
//   holo-lower:  g^{a bbar}   anti-lower: g^{b abar}
//   holo-upper:  g_{a bbar}   anti-upper: g_{b abar}
// where a indexes A and b the (conjugated) partner.
inline TensorField metric_raise_all(const TensorField& t, const MetricField& m) {
  const Lattice& lat = t.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t comps = t.comps();
  TensorField out(lat, t.sig());
  // single pass over the grid; slotwise transforms run on a stack-local copy
  cplx buf[729], tmp[729], gv[9], giv[9];
  assert(comps <= 729);
  std::vector<const cplx*> src(comps);
  std::vector<cplx*> dst(comps);
  for (std::size_t c = 0; c < comps; ++c) {
    src[c] = t.comp(c);
    dst[c] = out.comp(c);
  }
  const std::size_t n2 = static_cast<std::size_t>(n) * n;
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < comps; ++c) buf[c] = src[c][p];
    for (std::size_t c = 0; c < n2; ++c) {
      gv[c] = m.g().comp(c)[p];
      giv[c] = m.ginv().comp(c)[p];
    }
    std::size_t lead = 1, trail = comps / static_cast<std::size_t>(n);
    for (int s = 0; s < t.rank(); ++s) {
      const Slot sl = t.sig()[s];
      const cplx* fac = sl.upper ? gv : giv;
      for (std::size_t L = 0; L < lead; ++L)
        for (std::size_t r = 0; r < trail; ++r) {
          const std::size_t base = L * static_cast<std::size_t>(n) * trail + r;
          for (int b = 0; b < n; ++b) {
            cplx acc{};
            for (int a = 0; a < n; ++a)
              acc += (sl.anti ? fac[b * n + a] : fac[a * n + b]) * buf[base + a * trail];
            tmp[base + b * trail] = acc;
          }
        }
      for (std::size_t L = 0; L < lead; ++L)
        for (std::size_t r = 0; r < trail; ++r) {
          const std::size_t base = L * static_cast<std::size_t>(n) * trail + r;
          for (int b = 0; b < n; ++b) buf[base + b * trail] = tmp[base + b * trail];
        }
      lead *= static_cast<std::size_t>(n);
      if (s + 1 < t.rank()) trail /= static_cast<std::size_t>(n);
    }
    for (std::size_t c = 0; c < comps; ++c) dst[c][p] = buf[c];
  }
  return out;
}

// Full metric contraction of a against conj(b); complex pointwise value.
inline std::vector<cplx> inner_c(const TensorField& a, const TensorField& b, const MetricField& m) {
  if (!(a.sig() == b.sig())) throw std::invalid_argument("inner: signature mismatch");
  const std::size_t P = a.points();
  TensorField ra = metric_raise_all(a, m);
  std::vector<cplx> out(P, cplx{});
  for (std::size_t c = 0; c < a.comps(); ++c) {
    const cplx* x = ra.comp(c);
    const cplx* y = b.comp(c);
    for (std::size_t p = 0; p < P; ++p) out[p] += x[p] * std::conj(y[p]);
  }
  return out;
}

// Real part of the metric pairing (exact for Hermitian-symmetric pairs).
inline std::vector<double> inner(const TensorField& a, const TensorField& b, const MetricField& m) {
  auto c = inner_c(a, b, m);
  std::vector<double> out(c.size());
  for (std::size_t p = 0; p < c.size(); ++p) out[p] = c[p].real();
  return out;
}

inline std::vector<double> norm_sq(const TensorField& a, const MetricField& m) {
  return inner(a, a, m);
}

// sup over the grid of the pointwise metric norm |a|_g
inline double sup_norm(const TensorField& a, const MetricField& m) {
  auto n2 = norm_sq(a, m);
  double mx = 0.0;
  for (double v : n2) mx = std::max(mx, v);
  return std::sqrt(std::max(mx, 0.0));
}

// ----------------------------------------------------------------------
// General pairwise contraction with metric raising/lowering.
//
// Each pairing joins slot pa of a with slot pb of b.  Legal pairings after
// raising/lowering: like-holomorphy upper/lower pairs contract directly;
// two lower (or two upper) slots of opposite holomorphy contract through
// g^{..} (resp. g_{..}).  Result signature = unpaired slots of a then b.
inline TensorField contract(const TensorField& a, const TensorField& b,
                            const std::vector<std::pair<int, int>>& pairing, const MetricField& m) {
  const Lattice& lat = a.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();

  enum class Factor { Delta, GInv, G };
  struct Pair {
    int sa, sb;
    Factor f;
    bool swap;  // index order inside the metric factor
  };
  std::vector<Pair> pairs;
  std::vector<bool> useda(a.rank(), false), usedb(b.rank(), false);
  for (auto [pa, pb] : pairing) {
    if (pa < 0 || pa >= a.rank() || pb < 0 || pb >= b.rank())
      throw std::invalid_argument("contract: pairing slot out of range");
    if (useda[pa] || usedb[pb]) throw std::invalid_argument("contract: slot paired twice");
    useda[pa] = usedb[pb] = true;
    const Slot A = a.sig()[pa], B = b.sig()[pb];
    Pair pr{pa, pb, Factor::Delta, false};
    if (A.anti == B.anti && A.upper != B.upper) {
      pr.f = Factor::Delta;
    } else if (A.anti != B.anti && !A.upper && !B.upper) {
      pr.f = Factor::GInv;
      pr.swap = A.anti;  // g^{holo antibar}: holo index first
    } else if (A.anti != B.anti && A.upper && B.upper) {
      pr.f = Factor::G;
      pr.swap = A.anti;
    } else {
      throw std::invalid_argument("contract: signature mismatch in pairing");
    }
    pairs.push_back(pr);
  }

  IndexSig rsig;
  std::vector<int> freea, freeb;
  for (int i = 0; i < a.rank(); ++i)
    if (!useda[i]) {
      rsig.slots[rsig.rank++] = a.sig()[i];
      freea.push_back(i);
    }
  for (int i = 0; i < b.rank(); ++i)
    if (!usedb[i]) {
      rsig.slots[rsig.rank++] = b.sig()[i];
      freeb.push_back(i);
    }
  TensorField out(lat, rsig);

  const int np = static_cast<int>(pairs.size());
  const int nfa = static_cast<int>(freea.size()), nfb = static_cast<int>(freeb.size());
  std::vector<int> ia(a.rank(), 0), ib(b.rank(), 0), fidx(nfa + nfb, 0), kidx(np, 0), lidx(np, 0);

  // iterate over free indices (outer) and contraction indices (inner)
  std::size_t ncomb = 1;
  for (int i = 0; i < nfa + nfb; ++i) ncomb *= static_cast<std::size_t>(n);
  std::size_t ncontr = 1;
  for (int i = 0; i < np; ++i) {
    ncontr *= static_cast<std::size_t>(n);
    if (pairs[i].f != Factor::Delta) ncontr *= static_cast<std::size_t>(n);
  }

  std::vector<cplx> weight(P);
  for (std::size_t fc = 0; fc < ncomb; ++fc) {
    std::size_t tmp = fc;
    for (int i = nfa + nfb - 1; i >= 0; --i) {
      fidx[i] = static_cast<int>(tmp % n);
      tmp /= n;
    }
    cplx* dst = out.comp(fc);
    for (std::size_t kc = 0; kc < ncontr; ++kc) {
      std::size_t t2 = kc;
      for (int i = np - 1; i >= 0; --i) {
        if (pairs[i].f != Factor::Delta) {
          lidx[i] = static_cast<int>(t2 % n);
          t2 /= n;
        }
        kidx[i] = static_cast<int>(t2 % n);
        t2 /= n;
      }
      // build full index tuples
      for (int i = 0; i < nfa; ++i) ia[freea[i]] = fidx[i];
      for (int i = 0; i < nfb; ++i) ib[freeb[i]] = fidx[nfa + i];
      bool metric_used = false;
      for (int i = 0; i < np; ++i) {
        ia[pairs[i].sa] = kidx[i];
        ib[pairs[i].sb] = (pairs[i].f == Factor::Delta) ? kidx[i] : lidx[i];
        if (pairs[i].f != Factor::Delta) metric_used = true;
      }
      std::size_t ca = 0, cb = 0;
      for (int i = 0; i < a.rank(); ++i) ca = ca * n + ia[i];
      for (int i = 0; i < b.rank(); ++i) cb = cb * n + ib[i];
      const cplx* xa = a.comp(ca);
      const cplx* xb = b.comp(cb);
      if (!metric_used) {
        for (std::size_t p = 0; p < P; ++p) dst[p] += xa[p] * xb[p];
      } else {
        std::fill(weight.begin(), weight.end(), cplx(1.0, 0.0));
        for (int i = 0; i < np; ++i) {
          if (pairs[i].f == Factor::Delta) continue;
          int u = kidx[i], v = lidx[i];
          if (pairs[i].swap) std::swap(u, v);
          const cplx* fac = pairs[i].f == Factor::GInv ? m.gic(u, v) : m.gc(u, v);
          for (std::size_t p = 0; p < P; ++p) weight[p] *= fac[p];
        }
        for (std::size_t p = 0; p < P; ++p) dst[p] += weight[p] * xa[p] * xb[p];
      }
    }
  }
  return out;
}

// ----------------------------------------------------------------------
// Chern covariant derivative.  gamma holds Gamma_{i k}^l with signature
// (HL, HL, HU); holomorphic directions correct holomorphic slots only and
// antiholomorphic directions the conjugate slots, with conj(Gamma).
inline TensorField covariant_derivative(const TensorField& t, const MetricField& m,
                                        const TensorField& gamma, Kind kind, int dir) {
  const Lattice& lat = t.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  (void)m;
  TensorField out(lat, t.sig());
  for (std::size_t c = 0; c < t.comps(); ++c) lat.partial(dir, kind, t.comp(c), out.comp(c));

  const bool anti = (kind == Kind::Antiholomorphic);
  std::size_t trail = t.comps();
  std::size_t lead = 1;
  for (int s = 0; s < t.rank(); ++s) {
    trail /= static_cast<std::size_t>(n);
    const Slot sl = t.sig()[s];
    if (sl.anti == anti) {
      for (std::size_t L = 0; L < lead; ++L)
        for (int p0 = 0; p0 < n; ++p0)
          for (int q = 0; q < n; ++q) {
            // lower slot p0: -Gamma_{dir p0}^q t(..q..); upper: +Gamma_{dir q}^{p0} t(..q..)
            const std::size_t gcomp = sl.upper
                                          ? (static_cast<std::size_t>(dir) * n + q) * n + p0
                                          : (static_cast<std::size_t>(dir) * n + p0) * n + q;
            const cplx* gam = gamma.comp(gcomp);
            const cplx* src = t.raw().data() + ((L * n + q) * trail) * P;
            cplx* dst = out.raw().data() + ((L * n + p0) * trail) * P;
            const double sgn = sl.upper ? 1.0 : -1.0;
            if (!anti) {
              for (std::size_t r = 0; r < trail; ++r) {
                const cplx* sp = src + r * P;
                cplx* dp = dst + r * P;
                for (std::size_t p = 0; p < P; ++p) dp[p] += sgn * gam[p] * sp[p];
              }
            } else {
              for (std::size_t r = 0; r < trail; ++r) {
                const cplx* sp = src + r * P;
                cplx* dp = dst + r * P;
                for (std::size_t p = 0; p < P; ++p) dp[p] += sgn * std::conj(gam[p]) * sp[p];
              }
            }
          }
    }
    lead *= static_cast<std::size_t>(n);
  }
  return out;
}

}  // namespace hcf

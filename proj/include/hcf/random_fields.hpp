#pragma once

// Seeded band-limited random fields and the metric generators (flat,
// Kaehler potential, Hermitian perturbation).
//
// Reproducibility: mt19937_64 is fully specified by the standard; the
// uniform mapping below avoids std::uniform_real_distribution, whose
// output is implementation-defined.  Fourier coefficients are normalized
// analytically (grid-independent), so the same seed describes the same
// continuum field at every resolution.

#include <functional>
#include <random>

#include "hcf/tensor.hpp"

namespace hcf {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  // uniform in [-1, 1)
  double sym() { return 2.0 * ((eng_() >> 11) * 0x1.0p-53) - 1.0; }

 private:
  std::mt19937_64 eng_;
};

namespace rdetail {

struct Mode {
  int m[6];  // per real axis
};

// nonzero modes with |m|_inf <= bw, one representative per +-m pair,
// enumerated lexicographically
inline std::vector<Mode> half_modes(int axes, int bw) {
  std::vector<Mode> modes;
  std::vector<int> cur(axes, -bw);
  while (true) {
    bool nonzero = false, canonical = false;
    for (int a = 0; a < axes; ++a)
      if (cur[a] != 0) {
        nonzero = true;
        canonical = cur[a] > 0;  // first nonzero entry positive
        break;
      }
    if (nonzero && canonical) {
      Mode m{};
      for (int a = 0; a < axes; ++a) m.m[a] = cur[a];
      modes.push_back(m);
    }
    int a = axes - 1;
    while (a >= 0 && ++cur[a] > bw) cur[a--] = -bw;
    if (a < 0) break;
  }
  return modes;
}

// out += c e^{2 pi i m.x}, evaluated separably from per-axis phase tables
inline void add_mode(const Lattice& lat, const Mode& m, cplx c, int sign, cplx* out) {
  const int axes = lat.axes(), N = lat.N();
  std::vector<std::vector<cplx>> tab(axes, std::vector<cplx>(N));
  for (int a = 0; a < axes; ++a)
    for (int r = 0; r < N; ++r)
      tab[a][r] = std::polar(1.0, 2.0 * pi * sign * m.m[a] * r * lat.h());
  const std::function<void(int, std::size_t, cplx)> rec = [&](int a, std::size_t base, cplx ph) {
    if (a == axes - 1) {
      cplx* o = out + base;
      const auto& t = tab[a];
      for (int r = 0; r < N; ++r) o[r] += ph * t[r];
      return;
    }
    const std::size_t s = lat.stride(a);
    for (int r = 0; r < N; ++r) rec(a + 1, base + r * s, ph * tab[a][r]);
  };
  rec(0, 0, c);
}

}  // namespace rdetail

// real band-limited scalar, zero mean, sum of coefficient magnitudes = 1
inline std::vector<double> random_real_scalar(const Lattice& lat, Rng& rng, int bandwidth) {
  auto modes = rdetail::half_modes(lat.axes(), bandwidth);
  std::vector<cplx> coef(modes.size());
  double total = 0.0;
  for (auto& c : coef) {
    c = cplx(rng.sym(), rng.sym());
    total += std::abs(c);
  }
  std::vector<cplx> acc(lat.points(), cplx{});
  for (std::size_t k = 0; k < modes.size(); ++k)
    rdetail::add_mode(lat, modes[k], coef[k] / total, +1, acc.data());
  std::vector<double> out(acc.size());
  for (std::size_t p = 0; p < acc.size(); ++p) out[p] = acc[p].real();
  return out;
}

// complex band-limited scalar (both halves of the mode lattice populated)
inline std::vector<cplx> random_complex_scalar(const Lattice& lat, Rng& rng, int bandwidth) {
  auto modes = rdetail::half_modes(lat.axes(), bandwidth);
  std::vector<cplx> ca(modes.size()), cb(modes.size());
  double total = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    ca[k] = cplx(rng.sym(), rng.sym());
    cb[k] = cplx(rng.sym(), rng.sym());
    total += std::abs(ca[k]) + std::abs(cb[k]);
  }
  std::vector<cplx> out(lat.points(), cplx{});
  for (std::size_t k = 0; k < modes.size(); ++k) {
    rdetail::add_mode(lat, modes[k], ca[k] / total, +1, out.data());
    rdetail::add_mode(lat, modes[k], cb[k] / total, -1, out.data());
  }
  return out;
}

// Hermitian-symmetric band-limited (1,1) field, each component's
// coefficient sum normalized to 1 (so sup|component| <= 1)
inline TensorField random_hermitian11(const Lattice& lat, Rng& rng, int bandwidth) {
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField h(lat, {HL, AL});
  for (int i = 0; i < n; ++i) {
    auto d = random_real_scalar(lat, rng, bandwidth);
    cplx* dst = h.comp(static_cast<std::size_t>(i) * n + i);
    for (std::size_t p = 0; p < P; ++p) dst[p] = d[p];
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      auto off = random_complex_scalar(lat, rng, bandwidth);
      cplx* a = h.comp(static_cast<std::size_t>(i) * n + j);
      cplx* b = h.comp(static_cast<std::size_t>(j) * n + i);
      for (std::size_t p = 0; p < P; ++p) {
        a[p] = off[p];
        b[p] = std::conj(off[p]);
      }
    }
  return h;
}

// band-limited (1,0)-form with complex components
inline TensorField random_oneform(const Lattice& lat, Rng& rng, int bandwidth) {
  const int n = lat.n();
  TensorField a(lat, {HL});
  for (int i = 0; i < n; ++i) {
    auto f = random_complex_scalar(lat, rng, bandwidth);
    std::copy(f.begin(), f.end(), a.comp(i));
  }
  return a;
}

// ---------------------------------------------------------------------
// Metric generators

inline MetricField flat_metric(const Lattice& lat, double scale = 1.0) {
  const int n = lat.n();
  const std::size_t P = lat.points();
  TensorField g(lat, {HL, AL});
  for (int i = 0; i < n; ++i) {
    cplx* dst = g.comp(static_cast<std::size_t>(i) * n + i);
    for (std::size_t p = 0; p < P; ++p) dst[p] = scale;
  }
  return MetricField::make(lat, g);
}

// g_{i jbar} = delta_{ij} + d_i d_{jbar} (amplitude * phi); the Hessian is
// normalized analytically so sup of each component is about `amplitude`.
// The discrete torsion of the result vanishes to roundoff with the
// spectral backend, since band-limited Wirtinger derivatives are exact.
inline MetricField kahler_potential_metric(const Lattice& lat, std::uint64_t seed, double amplitude,
                                           int bandwidth) {
  const int n = lat.n();
  Rng rng(seed);
  auto modes = rdetail::half_modes(lat.axes(), bandwidth);
  std::vector<cplx> coef(modes.size());
  for (auto& c : coef) c = cplx(rng.sym(), rng.sym());
  // Wirtinger factors per mode: d_i -> pi i (m_x - i m_y), d_jbar -> pi i (m_x + i m_y)
  double hess_norm = 0.0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double mi = std::hypot(static_cast<double>(modes[k].m[2 * i]),
                                     static_cast<double>(modes[k].m[2 * i + 1]));
        const double mj = std::hypot(static_cast<double>(modes[k].m[2 * j]),
                                     static_cast<double>(modes[k].m[2 * j + 1]));
        worst = std::max(worst, pi * pi * mi * mj);
      }
    hess_norm += std::abs(coef[k]) * worst;
  }
  for (auto& c : coef) c *= amplitude / hess_norm;

  TensorField g(lat, {HL, AL});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cplx* dst = g.comp(static_cast<std::size_t>(i) * n + j);
      for (std::size_t k = 0; k < modes.size(); ++k) {
        const cplx di(0.0, pi);
        const cplx fi = di * cplx(modes[k].m[2 * i], -modes[k].m[2 * i + 1]);
        const cplx fj = di * cplx(modes[k].m[2 * j], modes[k].m[2 * j + 1]);
        // the +-m pair gives d_i d_jbar Re(c e) = f_i fb_j Re(c e), since
        // both Wirtinger factors flip sign under m -> -m
        rdetail::add_mode(lat, modes[k], 0.5 * coef[k] * fi * fj, +1, dst);
        rdetail::add_mode(lat, modes[k], 0.5 * std::conj(coef[k]) * fi * fj, -1, dst);
      }
      if (i == j)
        for (std::size_t p = 0; p < lat.points(); ++p) dst[p] += 1.0;
    }
  return MetricField::make(lat, g);
}

// g = delta + amplitude * H with H a random Hermitian band-limited field
inline MetricField hermitian_perturbation_metric(const Lattice& lat, std::uint64_t seed,
                                                 double amplitude, int bandwidth) {
  const int n = lat.n();
  const std::size_t P = lat.points();
  Rng rng(seed);
  TensorField H = random_hermitian11(lat, rng, bandwidth);
  TensorField g = H;
  g *= amplitude;
  for (int i = 0; i < n; ++i) {
    cplx* dst = g.comp(static_cast<std::size_t>(i) * n + i);
    for (std::size_t p = 0; p < P; ++p) dst[p] += 1.0;
  }
  return MetricField::make(lat, g);
}

}  // namespace hcf

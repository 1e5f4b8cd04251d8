#pragma once

// Periodic uniform grid over [0,1)^{2n} (the torus C^n/Z^{2n}) with
// exchangeable spatial-derivative backends and trapezoid quadrature.
//
// Layout: fields are stored row-major over the real axes
// (x^1, y^1, ..., x^n, y^n), x^1 slowest.  Complex coordinates are
// z^j = x^j + i y^j.  Both backends are circulant (one real N x N
// stencil applied along a real axis), so they commute with grid
// translations and with each other exactly.

#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcf {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

enum class Backend { Spectral, CentralFD4 };

enum class Kind { Holomorphic, Antiholomorphic };

// Deterministic pairwise sum; fixed association tree independent of
// chunking so results are reproducible bit-for-bit.
template <typename T>
T pairwise_sum(const T* v, std::size_t len) {
  if (len <= 8) {
    T acc{};
    for (std::size_t i = 0; i < len; ++i) acc += v[i];
    return acc;
  }
  const std::size_t half = len / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, len - half);
}

class Lattice {
 public:
  Lattice(int n, int N, Backend backend)
      : n_(n), N_(N), backend_(backend), h_(1.0 / N) {
    if (n < 1 || n > 3) throw std::invalid_argument("lattice: n must be in [1,3]");
    if (N < 8 || N % 2 != 0) throw std::invalid_argument("lattice: N must be even and >= 8");
    points_ = 1;
    for (int a = 0; a < 2 * n_; ++a) points_ *= static_cast<std::size_t>(N_);
    strides_.resize(2 * n_);
    std::size_t s = 1;
    for (int a = 2 * n_ - 1; a >= 0; --a) {
      strides_[a] = s;
      s *= static_cast<std::size_t>(N_);
    }
    build_kernel();
  }

  int n() const { return n_; }
  int N() const { return N_; }
  Backend backend() const { return backend_; }
  double h() const { return h_; }
  std::size_t points() const { return points_; }
  int axes() const { return 2 * n_; }

  // stride of real axis a in the flattened index (axis 0 slowest)
  std::size_t stride(int axis) const { return strides_[axis]; }

  double coord(std::size_t p, int axis) const {
    return static_cast<double>((p / stride(axis)) % static_cast<std::size_t>(N_)) * h_;
  }

  // d/dx_axis applied along one real axis, out must not alias in.
  void apply_axis(int axis, const cplx* in, cplx* out) const {
    if (axis < 0 || axis >= 2 * n_) throw std::invalid_argument("apply_axis: axis out of range");
    const std::size_t s = stride(axis);
    const std::size_t Nn = static_cast<std::size_t>(N_);
    const std::size_t block = Nn * s;          // span of one axis sweep
    const std::size_t nblocks = points_ / block;
    if (s == 1) {
      // contiguous lines: gather tiles of several lines, run the strided
      // kernel over the tile columns
      constexpr std::size_t TILE = 8;
      std::vector<cplx> tin(Nn * TILE), tout(Nn * TILE);
      for (std::size_t b = 0; b < nblocks; b += TILE) {
        const std::size_t nb = (b + TILE <= nblocks) ? TILE : nblocks - b;
        for (std::size_t j = 0; j < Nn; ++j)
          for (std::size_t r = 0; r < nb; ++r) tin[j * TILE + r] = in[(b + r) * Nn + j];
        kernel_columns(tin.data(), tout.data(), TILE, nb);
        for (std::size_t j = 0; j < Nn; ++j)
          for (std::size_t r = 0; r < nb; ++r) out[(b + r) * Nn + j] = tout[j * TILE + r];
      }
    } else {
      constexpr std::size_t CH = 16;
      for (std::size_t b = 0; b < nblocks; ++b) {
        const cplx* bin = in + b * block;
        cplx* bout = out + b * block;
        for (std::size_t c0 = 0; c0 < s; c0 += CH) {
          const std::size_t nc = (c0 + CH <= s) ? CH : s - c0;
          kernel_strided(bin + c0, bout + c0, s, nc);
        }
      }
    }
  }

  std::vector<cplx> axis_derivative(int axis, const std::vector<cplx>& f) const {
    assert(f.size() == points_);
    std::vector<cplx> out(points_);
    apply_axis(axis, f.data(), f.size() ? out.data() : nullptr);
    return out;
  }

  // Wirtinger derivative: d_j = (d_x - i d_y)/2, d_jbar = (d_x + i d_y)/2,
  // dir is the complex axis (0-based).
  void partial(int dir, Kind kind, const cplx* in, cplx* out) const {
    if (dir < 0 || dir >= n_) throw std::invalid_argument("partial: axis out of range");
    std::vector<cplx> dy(points_);
    apply_axis(2 * dir, in, out);
    apply_axis(2 * dir + 1, in, dy.data());
    const cplx iu(0.0, kind == Kind::Holomorphic ? -0.5 : 0.5);
    for (std::size_t p = 0; p < points_; ++p) out[p] = 0.5 * out[p] + iu * dy[p];
  }

  std::vector<cplx> partial(int dir, Kind kind, const std::vector<cplx>& f) const {
    assert(f.size() == points_);
    std::vector<cplx> out(points_);
    partial(dir, kind, f.data(), out.data());
    return out;
  }

  // trapezoid rule: h^{2n} * sum f*weight (exact for band-limited periodic
  // integrands); fixed summation tree for reproducibility
  double integrate(const std::vector<double>& f) const {
    assert(f.size() == points_);
    return cell_volume() * pairwise_sum(f.data(), f.size());
  }

  double integrate(const std::vector<double>& f, const std::vector<double>& weight) const {
    assert(f.size() == points_ && weight.size() == points_);
    std::vector<double> fw(points_);
    for (std::size_t p = 0; p < points_; ++p) fw[p] = f[p] * weight[p];
    return cell_volume() * pairwise_sum(fw.data(), fw.size());
  }

  cplx integrate(const std::vector<cplx>& f) const {
    assert(f.size() == points_);
    return cell_volume() * pairwise_sum(f.data(), f.size());
  }

  cplx integrate(const std::vector<cplx>& f, const std::vector<double>& weight) const {
    assert(f.size() == points_ && weight.size() == points_);
    std::vector<cplx> fw(points_);
    for (std::size_t p = 0; p < points_; ++p) fw[p] = f[p] * weight[p];
    return cell_volume() * pairwise_sum(fw.data(), fw.size());
  }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < 2 * n_; ++a) v *= h_;
    return v;
  }

  bool same_shape(const Lattice& o) const { return n_ == o.n_ && N_ == o.N_; }

 private:
  void build_kernel() {
    const std::size_t Nn = static_cast<std::size_t>(N_);
    kernel_.assign(Nn, 0.0);
    if (backend_ == Backend::Spectral) {
      // d[r] = (1/N) sum_k i kappa_k e^{2 pi i k r / N}; Nyquist mode dropped
      for (std::size_t r = 0; r < Nn; ++r) {
        double acc = 0.0;
        for (int k = 1; k < N_ / 2; ++k)
          acc -= 4.0 * pi * k * std::sin(2.0 * pi * k * static_cast<double>(r) / N_);
        kernel_[r] = acc / N_;
      }
      kernel_[0] = 0.0;
    } else {
      // (-f(x+2h) + 8 f(x+h) - 8 f(x-h) + f(x-2h)) / (12 h)
      kernel_[1] = -8.0 / (12.0 * h_);
      kernel_[2] = 1.0 / (12.0 * h_);
      kernel_[Nn - 1] = 8.0 / (12.0 * h_);
      kernel_[Nn - 2] = -1.0 / (12.0 * h_);
    }
  }

  // out(j, c) = sum_l d[(j-l) mod N] in(l, c), element (j,c) at j*cs + c
  void kernel_columns(const cplx* in, cplx* out, std::size_t cs, std::size_t nc) const {
    kernel_generic(in, out, cs, nc);
  }
  void kernel_strided(const cplx* in, cplx* out, std::size_t cs, std::size_t nc) const {
    kernel_generic(in, out, cs, nc);
  }

  void kernel_generic(const cplx* in, cplx* out, std::size_t cs, std::size_t nc) const {
    const std::size_t Nn = static_cast<std::size_t>(N_);
    const double* __restrict__ din = reinterpret_cast<const double*>(in);
    double* __restrict__ dout = reinterpret_cast<double*>(out);
    const std::size_t w = 2 * nc;  // doubles per row chunk
    if (backend_ == Backend::CentralFD4) {
      const double c1 = 8.0 / (12.0 * h_), c2 = -1.0 / (12.0 * h_);
      for (std::size_t j = 0; j < Nn; ++j) {
        const std::size_t jp1 = (j + 1) % Nn, jp2 = (j + 2) % Nn;
        const std::size_t jm1 = (j + Nn - 1) % Nn, jm2 = (j + Nn - 2) % Nn;
        const double* __restrict__ a = din + jp1 * 2 * cs;
        const double* __restrict__ b = din + jm1 * 2 * cs;
        const double* __restrict__ c = din + jp2 * 2 * cs;
        const double* __restrict__ d = din + jm2 * 2 * cs;
        double* __restrict__ o = dout + j * 2 * cs;
        for (std::size_t t = 0; t < w; ++t) o[t] = c1 * (a[t] - b[t]) + c2 * (c[t] - d[t]);
      }
      return;
    }
    // two output rows per sweep keep the input row in registers
    std::size_t j = 0;
    for (; j + 1 < Nn; j += 2) {
      double* __restrict__ o0 = dout + j * 2 * cs;
      double* __restrict__ o1 = dout + (j + 1) * 2 * cs;
      for (std::size_t t = 0; t < w; ++t) o0[t] = 0.0;
      for (std::size_t t = 0; t < w; ++t) o1[t] = 0.0;
      for (std::size_t l = 0; l < Nn; ++l) {
        const double c0 = kernel_[(j + Nn - l) % Nn];
        const double c1 = kernel_[(j + 1 + Nn - l) % Nn];
        const double* __restrict__ x = din + l * 2 * cs;
        for (std::size_t t = 0; t < w; ++t) {
          const double v = x[t];
          o0[t] += c0 * v;
          o1[t] += c1 * v;
        }
      }
    }
    for (; j < Nn; ++j) {
      double* __restrict__ o = dout + j * 2 * cs;
      for (std::size_t t = 0; t < w; ++t) o[t] = 0.0;
      for (std::size_t l = 0; l < Nn; ++l) {
        const double coef = kernel_[(j + Nn - l) % Nn];
        const double* __restrict__ x = din + l * 2 * cs;
        for (std::size_t t = 0; t < w; ++t) o[t] += coef * x[t];
      }
    }
  }

  int n_, N_;
  Backend backend_;
  double h_;
  std::size_t points_;
  std::vector<std::size_t> strides_;
  std::vector<double> kernel_;
};

}  // namespace hcf

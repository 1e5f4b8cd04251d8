#pragma once

// Flow right-hand sides (-S + Q, the volume-normalized variant, and
// Kaehler-Ricci -S), classical RK4 time stepping with the curvature-scaled
// step policy dt = min(sigma_flow / K, sigma_grid h^2 lambda_min(g)),
// step rejection on positivity/Hermiticity loss, per-step diagnostics and
// the smoothing-estimate monitor.

#include <functional>

#include "hcf/energy.hpp"

namespace hcf {

enum class FlowVariant { HCF, HCFNormalized, KRF };

struct FlowSpec {
  FlowVariant variant = FlowVariant::HCF;
  double sigma_flow = 0.1;   // safety factor on the 1/K curvature scale
  double sigma_grid = 0.2;   // parabolic CFL factor on h^2 lambda_min
  double t_max = 50.0;
  long max_steps = 1000000;
  double K_floor = 1e-8;     // keeps dt finite near flat metrics
  double K_max = 1e8;        // blow-up declaration threshold
  double stop_static = 1e-9;
  double stop_rhs = 1e-9;
  int diag_stride = 1;       // cadence of the gradient diagnostics
  bool track_grad2T = false; // second torsion derivative (smoothing monitor)
};

struct Diagnostics {
  double t = 0.0, dt = 0.0;
  double sup_Om = 0.0, sup_T = 0.0, sup_gradT = 0.0, sup_gradOm = 0.0;
  double sup_grad2T = 0.0;   // tracked only on request; not a CSV column
  double volume = 0.0, F_value = 0.0;
  double static_tensor = 0.0, static_scalar = 0.0;
  double sup_rhs = 0.0;      // internal (convergence detection)
  double K() const { return std::max({sup_Om, sup_gradT, sup_T * sup_T}); }
};

struct FlowState {
  double t = 0.0;
  long step = 0;
  MetricField g;
  Diagnostics diag;
};

enum class FlowOutcome { ReachedTMax, Blowup, StaticConverged };

inline const char* outcome_name(FlowOutcome o) {
  switch (o) {
    case FlowOutcome::ReachedTMax: return "reached_tmax";
    case FlowOutcome::Blowup: return "blowup";
    case FlowOutcome::StaticConverged: return "static_converged";
  }
  return "?";
}

// ---------------------------------------------------------------------
// Lean RHS evaluation.  Computes S through the two-term scalar-curvature
// formula with the traced second derivative in divergence form,
//   g^{l mbar} d_l d_mbar g = sum_l d_l ( g^{l mbar} d_mbar g )
//                             - (d_l g^{l mbar}) d_mbar g,
// and Q from the torsion, without materializing the full curvature.
// Only the upper-triangle components are differentiated; the rest follow
// from Hermitian symmetry.
inline TensorField flow_rhs(const MetricField& g, FlowVariant variant) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  const std::size_t sn = static_cast<std::size_t>(n);
  const std::size_t n2 = sn * sn;
  const int ntri = n * (n + 1) / 2;
  const int axes = lat.axes();

  auto tri_index = [n](int i, int j) {  // i <= j
    return i * n - i * (i - 1) / 2 + (j - i);
  };

  // real-axis derivatives of the upper-triangle metric components
  std::vector<std::vector<cplx>> dax(static_cast<std::size_t>(axes) * ntri);
  for (int a = 0; a < axes; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        auto& dst = dax[static_cast<std::size_t>(a) * ntri + tri_index(i, j)];
        dst.resize(P);
        lat.apply_axis(a, g.gc(i, j), dst.data());
      }
  auto dax_at = [&](int a, int i, int j, std::size_t p) {
    // d_(x or y axis a) g_{i jbar}; lower triangle by conjugation
    return i <= j ? dax[static_cast<std::size_t>(a) * ntri + tri_index(i, j)][p]
                  : std::conj(dax[static_cast<std::size_t>(a) * ntri + tri_index(j, i)][p]);
  };

  // A_l[j][k] = g^{l mbar} d_mbar g_{j kbar}, upper triangle in (j,k)
  std::vector<std::vector<cplx>> A(static_cast<std::size_t>(n) * ntri);
  for (auto& v : A) v.assign(P, cplx{});
  {
    cplx dgv[27];
    for (std::size_t p = 0; p < P; ++p) {
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            dgv[(l * n + i) * n + j] =
                0.5 * (dax_at(2 * l, i, j, p) - cplx(0, 1) * dax_at(2 * l + 1, i, j, p));
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j)
          for (int k = j; k < n; ++k) {
            cplx acc{};
            for (int m = 0; m < n; ++m)
              acc += g.gic(l, m)[p] * std::conj(dgv[(m * n + k) * n + j]);
            A[static_cast<std::size_t>(l) * ntri + tri_index(j, k)][p] = acc;
          }
    }
  }
  // divA[j][k] = sum_l d_l A_l[j][k]
  std::vector<std::vector<cplx>> divA(ntri);
  for (auto& v : divA) v.assign(P, cplx{});
  {
    std::vector<cplx> dx(P), dy(P);
    for (int l = 0; l < n; ++l)
      for (int t = 0; t < ntri; ++t) {
        const cplx* src = A[static_cast<std::size_t>(l) * ntri + t].data();
        lat.apply_axis(2 * l, src, dx.data());
        lat.apply_axis(2 * l + 1, src, dy.data());
        cplx* dst = divA[t].data();
        for (std::size_t p = 0; p < P; ++p)
          dst[p] += 0.5 * (dx[p] - cplx(0, 1) * dy[p]);
      }
  }

  TensorField out(lat, {HL, AL});
  std::vector<double> k_det(P), det_only(P);

  cplx giv[9], dgv[27], Tl[27], wv[3], Sv[9], Qv[9], Ev[3];
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t c = 0; c < n2; ++c) giv[c] = g.ginv().comp(c)[p];
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          dgv[(l * n + i) * n + j] =
              0.5 * (dax_at(2 * l, i, j, p) - cplx(0, 1) * dax_at(2 * l + 1, i, j, p));
    auto GI = [&](int i, int j) { return giv[i * n + j]; };
    auto DG = [&](int l, int i, int j) { return dgv[(l * n + i) * n + j]; };

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) Tl[(i * n + j) * n + k] = DG(i, j, k) - DG(j, i, k);
    auto T = [&](int i, int j, int k) { return Tl[(i * n + j) * n + k]; };
    for (int i = 0; i < n; ++i) {
      cplx acc{};
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) acc += GI(j, l) * T(i, j, l);
      wv[i] = acc;
    }

    // E[m] = sum_l d_l g^{l mbar} = -g^{l bbar} (d_l g_{a bbar}) g^{a mbar}
    for (int m = 0; m < n; ++m) {
      cplx acc{};
      for (int l = 0; l < n; ++l)
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) acc -= GI(l, b) * DG(l, a, b) * GI(a, m);
      Ev[m] = acc;
    }

    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        cplx ddtr = divA[tri_index(j, k)][p];
        for (int m = 0; m < n; ++m) ddtr -= Ev[m] * std::conj(DG(m, k, j));
        cplx acc = -ddtr;
        for (int l = 0; l < n; ++l)
          for (int m = 0; m < n; ++m)
            for (int pp = 0; pp < n; ++pp)
              for (int q = 0; q < n; ++q)
                acc += GI(l, m) * GI(pp, q) * std::conj(DG(m, k, pp)) * DG(l, j, q);
        Sv[j * n + k] = acc;
        Sv[k * n + j] = std::conj(acc);
      }

    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        cplx q1{}, q2{}, q4{};
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l)
            for (int m = 0; m < n; ++m)
              for (int nn = 0; nn < n; ++nn) {
                q1 += GI(k, l) * GI(m, nn) * T(i, k, nn) * std::conj(T(j, l, m));
                q2 += GI(k, l) * GI(m, nn) * std::conj(T(l, nn, i)) * T(k, m, j);
              }
        for (int m = 0; m < n; ++m)
          for (int nn = 0; nn < n; ++nn)
            q4 += 0.5 * GI(m, nn) * (wv[m] * std::conj(T(nn, j, i)) + std::conj(wv[nn]) * T(m, i, j));
        const cplx q3 = wv[i] * std::conj(wv[j]);
        Qv[i * n + j] = 0.5 * q1 - 0.25 * q2 - 0.5 * q3 + q4;
        Qv[j * n + i] = std::conj(Qv[i * n + j]);
      }

    double trSQ = 0.0;  // tr_g (S - Q)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) trSQ += (GI(i, j) * (Sv[i * n + j] - Qv[i * n + j])).real();
    const double dv = g.det()[p];
    k_det[p] = trSQ * dv;
    det_only[p] = dv;

    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cplx v = -Sv[i * n + j] + Qv[i * n + j];
        if (variant == FlowVariant::KRF) v = -Sv[i * n + j];
        out.comp(static_cast<std::size_t>(i) * sn + j)[p] = v;
      }
  }

  if (variant == FlowVariant::HCFNormalized) {
    // + (1/n) ( int tr_g(S - Q) dV / int dV ) g ; dividing by the volume
    // keeps the normalization exact away from unit volume
    const double I = lat.cell_volume() * pairwise_sum(k_det.data(), P);
    const double V = lat.cell_volume() * pairwise_sum(det_only.data(), P);
    const double c = I / (V * n);
    for (std::size_t cix = 0; cix < n2; ++cix) {
      cplx* dst = out.comp(cix);
      const cplx* gm = g.g().comp(cix);
      for (std::size_t p = 0; p < P; ++p) dst[p] += c * gm[p];
    }
  }
  return out;
}

// ---------------------------------------------------------------------
// Diagnostics of an accepted state.  The gradient norms treat the full
// covariant derivative (holomorphic and antiholomorphic direction blocks).
struct DiagOptions {
  bool with_gradients = true;  // nabla Omega (and nabla^2 T when tracked)
  bool track_grad2T = false;
};

inline Diagnostics compute_diagnostics(const MetricField& g, FlowVariant variant,
                                       const DiagOptions& opt) {
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  ChernPackage cp = compute_package(g, CurvaturePath::Expanded);
  QPackage qp = compute_q(cp);

  Diagnostics d;
  d.sup_Om = sup_norm(cp.Om, g);
  d.sup_T = sup_norm(cp.T_low, g);
  d.volume = qp.volume;
  d.F_value = qp.F_value;
  auto [st, ss] = static_residual(cp, qp);
  d.static_tensor = st;
  d.static_scalar = ss;

  // stack of covariant derivatives with an explicit direction slot
  auto stack_cd = [&](const TensorField& t, Kind kind) {
    IndexSig sig;
    sig.slots[sig.rank++] = (kind == Kind::Holomorphic) ? HL : AL;
    for (int i = 0; i < t.rank(); ++i) sig.slots[sig.rank++] = t.sig()[i];
    TensorField out(lat, sig);
    for (int dd = 0; dd < n; ++dd) {
      TensorField u = cd(cp, t, kind, dd);
      std::copy(u.raw().begin(), u.raw().end(), out.raw().begin() + dd * u.raw().size());
    }
    return out;
  };

  TensorField DTh = stack_cd(cp.T_low, Kind::Holomorphic);
  TensorField DTa = stack_cd(cp.T_low, Kind::Antiholomorphic);
  {
    auto a = norm_sq(DTh, g);
    auto b = norm_sq(DTa, g);
    double mx = 0.0;
    for (std::size_t p = 0; p < P; ++p) mx = std::max(mx, a[p] + b[p]);
    d.sup_gradT = std::sqrt(std::max(mx, 0.0));
  }

  if (opt.with_gradients) {
    // |nabla Om|^2 = 2 |holomorphic block|^2 by the Hermitian symmetry of Om
    TensorField DOm = stack_cd(cp.Om, Kind::Holomorphic);
    auto a = norm_sq(DOm, g);
    double mx = 0.0;
    for (std::size_t p = 0; p < P; ++p) mx = std::max(mx, 2.0 * a[p]);
    d.sup_gradOm = std::sqrt(std::max(mx, 0.0));
    if (opt.track_grad2T) {
      double m2 = 0.0;
      std::vector<double> acc(P, 0.0);
      for (Kind k2 : {Kind::Holomorphic, Kind::Antiholomorphic}) {
        TensorField A = stack_cd(DTh, k2);
        TensorField B = stack_cd(DTa, k2);
        auto na = norm_sq(A, g);
        auto nb = norm_sq(B, g);
        for (std::size_t p = 0; p < P; ++p) acc[p] += na[p] + nb[p];
      }
      for (std::size_t p = 0; p < P; ++p) m2 = std::max(m2, acc[p]);
      d.sup_grad2T = std::sqrt(std::max(m2, 0.0));
    }
  }

  // rhs of the selected variant, for convergence detection
  TensorField r = qp.Q;
  r -= cp.S;
  if (variant == FlowVariant::KRF) {
    r = cp.S;
    r *= cplx(-1.0, 0.0);
  } else if (variant == FlowVariant::HCFNormalized) {
    const double I = lat.integrate(qp.k, g.det());
    const double c = I / (qp.volume * n);
    for (std::size_t cix = 0; cix < r.comps(); ++cix) {
      cplx* dst = r.comp(cix);
      const cplx* gm = g.g().comp(cix);
      for (std::size_t p = 0; p < P; ++p) dst[p] += c * gm[p];
    }
  }
  d.sup_rhs = sup_norm(r, g);
  return d;
}

// ---------------------------------------------------------------------
struct StepResult {
  bool accepted = false;
  bool blowup = false;
  double dt = 0.0;
};

using RhsFn = std::function<TensorField(const MetricField&)>;

namespace fdetail {

inline std::optional<MetricField> axpy_metric(const MetricField& g, double a, const TensorField& k) {
  TensorField gn = g.g();
  const std::size_t sz = gn.raw().size();
  for (std::size_t i = 0; i < sz; ++i) gn.raw()[i] += a * k.raw()[i];
  return MetricField::try_make(g.lattice(), gn);
}

// one classical RK4 step; empty optional if any stage leaves the cone of
// valid metrics
inline std::optional<MetricField> rk4_with(const MetricField& g, double dt, const RhsFn& rhs) {
  TensorField k1 = rhs(g);
  auto g2 = axpy_metric(g, 0.5 * dt, k1);
  if (!g2) return std::nullopt;
  TensorField k2 = rhs(*g2);
  auto g3 = axpy_metric(g, 0.5 * dt, k2);
  if (!g3) return std::nullopt;
  TensorField k3 = rhs(*g3);
  auto g4 = axpy_metric(g, dt, k3);
  if (!g4) return std::nullopt;
  TensorField k4 = rhs(*g4);

  TensorField gn = g.g();
  const std::size_t sz = gn.raw().size();
  for (std::size_t i = 0; i < sz; ++i)
    gn.raw()[i] += (dt / 6.0) * (k1.raw()[i] + 2.0 * k2.raw()[i] + 2.0 * k3.raw()[i] + k4.raw()[i]);
  // Hermitian symmetry must survive to roundoff; then re-symmetrize so
  // drift cannot accumulate over long runs
  const Lattice& lat = g.lattice();
  const int n = lat.n();
  const std::size_t P = lat.points();
  double herm = 0.0, scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cplx* a = gn.comp(static_cast<std::size_t>(i) * n + j);
      const cplx* b = gn.comp(static_cast<std::size_t>(j) * n + i);
      for (std::size_t p = 0; p < P; ++p) {
        herm = std::max(herm, std::abs(a[p] - std::conj(b[p])));
        scale = std::max(scale, std::abs(a[p]));
      }
    }
  if (herm > 1e-12 * std::max(scale, 1.0)) return std::nullopt;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      cplx* a = gn.comp(static_cast<std::size_t>(i) * n + j);
      cplx* b = gn.comp(static_cast<std::size_t>(j) * n + i);
      for (std::size_t p = 0; p < P; ++p) {
        const cplx v = 0.5 * (a[p] + std::conj(b[p]));
        a[p] = v;
        b[p] = std::conj(v);
      }
    }
  return MetricField::try_make(lat, gn);
}

inline std::optional<MetricField> rk4(const MetricField& g, double dt, FlowVariant variant) {
  return rk4_with(g, dt, [variant](const MetricField& m) { return flow_rhs(m, variant); });
}

}  // namespace fdetail

// Advance one accepted step (or declare blow-up).  state.diag must be the
// diagnostics of the current state; it is refreshed for the new state.
// rhs_override substitutes the right-hand side (exercised by tests).
inline StepResult flow_step(FlowState& state, const FlowSpec& spec, const DiagOptions& dopt,
                            const RhsFn& rhs_override = {}) {
  const Lattice& lat = state.g.lattice();
  const double K = state.diag.K();
  double dt = std::min(spec.sigma_flow / std::max(K, spec.K_floor),
                       spec.sigma_grid * lat.h() * lat.h() * state.g.min_eig());
  dt = std::min(dt, spec.t_max - state.t);
  const RhsFn rhs =
      rhs_override ? rhs_override
                   : RhsFn([v = spec.variant](const MetricField& m) { return flow_rhs(m, v); });
  StepResult res;
  while (true) {
    if (dt < 1e-12) {
      res.blowup = true;
      return res;
    }
    auto gn = fdetail::rk4_with(state.g, dt, rhs);
    if (gn) {
      state.g = std::move(*gn);
      state.t += dt;
      state.step += 1;
      state.diag = compute_diagnostics(state.g, spec.variant, dopt);
      state.diag.t = state.t;
      state.diag.dt = dt;
      res.accepted = true;
      res.dt = dt;
      return res;
    }
    dt *= 0.5;
  }
}

struct EvolveResult {
  std::vector<Diagnostics> trajectory;
  FlowOutcome outcome = FlowOutcome::ReachedTMax;
  double final_t = 0.0;
  long steps = 0;
};

// Integrate from g0 until t_max, convergence to a static metric, or
// blow-up.  row_cb fires once per accepted step (and once for the initial
// state); snap_cb fires every snapshot_stride accepted steps and on the
// final state.
inline EvolveResult evolve(const MetricField& g0, const FlowSpec& spec,
                           const std::function<void(const FlowState&)>& row_cb = {},
                           const std::function<void(const FlowState&)>& snap_cb = {},
                           long snapshot_stride = 0) {
  FlowState st{0.0, 0, g0, {}};
  DiagOptions dopt;
  dopt.track_grad2T = spec.track_grad2T;
  st.diag = compute_diagnostics(st.g, spec.variant, dopt);
  if (spec.variant == FlowVariant::KRF && st.diag.sup_T > 1e-6)
    throw std::invalid_argument("KRF variant requires Kaehler initial data (sup|T| <= 1e-6)");

  EvolveResult out;
  auto emit = [&](bool snap) {
    out.trajectory.push_back(st.diag);
    if (row_cb) row_cb(st);
    if (snap_cb && snap) snap_cb(st);
  };
  emit(snapshot_stride > 0);

  DiagOptions light = dopt;
  long since_heavy = 0;
  while (true) {
    if (st.diag.static_tensor < spec.stop_static && st.diag.static_scalar < spec.stop_static &&
        st.diag.sup_rhs < spec.stop_rhs) {
      out.outcome = FlowOutcome::StaticConverged;
      break;
    }
    if (st.t >= spec.t_max - 1e-15 || st.step >= spec.max_steps) {
      out.outcome = FlowOutcome::ReachedTMax;
      break;
    }
    if (st.diag.K() > spec.K_max) {
      out.outcome = FlowOutcome::Blowup;
      break;
    }
    ++since_heavy;
    light.with_gradients = (spec.diag_stride <= 1) || (since_heavy % spec.diag_stride == 0);
    const double prev_gradOm = st.diag.sup_gradOm;
    const double prev_grad2T = st.diag.sup_grad2T;
    StepResult sr = flow_step(st, spec, light);
    if (!light.with_gradients) {
      st.diag.sup_gradOm = prev_gradOm;  // carried forward between refreshes
      st.diag.sup_grad2T = prev_grad2T;
    }
    if (sr.blowup) {
      out.outcome = FlowOutcome::Blowup;
      break;
    }
    emit(snapshot_stride > 0 && (st.step % snapshot_stride == 0));
  }
  if (snap_cb && snapshot_stride > 0 && st.step % snapshot_stride != 0) snap_cb(st);
  out.final_t = st.t;
  out.steps = st.step;
  return out;
}

// ---------------------------------------------------------------------
struct SmoothingReport {
  double K0 = 0.0;
  double max_ratio_gradOm = 0.0;
  double max_ratio_grad2T = 0.0;
  bool gradOm_monotone_growth_final_half = false;
};

// Tracks sqrt(t) sup|nabla Omega| / K0 (and the nabla^2 T analogue when
// available) along a trajectory; the smoothing estimates predict these
// stay bounded.
inline SmoothingReport smoothing_monitor(const std::vector<Diagnostics>& traj) {
  SmoothingReport rep;
  if (traj.empty()) return rep;
  rep.K0 = std::max(traj.front().K(), 1e-300);
  std::vector<double> r1;
  r1.reserve(traj.size());
  for (const auto& d : traj) {
    const double a = std::sqrt(std::max(d.t, 0.0)) * d.sup_gradOm / rep.K0;
    const double b = std::sqrt(std::max(d.t, 0.0)) * d.sup_grad2T / rep.K0;
    rep.max_ratio_gradOm = std::max(rep.max_ratio_gradOm, a);
    rep.max_ratio_grad2T = std::max(rep.max_ratio_grad2T, b);
    r1.push_back(a);
  }
  const std::size_t mid = r1.size() / 2;
  bool all_up = r1.size() - mid >= 2;
  for (std::size_t i = mid + 1; i < r1.size(); ++i)
    if (r1[i] <= r1[i - 1]) {
      all_up = false;
      break;
    }
  rep.gradOm_monotone_growth_final_half = all_up;
  return rep;
}

}  // namespace hcf

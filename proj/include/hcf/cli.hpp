#pragma once

// Command implementations behind the hcf tool: `check` runs the identity
// and variational suites against one configured metric, `evolve` runs the
// flow writing diagnostics CSV and snapshots, `compare` diffs two snapshot
// series.  Exit codes: 0 pass, 1 tolerance failure, 2 blow-up, 3 config
// error.

#include <filesystem>
#include <iomanip>
#include <iostream>

#include "hcf/io.hpp"
#include "hcf/random_fields.hpp"
#include "hcf/verify.hpp"

namespace hcf {

inline constexpr int exit_ok = 0;
inline constexpr int exit_tolerance = 1;
inline constexpr int exit_blowup = 2;
inline constexpr int exit_config = 3;

struct RunConfig {
  int n = 2;
  int N = 16;
  Backend backend = Backend::Spectral;
  std::string generator = "flat";
  std::uint64_t seed = 1;
  double amplitude = 0.01;
  int bandwidth = 1;

  FlowSpec flow;
  long snapshot_stride = 0;
  std::string csv_path;
  std::string snapshot_prefix;

  double identity_tol = 1e-8;
  double scalc_tol = 1e-6;  // two-path agreement, limited by product-rule aliasing
  double qtrace_tol = 1e-10;
  double variation_tol = 1e-6;
  double ibp_tol = 1e-8;
  double evolution_tol = 1e-3;
  double evolution_dt = 1e-3;
  bool run_evolution_checks = true;
  bool debug_corrupt_q2_sign = false;

  double compare_tol = 1e-7;
  double time_tol = 1e-6;

  static RunConfig from_config(const Config& c) {
    RunConfig r;
    r.n = static_cast<int>(c.get_long("n", 2));
    r.N = static_cast<int>(c.get_long("N", 16));
    const std::string be = c.get_string("backend", "spectral");
    if (be == "spectral") r.backend = Backend::Spectral;
    else if (be == "fd4") r.backend = Backend::CentralFD4;
    else throw ConfigError("backend must be 'spectral' or 'fd4'");
    r.generator = c.get_string("generator", "flat");
    if (r.generator != "flat" && r.generator != "kahler_potential" &&
        r.generator != "hermitian_perturbation")
      throw ConfigError("unknown generator '" + r.generator + "'");
    r.seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
    r.amplitude = c.get_double("amplitude", 0.01);
    r.bandwidth = static_cast<int>(c.get_long("bandwidth", 1));
    if (r.amplitude < 0.0 || r.amplitude >= 1.0) throw ConfigError("amplitude must be in [0,1)");
    if (r.bandwidth < 1 || r.bandwidth > 8) throw ConfigError("bandwidth must be in [1,8]");

    const std::string variant = c.get_string("variant", "hcf");
    if (variant == "hcf") r.flow.variant = FlowVariant::HCF;
    else if (variant == "hcf_normalized") r.flow.variant = FlowVariant::HCFNormalized;
    else if (variant == "krf") r.flow.variant = FlowVariant::KRF;
    else throw ConfigError("variant must be hcf | hcf_normalized | krf");
    r.flow.sigma_flow = c.get_double("sigma_flow", 0.1);
    r.flow.sigma_grid = c.get_double("sigma_grid", 0.2);
    r.flow.t_max = c.get_double("t_max", 50.0);
    r.flow.max_steps = c.get_long("max_steps", 1000000);
    r.flow.K_max = c.get_double("stop_threshold", 1e8);
    r.flow.stop_static = c.get_double("stop_static", 1e-9);
    r.flow.stop_rhs = c.get_double("stop_rhs", 1e-9);
    r.flow.diag_stride = static_cast<int>(c.get_long("diag_stride", 1));
    r.flow.track_grad2T = c.get_bool("track_grad2t", false);
    if (r.flow.sigma_flow <= 0 || r.flow.sigma_flow > 1) throw ConfigError("sigma_flow must be in (0,1]");
    if (r.flow.sigma_grid <= 0) throw ConfigError("sigma_grid must be positive");
    if (r.flow.t_max <= 0 || r.flow.max_steps <= 0) throw ConfigError("t_max and max_steps must be positive");

    r.snapshot_stride = c.get_long("snapshot_stride", 0);
    r.csv_path = c.get_string("csv", "");
    r.snapshot_prefix = c.get_string("snapshot_prefix", "");

    r.identity_tol = c.get_double("identity_tol", 1e-8);
    r.scalc_tol = c.get_double("scalc_tol", 1e-6);
    r.qtrace_tol = c.get_double("qtrace_tol", 1e-10);
    r.variation_tol = c.get_double("variation_tol", 1e-6);
    r.ibp_tol = c.get_double("ibp_tol", 1e-8);
    r.evolution_tol = c.get_double("evolution_tol", 1e-3);
    r.evolution_dt = c.get_double("evolution_dt", 1e-3);
    r.run_evolution_checks = c.get_bool("check_evolution", true);
    r.debug_corrupt_q2_sign = c.get_bool("debug_corrupt_q2_sign", false);

    r.compare_tol = c.get_double("compare_tol", 1e-7);
    r.time_tol = c.get_double("time_tol", 1e-6);
    c.reject_unknown_keys();
    return r;
  }

  Lattice make_lattice() const { return Lattice(n, N, backend); }

  MetricField make_metric(const Lattice& lat) const {
    if (generator == "flat") return flat_metric(lat);
    if (generator == "kahler_potential")
      return kahler_potential_metric(lat, seed, amplitude, bandwidth);
    return hermitian_perturbation_metric(lat, seed, amplitude, bandwidth);
  }
};

// ---------------------------------------------------------------------
inline int cmd_check(const RunConfig& cfg, std::ostream& out) {
  Lattice lat = cfg.make_lattice();
  MetricField g = cfg.make_metric(lat);
  if (g.min_eig() < 0.1) {
    out << "refusing identity suite: min eigenvalue " << fmt_double(g.min_eig())
        << " < 0.1 (conditioning)\n";
    return exit_config;
  }

  struct Row {
    std::string name;
    double resid;
    double tol;
  };
  std::vector<Row> rows;
  auto add = [&](const std::string& name, double resid, double tol) {
    rows.push_back({name, resid, tol});
  };

  ChernPackage cp = compute_package(g, CurvaturePath::DGamma);
  QPackage qp = compute_q(cp, cfg.debug_corrupt_q2_sign);

  add("q_trace_identity", q_trace_residual(cp, qp), cfg.qtrace_tol);
  add("torsion_cyclic", check_torsion_cyclic(cp), cfg.identity_tol);
  auto [b1, b2] = check_bianchi(cp);
  add("bianchi_first", b1, cfg.identity_tol);
  add("bianchi_second", b2, cfg.identity_tol);
  add("ps_relation", check_ps_relation(cp), cfg.identity_tol);
  add("scalc_two_path", cp.s_selfcheck, cfg.scalc_tol);
  add("hodge_decomposition", check_hodgedecomp(cp, qp), cfg.identity_tol);
  add("hcf_form_equation", check_hcf_form_equation(cp, qp), cfg.identity_tol);
  add("w_delbar_star_omega", w_proportionality_residual(cp), cfg.identity_tol);
  add("q1_psd", std::max(0.0, -min_eigenvalue(qp.Q1)), 1e-12);
  add("q3_psd", std::max(0.0, -min_eigenvalue(qp.Q3)), 1e-12);

  {
    // F scale invariance: F(c g) = F(g)
    const double f1 = qp.F_value;
    for (double c : {0.5, 2.0}) {
      TensorField gs = g.g();
      gs *= cplx(c, 0.0);
      MetricField gc = MetricField::make(lat, gs);
      ChernPackage cpc = compute_package(gc, CurvaturePath::Expanded);
      QPackage qpc = compute_q(cpc);
      add("f_scale_invariance_c" + fmt_double(c),
          std::abs(qpc.F_value - f1) / std::max(1.0, std::abs(f1)), 1e-10);
    }
  }
  {
    Rng rng(cfg.seed + 1000);
    TensorField alpha = random_hermitian11(lat, rng, cfg.bandwidth);
    TensorField beta01(lat, {AL});
    TensorField bsrc = random_oneform(lat, rng, cfg.bandwidth);
    for (int i = 0; i < lat.n(); ++i) {
      const cplx* s = bsrc.comp(i);
      cplx* d = beta01.comp(i);
      for (std::size_t p = 0; p < lat.points(); ++p) d[p] = std::conj(s[p]);
    }
    add("del_adjointness", adjointness_residual(cp, alpha, beta01), cfg.ibp_tol);
  }

  {
    Rng rng(cfg.seed + 2000);
    VariationProbe probe{g, random_hermitian11(lat, rng, cfg.bandwidth), 1e-4, true};
    std::vector<VarQuantity> qs(std::begin(all_var_quantities), std::end(all_var_quantities));
    for (const auto& [q, vr] : check_variation_suite(qs, probe))
      add(std::string("variation_") + var_quantity_name(q), vr.rel_err, cfg.variation_tol);
  }
  {
    Rng rng(cfg.seed + 3000);
    IbpFields f;
    f.phi = random_real_scalar(lat, rng, cfg.bandwidth);
    f.alpha = random_oneform(lat, rng, cfg.bandwidth);
    f.beta = random_oneform(lat, rng, cfg.bandwidth);
    f.h = random_hermitian11(lat, rng, cfg.bandwidth);
    add("ibp2", check_ibp(IbpLemma::Ibp2, g, f), cfg.ibp_tol);
    add("ibp3", check_ibp(IbpLemma::Ibp3, g, f), cfg.ibp_tol);
    add("ibp4", check_ibp(IbpLemma::Ibp4, g, f), cfg.ibp_tol);
  }
  if (cfg.run_evolution_checks) {
    // cost control: the evolution oracle runs on its own small grid
    Lattice lat8(cfg.n, 8, cfg.backend);
    MetricField g8 = hermitian_perturbation_metric(lat8, cfg.seed, std::min(cfg.amplitude, 0.02), 1);
    for (EvQuantity q : {EvQuantity::Omega, EvQuantity::Torsion}) {
      EvolutionCheck ec = check_evolution(q, g8, cfg.evolution_dt);
      const char* nm = (q == EvQuantity::Omega) ? "evolution_omega" : "evolution_torsion";
      add(nm, ec.rel_err, cfg.evolution_tol);
      add(std::string(nm) + "_order", ec.order >= 1.8 ? 0.0 : 1.8 - ec.order, 1e-12);
    }
  }

  int failures = 0;
  std::string first_fail;
  for (const auto& r : rows) {
    const bool ok = r.resid <= r.tol;
    if (!ok && failures++ == 0) first_fail = r.name;
    out << (ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(28) << r.name
        << " residual=" << fmt_double(r.resid) << " tol=" << fmt_double(r.tol) << "\n";
  }
  if (failures) {
    out << "FAILED: " << failures << " check(s); first failing: " << first_fail << "\n";
    return exit_tolerance;
  }
  out << "all checks passed (" << rows.size() << ")\n";
  return exit_ok;
}

// ---------------------------------------------------------------------
inline int cmd_evolve(const RunConfig& cfg, std::ostream& out) {
  Lattice lat = cfg.make_lattice();
  MetricField g0 = cfg.make_metric(lat);

  std::ofstream csv;
  if (!cfg.csv_path.empty()) {
    csv.open(cfg.csv_path);
    if (!csv) {
      out << "cannot open CSV output: " << cfg.csv_path << "\n";
      return exit_config;
    }
    csv << "t,dt,sup_Omega,sup_T,sup_gradT,sup_gradOmega,volume,F_value,static_tensor,static_scalar\n";
  }
  long snap_index = 0;
  auto row_cb = [&](const FlowState& st) {
    if (!csv.is_open()) return;
    const Diagnostics& d = st.diag;
    csv << fmt_double(d.t) << ',' << fmt_double(d.dt) << ',' << fmt_double(d.sup_Om) << ','
        << fmt_double(d.sup_T) << ',' << fmt_double(d.sup_gradT) << ',' << fmt_double(d.sup_gradOm)
        << ',' << fmt_double(d.volume) << ',' << fmt_double(d.F_value) << ','
        << fmt_double(d.static_tensor) << ',' << fmt_double(d.static_scalar) << "\n";
  };
  auto snap_cb = [&](const FlowState& st) {
    if (cfg.snapshot_prefix.empty()) return;
    write_snapshot(snapshot_name(cfg.snapshot_prefix, snap_index++), lat, st.t, st.step,
                   cfg.backend == Backend::Spectral ? "spectral" : "fd4", st.g.g());
  };

  EvolveResult res;
  try {
    res = evolve(g0, cfg.flow, row_cb, snap_cb, cfg.snapshot_stride);
  } catch (const std::invalid_argument& e) {
    out << "evolve error: " << e.what() << "\n";
    return exit_config;
  }
  out << "outcome=" << outcome_name(res.outcome) << " steps=" << res.steps
      << " t=" << fmt_double(res.final_t) << "\n";
  if (res.outcome == FlowOutcome::Blowup) return exit_blowup;
  return exit_ok;
}

// ---------------------------------------------------------------------
inline int cmd_compare(const RunConfig& a, const RunConfig& b, std::ostream& out) {
  if (a.snapshot_prefix.empty() || b.snapshot_prefix.empty()) {
    out << "compare: both configs must set snapshot_prefix\n";
    return exit_config;
  }
  namespace fs = std::filesystem;
  double worst = 0.0;
  long idx = 0;
  while (true) {
    const std::string pa = snapshot_name(a.snapshot_prefix, idx);
    const std::string pb = snapshot_name(b.snapshot_prefix, idx);
    const bool ea = fs::exists(pa), eb = fs::exists(pb);
    if (!ea && !eb) break;
    if (ea != eb) {
      out << "compare: series length mismatch at index " << idx << "\n";
      return exit_config;
    }
    Snapshot sa = read_snapshot(pa);
    Snapshot sb = read_snapshot(pb);
    if (sa.n != sb.n || sa.N != sb.N || sa.g.size() != sb.g.size()) {
      out << "compare: shape mismatch at index " << idx << "\n";
      return exit_config;
    }
    if (std::abs(sa.t - sb.t) > a.time_tol) {
      out << "compare: time-grid mismatch at index " << idx << " (" << fmt_double(sa.t) << " vs "
          << fmt_double(sb.t) << ")\n";
      return exit_config;
    }
    double d = 0.0;
    for (std::size_t i = 0; i < sa.g.size(); ++i) d = std::max(d, std::abs(sa.g[i] - sb.g[i]));
    out << "t=" << fmt_double(sa.t) << " sup_diff=" << fmt_double(d) << "\n";
    worst = std::max(worst, d);
    ++idx;
  }
  if (idx == 0) {
    out << "compare: no snapshots found\n";
    return exit_config;
  }
  out << "max_diff=" << fmt_double(worst) << " tol=" << fmt_double(a.compare_tol) << "\n";
  return worst <= a.compare_tol ? exit_ok : exit_tolerance;
}

}  // namespace hcf

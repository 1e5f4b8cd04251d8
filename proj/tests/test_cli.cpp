#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcf/cli.hpp"

using namespace hcf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path d = fs::temp_directory_path() / ("hcf_cli_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  Config c = Config::parse("n = 2\nN=16  # grid\n\n# comment\nseed = 7\n");
  REQUIRE(c.get_long("n", 0) == 2);
  REQUIRE(c.get_long("N", 0) == 16);
  REQUIRE(c.get_long("seed", 0) == 7);
  REQUIRE_THROWS_AS(Config::parse("n = 2\nn = 3\n"), ConfigError);
  REQUIRE_THROWS_AS(Config::parse("nonsense line\n"), ConfigError);

  Config u = Config::parse("n = 2\ntypo_key = 4\n");
  (void)u.get_long("n", 0);
  REQUIRE_THROWS_AS(u.reject_unknown_keys(), ConfigError);

  REQUIRE_THROWS_AS(RunConfig::from_config(Config::parse("backend = mystery\n")), ConfigError);
  REQUIRE_THROWS_AS(RunConfig::from_config(Config::parse("amplitude = 1.5\n")), ConfigError);
}

TEST_CASE("shortest round-trip double formatting") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, -3.25, 0.0, 123456789.123456789}) {
    REQUIRE(std::stod(fmt_double(v)) == v);
  }
}

TEST_CASE("snapshot round trip is bit exact") {
  Lattice lat(2, 8, Backend::Spectral);
  MetricField g = hermitian_perturbation_metric(lat, 3, 0.1, 2);
  fs::path dir = temp_dir();
  const std::string path = (dir / "snap_000000.snap").string();
  write_snapshot(path, lat, 0.125, 42, "spectral", g.g());
  Snapshot s = read_snapshot(path);
  REQUIRE(s.n == 2);
  REQUIRE(s.N == 8);
  REQUIRE(s.t == 0.125);
  REQUIRE(s.step == 42);
  REQUIRE(s.backend == "spectral");
  REQUIRE(s.g.size() == lat.points() * 4);
  // point-major layout: [point][i][j]
  for (std::size_t p = 0; p < lat.points(); p += 17)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        REQUIRE(s.g[p * 4 + static_cast<std::size_t>(i) * 2 + j] ==
                g.gc(i, j)[p]);
  fs::remove_all(dir);
}

TEST_CASE("cmd_check passes on the flat generator") {
  Config c = Config::parse("n = 2\nN = 8\ngenerator = flat\ncheck_evolution = false\n");
  RunConfig cfg = RunConfig::from_config(c);
  std::ostringstream out;
  REQUIRE(cmd_check(cfg, out) == exit_ok);
  REQUIRE(out.str().find("FAIL") == std::string::npos);
}

TEST_CASE("corrupted Q2 sign fails the check with the trace identity named") {
  Config c = Config::parse(
      "n = 2\nN = 8\ngenerator = hermitian_perturbation\namplitude = 0.1\nbandwidth = 1\n"
      "seed = 4\ncheck_evolution = false\ndebug_corrupt_q2_sign = true\n");
  RunConfig cfg = RunConfig::from_config(c);
  std::ostringstream out;
  REQUIRE(cmd_check(cfg, out) == exit_tolerance);
  REQUIRE(out.str().find("FAIL  q_trace_identity") != std::string::npos);
}

TEST_CASE("conditioning guard refuses nearly degenerate metrics") {
  Config c = Config::parse(
      "n = 2\nN = 8\ngenerator = hermitian_perturbation\namplitude = 0.70\nbandwidth = 1\nseed = 6\n");
  RunConfig cfg = RunConfig::from_config(c);
  std::ostringstream out;
  if (cfg.make_metric(cfg.make_lattice()).min_eig() < 0.1)
    REQUIRE(cmd_check(cfg, out) == exit_config);
}

TEST_CASE("cmd_evolve on the flat generator writes one row and converges") {
  fs::path dir = temp_dir();
  Config c = Config::parse("n = 2\nN = 8\ngenerator = flat\ncsv = " + (dir / "flat.csv").string() +
                           "\n");
  RunConfig cfg = RunConfig::from_config(c);
  std::ostringstream out;
  REQUIRE(cmd_evolve(cfg, out) == exit_ok);
  REQUIRE(out.str().find("static_converged") != std::string::npos);
  const std::string csv = slurp(dir / "flat.csv");
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + one row
  REQUIRE(csv.rfind("t,dt,sup_Omega,sup_T,sup_gradT,sup_gradOmega,volume,F_value,static_tensor,"
                    "static_scalar\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("same config twice gives bit-identical CSV and snapshots") {
  fs::path dir = temp_dir();
  auto run = [&](const std::string& tag) {
    Config c = Config::parse(
        "n = 2\nN = 8\ngenerator = hermitian_perturbation\namplitude = 0.02\nbandwidth = 1\n"
        "seed = 9\nvariant = hcf_normalized\nt_max = 0.02\nmax_steps = 12\nsnapshot_stride = 5\n"
        "csv = " + (dir / (tag + ".csv")).string() + "\nsnapshot_prefix = " +
        (dir / tag).string() + "\n");
    RunConfig cfg = RunConfig::from_config(c);
    std::ostringstream out;
    REQUIRE(cmd_evolve(cfg, out) == exit_ok);
  };
  run("a");
  run("b");
  REQUIRE(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  REQUIRE(slurp(dir / "a_000000.snap") == slurp(dir / "b_000000.snap"));
  long idx = 0;
  while (fs::exists(snapshot_name((dir / "a").string(), idx))) {
    REQUIRE(slurp(snapshot_name((dir / "a").string(), idx)) ==
            slurp(snapshot_name((dir / "b").string(), idx)));
    ++idx;
  }
  REQUIRE(idx >= 2);

  // identical series compare clean
  Config ca = Config::parse("snapshot_prefix = " + (dir / "a").string() + "\n");
  Config cb = Config::parse("snapshot_prefix = " + (dir / "b").string() + "\n");
  std::ostringstream out;
  REQUIRE(cmd_compare(RunConfig::from_config(ca), RunConfig::from_config(cb), out) == exit_ok);
  REQUIRE(out.str().find("max_diff=0 ") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("compare rejects shape and time-grid mismatches") {
  fs::path dir = temp_dir();
  Lattice l8(2, 8, Backend::Spectral);
  Lattice l10(2, 10, Backend::Spectral);
  write_snapshot((dir / "x_000000.snap").string(), l8, 0.0, 0, "spectral", flat_metric(l8).g());
  write_snapshot((dir / "y_000000.snap").string(), l10, 0.0, 0, "spectral", flat_metric(l10).g());
  write_snapshot((dir / "z_000000.snap").string(), l8, 0.5, 0, "spectral", flat_metric(l8).g());
  auto cfgfor = [&](const std::string& tag) {
    return RunConfig::from_config(Config::parse("snapshot_prefix = " + (dir / tag).string() + "\n"));
  };
  std::ostringstream out;
  REQUIRE(cmd_compare(cfgfor("x"), cfgfor("y"), out) == exit_config);
  REQUIRE(cmd_compare(cfgfor("x"), cfgfor("z"), out) == exit_config);
  REQUIRE(cmd_compare(cfgfor("x"), cfgfor("x"), out) == exit_ok);
  fs::remove_all(dir);
}

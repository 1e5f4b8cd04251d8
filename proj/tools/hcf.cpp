// Command-line driver: hcf check <config> | hcf evolve <config>
//                      hcf compare <config_a> <config_b>

#include <iostream>

#include "hcf/cli.hpp"

namespace {

void usage(std::ostream& out) {
  out << "usage:\n"
      << "  hcf check <config>             run identity and variational suites\n"
      << "  hcf evolve <config>            integrate the flow, write CSV/snapshots\n"
      << "  hcf compare <config> <config>  diff two snapshot series\n"
      << "exit codes: 0 pass, 1 tolerance failure, 2 blow-up, 3 config error\n";
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hcf;
  if (argc < 2) {
    usage(std::cerr);
    return exit_config;
  }
  const std::string cmd = argv[1];
  try {
    if (cmd == "check" && argc == 3) {
      RunConfig cfg = RunConfig::from_config(Config::parse_file(argv[2]));
      return cmd_check(cfg, std::cout);
    }
    if (cmd == "evolve" && argc == 3) {
      RunConfig cfg = RunConfig::from_config(Config::parse_file(argv[2]));
      return cmd_evolve(cfg, std::cout);
    }
    if (cmd == "compare" && argc == 4) {
      RunConfig a = RunConfig::from_config(Config::parse_file(argv[2]));
      RunConfig b = RunConfig::from_config(Config::parse_file(argv[3]));
      return cmd_compare(a, b, std::cout);
    }
    usage(std::cerr);
    return exit_config;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  }
}

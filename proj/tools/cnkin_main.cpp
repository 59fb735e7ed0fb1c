#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cnkin/cnkin.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Solver and verifier for the constant-kernel wave-turbulence kinetic equation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Scenario configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "Method-of-lines solve; writes moments.csv and spectra");
  auto* oracle = app.add_subcommand("oracle-check", "Compare the mass with the Riccati moment oracle");
  auto* horizon = app.add_subcommand("horizon", "Existence certificates chained over [0, t_end]");
  auto* picard = app.add_subcommand("picard", "Picard iteration versus method of lines on [a, b]");
  for (auto* sub : {simulate, oracle, horizon, picard}) add_common(sub);

  auto* bench = app.add_subcommand("bench", "Time naive versus FFT shift correlation");
  std::size_t n = 4096;
  std::size_t repeats = 21;
  std::uint64_t seed = 12345;
  bench->add_option("--n", n, "Grid size");
  bench->add_option("--repeats", repeats, "Random spectra to time");
  bench->add_option("--seed", seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    cnkin::CommandResult result;
    if (*bench) {
      result = cnkin::cmd_bench(n, repeats, seed);
    } else {
      const auto cfg = cnkin::load_config(config_path);
      if (*simulate) result = cnkin::cmd_simulate(cfg, out_dir);
      else if (*oracle) result = cnkin::cmd_oracle_check(cfg, out_dir);
      else if (*horizon) result = cnkin::cmd_horizon(cfg, out_dir);
      else result = cnkin::cmd_picard(cfg, out_dir);
    }
    std::cout << result.summary << '\n';
    return result.exit_code;
  } catch (const cnkin::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return cnkin::kExitValidation;
  } catch (const cnkin::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return cnkin::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

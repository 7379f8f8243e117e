#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "anisoflow/commands.hpp"

namespace af = anisoflow;

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic Willmore flow of closed polygonal curves"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;

  CLI::App* run = app.add_subcommand("run", "evolve one curve and write snapshots and diagnostics");
  run->add_option("--config", config_path, "config file (key = value, or a run.json summary)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "overrides the config seed");

  CLI::App* conv = app.add_subcommand("convergence", "run a convergence study against the Wulff solution");
  conv->add_option("--config", config_path, "config file")->required();
  conv->add_option("--out", out_dir, "output directory");
  conv->add_option("--threads", threads, "rows run concurrently")->check(CLI::PositiveNumber);
  conv->add_option("--seed", seed, "overrides the config seed");

  af::VerifyOptions verify_options;
  std::optional<double> tolerance;
  CLI::App* verify = app.add_subcommand("verify", "finite-difference checks of all derivative formulas");
  verify->add_option("--seed", seed, "random seed for the instances");
  verify->add_option("--instances", verify_options.instances, "random instances per property")
      ->check(CLI::PositiveNumber);
  verify->add_option("--sizes", verify_options.polygon_sizes, "polygon vertex counts")->check(CLI::Range(3, 4096));
  verify->add_option("--tolerance", tolerance, "replaces every property tolerance")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) {
      if (seed) verify_options.seed = *seed;
      verify_options.tolerance = tolerance;
      return af::cmd_verify(verify_options, std::cout) ? af::exit_code::success : af::exit_code::verify_failed;
    }
    af::RunConfig config = af::load_config(config_path);
    if (seed) config.seed = *seed;
    if (run->parsed())
      af::cmd_run(config, out_dir, std::cout);
    else
      af::cmd_convergence(config, out_dir, threads, std::cout);
  } catch (const af::Error& e) {
    std::cerr << "error (" << af::to_string(e.kind()) << "): " << e.what() << '\n';
    return af::exit_status(e.kind());
  }
  return af::exit_code::success;
}

#include "nonlocal/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace nonlocal;
  CLI::App app{"Principal eigenvalue of nonlocal operators with deformation kernels"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  cli::Overrides ov;
  std::string output, format;
  int jobs = 0;
  long long seed = -1;
  double tol = 0.0;
  app.add_option("--config", config_path, "JSON run description")->check(CLI::ExistingFile);
  app.add_option("--output", output, "output path (default: standard output)");
  app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
  app.add_option("--tol", tol, "eigensolver tolerance relative to the Gershgorin bound")->check(CLI::PositiveNumber);

  for (const char* name : {"eigen", "sweep", "bounds", "witness", "evolve"}) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::validation_failure;
  }
  if (app.count("--output")) ov.output = output;
  if (app.count("--format")) ov.format = format;
  if (app.count("--jobs")) ov.jobs = jobs;
  if (app.count("--seed")) ov.seed = static_cast<std::uint64_t>(seed);
  if (app.count("--tol")) ov.tol = tol;

  const std::string task = app.get_subcommands().front()->get_name();
  cli::RunConfig config;
  try {
    config = cli::load_config(config_path, task, ov);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::validation_failure;
  }
  return cli::run(config, std::cout, std::cerr);
}

#pragma once

// Config-driven front end: parse and validate a run description, dispatch to
// the numerical modules, write results atomically.

#include "nonlocal/bounds.hpp"
#include "nonlocal/spectra.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nonlocal::cli {

enum ExitCode : int { ok = 0, validation_failure = 2, numerical_failure = 3 };

struct ProblemConfig {
  int dim = 1;
  ProfileShape shape = ProfileShape::epanechnikov;
  std::optional<double> mass;         // psi normalized to this mass (default 1)
  std::optional<double> coefficient;  // or psi = coefficient * base
  nlohmann::json map;                 // validated map description

  Profile profile() const;
  MapSpec map_spec() const;
  DeformationKernel kernel() const;
};

struct EigenConfig {
  double radius = 16.0;
  double spacing = 0.05;
  LatticeOffset offset = LatticeOffset::cell_centered;
  EigenOptions solver;
  std::string triplets;  // optional dump of T
};

struct SweepConfig {
  std::vector<double> radii{2, 4, 8, 16, 32};
  SpacingRule rule = SpacingRule::fraction(320);
};

struct BoundsConfig {
  std::string candidate = "indicator";  // indicator | smooth | power_law | none
  double sigma = 0.25;
  double eps = 1.0;
  std::optional<double> finite_radius;
  double delta = 2.0;
};

struct WitnessConfig {
  std::string family = "power_law";
  double sigma = 0.25;
  double eps = 1.0;
  int j_max = -1;
  int k = 9;
  double lambda = 1.0;
  double theta = 1.0;
  int dim = 2;
  std::size_t samples = 1'000'000;
  int levels = 8;
  double sigma_fraction = 0.9;
  std::string method = "grid";  // composed: grid | monte-carlo
  int cells = 400;
};

struct EvolveConfig {
  double radius = 8.0;
  double spacing = 0.05;
  std::optional<double> dt;
  double dt_fraction = 0.5;  // of the stability limit, when dt is absent
  double t_end = 40.0;
  std::size_t record_every = 1;
  double window_fraction = 0.5;
  std::string initial = "random";  // random | eigenvector | constant
};

struct RunConfig {
  std::string task;
  ProblemConfig problem;
  EigenConfig eigen;
  SweepConfig sweep;
  BoundsConfig bounds;
  WitnessConfig witness;
  EvolveConfig evolve;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string output;         // empty: standard output
  std::string format = "json";
};

// Command-line overrides applied on top of the config document.
struct Overrides {
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

// Throws ValidationError on any malformed or inconsistent entry.
RunConfig parse_config(const nlohmann::json& doc, const std::string& task, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const std::string& task, const Overrides& overrides = {});

struct RunResult {
  std::string content;  // emitted document
  bool converged = true;
};

// Computes the task output without touching the file system.
RunResult execute(const RunConfig& config);

// Full run: execute, write the output (temp file + rename), map failures to
// exit codes with a diagnostic on `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

void write_atomically(const std::string& path, const std::string& content);

}  // namespace nonlocal::cli

#include "nonlocal/cli.hpp"

#include "nonlocal/evolution.hpp"
#include "nonlocal/witnesses.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

namespace nonlocal::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& section) {
  require(obj.is_object(), "'" + section + "' must be an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    require(names.count(item.key()) > 0, "unknown key '" + item.key() + "' in '" + section + "'");
  }
}

double get_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  require(v.is_number(), std::string("'") + key + "' must be a number");
  const double d = v.get<double>();
  require(std::isfinite(d), std::string("'") + key + "' must be finite");
  return d;
}

long long get_integer(const json& obj, const char* key, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  require(v.is_number_integer(), std::string("'") + key + "' must be an integer");
  return v.get<long long>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  require(v.is_string(), std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

Mat parse_matrix(const json& rows, int dim, const std::string& what) {
  require(rows.is_array() && static_cast<int>(rows.size()) == dim,
          what + " must be an array of " + std::to_string(dim) + " rows");
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<int>(row.size()) == dim,
            what + " row " + std::to_string(i) + " must hold " + std::to_string(dim) + " numbers");
    for (int j = 0; j < dim; ++j) {
      const json& v = row[static_cast<std::size_t>(j)];
      require(v.is_number() && std::isfinite(v.get<double>()), what + " entries must be finite numbers");
      m(i, j) = v.get<double>();
    }
  }
  return m;
}

JordanData parse_jordan(const json& j, int dim) {
  check_keys(j, {"transform", "blocks"}, "jordan");
  require(j.contains("transform") && j.contains("blocks"), "'jordan' needs 'transform' and 'blocks'");
  JordanData data;
  data.transform = parse_matrix(j.at("transform"), dim, "jordan transform");
  require(j.at("blocks").is_array() && !j.at("blocks").empty(), "'blocks' must be a nonempty array");
  for (const json& b : j.at("blocks")) {
    check_keys(b, {"type", "lambda", "alpha", "beta", "size"}, "jordan block");
    const std::string type = get_string(b, "type", "real");
    const long long size = get_integer(b, "size", 1);
    require(size >= 1 && size <= 3, "block size must lie in 1..3");
    if (type == "real") {
      data.blocks.push_back(JordanBlock::real(get_number(b, "lambda", 1.0), static_cast<int>(size)));
    } else if (type == "complex") {
      data.blocks.push_back(
          JordanBlock::rotation(get_number(b, "alpha", 1.0), get_number(b, "beta", 0.0), static_cast<int>(size)));
    } else {
      throw ValidationError("block type must be 'real' or 'complex'");
    }
  }
  require(data.dim() == dim, "jordan blocks do not add up to the problem dimension");
  return data;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json eigen_record(const SpectralResult& r, double psi_mass) {
  return {{"lambda1", r.lambda1},
          {"lambda_T", r.lambda_T},
          {"residual", r.residual},
          {"lambda_max_bound", r.lambda_max_bound},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"near_degenerate", r.near_degenerate},
          {"psi_mass", psi_mass}};
}

std::optional<Candidate> make_candidate(const BoundsConfig& cfg, const MapSpec& map) {
  if (cfg.candidate == "none") return std::nullopt;
  if (cfg.candidate == "indicator") return indicator_candidate(map.dim());
  if (cfg.candidate == "smooth") return smooth_candidate(map.dim());
  // power_law: 1-D, diagonal entry taken from the map
  require(map.is_linear() && map.dim() == 1, "power-law candidate needs a 1-D linear map");
  return PowerLawWitness({map.matrix()(0, 0)}, cfg.sigma, cfg.eps).candidate();
}

Vec initial_data(const EvolveConfig& cfg, const DiscreteOperator& op, std::uint64_t seed, const Vec& eigvec) {
  const auto n = static_cast<Eigen::Index>(op.size());
  if (cfg.initial == "constant") return Vec::Ones(n);
  if (cfg.initial == "eigenvector") return eigvec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vec u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = unif(rng);
  return u;
}

}  // namespace

Profile ProblemConfig::profile() const {
  if (coefficient) return Profile::scaled(shape, dim, *coefficient);
  return Profile::normalized(shape, dim, mass.value_or(1.0));
}

MapSpec ProblemConfig::map_spec() const {
  const std::string kind = get_string(map, "kind", "linear");
  if (kind == "identity") return MapSpec::identity(dim);
  if (kind == "scaled_sine") return MapSpec::scaled_sine(dim, get_number(map, "alpha", 2.0), get_number(map, "beta", 0.0));
  require(map.contains("matrix"), "linear map needs 'matrix'");
  Mat a = parse_matrix(map.at("matrix"), dim, "matrix");
  std::optional<JordanData> jordan;
  if (map.contains("jordan")) jordan = parse_jordan(map.at("jordan"), dim);
  return MapSpec::linear(std::move(a), std::move(jordan));
}

DeformationKernel ProblemConfig::kernel() const { return DeformationKernel(profile(), map_spec()); }

RunConfig parse_config(const json& doc, const std::string& task, const Overrides& overrides) {
  require(doc.is_object(), "config must be a JSON object");
  check_keys(doc, {"task", "problem", "eigen", "sweep", "bounds", "witness", "evolve", "seed", "jobs", "tol", "output"},
             "config");
  RunConfig cfg;
  cfg.task = task.empty() ? get_string(doc, "task", "") : task;
  const std::set<std::string> tasks{"eigen", "sweep", "bounds", "witness", "evolve"};
  require(tasks.count(cfg.task) > 0, "task must be one of eigen, sweep, bounds, witness, evolve");

  // problem
  const json problem = doc.value("problem", json::object());
  check_keys(problem, {"dimension", "profile", "map"}, "problem");
  const long long dim = get_integer(problem, "dimension", 1);
  require(dim >= 1 && dim <= 3, "dimension must be 1, 2 or 3");
  cfg.problem.dim = static_cast<int>(dim);
  const json profile = problem.value("profile", json::object());
  check_keys(profile, {"shape", "mass", "coefficient"}, "profile");
  cfg.problem.shape = profile_shape_from_string(get_string(profile, "shape", "epanechnikov"));
  require(!(profile.contains("mass") && profile.contains("coefficient")), "give either 'mass' or 'coefficient'");
  if (profile.contains("mass")) {
    cfg.problem.mass = get_number(profile, "mass", 1.0);
    require(*cfg.problem.mass > 0.0, "psi mass must be positive");
  }
  if (profile.contains("coefficient")) {
    cfg.problem.coefficient = get_number(profile, "coefficient", 1.0);
    require(*cfg.problem.coefficient > 0.0, "psi coefficient must be positive");
  }
  cfg.problem.map = problem.value("map", json{{"kind", "identity"}});
  check_keys(cfg.problem.map, {"kind", "matrix", "jordan", "alpha", "beta"}, "map");
  {
    const std::string kind = get_string(cfg.problem.map, "kind", "linear");
    require(kind == "identity" || kind == "linear" || kind == "scaled_sine",
            "map kind must be identity, linear or scaled_sine");
    (void)cfg.problem.map_spec();  // full validation up front
  }

  cfg.seed = static_cast<std::uint64_t>(get_integer(doc, "seed", 1));
  require(get_integer(doc, "seed", 1) >= 0, "seed must be nonnegative");
  cfg.jobs = static_cast<int>(get_integer(doc, "jobs", 1));
  double tol = get_number(doc, "tol", 1e-10);

  // eigen
  const json eigen = doc.value("eigen", json::object());
  check_keys(eigen, {"radius", "spacing", "offset", "tol", "maxiter", "krylov_dim", "triplets"}, "eigen");
  cfg.eigen.radius = get_number(eigen, "radius", cfg.eigen.radius);
  cfg.eigen.spacing = get_number(eigen, "spacing", cfg.eigen.spacing);
  const std::string offset = get_string(eigen, "offset", "cell");
  require(offset == "cell" || offset == "vertex", "offset must be 'cell' or 'vertex'");
  cfg.eigen.offset = offset == "cell" ? LatticeOffset::cell_centered : LatticeOffset::vertex_centered;
  tol = get_number(eigen, "tol", tol);
  cfg.eigen.solver.maxiter = static_cast<int>(get_integer(eigen, "maxiter", cfg.eigen.solver.maxiter));
  cfg.eigen.solver.krylov_dim = static_cast<int>(get_integer(eigen, "krylov_dim", cfg.eigen.solver.krylov_dim));
  cfg.eigen.triplets = get_string(eigen, "triplets", "");
  require(cfg.eigen.radius > 0.0, "radius must be positive");
  require(cfg.eigen.spacing > 0.0, "spacing must be positive");
  require(cfg.eigen.solver.maxiter > 0, "maxiter must be positive");
  require(cfg.eigen.solver.krylov_dim >= 2, "krylov_dim must be at least 2");

  // sweep
  const json sweep = doc.value("sweep", json::object());
  check_keys(sweep, {"radii", "spacing", "divisions"}, "sweep");
  if (sweep.contains("radii")) {
    require(sweep.at("radii").is_array() && !sweep.at("radii").empty(), "'radii' must be a nonempty array");
    cfg.sweep.radii.clear();
    for (const json& r : sweep.at("radii")) {
      require(r.is_number(), "radii must be numbers");
      cfg.sweep.radii.push_back(r.get<double>());
    }
  }
  for (std::size_t i = 0; i < cfg.sweep.radii.size(); ++i) {
    require(cfg.sweep.radii[i] > 0.0, "radii must be positive");
    if (i > 0) require(cfg.sweep.radii[i] > cfg.sweep.radii[i - 1], "radii must be strictly increasing");
  }
  require(!(sweep.contains("spacing") && sweep.contains("divisions")), "give either 'spacing' or 'divisions'");
  if (sweep.contains("spacing")) cfg.sweep.rule = SpacingRule::fixed(get_number(sweep, "spacing", 0.05));
  if (sweep.contains("divisions")) cfg.sweep.rule = SpacingRule::fraction(get_number(sweep, "divisions", 320));
  require(cfg.sweep.rule.value > 0.0, "sweep spacing rule must be positive");

  // bounds
  const json bounds = doc.value("bounds", json::object());
  check_keys(bounds, {"candidate", "sigma", "eps", "finite_radius", "delta"}, "bounds");
  cfg.bounds.candidate = get_string(bounds, "candidate", cfg.bounds.candidate);
  require(cfg.bounds.candidate == "indicator" || cfg.bounds.candidate == "smooth" ||
              cfg.bounds.candidate == "power_law" || cfg.bounds.candidate == "none",
          "candidate must be indicator, smooth, power_law or none");
  cfg.bounds.sigma = get_number(bounds, "sigma", cfg.bounds.sigma);
  cfg.bounds.eps = get_number(bounds, "eps", cfg.bounds.eps);
  if (bounds.contains("finite_radius")) {
    cfg.bounds.finite_radius = get_number(bounds, "finite_radius", 10.0);
    require(*cfg.bounds.finite_radius > 0.0, "finite_radius must be positive");
  }
  cfg.bounds.delta = get_number(bounds, "delta", cfg.bounds.delta);
  require(cfg.bounds.delta > 0.0, "delta must be positive");

  // witness
  const json witness = doc.value("witness", json::object());
  check_keys(witness, {"family", "sigma", "eps", "j_max", "k", "lambda", "theta", "dim", "samples", "levels",
                       "sigma_fraction", "method", "cells"},
             "witness");
  WitnessConfig& w = cfg.witness;
  w.family = get_string(witness, "family", w.family);
  const std::set<std::string> families{"power_law", "expansive_geometric", "jordan_shear", "jordan_rotation",
                                       "composed"};
  require(families.count(w.family) > 0, "unknown witness family '" + w.family + "'");
  w.sigma = get_number(witness, "sigma", w.sigma);
  w.eps = get_number(witness, "eps", w.eps);
  w.j_max = static_cast<int>(get_integer(witness, "j_max", w.j_max));
  w.k = static_cast<int>(get_integer(witness, "k", w.k));
  w.lambda = get_number(witness, "lambda", w.lambda);
  w.theta = get_number(witness, "theta", w.theta);
  w.dim = static_cast<int>(get_integer(witness, "dim", w.dim));
  const long long samples = get_integer(witness, "samples", static_cast<long long>(w.samples));
  require(samples >= 2, "samples must be at least 2");
  w.samples = static_cast<std::size_t>(samples);
  w.levels = static_cast<int>(get_integer(witness, "levels", w.levels));
  require(w.levels >= 1, "levels must be positive");
  w.sigma_fraction = get_number(witness, "sigma_fraction", w.sigma_fraction);
  w.method = get_string(witness, "method", w.method);
  require(w.method == "grid" || w.method == "monte-carlo", "method must be 'grid' or 'monte-carlo'");
  w.cells = static_cast<int>(get_integer(witness, "cells", w.cells));
  require(w.cells >= 2, "cells must be at least 2");

  // evolve
  const json evolve = doc.value("evolve", json::object());
  check_keys(evolve, {"radius", "spacing", "dt", "dt_fraction", "t_end", "record_every", "window_fraction", "initial"},
             "evolve");
  EvolveConfig& e = cfg.evolve;
  e.radius = get_number(evolve, "radius", e.radius);
  e.spacing = get_number(evolve, "spacing", e.spacing);
  if (evolve.contains("dt")) e.dt = get_number(evolve, "dt", 0.0);
  e.dt_fraction = get_number(evolve, "dt_fraction", e.dt_fraction);
  e.t_end = get_number(evolve, "t_end", e.t_end);
  const long long every = get_integer(evolve, "record_every", 1);
  require(every >= 1, "record_every must be at least 1");
  e.record_every = static_cast<std::size_t>(every);
  e.window_fraction = get_number(evolve, "window_fraction", e.window_fraction);
  e.initial = get_string(evolve, "initial", e.initial);
  require(e.radius > 0.0 && e.spacing > 0.0, "evolve radius and spacing must be positive");
  require(!e.dt || *e.dt > 0.0, "dt must be positive");
  require(e.dt_fraction > 0.0 && e.dt_fraction <= 0.9, "dt_fraction must lie in (0, 0.9]");
  require(e.t_end >= 0.0, "t_end must be nonnegative");
  require(e.window_fraction > 0.0 && e.window_fraction <= 1.0, "window_fraction must lie in (0, 1]");
  require(e.initial == "random" || e.initial == "eigenvector" || e.initial == "constant",
          "initial must be random, eigenvector or constant");

  // output
  const json output = doc.value("output", json::object());
  check_keys(output, {"path", "format"}, "output");
  cfg.output = get_string(output, "path", "");
  cfg.format = get_string(output, "format", "json");

  if (overrides.output) cfg.output = *overrides.output;
  if (overrides.format) cfg.format = *overrides.format;
  if (overrides.jobs) cfg.jobs = *overrides.jobs;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.tol) tol = *overrides.tol;

  require(tol > 0.0 && std::isfinite(tol), "tol must be positive");
  cfg.eigen.solver.tol = tol;
  cfg.eigen.solver.seed = cfg.seed;
  require(cfg.jobs >= 1, "jobs must be at least 1");
  require(cfg.format == "json" || cfg.format == "csv", "format must be json or csv");
  if (cfg.format == "csv") {
    require(cfg.task == "eigen" || cfg.task == "sweep" || cfg.task == "evolve",
            "csv output is available for eigen, sweep and evolve only");
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::string& task, const Overrides& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "cannot read config file '" + path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  return parse_config(doc, task, overrides);
}

RunResult execute(const RunConfig& cfg) {
  const DeformationKernel kernel = cfg.problem.kernel();
  const double psi_mass = kernel.profile().mass();
  RunResult result;

  if (cfg.task == "eigen") {
    GridOptions gopt;
    gopt.offset = cfg.eigen.offset;
    const Grid grid = build_grid(cfg.problem.dim, cfg.eigen.radius, cfg.eigen.spacing, kernel.map(), gopt);
    const DiscreteOperator op = assemble_operator(grid, kernel, {cfg.jobs});
    if (!cfg.eigen.triplets.empty()) {
      std::ostringstream trip;
      op.write_triplets(trip);
      write_atomically(cfg.eigen.triplets, trip.str());
    }
    const SpectralResult r = smallest_eigenpair(op, cfg.eigen.solver);
    result.converged = r.converged;
    if (cfg.format == "csv") {
      ConvergenceTable table;
      table.rows.push_back({grid.radius(), grid.spacing(), r.lambda1, r.lambda_T, r.iterations, r.residual,
                            r.converged, grid.size(), r.eigvec.minCoeff()});
      std::ostringstream os;
      table.write_csv(os);
      result.content = os.str();
    } else {
      json j = eigen_record(r, psi_mass);
      j["task"] = "eigen";
      j["radius"] = grid.radius();
      j["spacing"] = grid.spacing();
      j["nodes"] = grid.size();
      j["tol"] = cfg.eigen.solver.tol;
      j["bounds"] = bound_report(kernel).to_json();
      result.content = dump(j);
    }
    return result;
  }

  if (cfg.task == "sweep") {
    SweepOptions sopt;
    sopt.eigen = cfg.eigen.solver;
    sopt.grid.offset = cfg.eigen.offset;
    sopt.jobs = cfg.jobs;
    const ConvergenceTable table = sweep_radius(kernel, cfg.sweep.radii, cfg.sweep.rule, sopt);
    result.converged = table.all_converged();
    if (cfg.format == "csv") {
      std::ostringstream os;
      table.write_csv(os);
      result.content = os.str();
    } else {
      json rows = json::array();
      for (const auto& r : table.rows) {
        rows.push_back({{"R", r.radius},
                        {"h", r.spacing},
                        {"lambda1", r.lambda1},
                        {"lambda_T", r.lambda_T},
                        {"iterations", r.iterations},
                        {"residual", r.residual},
                        {"converged", r.converged},
                        {"nodes", r.nodes},
                        {"psi_mass", psi_mass}});
      }
      json j{{"task", "sweep"},
             {"rows", rows},
             {"limit_estimate", table.limit_estimate},
             {"limit_method", table.limit_method},
             {"psi_mass", psi_mass},
             {"bounds", bound_report(kernel).to_json()}};
      j["tail_exponent"] = table.tail_exponent ? json(*table.tail_exponent) : json(nullptr);
      result.content = dump(j);
    }
    return result;
  }

  if (cfg.task == "bounds") {
    const std::optional<Candidate> phi = make_candidate(cfg.bounds, kernel.map());
    json j = bound_report(kernel, phi).to_json();
    if (cfg.bounds.finite_radius) {
      require(phi.has_value(), "finite-radius bound needs a candidate");
      const FiniteRadiusBound f = finite_radius_bound(kernel, *phi, *cfg.bounds.finite_radius, cfg.bounds.delta);
      j["finite_radius"] = {{"delta", f.delta},
                            {"R", f.radius},
                            {"C_delta", f.constant},
                            {"candidate_energy", f.candidate_energy},
                            {"gradient_energy", f.gradient_energy},
                            {"jac_sup", f.jac_sup},
                            {"value", f.value}};
    }
    result.content = dump(j);
    return result;
  }

  if (cfg.task == "witness") {
    const WitnessConfig& w = cfg.witness;
    MonteCarloOptions mc;
    mc.samples = w.samples;
    mc.seed = cfg.seed;
    mc.jobs = cfg.jobs;
    json j;
    double abs_det = 1.0;
    if (w.family == "power_law") {
      require(kernel.map().is_linear(), "power-law witness needs a diagonal linear map");
      const Mat& a = kernel.map().matrix();
      require(a.isDiagonal(0.0), "power-law witness needs a diagonal linear map");
      std::vector<double> alphas(static_cast<std::size_t>(a.rows()));
      for (Eigen::Index i = 0; i < a.rows(); ++i) alphas[static_cast<std::size_t>(i)] = a(i, i);
      const PowerLawWitness pw(alphas, w.sigma, w.eps);
      j = measure_overlap(pw).to_json();
      abs_det = kernel.map().abs_det();
    } else if (w.family == "expansive_geometric") {
      require(kernel.map().is_linear(), "geometric witness needs a linear map");
      const ExpansiveWitness ew(kernel.map().matrix(), w.sigma, w.j_max);
      const ExpansiveOverlapReport rep = measure_overlap(ew, mc, w.levels);
      j = rep.overlap.to_json();
      j["truncated_ratio"] = rep.truncated_ratio;
      j["level_measure"] = rep.level_measure;
      j["level_stderr"] = rep.level_std_error;
      abs_det = kernel.map().abs_det();
    } else if (w.family == "jordan_shear" || w.family == "jordan_rotation") {
      const JordanWitness jw = w.family == "jordan_shear" ? JordanWitness::shear(w.k, w.lambda, w.dim)
                                                          : JordanWitness::rotation(w.k, w.theta, w.dim);
      const JordanOverlapReport rep = measure_overlap(jw, mc);
      j = rep.overlap.to_json();
      j["multiply_covered"] = rep.multiply_covered;
    } else {
      const auto& jd = kernel.map().jordan();
      require(kernel.map().is_linear() && jd.has_value(), "composed witness needs a linear map with jordan data");
      std::vector<std::shared_ptr<const Witness>> blocks;
      for (const auto& b : jd->blocks) blocks.push_back(block_witness(b, w.sigma_fraction, w.k));
      const ComposedWitness cw(jd->transform, blocks);
      const OverlapReport rep = w.method == "grid" ? measure_overlap_grid(cw, w.cells) : measure_overlap_uniform(cw, mc);
      j = rep.to_json();
      abs_det = kernel.map().abs_det();
    }
    j["upper_bound_chain"] = upper_bound_from_ratio(abs_det, psi_mass, j.at("measured_ratio").get<double>());
    j["psi_mass"] = psi_mass;
    result.content = dump(j);
    return result;
  }

  // evolve
  const EvolveConfig& e = cfg.evolve;
  const Grid grid = build_grid(cfg.problem.dim, e.radius, e.spacing, kernel.map());
  const DiscreteOperator op = assemble_operator(grid, kernel, {cfg.jobs});
  const SpectralResult eig = smallest_eigenpair(op, cfg.eigen.solver);
  result.converged = eig.converged;
  const double limit = stability_limit(op);
  const double dt = e.dt.value_or(e.dt_fraction * limit);
  const Vec u0 = initial_data(e, op, cfg.seed, eig.eigvec);
  const Trajectory traj = simulate(op, u0, e.t_end, dt, {e.record_every, cfg.jobs});
  if (cfg.format == "csv") {
    std::ostringstream os;
    traj.write_csv(os);
    result.content = os.str();
    return result;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    worst = std::max(worst, traj.l2sq[i] / (traj.l2sq[0] * std::exp(-eig.lambda1 * traj.times[i])));
  }
  json j = eigen_record(eig, psi_mass);
  j["task"] = "evolve";
  j["dt"] = dt;
  j["stability_limit"] = limit;
  j["t_end"] = e.t_end;
  j["records"] = traj.times.size();
  j["max_bound_ratio"] = worst;
  const auto window = static_cast<std::size_t>(std::ceil(e.window_fraction * static_cast<double>(traj.times.size())));
  j["fit"] = nullptr;
  if (window >= 10) {
    try {
      j["fit"] = fit_decay_rate(traj, e.window_fraction).to_json();
    } catch (const ValidationError&) {
      // window emptied by underflow; leave the fit out
    }
  }
  result.content = dump(j);
  return result;
}

void write_atomically(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw NumericalError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ValidationError("cannot move output into '" + path + "'");
  }
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const RunResult r = execute(config);
    if (config.output.empty()) {
      out << r.content;
    } else {
      write_atomically(config.output, r.content);
    }
    if (!r.converged) {
      err << "error: eigensolver did not reach the requested tolerance\n";
      return numerical_failure;
    }
    return ok;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return validation_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return numerical_failure;
  }
}

}  // namespace nonlocal::cli

#pragma once

// Explicit time stepping of u_t = -T u with exterior-zero data, and fitting of
// the L2 decay rate.

#include "nonlocal/discretize.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace nonlocal {

struct Trajectory {
  std::vector<double> times;
  std::vector<double> l2sq;  // h-weighted squared L2 norm
  Vec u_final;
  double dt = 0.0;
  std::string scheme = "forward-euler";

  void write_csv(std::ostream& out) const;
};

// 1 / max_i d_i: forward Euler is stable for dt lambda_max(T) <= 2 and
// lambda_max(T) <= 2 max_i d_i.
double stability_limit(const DiscreteOperator& op);

struct SimulateOptions {
  std::size_t record_every = 1;
  int jobs = 1;
};

// u <- u - dt T u until t = t_end (the last step is shortened to land on it).
Trajectory simulate(const DiscreteOperator& op, const Vec& u0, double t_end, double dt,
                    const SimulateOptions& options = {});

struct DecayFit {
  double rate = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double r_squared = 0.0;
  std::size_t records = 0;
  bool shrunk = false;  // trailing records dropped because l2sq underflowed

  nlohmann::json to_json() const;
};

// Least-squares slope of ln l2sq over the trailing `window_fraction` of the
// records; rate = -slope.
DecayFit fit_decay_rate(const Trajectory& traj, double window_fraction = 0.5);

}  // namespace nonlocal

#include "nonlocal/evolution.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace nonlocal {

void Trajectory::write_csv(std::ostream& out) const {
  out << "t,l2sq\n" << std::setprecision(17);
  for (std::size_t i = 0; i < times.size(); ++i) out << times[i] << ',' << l2sq[i] << '\n';
}

double stability_limit(const DiscreteOperator& op) {
  const double dmax = op.diagonal().maxCoeff();
  require(dmax > 0.0, "operator has a zero diagonal");
  return 1.0 / dmax;
}

Trajectory simulate(const DiscreteOperator& op, const Vec& u0, double t_end, double dt,
                    const SimulateOptions& options) {
  require(static_cast<std::size_t>(u0.size()) == op.size(), "initial data length differs from the grid size");
  require(u0.allFinite(), "initial data must be finite");
  require(u0.cwiseAbs().maxCoeff() > 0.0, "initial data must not vanish");
  require(t_end >= 0.0 && std::isfinite(t_end), "end time must be finite and nonnegative");
  require(dt > 0.0, "time step must be positive");
  require(options.record_every >= 1, "record_every must be at least 1");
  const double limit = stability_limit(op);
  require(dt <= 0.9 * limit, "time step exceeds 0.9 times the stability limit");

  const double vol = op.grid().cell_volume();
  Trajectory traj;
  traj.dt = dt;
  Vec u = u0;
  traj.times.push_back(0.0);
  traj.l2sq.push_back(u.squaredNorm() * vol);

  const double steps_real = t_end / dt;
  auto full_steps = static_cast<std::size_t>(std::floor(steps_real + 1e-9));
  const double remainder = t_end - static_cast<double>(full_steps) * dt;
  const bool partial = remainder > 1e-9 * dt;
  const std::size_t total = full_steps + (partial ? 1 : 0);

  for (std::size_t n = 1; n <= total; ++n) {
    const double step = (partial && n == total) ? remainder : dt;
    u -= step * op.apply(u, options.jobs);
    if (n % options.record_every == 0 || n == total) {
      const double norm = u.squaredNorm() * vol;
      if (!std::isfinite(norm)) throw NumericalError("non-finite state during time stepping");
      traj.times.push_back(n == total ? t_end : static_cast<double>(n) * dt);
      traj.l2sq.push_back(norm);
    }
  }
  traj.u_final = std::move(u);
  return traj;
}

nlohmann::json DecayFit::to_json() const {
  return {{"rate", rate}, {"window", {t_lo, t_hi}}, {"r_squared", r_squared}};
}

DecayFit fit_decay_rate(const Trajectory& traj, double window_fraction) {
  require(window_fraction > 0.0 && window_fraction <= 1.0, "window fraction must lie in (0, 1]");
  require(traj.times.size() == traj.l2sq.size(), "trajectory columns differ in length");
  std::size_t n = traj.times.size();
  DecayFit fit;
  // Drop an underflowed tail.
  const double tiny = std::numeric_limits<double>::min() * 1e10;
  while (n > 0 && !(traj.l2sq[n - 1] > tiny)) {
    --n;
    fit.shrunk = true;
  }
  const auto window = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(n)));
  require(window >= 10, "decay fit window holds fewer than 10 records");
  const std::size_t first = n - window;

  double st = 0.0, sy = 0.0;
  for (std::size_t i = first; i < n; ++i) {
    st += traj.times[i];
    sy += std::log(traj.l2sq[i]);
  }
  const double tm = st / static_cast<double>(window);
  const double ym = sy / static_cast<double>(window);
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = first; i < n; ++i) {
    const double dt = traj.times[i] - tm;
    const double dy = std::log(traj.l2sq[i]) - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  require(stt > 0.0, "decay fit window spans zero time");
  const double slope = sty / stt;
  fit.rate = -slope;
  fit.t_lo = traj.times[first];
  fit.t_hi = traj.times[n - 1];
  fit.records = window;
  fit.r_squared = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return fit;
}

}  // namespace nonlocal

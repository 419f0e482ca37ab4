#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace nonlocal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bad input: malformed parameters, dimension mismatches, violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to reach its stated accuracy.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

// Volume of the unit ball in R^d.
double unit_ball_volume(int dim);

// Area of the unit sphere S^{d-1}.
double unit_sphere_area(int dim);

// Runs body(begin, end) over [0, count) split into at most `jobs` contiguous
// chunks. Each index is visited exactly once, so per-index work is identical
// regardless of the partition.
void parallel_for(std::size_t count, int jobs,
                  const std::function<void(std::size_t, std::size_t)>& body);

// SplitMix64 step; used to derive independent per-shard seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace nonlocal

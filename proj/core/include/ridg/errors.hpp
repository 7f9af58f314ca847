#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ridg {

// Invalid user or configuration input; the CLI maps this to exit code 1.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The time stepper detected blowup: the field norm exceeded 10x its initial
// value or stopped being finite. The CLI maps this to exit code 2.
struct Instability : std::runtime_error {
  int step;
  double time;
  double norm_ratio;
  Instability(int step_, double time_, double norm_ratio_)
      : std::runtime_error("instability at step " + std::to_string(step_) +
                           ", t=" + std::to_string(time_) +
                           ", norm ratio " + std::to_string(norm_ratio_)),
        step(step_), time(time_), norm_ratio(norm_ratio_) {}
};

// A region Newton solve failed to reach tolerance. Carries the last residual
// norm and iterate; predict_all attaches the element id, the parallel runner
// the task id.
struct NonConvergence : std::runtime_error {
  long element = -1;
  int task = -1;
  int iterations;
  double residual_norm;
  std::vector<double> last_iterate;
  NonConvergence(int iterations_, double residual_norm_,
                 std::vector<double> last_iterate_)
      : std::runtime_error("Newton did not converge after " +
                           std::to_string(iterations_) +
                           " iterations, |R| = " +
                           std::to_string(residual_norm_)),
        iterations(iterations_), residual_norm(residual_norm_),
        last_iterate(std::move(last_iterate_)) {}
};

}  // namespace ridg

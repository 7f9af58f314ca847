#pragma once

#include <array>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ridg/field.hpp"
#include "ridg/mesh.hpp"

namespace ridg {

// One experiment's quantitative summary. Fields not meaningful for a given
// run stay NaN / -1 and print as "--".
struct MetricsRecord {
  std::string scheme;
  int mdeg = 0;
  double nu = 0.0;
  int dim = 1;
  std::array<int, 3> mesh_cells{0, 0, 0};
  long dof = 0;  // spatial basis size x elements
  long efom_per_axis = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  double order = std::numeric_limits<double>::quiet_NaN();
  double runtime_s = std::numeric_limits<double>::quiet_NaN();
  double quality = std::numeric_limits<double>::quiet_NaN();
  int tasks = 1;
  int cores = 1;
  double dof_per_core = 0.0;
  double speedup = std::numeric_limits<double>::quiet_NaN();
  double efficiency_pct = std::numeric_limits<double>::quiet_NaN();
  long comms = -1;           // analytic estimate
  long comms_measured = -1;  // instrumented tally, when available
  int steps = 0;
};

// Approximate relative L2 error: the exact solution is projected onto the
// degree mdeg+1 space on each element (with 2(mdeg+2) points per axis); the
// numerator combines the coefficient error over the resolved modes with the
// dominant truncation term, the denominator is the full reference norm.
double l2_relative_error(
    const CoefficientField& q, const CartesianMesh& mesh, int mdeg,
    const std::function<double(const std::array<double, 3>&)>& exact);

// log(e1/e2) / log(h1/h2)
double convergence_order(double e1, double h1, double e2, double h2);

// -log10(error * runtime)
double quality(double error, double runtime);

// Per-axis size of the first-order mesh with the same total dof.
long efom(long theta, long elements, int dim);

struct ScalingPoint {
  int tasks = 1;
  double runtime_s = 0.0;
  double speedup = std::numeric_limits<double>::quiet_NaN();
  double efficiency_pct = std::numeric_limits<double>::quiet_NaN();
};

// Speedup and efficiency against the 1-task baseline, which must be present;
// negative efficiencies are reported as 0, the baseline's as NaN.
std::vector<ScalingPoint> speedup_efficiency(
    const std::vector<std::pair<int, double>>& runtimes_by_tasks);

// tasks * timesteps * stages_per_step * comms_per_stage
long comms_estimate(long tasks, long timesteps, long stages_per_step,
                    long comms_per_stage);

// Halo messages per task per stage assumed by the communication model.
int comms_per_stage(int dim);  // 3^dim - 1: 8 in 2D, 26 in 3D

// Fixed CSV schema shared by every driver.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
std::string mesh_label(const std::array<int, 3>& cells, int dim);

}  // namespace ridg

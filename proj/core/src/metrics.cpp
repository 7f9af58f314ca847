#include "ridg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ridg/basis.hpp"
#include "ridg/errors.hpp"

namespace ridg {

double l2_relative_error(
    const CoefficientField& q, const CartesianMesh& mesh, int mdeg,
    const std::function<double(const std::array<double, 3>&)>& exact) {
  const int d = mesh.dim;
  const BasisSet big(d, mdeg + 1);
  const QuadratureRule rule = gauss_rule(2 * (mdeg + 2), d);
  const std::vector<double> tab = tabulate(big, rule);

  // Flat positions of the big basis whose multi-index stays within degree
  // mdeg, and their positions in the solution's basis.
  std::vector<int> low_index(big.size(), -1);
  {
    const BasisSet small(d, mdeg);
    for (int k = 0; k < big.size(); ++k) {
      const std::array<int, 4> m = big.multi_index(k);
      bool low = true;
      for (int a = 0; a < d; ++a) low = low && m[a] <= mdeg;
      if (low) low_index[k] = small.flat_index(m);
    }
  }

  const double norm = 1.0 / std::pow(2.0, d);
  std::vector<double> x(big.size());
  double num = 0.0, den = 0.0;
  std::array<double, 3> point{0.0, 0.0, 0.0};
  for (long i = 0; i < mesh.total_cells(); ++i) {
    const std::array<double, 3> center = mesh.center(i);
    std::fill(x.begin(), x.end(), 0.0);
    for (int qp = 0; qp < rule.size(); ++qp) {
      for (int a = 0; a < d; ++a)
        point[a] = center[a] + 0.5 * mesh.spacing(a) * rule.point(qp)[a];
      const double f = exact(point) * rule.weights[qp] * norm;
      const double* row = tab.data() + static_cast<size_t>(qp) * big.size();
      for (int k = 0; k < big.size(); ++k) x[k] += f * row[k];
    }
    const double* qi = q.block(i);
    for (int k = 0; k < big.size(); ++k) {
      den += x[k] * x[k];
      const double diff = (low_index[k] >= 0) ? x[k] - qi[low_index[k]] : x[k];
      num += diff * diff;
    }
  }
  if (den <= 0.0)
    throw ValidationError("l2_relative_error: exact solution has zero norm");
  return std::sqrt(num / den);
}

double convergence_order(double e1, double h1, double e2, double h2) {
  if (e1 <= 0.0 || e2 <= 0.0)
    throw ValidationError("convergence_order: errors must be positive");
  if (h1 <= 0.0 || h2 <= 0.0 || h1 == h2)
    throw ValidationError("convergence_order: need distinct positive spacings");
  return std::log(e1 / e2) / std::log(h1 / h2);
}

double quality(double error, double runtime) {
  if (error <= 0.0 || runtime <= 0.0)
    throw ValidationError("quality: error and runtime must be positive");
  return -std::log10(error * runtime);
}

long efom(long theta, long elements, int dim) {
  if (theta < 1 || elements < 1 || dim < 1)
    throw ValidationError("efom: inputs must be positive");
  const double dof = static_cast<double>(theta) * static_cast<double>(elements);
  return std::llround(std::pow(dof, 1.0 / dim));
}

std::vector<ScalingPoint> speedup_efficiency(
    const std::vector<std::pair<int, double>>& runtimes_by_tasks) {
  double baseline = -1.0;
  for (const auto& [tasks, rt] : runtimes_by_tasks)
    if (tasks == 1) baseline = rt;
  if (baseline < 0.0)
    throw ValidationError("speedup_efficiency: missing the 1-task baseline");

  std::vector<ScalingPoint> out;
  for (const auto& [tasks, rt] : runtimes_by_tasks) {
    ScalingPoint p;
    p.tasks = tasks;
    p.runtime_s = rt;
    p.speedup = baseline / rt;
    if (tasks > 1)
      p.efficiency_pct = std::max(0.0, (p.speedup - 1.0) / (tasks - 1) * 100.0);
    out.push_back(p);
  }
  return out;
}

long comms_estimate(long tasks, long timesteps, long stages_per_step,
                    long comms_per_stage) {
  if (tasks < 1 || timesteps < 1 || stages_per_step < 1 || comms_per_stage < 1)
    throw ValidationError("comms_estimate: inputs must be positive");
  return tasks * timesteps * stages_per_step * comms_per_stage;
}

int comms_per_stage(int dim) {
  int n = 1;
  for (int a = 0; a < dim; ++a) n *= 3;
  return n - 1;
}

std::string mesh_label(const std::array<int, 3>& cells, int dim) {
  std::string s = std::to_string(cells[0]);
  for (int a = 1; a < dim; ++a) s += "x" + std::to_string(cells[a]);
  return s;
}

std::string metrics_csv_header() {
  return "scheme,mdeg,nu,mesh,dof,efom,error,order,runtime_s,quality,tasks,"
         "cores,dof_per_core,speedup,efficiency_pct,comms";
}

namespace {

std::string fmt(const char* f, double v) {
  if (!std::isfinite(v)) return "--";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string s;
  s += r.scheme;
  s += "," + std::to_string(r.mdeg);
  s += "," + fmt("%g", r.nu);
  s += "," + mesh_label(r.mesh_cells, r.dim);
  s += "," + std::to_string(r.dof);
  s += "," + std::to_string(r.efom_per_axis);
  s += "," + fmt("%.6e", r.error);
  s += "," + fmt("%.2f", r.order);
  s += "," + fmt("%.3f", r.runtime_s);
  s += "," + fmt("%.2f", r.quality);
  s += "," + std::to_string(r.tasks);
  s += "," + std::to_string(r.cores);
  s += "," + fmt("%.1f", r.dof_per_core);
  s += "," + fmt("%.2f", r.speedup);
  s += "," + fmt("%.1f", r.efficiency_pct);
  s += "," + (r.comms < 0 ? std::string("--") : std::to_string(r.comms));
  return s;
}

}  // namespace ridg

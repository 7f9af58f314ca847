#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ridg/predictor.hpp"
#include "ridg/stepper.hpp"

namespace ridg {

// Flat experiment configuration: parsed from key = value files, overridden
// by command-line flags. Validation reports the offending field by name.
struct RunConfig {
  std::string problem = "adv1d";
  std::string scheme = "ridg";
  int mdeg = 3;
  double nu = 0.9;
  std::vector<int> meshes{50};  // cells per axis; drivers past the first use all
  double final_time = -1.0;     // <= 0: the problem default
  double newton_tolerance = 1e-11;
  int newton_max_iterations = 20;
  std::string backend = "qqf";
  std::vector<int> tasks{1};  // total task counts
  int threads_per_task = 1;
  int quad_points = 0;        // residual/projection integrals, 0 = mdeg+2
  int projection_points = 0;  // initial-data projection, 0 = 2(mdeg+1)
  int comms_stages = 0;       // analytic comms stage count, 0 = actual
  int max_steps = 200;        // stability probe cap
  int bench_dim = 3;
  int bench_order_lo = 2;
  int bench_order_hi = 5;
  int bench_reps = 5;
  unsigned seed = 12345;
  std::string output_dir = ".";
  std::string csv_name;  // default chosen per driver
  bool emit_plots = false;
  bool step_log = false;
  std::string table_cache;  // directory for binary table caches
};

RunConfig parse_config_file(const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);
// Canonical form: sorted keys, one "key = value" per line.
std::string serialize_config(const RunConfig& cfg);
void validate_config(const RunConfig& cfg);

// Materialized scheme inputs for one mesh size.
SchemeConfig scheme_config_from(const RunConfig& cfg);
CartesianMesh mesh_from(const RunConfig& cfg, int cells_per_axis);

// Tables from the cache directory when configured, built otherwise.
std::shared_ptr<const QqfTables> load_or_build_tables(int mdeg, int dim,
                                                      const std::string& cache_dir);

// Single-region Jacobian assembly timings per backend and order in 3D (or
// lower dims), with fitted log-log exponents against the order M = mdeg+1.
// The perturbation column follows the residual-timing-times-dof estimate;
// full perturbation assemblies enter the consistency check only at orders
// where they are affordable.
struct AssemblyBench {
  int dim = 3;
  std::vector<int> orders;              // M = mdeg + 1
  std::vector<double> qqf_us;           // median per assembly
  std::vector<double> quadrature_us;
  std::vector<double> perturbation_us;  // estimated
  double qqf_exponent = 0.0;
  double quadrature_exponent = 0.0;
  double perturbation_exponent = 0.0;
  double max_backend_rel_diff = 0.0;    // qqf vs quadrature, all orders
  double max_perturbation_rel_diff = 0.0;  // where fully assembled
};

AssemblyBench bench_assembly(int dim, int order_lo, int order_hi, int reps,
                             unsigned seed);

// Study drivers; each writes a CSV (and optional plot data) and prints a
// summary. They return the process exit code.
int driver_run(const RunConfig& cfg, std::ostream& out);
int driver_convergence(const RunConfig& cfg, std::ostream& out);
int driver_scaling(const RunConfig& cfg, std::ostream& out);
int driver_stability(const RunConfig& cfg, std::ostream& out);
int driver_bench_assembly(const RunConfig& cfg, std::ostream& out);

// exit 0 on success, 1 on usage/validation errors, 2 on numerical failure.
int cli_main(int argc, const char* const* argv);

}  // namespace ridg

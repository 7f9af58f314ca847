#include "ridg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "ridg/errors.hpp"
#include "ridg/metrics.hpp"
#include "ridg/parallel.hpp"

namespace ridg {

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& field) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      throw ValidationError(field + ": cannot parse integer '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError(field + ": empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void parse_order_range(const std::string& s, int& lo, int& hi) {
  const auto pos = s.find("..");
  try {
    if (pos == std::string::npos) {
      lo = hi = std::stoi(s);
    } else {
      lo = std::stoi(s.substr(0, pos));
      hi = std::stoi(s.substr(pos + 2));
    }
  } catch (...) {
    throw ValidationError("orders: expected 'lo..hi', got '" + s + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& field) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(field + ": expected a boolean, got '" + v + "'");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "problem") cfg.problem = value;
  else if (key == "scheme") cfg.scheme = value;
  else if (key == "mdeg") cfg.mdeg = std::stoi(value);
  else if (key == "nu") cfg.nu = std::stod(value);
  else if (key == "meshes") cfg.meshes = parse_int_list(value, "meshes");
  else if (key == "final_time") cfg.final_time = std::stod(value);
  else if (key == "newton_tolerance") cfg.newton_tolerance = std::stod(value);
  else if (key == "newton_max_iterations") cfg.newton_max_iterations = std::stoi(value);
  else if (key == "backend") cfg.backend = value;
  else if (key == "tasks") cfg.tasks = parse_int_list(value, "tasks");
  else if (key == "threads_per_task") cfg.threads_per_task = std::stoi(value);
  else if (key == "quad_points") cfg.quad_points = std::stoi(value);
  else if (key == "projection_points") cfg.projection_points = std::stoi(value);
  else if (key == "comms_stages") cfg.comms_stages = std::stoi(value);
  else if (key == "max_steps") cfg.max_steps = std::stoi(value);
  else if (key == "bench_dim") cfg.bench_dim = std::stoi(value);
  else if (key == "bench_orders") parse_order_range(value, cfg.bench_order_lo, cfg.bench_order_hi);
  else if (key == "bench_reps") cfg.bench_reps = std::stoi(value);
  else if (key == "seed") cfg.seed = static_cast<unsigned>(std::stoul(value));
  else if (key == "output_dir") cfg.output_dir = value;
  else if (key == "csv_name") cfg.csv_name = value;
  else if (key == "emit_plots") cfg.emit_plots = parse_bool(value, "emit_plots");
  else if (key == "step_log") cfg.step_log = parse_bool(value, "step_log");
  else if (key == "table_cache") cfg.table_cache = value;
  else throw ValidationError("unknown configuration key: " + key);
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open configuration file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
    try {
      apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ValidationError&) {
      throw;
    } catch (...) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed value");
    }
  }
  return cfg;
}

std::string serialize_config(const RunConfig& c) {
  std::map<std::string, std::string> kv;
  kv["backend"] = c.backend;
  kv["bench_dim"] = std::to_string(c.bench_dim);
  kv["bench_orders"] = std::to_string(c.bench_order_lo) + ".." +
                       std::to_string(c.bench_order_hi);
  kv["bench_reps"] = std::to_string(c.bench_reps);
  kv["comms_stages"] = std::to_string(c.comms_stages);
  kv["csv_name"] = c.csv_name;
  kv["emit_plots"] = c.emit_plots ? "true" : "false";
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", c.final_time);
    kv["final_time"] = buf;
    std::snprintf(buf, sizeof buf, "%g", c.nu);
    kv["nu"] = buf;
    std::snprintf(buf, sizeof buf, "%g", c.newton_tolerance);
    kv["newton_tolerance"] = buf;
  }
  kv["max_steps"] = std::to_string(c.max_steps);
  kv["mdeg"] = std::to_string(c.mdeg);
  kv["meshes"] = join_ints(c.meshes);
  kv["newton_max_iterations"] = std::to_string(c.newton_max_iterations);
  kv["output_dir"] = c.output_dir;
  kv["problem"] = c.problem;
  kv["projection_points"] = std::to_string(c.projection_points);
  kv["quad_points"] = std::to_string(c.quad_points);
  kv["scheme"] = c.scheme;
  kv["seed"] = std::to_string(c.seed);
  kv["step_log"] = c.step_log ? "true" : "false";
  kv["table_cache"] = c.table_cache;
  kv["tasks"] = join_ints(c.tasks);
  kv["threads_per_task"] = std::to_string(c.threads_per_task);

  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void validate_config(const RunConfig& c) {
  ConservationLaw law;
  try {
    law = law_by_name(c.problem);
  } catch (const ValidationError&) {
    throw ValidationError("problem: unknown name '" + c.problem + "'");
  }
  scheme_by_name(c.scheme);
  backend_by_name(c.backend);
  if (c.mdeg < 1) throw ValidationError("mdeg: must be >= 1");
  const int cap = law.dim == 1 ? 11 : (law.dim == 2 ? 7 : 5);
  if (c.mdeg > cap)
    throw ValidationError("mdeg: must be <= " + std::to_string(cap) +
                          " for dim " + std::to_string(law.dim));
  if (!(c.nu > 0.0)) throw ValidationError("nu: must be > 0");
  if (c.meshes.empty()) throw ValidationError("meshes: empty");
  for (int m : c.meshes)
    if (m < 1) throw ValidationError("meshes: entries must be >= 1");
  if (!(c.newton_tolerance > 0.0))
    throw ValidationError("newton_tolerance: must be > 0");
  if (c.newton_max_iterations < 1)
    throw ValidationError("newton_max_iterations: must be >= 1");
  for (int t : c.tasks)
    if (t < 1) throw ValidationError("tasks: entries must be >= 1");
  if (c.threads_per_task < 1)
    throw ValidationError("threads_per_task: must be >= 1");
  if (c.quad_points < 0) throw ValidationError("quad_points: must be >= 0");
  if (c.projection_points < 0)
    throw ValidationError("projection_points: must be >= 0");
  if (c.max_steps < 0) throw ValidationError("max_steps: must be >= 0");
  if (c.bench_dim < 1 || c.bench_dim > 3)
    throw ValidationError("bench_dim: must be in [1,3]");
  if (c.bench_order_lo < 2 || c.bench_order_lo > c.bench_order_hi)
    throw ValidationError("orders: need 2 <= lo <= hi");
  const int order_cap = c.bench_dim == 3 ? 6 : (c.bench_dim == 2 ? 8 : 12);
  if (c.bench_order_hi > order_cap)
    throw ValidationError("orders: hi must be <= " + std::to_string(order_cap) +
                          " for dim " + std::to_string(c.bench_dim));
  if (c.bench_reps < 5) throw ValidationError("bench_reps: must be >= 5");
}

SchemeConfig scheme_config_from(const RunConfig& c) {
  SchemeConfig sc;
  sc.scheme = scheme_by_name(c.scheme);
  sc.mdeg = c.mdeg;
  sc.nu = c.nu;
  sc.newton.tolerance = c.newton_tolerance;
  sc.newton.max_iterations = c.newton_max_iterations;
  sc.newton.quad_points = c.quad_points;
  sc.backend = backend_by_name(c.backend);
  sc.threads = c.threads_per_task;
  sc.projection_points = c.projection_points;
  return sc;
}

CartesianMesh mesh_from(const RunConfig& c, int cells_per_axis) {
  const ConservationLaw law = law_by_name(c.problem);
  std::array<int, 3> cells{1, 1, 1};
  for (int a = 0; a < law.dim; ++a) cells[a] = cells_per_axis;
  return build_mesh(law.dim, cells, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
}

std::shared_ptr<const QqfTables> load_or_build_tables(
    int mdeg, int dim, const std::string& cache_dir) {
  if (cache_dir.empty())
    return std::make_shared<QqfTables>(build_tables(mdeg, dim));
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  const std::string path = cache_dir + "/qqf_m" + std::to_string(mdeg) + "_d" +
                           std::to_string(dim) + ".tbl";
  if (fs::exists(path)) {
    try {
      return std::make_shared<QqfTables>(load_tables(path, mdeg, dim));
    } catch (const ValidationError&) {
      // stale or corrupt cache entry; rebuild below
    }
  }
  auto tables = std::make_shared<QqfTables>(build_tables(mdeg, dim));
  save_tables(*tables, path);
  return tables;
}

namespace {

std::filesystem::path output_path(const RunConfig& cfg,
                                  const std::string& default_name) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  return fs::path(cfg.output_dir) /
         (cfg.csv_name.empty() ? default_name : cfg.csv_name);
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write output file: " + path.string());
  out << body;
}

// gnuplot-friendly twin of a CSV: '#' header, whitespace-separated columns.
void maybe_emit_plot(const RunConfig& cfg, const std::filesystem::path& csv,
                     const std::string& csv_body) {
  if (!cfg.emit_plots) return;
  std::string body = csv_body;
  for (char& ch : body)
    if (ch == ',') ch = ' ';
  if (!body.empty()) body.insert(body.begin(), '#');
  std::filesystem::path dat = csv;
  dat.replace_extension(".dat");
  write_file(dat, body);
}

std::shared_ptr<SchemeContext> make_context(const RunConfig& cfg) {
  const ProblemSetup problem = make_problem(cfg.problem);
  std::shared_ptr<const QqfTables> tables;
  if (!cfg.table_cache.empty())
    tables = load_or_build_tables(cfg.mdeg, problem.law.dim, cfg.table_cache);
  return std::make_shared<SchemeContext>(problem, scheme_config_from(cfg),
                                         tables);
}

MetricsRecord base_record(const RunConfig& cfg, const CartesianMesh& mesh) {
  MetricsRecord r;
  r.scheme = cfg.scheme;
  r.mdeg = cfg.mdeg;
  r.nu = cfg.nu;
  r.dim = mesh.dim;
  r.mesh_cells = mesh.cells;
  const long theta = BasisSet(mesh.dim, cfg.mdeg).size();
  r.dof = theta * mesh.total_cells();
  r.efom_per_axis = efom(theta, mesh.total_cells(), mesh.dim);
  return r;
}

void finish_record(MetricsRecord& r, const RunSummary& s, const RunConfig& cfg,
                   int tasks, int dim) {
  r.error = s.error;
  r.runtime_s = s.runtime_s;
  if (std::isfinite(s.error) && s.error > 0.0 && s.runtime_s > 0.0)
    r.quality = quality(s.error, s.runtime_s);
  r.tasks = tasks;
  r.cores = tasks * std::max(1, cfg.threads_per_task);
  r.dof_per_core = static_cast<double>(r.dof) / r.cores;
  r.steps = s.steps;
  const int stages = cfg.comms_stages > 0 ? cfg.comms_stages : s.stages_per_step;
  if (s.steps > 0)
    r.comms = comms_estimate(tasks, s.steps, stages, comms_per_stage(dim));
}

}  // namespace

int driver_run(const RunConfig& cfg, std::ostream& out) {
  validate_config(cfg);
  const ProblemSetup problem = make_problem(cfg.problem);
  const CartesianMesh mesh = mesh_from(cfg, cfg.meshes.front());
  auto ctx = make_context(cfg);

  std::string step_rows = "step,t,dt,newton_max,newton_total\n";
  StepCallback log = nullptr;
  if (cfg.step_log)
    log = [&](const StepLog& e) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%d,%ld\n", e.step, e.t,
                    e.dt, e.newton_max, e.newton_total);
      step_rows += buf;
    };

  RunSummary summary;
  const int tasks = cfg.tasks.front();
  if (tasks == 1) {
    run_with_context(*ctx, mesh, cfg.final_time, &summary, log);
  } else {
    ParallelOptions opts;
    opts.threads_per_task = cfg.threads_per_task;
    opts.final_time = cfg.final_time;
    opts.context = ctx;
    ParallelResult r =
        run_parallel(problem, ctx->config(), mesh, tasks_per_axis_for(tasks, mesh), opts);
    summary = r.summary;
  }

  MetricsRecord rec = base_record(cfg, mesh);
  finish_record(rec, summary, cfg, tasks, mesh.dim);

  const std::string body = metrics_csv_header() + "\n" + metrics_csv_row(rec) + "\n";
  const auto path = output_path(cfg, "run.csv");
  write_file(path, body);
  maybe_emit_plot(cfg, path, body);
  if (cfg.step_log) write_file(path.parent_path() / "steps.csv", step_rows);

  out << "problem " << cfg.problem << " scheme " << cfg.scheme << " mdeg "
      << cfg.mdeg << " nu " << cfg.nu << " mesh "
      << mesh_label(mesh.cells, mesh.dim) << "\n";
  out << "steps " << summary.steps << "  runtime_s " << summary.runtime_s
      << "  error ";
  if (std::isfinite(summary.error))
    out << summary.error;
  else
    out << "--";
  out << "\nwrote " << path.string() << "\n";
  return 0;
}

int driver_convergence(const RunConfig& cfg, std::ostream& out) {
  validate_config(cfg);
  std::string body = metrics_csv_header() + "\n";
  double prev_error = 0.0, prev_h = 0.0;
  bool have_prev = false;
  for (int cells : cfg.meshes) {
    const CartesianMesh mesh = mesh_from(cfg, cells);
    RunConfig one = cfg;
    one.meshes = {cells};
    auto ctx = make_context(one);
    RunSummary summary;
    run_with_context(*ctx, mesh, cfg.final_time, &summary);

    MetricsRecord rec = base_record(cfg, mesh);
    finish_record(rec, summary, cfg, 1, mesh.dim);
    if (have_prev && std::isfinite(summary.error) && summary.error > 0.0)
      rec.order = convergence_order(prev_error, prev_h, summary.error,
                                    mesh.min_spacing());
    if (std::isfinite(summary.error) && summary.error > 0.0) {
      prev_error = summary.error;
      prev_h = mesh.min_spacing();
      have_prev = true;
    }
    body += metrics_csv_row(rec) + "\n";
    out << "mesh " << mesh_label(mesh.cells, mesh.dim) << "  error "
        << summary.error << "  order "
        << (std::isfinite(rec.order) ? std::to_string(rec.order) : "--")
        << "  runtime_s " << summary.runtime_s << "\n";
  }
  const auto path = output_path(cfg, "convergence.csv");
  write_file(path, body);
  maybe_emit_plot(cfg, path, body);
  out << "wrote " << path.string() << "\n";
  return 0;
}

int driver_scaling(const RunConfig& cfg, std::ostream& out) {
  validate_config(cfg);
  const ProblemSetup problem = make_problem(cfg.problem);
  const CartesianMesh mesh = mesh_from(cfg, cfg.meshes.front());
  ParallelOptions opts;
  opts.threads_per_task = cfg.threads_per_task;
  opts.final_time = cfg.final_time;
  opts.context = make_context(cfg);
  const ScalingStudy study = scaling_study(problem, opts.context->config(),
                                           mesh, cfg.tasks, opts,
                                           cfg.comms_stages);

  std::string body = metrics_csv_header() + "\n";
  for (const MetricsRecord& r : study.records) body += metrics_csv_row(r) + "\n";
  const auto path = output_path(cfg, "scaling.csv");
  write_file(path, body);
  maybe_emit_plot(cfg, path, body);

  std::string instr = instrumentation_csv_header() + ",run_tasks\n";
  for (size_t i = 0; i < study.instrumentation.size(); ++i)
    for (const TaskInstrumentation& t : study.instrumentation[i])
      instr += instrumentation_csv_row(t) + "," +
               std::to_string(study.records[i].tasks) + "\n";
  write_file(path.parent_path() / "scaling_tasks.csv", instr);

  for (size_t i = 0; i < study.records.size(); ++i) {
    const MetricsRecord& r = study.records[i];
    out << "tasks " << r.tasks << "  runtime_s " << r.runtime_s << "  speedup ";
    if (std::isfinite(r.speedup))
      out << r.speedup;
    else
      out << "--";
    out << "  comms " << r.comms << "  comms_measured "
        << study.comms_measured[i] << "\n";
  }
  out << "wrote " << path.string() << "\n";
  return 0;
}

int driver_stability(const RunConfig& cfg, std::ostream& out) {
  validate_config(cfg);
  std::string body = "scheme,mdeg,nu,mesh,steps,outcome,instability_step\n";
  for (int cells : cfg.meshes) {
    const CartesianMesh mesh = mesh_from(cfg, cells);
    RunConfig one = cfg;
    one.meshes = {cells};
    auto ctx = make_context(one);
    RunSummary summary;
    std::string outcome = "stable";
    int blow_step = -1;
    // Probe far beyond the nominal horizon; the step cap bounds the work.
    const double horizon = cfg.final_time > 0.0 ? cfg.final_time : 1e6;
    try {
      run_with_context(*ctx, mesh, horizon, &summary, nullptr, cfg.max_steps);
    } catch (const Instability& e) {
      outcome = "unstable";
      blow_step = e.step;
      summary.steps = e.step;
    }
    body += cfg.scheme + "," + std::to_string(cfg.mdeg) + "," +
            std::to_string(cfg.nu) + "," + mesh_label(mesh.cells, mesh.dim) +
            "," + std::to_string(summary.steps) + "," + outcome + "," +
            (blow_step < 0 ? std::string("--") : std::to_string(blow_step)) +
            "\n";
    out << "mesh " << mesh_label(mesh.cells, mesh.dim) << "  " << outcome;
    if (blow_step >= 0) out << " at step " << blow_step;
    out << " (" << summary.steps << " steps probed)\n";
  }
  const auto path = output_path(cfg, "stability.csv");
  write_file(path, body);
  maybe_emit_plot(cfg, path, body);
  out << "wrote " << path.string() << "\n";
  return 0;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double fit_exponent(const std::vector<int>& orders,
                    const std::vector<double>& times_us) {
  // least-squares slope of log(time) against log(M)
  const size_t n = orders.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(static_cast<double>(orders[i]));
    const double y = std::log(times_us[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

AssemblyBench bench_assembly(int dim, int order_lo, int order_hi, int reps,
                             unsigned seed) {
  if (dim < 1 || dim > 3) throw ValidationError("bench: dim must be in [1,3]");
  if (order_lo < 2 || order_lo > order_hi)
    throw ValidationError("bench: need 2 <= lo <= hi");
  if (reps < 5) throw ValidationError("bench: repetitions must be >= 5");

  // A nonlinear law exercises a state-dependent projection in 2D; in 1D/3D
  // the advection flux runs the identical assembly path.
  const ConservationLaw law =
      dim == 2 ? law_by_name("burgers2d")
               : (dim == 1 ? law_by_name("adv1d") : law_by_name("adv3d"));

  AssemblyBench bench;
  bench.dim = dim;
  using Clock = std::chrono::steady_clock;

  for (int order = order_lo; order <= order_hi; ++order) {
    const int mdeg = order - 1;
    PredictorContext ctx(law, mdeg);
    const int tt = ctx.theta_t();
    const int dofs = ctx.slots() * tt;

    std::mt19937 rng(seed + static_cast<unsigned>(order));
    std::uniform_real_distribution<double> uni(-0.5, 0.5);
    RegionSystem sys;
    sys.Q = Eigen::VectorXd::Zero(ctx.slots() * ctx.theta());
    sys.dt = 0.05;
    sys.h = {0.125, 0.125, 0.125};
    sys.W.resize(dofs);
    const BasisSet st(dim + 1, mdeg);
    for (int r = 0; r < ctx.slots(); ++r)
      for (int k = 0; k < tt; ++k) {
        const std::array<int, 4> m = st.multi_index(k);
        int total = 0;
        for (int a = 0; a <= dim; ++a) total += m[a];
        sys.W[r * tt + k] = (k == 0 ? 1.0 : 0.0) +
                            uni(rng) * std::exp(-0.7 * total);
      }
    compute_face_speeds(sys, ctx);

    RegionMatrix j_qqf(dim, ctx.slots(), tt);
    RegionMatrix j_quad(dim, ctx.slots(), tt);

    auto time_assembly = [&](JacobianBackend backend, RegionMatrix& jac) {
      std::vector<double> us;
      for (int rep = 0; rep < reps; ++rep) {
        const auto t0 = Clock::now();
        region_jacobian(sys, ctx, backend, jac);
        us.push_back(
            std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
      }
      return median_of(us);
    };

    bench.orders.push_back(order);
    bench.qqf_us.push_back(time_assembly(JacobianBackend::Qqf, j_qqf));
    bench.quadrature_us.push_back(
        time_assembly(JacobianBackend::Quadrature, j_quad));

    // Perturbation cost estimated as residual time x dof count; assembling
    // it in full at high orders would dominate the whole benchmark.
    {
      std::vector<double> us;
      Eigen::VectorXd residual;
      for (int rep = 0; rep < reps; ++rep) {
        const auto t0 = Clock::now();
        region_residual(sys, ctx, residual);
        us.push_back(
            std::chrono::duration<double, std::micro>(Clock::now() - t0).count());
      }
      bench.perturbation_us.push_back(median_of(us) * dofs);
    }

    bench.max_backend_rel_diff = std::max(
        bench.max_backend_rel_diff, RegionMatrix::max_rel_diff(j_qqf, j_quad));
    if (dofs <= 2500) {
      RegionMatrix j_pert(dim, ctx.slots(), tt);
      region_jacobian(sys, ctx, JacobianBackend::Perturbation, j_pert);
      bench.max_perturbation_rel_diff =
          std::max(bench.max_perturbation_rel_diff,
                   RegionMatrix::max_rel_diff(j_qqf, j_pert));
    }
  }

  bench.qqf_exponent = fit_exponent(bench.orders, bench.qqf_us);
  bench.quadrature_exponent = fit_exponent(bench.orders, bench.quadrature_us);
  bench.perturbation_exponent = fit_exponent(bench.orders, bench.perturbation_us);
  return bench;
}

int driver_bench_assembly(const RunConfig& cfg, std::ostream& out) {
  validate_config(cfg);
  const AssemblyBench bench = bench_assembly(
      cfg.bench_dim, cfg.bench_order_lo, cfg.bench_order_hi, cfg.bench_reps,
      cfg.seed);

  std::string body = "order,qqf_us,quadrature_us,perturbation_us,quad_over_qqf\n";
  for (size_t i = 0; i < bench.orders.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.1f,%.1f,%.1f,%.2f\n", bench.orders[i],
                  bench.qqf_us[i], bench.quadrature_us[i],
                  bench.perturbation_us[i],
                  bench.quadrature_us[i] / bench.qqf_us[i]);
    body += buf;
  }
  const auto path = output_path(cfg, "bench_assembly.csv");
  write_file(path, body);
  maybe_emit_plot(cfg, path, body);

  out << body;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "fitted exponents: qqf %.2f, quadrature %.2f, perturbation "
                "%.2f (gap %.2f)\n",
                bench.qqf_exponent, bench.quadrature_exponent,
                bench.perturbation_exponent,
                bench.quadrature_exponent - bench.qqf_exponent);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "backend agreement: qqf-vs-quadrature %.2e, qqf-vs-perturbation "
                "%.2e\n",
                bench.max_backend_rel_diff, bench.max_perturbation_rel_diff);
  out << buf;
  out << "wrote " << path.string() << "\n";
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  RunConfig cfg;
  if (const char* e = std::getenv("RIDG_OUTPUT_DIR")) cfg.output_dir = e;
  if (const char* e = std::getenv("RIDG_THREADS"))
    cfg.threads_per_task = std::max(1, std::atoi(e));

  // The configuration file is applied first so that flags override it.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    std::string path;
    if (arg == "--config" && i + 1 < argc)
      path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
    if (!path.empty()) {
      try {
        cfg = parse_config_file(path);
      } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
      break;
    }
  }

  CLI::App app{"Regionally implicit discontinuous Galerkin solver harness"};
  app.require_subcommand(1);

  std::string config_path, meshes_str, tasks_str, orders_str;
  int mesh_single = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file (key = value)");
    sub->add_option("--problem", cfg.problem, "adv1d|adv2d|adv3d|burgers2d");
    sub->add_option("--scheme", cfg.scheme, "ridg|rkdg");
    sub->add_option("--mdeg", cfg.mdeg, "polynomial degree");
    sub->add_option("--nu", cfg.nu, "CFL number");
    sub->add_option("--mesh", mesh_single, "cells per axis");
    sub->add_option("--meshes", meshes_str, "comma list of cells per axis");
    sub->add_option("--tfinal", cfg.final_time, "final time (default: problem)");
    sub->add_option("--newton-tol", cfg.newton_tolerance, "Newton tolerance");
    sub->add_option("--newton-max", cfg.newton_max_iterations,
                    "Newton iteration cap");
    sub->add_option("--backend", cfg.backend, "qqf|quadrature|perturbation");
    sub->add_option("--tasks", tasks_str, "comma list of task counts");
    sub->add_option("--threads", cfg.threads_per_task, "threads per task");
    sub->add_option("--quad-points", cfg.quad_points,
                    "quadrature points per axis (0 = mdeg+2)");
    sub->add_option("--projection-points", cfg.projection_points,
                    "initial projection points per axis (0 = 2(mdeg+1))");
    sub->add_option("--comms-stages", cfg.comms_stages,
                    "stage count for the analytic comms estimate");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.output_dir, "output directory");
    sub->add_option("--csv", cfg.csv_name, "CSV file name");
    sub->add_flag("--emit-plots", cfg.emit_plots, "write gnuplot .dat twins");
    sub->add_flag("--step-log", cfg.step_log, "write per-step CSV log");
    sub->add_option("--table-cache", cfg.table_cache,
                    "directory for table cache files");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "single simulation run");
  CLI::App* cmd_conv =
      app.add_subcommand("convergence", "error/order study over a mesh list");
  CLI::App* cmd_scal =
      app.add_subcommand("scaling", "strong-scaling study over task counts");
  CLI::App* cmd_stab =
      app.add_subcommand("stability", "CFL stability probe with a step cap");
  CLI::App* cmd_bench =
      app.add_subcommand("bench-assembly", "Jacobian assembly benchmark");
  for (CLI::App* sub : {cmd_run, cmd_conv, cmd_scal, cmd_stab, cmd_bench})
    add_common(sub);
  cmd_stab->add_option("--max-steps", cfg.max_steps, "stability probe cap");
  cmd_bench->add_option("--dim", cfg.bench_dim, "spatial dimension");
  cmd_bench->add_option("--orders", orders_str, "order range, e.g. 2..6");
  cmd_bench->add_option("--reps", cfg.bench_reps, "repetitions (>= 5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (!meshes_str.empty())
      cfg.meshes = parse_int_list(meshes_str, "meshes");
    else if (mesh_single > 0)
      cfg.meshes = {mesh_single};
    if (!tasks_str.empty()) cfg.tasks = parse_int_list(tasks_str, "tasks");
    if (!orders_str.empty())
      parse_order_range(orders_str, cfg.bench_order_lo, cfg.bench_order_hi);

    if (cmd_run->parsed()) return driver_run(cfg, std::cout);
    if (cmd_conv->parsed()) return driver_convergence(cfg, std::cout);
    if (cmd_scal->parsed()) return driver_scaling(cfg, std::cout);
    if (cmd_stab->parsed()) return driver_stability(cfg, std::cout);
    if (cmd_bench->parsed()) return driver_bench_assembly(cfg, std::cout);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Instability& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what();
    if (e.element >= 0) std::cerr << " (element " << e.element << ")";
    if (e.task >= 0) std::cerr << " (task " << e.task << ")";
    std::cerr << "\n";
    return 2;
  }
  return 1;
}

}  // namespace ridg

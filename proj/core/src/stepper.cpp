#include "ridg/stepper.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

#include "ridg/errors.hpp"
#include "ridg/metrics.hpp"
#include "ridg/threading.hpp"

namespace ridg {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

// Spatial basis evaluated at points of a higher-dimensional rule: the first
// `dim` coordinates are the spatial ones, extra coordinates (time) ignored.
std::vector<double> tabulate_spatial(const BasisSet& basis,
                                     const QuadratureRule& rule, int deriv_axis) {
  std::vector<double> tab(static_cast<size_t>(rule.size()) * basis.size());
  for (int q = 0; q < rule.size(); ++q)
    for (int k = 0; k < basis.size(); ++k)
      tab[static_cast<size_t>(q) * basis.size() + k] =
          deriv_axis < 0 ? basis.value(k, rule.point(q))
                         : basis.derivative(k, deriv_axis, rule.point(q));
  return tab;
}

// Spatial basis on the face xi_axis = side, with the remaining coordinates
// taken from the face rule (transverse spatial axes first, time ignored).
std::vector<double> tabulate_spatial_trace(const BasisSet& basis,
                                           const QuadratureRule& face_rule,
                                           int axis, double side) {
  const int d = basis.dim();
  std::vector<double> tab(static_cast<size_t>(face_rule.size()) * basis.size());
  std::array<double, 4> xi{};
  for (int q = 0; q < face_rule.size(); ++q) {
    const double* fp = face_rule.point(q);
    int pos = 0;
    for (int b = 0; b < d; ++b) {
      if (b == axis) continue;
      xi[b] = fp[pos++];
    }
    xi[axis] = side;
    for (int k = 0; k < basis.size(); ++k)
      tab[static_cast<size_t>(q) * basis.size() + k] = basis.value(k, xi.data());
  }
  return tab;
}

QuadratureRule point_rule() {
  QuadratureRule r;
  r.dim = 1;
  r.points_per_axis = 1;
  r.points = {0.0};
  r.weights = {1.0};
  return r;
}

}  // namespace

std::string scheme_name(SchemeConfig::Scheme s) {
  return s == SchemeConfig::Scheme::Ridg ? "ridg" : "rkdg";
}

SchemeConfig::Scheme scheme_by_name(const std::string& name) {
  if (name == "ridg") return SchemeConfig::Scheme::Ridg;
  if (name == "rkdg") return SchemeConfig::Scheme::Rkdg;
  throw ValidationError("unknown scheme: " + name + " (expected ridg|rkdg)");
}

namespace {

int resolve_stages(const SchemeConfig& cfg) {
  int stages = cfg.stages;
  if (stages == 0) {
    if (cfg.mdeg <= 2)
      stages = 3;
    else if (cfg.mdeg == 3)
      stages = 10;
    else
      throw ValidationError("rkdg: no Runge-Kutta pairing for mdeg = " +
                            std::to_string(cfg.mdeg));
  }
  if (!((stages == 3 && cfg.mdeg <= 2) || (stages == 10 && cfg.mdeg == 3)))
    throw ValidationError("rkdg: unsupported (mdeg, stages) pairing (" +
                          std::to_string(cfg.mdeg) + ", " +
                          std::to_string(stages) + ")");
  return stages;
}

}  // namespace

SchemeContext::SchemeContext(const ProblemSetup& problem,
                             const SchemeConfig& cfg,
                             std::shared_ptr<const QqfTables> tables)
    : problem_(problem), cfg_(cfg), spatial_(problem.law.dim, cfg.mdeg) {
  if (cfg.mdeg < 1) throw ValidationError("SchemeConfig: mdeg must be >= 1");
  if (!(cfg.nu > 0.0)) throw ValidationError("SchemeConfig: nu must be > 0");
  if (cfg.scheme == SchemeConfig::Scheme::Rkdg) resolve_stages(cfg);

  const int d = problem.law.dim;
  predictor_ = std::make_shared<PredictorContext>(
      problem.law, cfg.mdeg, std::move(tables), cfg.newton.quad_points);

  st_phi_ = tabulate_spatial(spatial_, predictor_->volume_rule(), -1);
  for (int a = 0; a < d; ++a)
    st_dphi_[a] = tabulate_spatial(spatial_, predictor_->volume_rule(), a);
  for (int a = 0; a < d; ++a)
    for (int side = 0; side < 2; ++side)
      st_trace_phi_[a][side] = tabulate_spatial_trace(
          spatial_, predictor_->face_rule(), a, side ? 1.0 : -1.0);

  const int npts = cfg.newton.quad_points > 0 ? cfg.newton.quad_points
                                              : cfg.mdeg + 2;
  sp_vol_rule_ = gauss_rule(npts, d);
  sp_face_rule_ = d == 1 ? point_rule() : gauss_rule(npts, d - 1);
  sp_phi_ = tabulate_spatial(spatial_, sp_vol_rule_, -1);
  for (int a = 0; a < d; ++a)
    sp_dphi_[a] = tabulate_spatial(spatial_, sp_vol_rule_, a);
  for (int a = 0; a < d; ++a)
    for (int side = 0; side < 2; ++side)
      sp_trace_phi_[a][side] = tabulate_spatial_trace(
          spatial_, sp_face_rule_, a, side ? 1.0 : -1.0);
}

int SchemeContext::stages_per_step() const {
  if (cfg_.scheme == SchemeConfig::Scheme::Ridg) return 2;
  return resolve_stages(cfg_);
}

const QuadratureRule& SchemeContext::st_volume_rule() const {
  return predictor_->volume_rule();
}
const QuadratureRule& SchemeContext::st_face_rule() const {
  return predictor_->face_rule();
}

double compute_dt(double nu, const CartesianMesh& mesh, double lambda_max) {
  if (!(nu > 0.0)) throw ValidationError("compute_dt: nu must be > 0");
  if (!(lambda_max > 0.0))
    throw ValidationError("compute_dt: lambda_max must be > 0 (no dynamics)");
  return nu * mesh.min_spacing() / lambda_max;
}

namespace {

std::vector<long> all_cells(const CartesianMesh& mesh) {
  std::vector<long> cells(mesh.total_cells());
  for (long i = 0; i < mesh.total_cells(); ++i) cells[i] = i;
  return cells;
}

}  // namespace

double max_wave_speed_cells(const CoefficientField& q,
                            const CartesianMesh& mesh, const SchemeContext& ctx,
                            const std::vector<long>& cells) {
  const int d = mesh.dim;
  const int th = ctx.theta();
  const ConservationLaw& law = ctx.law();
  const int nq = ctx.sp_volume_rule().size();
  const int nqf = ctx.sp_face_rule().size();
  RowMajorMap phi(ctx.sp_phi().data(), nq, th);

  double lam = 0.0;
  Eigen::VectorXd vals;
  for (long i : cells) {
    Eigen::Map<const Eigen::VectorXd> qi(q.block(i), th);
    vals = phi * qi;
    for (int p = 0; p < nq; ++p)
      for (int a = 0; a < d; ++a) lam = std::max(lam, law.wave_speed(vals[p], a));
    for (int a = 0; a < d; ++a)
      for (int side = 0; side < 2; ++side) {
        RowMajorMap tr(ctx.sp_trace_phi(a, side).data(), nqf, th);
        vals = tr * qi;
        for (int p = 0; p < nqf; ++p)
          lam = std::max(lam, law.wave_speed(vals[p], a));
      }
  }
  return lam;
}

double max_wave_speed(const CoefficientField& q, const CartesianMesh& mesh,
                      const SchemeContext& ctx) {
  return max_wave_speed_cells(q, mesh, ctx, all_cells(mesh));
}

void project_initial_cells(const ProblemSetup& problem,
                           const CartesianMesh& mesh, int mdeg,
                           int points_per_axis, const std::vector<long>& cells,
                           CoefficientField& out, int threads) {
  const int d = mesh.dim;
  const BasisSet basis(d, mdeg);
  const int npts = points_per_axis > 0 ? points_per_axis : 2 * (mdeg + 1);
  const QuadratureRule rule = gauss_rule(npts, d);
  const std::vector<double> tab = tabulate(basis, rule);
  const double norm = 1.0 / std::pow(2.0, d);

  // Deviation-from-midpoint form: constant data projects to an exact
  // constant polynomial (higher modes are true zeros), which the bitwise
  // free-stream guarantee downstream relies on.
  parallel_for(static_cast<long>(cells.size()), threads, [&](long idx) {
    const long i = cells[idx];
    const std::array<double, 3> center = mesh.center(i);
    const double mu = problem.initial(center);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    double* block = out.block(i);
    std::fill(block, block + basis.size(), 0.0);
    double wsum = 0.0;
    for (int qp = 0; qp < rule.size(); ++qp) {
      wsum += rule.weights[qp];
      for (int a = 0; a < d; ++a)
        x[a] = center[a] + 0.5 * mesh.spacing(a) * rule.point(qp)[a];
      const double f = (problem.initial(x) - mu) * rule.weights[qp] * norm;
      const double* row = tab.data() + static_cast<size_t>(qp) * basis.size();
      for (int k = 0; k < basis.size(); ++k) block[k] += f * row[k];
    }
    block[0] += mu * (norm * wsum);
  });
}

CoefficientField project_initial(const ProblemSetup& problem,
                                 const CartesianMesh& mesh, int mdeg,
                                 int points_per_axis, int threads) {
  CoefficientField q(mesh.total_cells(), BasisSet(mesh.dim, mdeg).size());
  project_initial_cells(problem, mesh, mdeg, points_per_axis, all_cells(mesh),
                        q, threads);
  return q;
}

double max_mean_state_cells(const CoefficientField& q,
                            const std::vector<long>& cells) {
  double m = -std::numeric_limits<double>::infinity();
  for (long i : cells) m = std::max(m, q.block(i)[0]);
  return m;
}

double max_mean_state(const CoefficientField& q) {
  double m = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < q.num_elements; ++i) m = std::max(m, q.block(i)[0]);
  return m;
}

void correct_cells(const std::vector<long>& cells, const CoefficientField& q,
                   const CoefficientField& w, const SchemeContext& ctx,
                   double dt, const CartesianMesh& mesh, double ref_state,
                   CoefficientField& out, int threads) {
  const int d = mesh.dim;
  const int th = ctx.theta();
  const PredictorContext& pc = *ctx.predictor();
  const int tt = pc.theta_t();
  const int nq = pc.volume_rule().size();
  const int nqf = pc.face_rule().size();
  const ConservationLaw& law = ctx.law();
  const double nvol = 1.0 / std::pow(2.0, d + 1);
  const double nface = 1.0 / std::pow(2.0, d);

  RowMajorMap psi(pc.volume_psi().data(), nq, tt);

  parallel_for(static_cast<long>(cells.size()), threads, [&](long idx) {
    const long i = cells[idx];
    Eigen::Map<Eigen::VectorXd> oi(out.block(i), th);
    oi = Eigen::Map<const Eigen::VectorXd>(q.block(i), th);

    // Volume term on the predicted space-time polynomial, flux measured
    // relative to the reference state.
    Eigen::VectorXd wq = psi * Eigen::Map<const Eigen::VectorXd>(w.block(i), tt);
    Eigen::VectorXd fq(nq);
    for (int a = 0; a < d; ++a) {
      const double coef = 2.0 * dt / mesh.spacing(a);
      const double offset = law.flux(ref_state, a);
      for (int p = 0; p < nq; ++p)
        fq[p] = nvol * pc.volume_rule().weights[p] * (law.flux(wq[p], a) - offset);
      RowMajorMap dphi(ctx.st_dphi(a).data(), nq, th);
      oi.noalias() += coef * (dphi.transpose() * fq);
    }

    // Rusanov face fluxes on predicted traces; the same (left, right) pair is
    // evaluated identically from both adjacent elements.
    Eigen::VectorXd wl(nqf), wr(nqf), fhat(nqf);
    for (int a = 0; a < d; ++a) {
      const double coef = dt / mesh.spacing(a);
      const double offset = law.flux(ref_state, a);
      for (int side = 0; side < 2; ++side) {
        const long left = side ? i : mesh.neighbor(i, a, -1);
        const long right = side ? mesh.neighbor(i, a, +1) : i;
        trace_values(w.block(left), a, 1, pc, wl);
        trace_values(w.block(right), a, 0, pc, wr);
        for (int p = 0; p < nqf; ++p) {
          const double lam =
              std::max(law.wave_speed(wl[p], a), law.wave_speed(wr[p], a));
          fhat[p] = nface * pc.face_rule().weights[p] *
                    (0.5 * (law.flux(wl[p], a) + law.flux(wr[p], a)) -
                     0.5 * lam * (wr[p] - wl[p]) - offset);
        }
        RowMajorMap tr(ctx.st_trace_phi(a, side).data(), nqf, th);
        if (side)
          oi.noalias() -= coef * (tr.transpose() * fhat);
        else
          oi.noalias() += coef * (tr.transpose() * fhat);
      }
    }
  });
}

CoefficientField correct(const CoefficientField& q, const CoefficientField& w,
                         const SchemeContext& ctx, double dt,
                         const CartesianMesh& mesh, int threads) {
  CoefficientField out(q.num_elements, ctx.theta());
  correct_cells(all_cells(mesh), q, w, ctx, dt, mesh, max_mean_state(w), out,
                threads);
  return out;
}

void rkdg_rhs_cells(const std::vector<long>& cells, const CoefficientField& q,
                    const SchemeContext& ctx, const CartesianMesh& mesh,
                    double ref_state, CoefficientField& out, int threads) {
  const int d = mesh.dim;
  const int th = ctx.theta();
  const ConservationLaw& law = ctx.law();
  const int nq = ctx.sp_volume_rule().size();
  const int nqf = ctx.sp_face_rule().size();
  const double nvol = 1.0 / std::pow(2.0, d);
  const double nface = d == 1 ? 1.0 : 1.0 / std::pow(2.0, d - 1);
  RowMajorMap phi(ctx.sp_phi().data(), nq, th);

  parallel_for(static_cast<long>(cells.size()), threads, [&](long idx) {
    const long i = cells[idx];
    Eigen::Map<Eigen::VectorXd> ri(out.block(i), th);
    ri.setZero();
    Eigen::VectorXd qq = phi * Eigen::Map<const Eigen::VectorXd>(q.block(i), th);
    Eigen::VectorXd fq(nq);
    for (int a = 0; a < d; ++a) {
      const double coef = 2.0 / mesh.spacing(a);
      const double offset = law.flux(ref_state, a);
      for (int p = 0; p < nq; ++p)
        fq[p] = nvol * ctx.sp_volume_rule().weights[p] *
                (law.flux(qq[p], a) - offset);
      RowMajorMap dphi(ctx.sp_dphi(a).data(), nq, th);
      ri.noalias() += coef * (dphi.transpose() * fq);
    }

    Eigen::VectorXd wl(nqf), wr(nqf), fhat(nqf);
    for (int a = 0; a < d; ++a) {
      const double coef = 1.0 / mesh.spacing(a);
      const double offset = law.flux(ref_state, a);
      for (int side = 0; side < 2; ++side) {
        const long left = side ? i : mesh.neighbor(i, a, -1);
        const long right = side ? mesh.neighbor(i, a, +1) : i;
        RowMajorMap trp(ctx.sp_trace_phi(a, 1).data(), nqf, th);
        RowMajorMap trm(ctx.sp_trace_phi(a, 0).data(), nqf, th);
        wl = trp * Eigen::Map<const Eigen::VectorXd>(q.block(left), th);
        wr = trm * Eigen::Map<const Eigen::VectorXd>(q.block(right), th);
        for (int p = 0; p < nqf; ++p) {
          const double lam =
              std::max(law.wave_speed(wl[p], a), law.wave_speed(wr[p], a));
          fhat[p] = nface * ctx.sp_face_rule().weights[p] *
                    (0.5 * (law.flux(wl[p], a) + law.flux(wr[p], a)) -
                     0.5 * lam * (wr[p] - wl[p]) - offset);
        }
        RowMajorMap tr(ctx.sp_trace_phi(a, side).data(), nqf, th);
        if (side)
          ri.noalias() -= coef * (tr.transpose() * fhat);
        else
          ri.noalias() += coef * (tr.transpose() * fhat);
      }
    }
  });
}

CoefficientField rkdg_rhs(const CoefficientField& q, const SchemeContext& ctx,
                          const CartesianMesh& mesh, int threads) {
  CoefficientField rhs(q.num_elements, ctx.theta());
  rkdg_rhs_cells(all_cells(mesh), q, ctx, mesh, max_mean_state(q), rhs,
                 threads);
  return rhs;
}

namespace {

void axpy(CoefficientField& y, double alpha, const CoefficientField& x) {
  for (size_t j = 0; j < y.data.size(); ++j) y.data[j] += alpha * x.data[j];
}

bool all_zero(const CoefficientField& x) {
  for (double v : x.data)
    if (v != 0.0) return false;
  return true;
}

}  // namespace

CoefficientField ssprk_step(const CoefficientField& q, double dt,
                            const SchemeContext& ctx, const CartesianMesh& mesh,
                            int stages, int threads) {
  const std::vector<long> cells = all_cells(mesh);
  const double ref = max_mean_state(q);
  auto rhs_of = [&](const CoefficientField& v, CoefficientField& out) {
    rkdg_rhs_cells(cells, v, ctx, mesh, ref, out, threads);
  };

  CoefficientField rhs(q.num_elements, ctx.theta());
  if (stages == 3) {
    if (ctx.mdeg() > 2)
      throw ValidationError("rkdg: 3-stage SSP-RK needs mdeg <= 2");
    // Shu-Osher SSP-RK3. An equilibrium (identically zero rhs) short-circuits
    // the stage combinations, which would otherwise perturb constants by an
    // ulp and break exact free-stream preservation.
    rhs_of(q, rhs);
    if (all_zero(rhs)) return q;
    CoefficientField u1 = q;
    axpy(u1, dt, rhs);
    rhs_of(u1, rhs);
    CoefficientField u2 = u1;
    axpy(u2, dt, rhs);
    for (size_t j = 0; j < u2.data.size(); ++j)
      u2.data[j] = 0.75 * q.data[j] + 0.25 * u2.data[j];
    rhs_of(u2, rhs);
    CoefficientField u3 = u2;
    axpy(u3, dt, rhs);
    for (size_t j = 0; j < u3.data.size(); ++j)
      u3.data[j] = (q.data[j] + 2.0 * u3.data[j]) / 3.0;
    return u3;
  }
  if (stages == 10) {
    if (ctx.mdeg() != 3)
      throw ValidationError("rkdg: the 10-stage SSP-RK pairing is for mdeg = 3");
    // Ketcheson's low-storage 10-stage 4th-order SSP scheme.
    rhs_of(q, rhs);
    if (all_zero(rhs)) return q;
    CoefficientField q1 = q;
    CoefficientField q2 = q;
    axpy(q1, dt / 6.0, rhs);
    for (int i = 1; i < 5; ++i) {
      rhs_of(q1, rhs);
      axpy(q1, dt / 6.0, rhs);
    }
    for (size_t j = 0; j < q2.data.size(); ++j) {
      q2.data[j] = 0.04 * q2.data[j] + 0.36 * q1.data[j];
      q1.data[j] = 15.0 * q2.data[j] - 5.0 * q1.data[j];
    }
    for (int i = 5; i < 9; ++i) {
      rhs_of(q1, rhs);
      axpy(q1, dt / 6.0, rhs);
    }
    rhs_of(q1, rhs);
    for (size_t j = 0; j < q1.data.size(); ++j)
      q1.data[j] = q2.data[j] + 0.6 * q1.data[j] + 0.1 * dt * rhs.data[j];
    return q1;
  }
  throw ValidationError("rkdg: unsupported stage count " + std::to_string(stages));
}

double total_integral(const CoefficientField& q, const CartesianMesh& mesh) {
  double sum = 0.0;
  for (long i = 0; i < q.num_elements; ++i) sum += q.block(i)[0];
  return sum * mesh.cell_volume();
}

double field_norm(const CoefficientField& q) {
  double sum = 0.0;
  for (double v : q.data) sum += v * v;
  return std::sqrt(sum);
}

StateField run_with_context(SchemeContext& ctx, const CartesianMesh& mesh,
                            double final_time, RunSummary* summary,
                            const StepCallback& log, int max_steps) {
  const ProblemSetup& problem = ctx.problem();
  const SchemeConfig& cfg = ctx.config();
  if (mesh.dim != problem.law.dim)
    throw ValidationError("run: mesh dimension does not match the problem");
  const bool ridg = cfg.scheme == SchemeConfig::Scheme::Ridg;
  if (ridg)
    for (int a = 0; a < mesh.dim; ++a)
      if (mesh.cells[a] < 3)
        throw ValidationError(
            "the regionally implicit scheme needs at least 3 cells per axis");
  const int stages = ridg ? 0 : resolve_stages(cfg);

  const double T = final_time > 0.0 ? final_time : problem.default_final_time;
  StateField state;
  state.q = project_initial(problem, mesh, cfg.mdeg, cfg.projection_points,
                            cfg.threads);
  state.time = 0.0;

  RunSummary s;
  s.stages_per_step = ctx.stages_per_step();
  s.initial_integral = total_integral(state.q, mesh);
  const double norm0 = field_norm(state.q);

  const auto t_begin = std::chrono::steady_clock::now();
  int step = 0;
  while (state.time < T) {
    const double lam = max_wave_speed(state.q, mesh, ctx);
    double dt = compute_dt(cfg.nu, mesh, lam);
    bool final_step = false;
    const double remaining = T - state.time;
    if (remaining <= dt * (1.0 + 1e-9)) {
      dt = remaining;
      final_step = true;
    }

    StepLog entry;
    entry.step = ++step;
    entry.dt = dt;
    if (ridg) {
      PredictStats pstats;
      CoefficientField w =
          predict_all(state.q, mesh, *ctx.predictor(), dt, cfg.newton,
                      cfg.backend, cfg.threads, &pstats);
      state.q = correct(state.q, w, ctx, dt, mesh, cfg.threads);
      entry.newton_max = pstats.max_iterations;
      entry.newton_total = pstats.total_iterations;
      s.newton_total += pstats.total_iterations;
      s.newton_max = std::max(s.newton_max, pstats.max_iterations);
    } else {
      state.q = ssprk_step(state.q, dt, ctx, mesh, stages, cfg.threads);
    }
    state.time = final_step ? T : state.time + dt;
    entry.t = state.time;

    const double norm = field_norm(state.q);
    if (!std::isfinite(norm) || norm > 10.0 * norm0)
      throw Instability(step, state.time, norm / norm0);
    if (log) log(entry);
    if (max_steps > 0 && step >= max_steps) break;
  }
  const auto t_end = std::chrono::steady_clock::now();

  s.steps = step;
  s.final_time = state.time;
  s.runtime_s = std::chrono::duration<double>(t_end - t_begin).count();
  s.final_integral = total_integral(state.q, mesh);
  if (problem.has_exact()) {
    auto exact_at_t = [&](const std::array<double, 3>& x) {
      return problem.exact(state.time, x);
    };
    s.error = l2_relative_error(state.q, mesh, cfg.mdeg, exact_at_t);
  }
  if (summary) *summary = s;
  return state;
}

StateField run(const ProblemSetup& problem, const SchemeConfig& cfg,
               const CartesianMesh& mesh, double final_time,
               RunSummary* summary, const StepCallback& log, int max_steps) {
  SchemeContext ctx(problem, cfg);
  return run_with_context(ctx, mesh, final_time, summary, log, max_steps);
}

}  // namespace ridg

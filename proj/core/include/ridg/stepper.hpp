#pragma once

#include <functional>
#include <limits>
#include <memory>

#include "ridg/field.hpp"
#include "ridg/law.hpp"
#include "ridg/mesh.hpp"
#include "ridg/predictor.hpp"

namespace ridg {

struct SchemeConfig {
  enum class Scheme { Ridg, Rkdg };
  Scheme scheme = Scheme::Ridg;
  int mdeg = 3;
  double nu = 0.9;
  NewtonConfig newton;  // ridg only
  int stages = 0;       // rkdg: 0 selects 3 for mdeg <= 2, 10 for mdeg == 3
  JacobianBackend backend = JacobianBackend::Qqf;
  int threads = 1;
  // quadrature points per axis for the initial projection; 0 = 2(mdeg+1)
  int projection_points = 0;
};

std::string scheme_name(SchemeConfig::Scheme s);
SchemeConfig::Scheme scheme_by_name(const std::string& name);

struct StateField {
  CoefficientField q;
  double time = 0.0;
};

// Cached tabulations for one (problem, scheme) pair. Shareable across runs
// and across task workers; the fast-path operator cache lives inside the
// predictor context.
class SchemeContext {
 public:
  SchemeContext(const ProblemSetup& problem, const SchemeConfig& cfg,
                std::shared_ptr<const QqfTables> tables = nullptr);

  const ProblemSetup& problem() const { return problem_; }
  const SchemeConfig& config() const { return cfg_; }
  const ConservationLaw& law() const { return problem_.law; }
  int mdeg() const { return cfg_.mdeg; }
  int dim() const { return problem_.law.dim; }
  int theta() const { return spatial_.size(); }
  const BasisSet& spatial_basis() const { return spatial_; }
  std::shared_ptr<PredictorContext> predictor() const { return predictor_; }
  int stages_per_step() const;  // 2 for ridg, RK stage count for rkdg

  // Corrector tabulations (space-time quadrature, spatial test functions).
  const QuadratureRule& st_volume_rule() const;
  const QuadratureRule& st_face_rule() const;
  const std::vector<double>& st_phi() const { return st_phi_; }
  const std::vector<double>& st_dphi(int axis) const { return st_dphi_[axis]; }
  const std::vector<double>& st_trace_phi(int axis, int side) const {
    return st_trace_phi_[axis][side];
  }

  // Method-of-lines tabulations (spatial quadrature only).
  const QuadratureRule& sp_volume_rule() const { return sp_vol_rule_; }
  const QuadratureRule& sp_face_rule() const { return sp_face_rule_; }
  const std::vector<double>& sp_phi() const { return sp_phi_; }
  const std::vector<double>& sp_dphi(int axis) const { return sp_dphi_[axis]; }
  const std::vector<double>& sp_trace_phi(int axis, int side) const {
    return sp_trace_phi_[axis][side];
  }

 private:
  ProblemSetup problem_;
  SchemeConfig cfg_;
  BasisSet spatial_;
  std::shared_ptr<PredictorContext> predictor_;
  std::vector<double> st_phi_;
  std::array<std::vector<double>, 3> st_dphi_;
  std::array<std::array<std::vector<double>, 2>, 3> st_trace_phi_;
  QuadratureRule sp_vol_rule_;
  QuadratureRule sp_face_rule_;
  std::vector<double> sp_phi_;
  std::array<std::vector<double>, 3> sp_dphi_;
  std::array<std::array<std::vector<double>, 2>, 3> sp_trace_phi_;
};

// dt = nu * min spacing / lambda_max. Final-step clipping is the run loop's
// responsibility.
double compute_dt(double nu, const CartesianMesh& mesh, double lambda_max);

// Max directional wave speed over the listed cells, sampled at the volume and
// trace quadrature points; the full-field overload covers every element.
double max_wave_speed_cells(const CoefficientField& q,
                            const CartesianMesh& mesh, const SchemeContext& ctx,
                            const std::vector<long>& cells);
double max_wave_speed(const CoefficientField& q, const CartesianMesh& mesh,
                      const SchemeContext& ctx);

// L2 projection of the initial condition into the listed cells of `out`.
void project_initial_cells(const ProblemSetup& problem,
                           const CartesianMesh& mesh, int mdeg,
                           int points_per_axis, const std::vector<long>& cells,
                           CoefficientField& out, int threads = 1);
CoefficientField project_initial(const ProblemSetup& problem,
                                 const CartesianMesh& mesh, int mdeg,
                                 int points_per_axis = 0, int threads = 1);

// Largest mean-mode coefficient over the field; order-independent, so serial
// and decomposed runs agree bitwise. Used as the flux-offset reference state.
double max_mean_state(const CoefficientField& q);
double max_mean_state_cells(const CoefficientField& q,
                            const std::vector<long>& cells);

// The explicit correction: DG update consuming the predicted space-time
// coefficients for the volume and the Rusanov face fluxes. The cell-list
// variant updates `out` only at the listed cells; per-cell arithmetic is
// identical in both, so subdomain updates reproduce the serial bits.
// ref_state is a globally agreed state whose flux is subtracted from every
// volume and face integrand; a constant flux offset cancels in the DG update
// analytically, and subtracting it makes uniform fields update by exact
// zeros instead of quadrature roundoff.
void correct_cells(const std::vector<long>& cells, const CoefficientField& q,
                   const CoefficientField& w, const SchemeContext& ctx,
                   double dt, const CartesianMesh& mesh, double ref_state,
                   CoefficientField& out, int threads = 1);
CoefficientField correct(const CoefficientField& q, const CoefficientField& w,
                         const SchemeContext& ctx, double dt,
                         const CartesianMesh& mesh, int threads = 1);

// Semi-discrete DG right-hand side dQ/dt (method of lines).
void rkdg_rhs_cells(const std::vector<long>& cells, const CoefficientField& q,
                    const SchemeContext& ctx, const CartesianMesh& mesh,
                    double ref_state, CoefficientField& out, int threads = 1);
CoefficientField rkdg_rhs(const CoefficientField& q, const SchemeContext& ctx,
                          const CartesianMesh& mesh, int threads = 1);

// One SSP Runge-Kutta step: Shu-Osher 3-stage 3rd order for mdeg <= 2, the
// 10-stage 4th-order low-storage scheme for mdeg == 3.
CoefficientField ssprk_step(const CoefficientField& q, double dt,
                            const SchemeContext& ctx, const CartesianMesh& mesh,
                            int stages, int threads = 1);

// Total integral of the field over the domain (cell average times volume).
double total_integral(const CoefficientField& q, const CartesianMesh& mesh);
// Coefficient 2-norm, proportional to the L2 norm by orthonormality.
double field_norm(const CoefficientField& q);

struct StepLog {
  int step = 0;
  double t = 0.0;
  double dt = 0.0;
  int newton_max = 0;
  long newton_total = 0;
};
using StepCallback = std::function<void(const StepLog&)>;

struct RunSummary {
  int steps = 0;
  double final_time = 0.0;
  double runtime_s = 0.0;  // stepping loop wall clock only
  double error = std::numeric_limits<double>::quiet_NaN();
  long newton_total = 0;
  int newton_max = 0;
  double initial_integral = 0.0;
  double final_integral = 0.0;
  int stages_per_step = 0;
};

// Advances the problem to final_time (<= 0 selects the problem default).
// Throws Instability on blowup and propagates NonConvergence from the
// predictor. max_steps > 0 stops the run early after that many steps.
StateField run_with_context(SchemeContext& ctx, const CartesianMesh& mesh,
                            double final_time, RunSummary* summary = nullptr,
                            const StepCallback& log = nullptr,
                            int max_steps = 0);

StateField run(const ProblemSetup& problem, const SchemeConfig& cfg,
               const CartesianMesh& mesh, double final_time = -1.0,
               RunSummary* summary = nullptr, const StepCallback& log = nullptr,
               int max_steps = 0);

}  // namespace ridg

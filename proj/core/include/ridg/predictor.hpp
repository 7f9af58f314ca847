#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ridg/field.hpp"
#include "ridg/law.hpp"
#include "ridg/mesh.hpp"
#include "ridg/tables.hpp"

namespace ridg {

enum class JacobianBackend { Qqf, Quadrature, Perturbation };

JacobianBackend backend_by_name(const std::string& name);
std::string backend_name(JacobianBackend backend);

struct NewtonConfig {
  double tolerance = 1e-11;  // absolute on the 2-norm of the region residual
  int max_iterations = 20;
  bool linear_fast_path = true;
  // Quadrature points per axis for flux projections and residual integrals;
  // 0 selects the default mdeg + 2.
  int quad_points = 0;
};

// Block-sparse region matrix: one diagonal block per space-time element of
// the region plus one coupling block per directed interior face.
class RegionMatrix {
 public:
  RegionMatrix() = default;
  RegionMatrix(int dim, int slots, int block_size);

  int slots() const { return slots_; }
  int block_size() const { return block_size_; }

  Eigen::MatrixXd* block(int row_slot, int col_slot);
  const Eigen::MatrixXd* block(int row_slot, int col_slot) const;

  void set_zero();
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;
  double max_abs() const;

  // max |A-B| over all entries divided by the larger of the two magnitudes.
  static double max_rel_diff(const RegionMatrix& a, const RegionMatrix& b);

 private:
  int slots_ = 0;
  int block_size_ = 0;
  std::vector<int> slot_of_;  // slots x slots -> block index or -1
  std::vector<Eigen::MatrixXd> blocks_;
};

// Immutable assembly context shared by every region solve of one
// (law, mdeg) pair: tables, quadrature rules, basis tabulations, and the
// cache of fast-path prediction operators for linear laws.
class PredictorContext {
 public:
  PredictorContext(const ConservationLaw& law, int mdeg,
                   std::shared_ptr<const QqfTables> tables = nullptr,
                   int quad_points = 0);

  const ConservationLaw& law() const { return law_; }
  const QqfTables& tables() const { return *tables_; }
  int mdeg() const { return tables_->mdeg; }
  int dim() const { return tables_->dim; }
  int theta() const { return tables_->theta; }
  int theta_t() const { return tables_->theta_t; }
  int slots() const { return slots_; }          // 3^dim
  int central_slot() const { return (slots_ - 1) / 2; }
  std::array<int, 3> slot_offset(int slot) const;
  int slot_neighbor(int slot, int axis, int dir) const;  // -1 outside region

  const QuadratureRule& volume_rule() const { return vol_rule_; }
  const QuadratureRule& face_rule() const { return face_rule_; }
  // Space-time basis values at volume points, [q][theta_t].
  const std::vector<double>& volume_psi() const { return vol_psi_; }
  const std::vector<double>& volume_dpsi(int axis) const { return vol_dpsi_[axis]; }
  // Transposed layouts [k][q], used by the traditional quadrature backend.
  const std::vector<double>& volume_psi_t() const { return vol_psi_t_; }
  const std::vector<double>& volume_dpsi_t(int axis) const {
    return vol_dpsi_t_[axis];
  }
  // Transverse basis values at face points, [q][theta].
  const std::vector<double>& trace_psi() const { return trace_psi_; }

  // Central-block prediction operator W_central = P * Q_region for linear
  // laws; built once per (dt/h, backend) key and shared across threads.
  std::shared_ptr<const Eigen::MatrixXd> fast_operator(
      double dt, const std::array<double, 3>& h, JacobianBackend backend) const;

 private:
  ConservationLaw law_;
  std::shared_ptr<const QqfTables> tables_;
  int slots_ = 0;
  QuadratureRule vol_rule_;
  QuadratureRule face_rule_;
  std::vector<double> vol_psi_;
  std::array<std::vector<double>, 3> vol_dpsi_;
  std::vector<double> vol_psi_t_;
  std::array<std::vector<double>, 3> vol_dpsi_t_;
  std::vector<double> trace_psi_;

  mutable std::mutex fast_mutex_;
  mutable std::map<std::array<std::uint64_t, 5>,
                   std::shared_ptr<const Eigen::MatrixXd>>
      fast_cache_;
};

// One region problem: spatial data Q for all 3^dim elements, the space-time
// iterate W, the step size, and the per-face frozen wave speed bounds.
struct RegionSystem {
  std::vector<long> element_ids;   // optional, 3^dim global ids
  Eigen::VectorXd Q;               // 3^dim * theta
  Eigen::VectorXd W;               // 3^dim * theta_t
  std::vector<double> face_lambda; // slots * dim, "+" face of each slot
  double dt = 0.0;
  std::array<double, 3> h{1.0, 1.0, 1.0};
};

// Causal initial guess: spatial modes copied from Q, time-varying modes zero.
void initial_guess(RegionSystem& sys, const PredictorContext& ctx);

// Frozen per-face wave speed bound: max directional speed over the two face
// traces, sampled at the face quadrature points.
void compute_face_speeds(RegionSystem& sys, const PredictorContext& ctx);

// Space-time L2 projection of the flux Jacobian components of one element;
// proj[axis * theta_t + p] in the context's volume rule.
std::vector<double> project_flux_jacobian(const double* w_elem,
                                          const ConservationLaw& law,
                                          const PredictorContext& ctx);

// Trace of one element's space-time polynomial on the face xi_axis = -1
// (side 0) or +1 (side 1), evaluated at the face quadrature points.
void trace_values(const double* w_elem, int axis, int side,
                  const PredictorContext& ctx, Eigen::VectorXd& values);

// Residual of the prediction system for the current iterate, including the
// one-sided closure on the region boundary.
void region_residual(const RegionSystem& sys, const PredictorContext& ctx,
                     Eigen::VectorXd& residual);

// Jacobian of the residual with respect to W with the face speeds frozen.
void region_jacobian(const RegionSystem& sys, const PredictorContext& ctx,
                     JacobianBackend backend, RegionMatrix& jac);

struct PredictResult {
  std::vector<double> w_central;  // theta_t coefficients
  int iterations = 0;
};

// Newton solve of one region; returns only the central element's block.
PredictResult predict_region(const Eigen::VectorXd& q_region,
                             const PredictorContext& ctx, double dt,
                             const std::array<double, 3>& h,
                             const NewtonConfig& cfg, JacobianBackend backend);

struct PredictStats {
  int max_iterations = 0;
  long total_iterations = 0;
  long regions = 0;
};

// Region-local data gather in slot order (offsets with axis 1 fastest).
void gather_region(const CoefficientField& q, const CartesianMesh& mesh,
                   long element, const PredictorContext& ctx,
                   Eigen::VectorXd& q_region);

// One fast-path prediction: W_central = op * q_region, with exactly-constant
// regions mapped to their causal extension directly.
void fast_predict_element(const Eigen::VectorXd& q_region,
                          const Eigen::MatrixXd& op,
                          const PredictorContext& ctx, double* w_out);

// Predictions for every mesh element, each from its own 3^dim region.
// threads > 1 distributes elements; results do not depend on the schedule.
CoefficientField predict_all(const CoefficientField& q,
                             const CartesianMesh& mesh,
                             const PredictorContext& ctx, double dt,
                             const NewtonConfig& cfg, JacobianBackend backend,
                             int threads = 1, PredictStats* stats = nullptr);

}  // namespace ridg

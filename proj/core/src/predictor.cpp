#include "ridg/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ridg/errors.hpp"
#include "ridg/threading.hpp"

namespace ridg {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

int pow3(int d) {
  int r = 1;
  for (int i = 0; i < d; ++i) r *= 3;
  return r;
}

// Dense region systems beyond this size are refused; they exceed what the
// direct LU path, and desk-scale memory, can handle.
constexpr int kMaxDenseUnknowns = 20000;

}  // namespace

JacobianBackend backend_by_name(const std::string& name) {
  if (name == "qqf") return JacobianBackend::Qqf;
  if (name == "quadrature") return JacobianBackend::Quadrature;
  if (name == "perturbation") return JacobianBackend::Perturbation;
  throw ValidationError("unknown Jacobian backend: " + name +
                        " (expected qqf|quadrature|perturbation)");
}

std::string backend_name(JacobianBackend backend) {
  switch (backend) {
    case JacobianBackend::Qqf: return "qqf";
    case JacobianBackend::Quadrature: return "quadrature";
    case JacobianBackend::Perturbation: return "perturbation";
  }
  return "?";
}

RegionMatrix::RegionMatrix(int dim, int slots, int block_size)
    : slots_(slots), block_size_(block_size) {
  slot_of_.assign(static_cast<size_t>(slots) * slots, -1);
  // Diagonal blocks plus couplings across faces interior to the region.
  auto add_block = [&](int r, int c) {
    slot_of_[static_cast<size_t>(r) * slots_ + c] =
        static_cast<int>(blocks_.size());
    blocks_.emplace_back(Eigen::MatrixXd::Zero(block_size_, block_size_));
  };
  for (int r = 0; r < slots; ++r) add_block(r, r);
  int stride = 1;
  for (int a = 0; a < dim; ++a) {
    for (int r = 0; r < slots; ++r) {
      const int off = (r / stride) % 3;
      if (off < 2) {
        add_block(r, r + stride);
        add_block(r + stride, r);
      }
    }
    stride *= 3;
  }
}

Eigen::MatrixXd* RegionMatrix::block(int row_slot, int col_slot) {
  const int s = slot_of_[static_cast<size_t>(row_slot) * slots_ + col_slot];
  return s < 0 ? nullptr : &blocks_[s];
}

const Eigen::MatrixXd* RegionMatrix::block(int row_slot, int col_slot) const {
  const int s = slot_of_[static_cast<size_t>(row_slot) * slots_ + col_slot];
  return s < 0 ? nullptr : &blocks_[s];
}

void RegionMatrix::set_zero() {
  for (auto& b : blocks_) b.setZero();
}

Eigen::VectorXd RegionMatrix::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(slots_ * block_size_);
  for (int r = 0; r < slots_; ++r)
    for (int c = 0; c < slots_; ++c) {
      const Eigen::MatrixXd* b = block(r, c);
      if (!b) continue;
      y.segment(r * block_size_, block_size_).noalias() +=
          (*b) * x.segment(c * block_size_, block_size_);
    }
  return y;
}

Eigen::MatrixXd RegionMatrix::dense() const {
  Eigen::MatrixXd d =
      Eigen::MatrixXd::Zero(slots_ * block_size_, slots_ * block_size_);
  for (int r = 0; r < slots_; ++r)
    for (int c = 0; c < slots_; ++c) {
      const Eigen::MatrixXd* b = block(r, c);
      if (b) d.block(r * block_size_, c * block_size_, block_size_, block_size_) = *b;
    }
  return d;
}

double RegionMatrix::max_abs() const {
  double m = 0.0;
  for (const auto& b : blocks_) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

double RegionMatrix::max_rel_diff(const RegionMatrix& a, const RegionMatrix& b) {
  double diff = 0.0;
  for (int r = 0; r < a.slots_; ++r)
    for (int c = 0; c < a.slots_; ++c) {
      const Eigen::MatrixXd* ba = a.block(r, c);
      const Eigen::MatrixXd* bb = b.block(r, c);
      if (!ba && !bb) continue;
      if (ba && bb)
        diff = std::max(diff, (*ba - *bb).cwiseAbs().maxCoeff());
      else
        diff = std::max(diff, (ba ? *ba : *bb).cwiseAbs().maxCoeff());
    }
  const double scale = std::max({a.max_abs(), b.max_abs(), 1e-300});
  return diff / scale;
}

PredictorContext::PredictorContext(const ConservationLaw& law, int mdeg,
                                   std::shared_ptr<const QqfTables> tables,
                                   int quad_points)
    : law_(law) {
  if (!tables) tables = std::make_shared<QqfTables>(build_tables(mdeg, law.dim));
  if (tables->mdeg != mdeg || tables->dim != law.dim)
    throw ValidationError("PredictorContext: tables do not match (mdeg, dim)");
  tables_ = std::move(tables);
  slots_ = pow3(law_.dim);

  const int d = law_.dim;
  const int npts = quad_points > 0 ? quad_points : mdeg + 2;
  vol_rule_ = gauss_rule(npts, d + 1);
  face_rule_ = gauss_rule(npts, d);

  const BasisSet st(d + 1, mdeg);
  vol_psi_ = tabulate(st, vol_rule_);
  for (int a = 0; a < d; ++a) vol_dpsi_[a] = tabulate_derivative(st, vol_rule_, a);
  const int tt = st.size();
  const int nq = vol_rule_.size();
  auto transpose = [&](const std::vector<double>& tab) {
    std::vector<double> out(tab.size());
    for (int q = 0; q < nq; ++q)
      for (int k = 0; k < tt; ++k)
        out[static_cast<size_t>(k) * nq + q] = tab[static_cast<size_t>(q) * tt + k];
    return out;
  };
  vol_psi_t_ = transpose(vol_psi_);
  for (int a = 0; a < d; ++a) vol_dpsi_t_[a] = transpose(vol_dpsi_[a]);

  // The transverse basis has the same structure on every face: the non-normal
  // spatial axes plus time, each of degree mdeg.
  const BasisSet trans(d, mdeg);
  trace_psi_ = tabulate(trans, face_rule_);
}

std::array<int, 3> PredictorContext::slot_offset(int slot) const {
  std::array<int, 3> off{0, 0, 0};
  for (int a = 0; a < dim(); ++a) {
    off[a] = slot % 3 - 1;
    slot /= 3;
  }
  return off;
}

int PredictorContext::slot_neighbor(int slot, int axis, int dir) const {
  int stride = 1;
  for (int a = 0; a < axis; ++a) stride *= 3;
  const int off = (slot / stride) % 3 - 1;
  if (off + dir < -1 || off + dir > 1) return -1;
  return slot + dir * stride;
}

namespace {

// g[t] = sum_m e[m] * w[full(axis, m, t)]: coefficients of the trace
// polynomial on the face manifold.
void trace_coefficients(const double* w, int axis, const std::vector<double>& e,
                        const QqfTables& t, double* g) {
  std::fill(g, g + t.transverse_size, 0.0);
  const int s = t.mdeg + 1;
  for (int m = 0; m < s; ++m) {
    const double em = e[m];
    const std::uint16_t* full =
        t.from_split[axis].data() + static_cast<size_t>(m) * t.transverse_size;
    for (int tr = 0; tr < t.transverse_size; ++tr) g[tr] += em * w[full[tr]];
  }
}

// block[full(a,mr,kt), full(a,mc,lt)] += coef * e_row[mr] e_col[mc] * M(kt,lt)
void expand_face_block(Eigen::MatrixXd& block, double coef, int axis,
                       const std::vector<double>& e_row,
                       const std::vector<double>& e_col,
                       const Eigen::MatrixXd& m, const QqfTables& t) {
  const int s = t.mdeg + 1;
  const int nt = t.transverse_size;
  for (int mr = 0; mr < s; ++mr) {
    const std::uint16_t* rows =
        t.from_split[axis].data() + static_cast<size_t>(mr) * nt;
    const double cr = coef * e_row[mr];
    for (int mc = 0; mc < s; ++mc) {
      const std::uint16_t* cols =
          t.from_split[axis].data() + static_cast<size_t>(mc) * nt;
      const double c = cr * e_col[mc];
      for (int kt = 0; kt < nt; ++kt)
        for (int lt = 0; lt < nt; ++lt)
          block(rows[kt], cols[lt]) += c * m(kt, lt);
    }
  }
}

// A(kt,lt) = sum over stored entries of TT[kt,lt,pt] * g[pt].
void contract_face_triple(const TripleList& tt, const double* g,
                          Eigen::MatrixXd& a) {
  a.setZero();
  const size_t n = tt.size();
  for (size_t i = 0; i < n; ++i)
    a(tt.k[i], tt.l[i]) += tt.value[i] * g[tt.p[i]];
}

struct FaceScratch {
  std::vector<double> gl, gr;          // trace coefficients
  Eigen::VectorXd wl, wr, fhat, mom;   // values at face points
};

// Rusanov values on an interior face; lam frozen. One-sided faces pass
// one_sided=true and use only the owning element's trace.
void face_values(const PredictorContext& ctx, int axis, const double* w_left,
                 const double* w_right, double lam, bool one_sided_left,
                 bool one_sided_right, FaceScratch& fs) {
  const QqfTables& t = ctx.tables();
  const int nt = t.transverse_size;
  const int nq = ctx.face_rule().size();
  RowMajorMap trace(ctx.trace_psi().data(), nq, nt);

  fs.gl.resize(nt);
  fs.gr.resize(nt);
  fs.fhat.resize(nq);
  if (w_left) {
    trace_coefficients(w_left, axis, t.endpoint_plus, t, fs.gl.data());
    fs.wl = trace * Eigen::Map<const Eigen::VectorXd>(fs.gl.data(), nt);
  }
  if (w_right) {
    trace_coefficients(w_right, axis, t.endpoint_minus, t, fs.gr.data());
    fs.wr = trace * Eigen::Map<const Eigen::VectorXd>(fs.gr.data(), nt);
  }
  const ConservationLaw& law = ctx.law();
  for (int q = 0; q < nq; ++q) {
    double f;
    if (one_sided_left)
      f = law.flux(fs.wl[q], axis);
    else if (one_sided_right)
      f = law.flux(fs.wr[q], axis);
    else
      f = 0.5 * (law.flux(fs.wl[q], axis) + law.flux(fs.wr[q], axis)) -
          0.5 * lam * (fs.wr[q] - fs.wl[q]);
    fs.fhat[q] = f;
  }
}

// mom[t] = (1/2^dim) sum_q w_q PsiT_t(q) fhat(q)
void face_moments(const PredictorContext& ctx, FaceScratch& fs) {
  const int nt = ctx.tables().transverse_size;
  const int nq = ctx.face_rule().size();
  RowMajorMap trace(ctx.trace_psi().data(), nq, nt);
  const double norm = 1.0 / std::pow(2.0, ctx.dim());
  Eigen::VectorXd weighted(nq);
  for (int q = 0; q < nq; ++q)
    weighted[q] = norm * ctx.face_rule().weights[q] * fs.fhat[q];
  fs.mom = trace.transpose() * weighted;
}

// out[full(a,m,t)] += coef * e[m] * mom[t]
void scatter_face(const PredictorContext& ctx, int axis,
                  const std::vector<double>& e, double coef,
                  const Eigen::VectorXd& mom, double* out) {
  const QqfTables& t = ctx.tables();
  const int s = t.mdeg + 1;
  const int nt = t.transverse_size;
  for (int m = 0; m < s; ++m) {
    const std::uint16_t* full =
        t.from_split[axis].data() + static_cast<size_t>(m) * nt;
    const double c = coef * e[m];
    for (int tr = 0; tr < nt; ++tr) out[full[tr]] += c * mom[tr];
  }
}

// Residual block of one element, including both faces along every axis, so
// the same routine serves the full residual and perturbation recomputation.
void element_block_residual(const RegionSystem& sys, const PredictorContext& ctx,
                            int slot, const Eigen::VectorXd& w,
                            double* out_block) {
  const QqfTables& t = ctx.tables();
  const int tt = t.theta_t;
  const int th = t.theta;
  const int d = ctx.dim();
  const int nq = ctx.volume_rule().size();

  Eigen::Map<Eigen::VectorXd> out(out_block, tt);
  Eigen::Map<const Eigen::VectorXd> wr(w.data() + slot * tt, tt);

  // Time term (endpoint mass minus twice the normalized time derivative) and
  // causal source.
  RowMajorMap mplus(t.endpoint_mass.data(), tt, tt);
  RowMajorMap ktime(t.time_deriv.data(), tt, tt);
  out.noalias() = mplus * wr;
  out.noalias() -= 2.0 * (ktime * wr);
  RowMajorMap causal(t.causal.data(), tt, th);
  out.noalias() -= causal * sys.Q.segment(slot * th, th);

  // Volume flux term by quadrature.
  RowMajorMap psi(ctx.volume_psi().data(), nq, tt);
  Eigen::VectorXd wq = psi * wr;
  const double nvol = 1.0 / std::pow(2.0, d + 1);
  Eigen::VectorXd fq(nq);
  for (int a = 0; a < d; ++a) {
    for (int q = 0; q < nq; ++q)
      fq[q] = nvol * ctx.volume_rule().weights[q] * ctx.law().flux(wq[q], a);
    RowMajorMap dpsi(ctx.volume_dpsi(a).data(), nq, tt);
    const double coef = 2.0 * sys.dt / sys.h[a];
    out.noalias() -= coef * (dpsi.transpose() * fq);
  }

  // Surface flux terms: upwind inside the region, one-sided on its boundary.
  FaceScratch fs;
  for (int a = 0; a < d; ++a) {
    const double coef = sys.dt / sys.h[a];
    const int nb_plus = ctx.slot_neighbor(slot, a, +1);
    if (nb_plus >= 0) {
      face_values(ctx, a, w.data() + slot * tt, w.data() + nb_plus * tt,
                  sys.face_lambda[slot * d + a], false, false, fs);
      face_moments(ctx, fs);
      scatter_face(ctx, a, t.endpoint_plus, +coef, fs.mom, out_block);
    } else {
      face_values(ctx, a, w.data() + slot * tt, nullptr, 0.0, true, false, fs);
      face_moments(ctx, fs);
      scatter_face(ctx, a, t.endpoint_plus, +coef, fs.mom, out_block);
    }
    const int nb_minus = ctx.slot_neighbor(slot, a, -1);
    if (nb_minus >= 0) {
      face_values(ctx, a, w.data() + nb_minus * tt, w.data() + slot * tt,
                  sys.face_lambda[nb_minus * d + a], false, false, fs);
      face_moments(ctx, fs);
      scatter_face(ctx, a, t.endpoint_minus, -coef, fs.mom, out_block);
    } else {
      face_values(ctx, a, nullptr, w.data() + slot * tt, 0.0, false, true, fs);
      face_moments(ctx, fs);
      scatter_face(ctx, a, t.endpoint_minus, -coef, fs.mom, out_block);
    }
  }
}

}  // namespace

void initial_guess(RegionSystem& sys, const PredictorContext& ctx) {
  const int tt = ctx.theta_t();
  const int th = ctx.theta();
  sys.W = Eigen::VectorXd::Zero(ctx.slots() * tt);
  for (int r = 0; r < ctx.slots(); ++r)
    sys.W.segment(r * tt, th) = sys.Q.segment(r * th, th);
}

void compute_face_speeds(RegionSystem& sys, const PredictorContext& ctx) {
  const QqfTables& t = ctx.tables();
  const int d = ctx.dim();
  const int tt = t.theta_t;
  const int nt = t.transverse_size;
  const int nq = ctx.face_rule().size();
  RowMajorMap trace(ctx.trace_psi().data(), nq, nt);

  sys.face_lambda.assign(static_cast<size_t>(ctx.slots()) * d, 0.0);
  std::vector<double> g(nt);
  Eigen::VectorXd wl(nq), wr(nq);
  for (int r = 0; r < ctx.slots(); ++r)
    for (int a = 0; a < d; ++a) {
      const int nb = ctx.slot_neighbor(r, a, +1);
      if (nb < 0) continue;
      trace_coefficients(sys.W.data() + r * tt, a, t.endpoint_plus, t, g.data());
      wl = trace * Eigen::Map<const Eigen::VectorXd>(g.data(), nt);
      trace_coefficients(sys.W.data() + nb * tt, a, t.endpoint_minus, t, g.data());
      wr = trace * Eigen::Map<const Eigen::VectorXd>(g.data(), nt);
      double lam = 0.0;
      for (int q = 0; q < nq; ++q)
        lam = std::max(lam, std::max(ctx.law().wave_speed(wl[q], a),
                                     ctx.law().wave_speed(wr[q], a)));
      sys.face_lambda[static_cast<size_t>(r) * d + a] = lam;
    }
}

std::vector<double> project_flux_jacobian(const double* w_elem,
                                          const ConservationLaw& law,
                                          const PredictorContext& ctx) {
  const int tt = ctx.theta_t();
  const int d = ctx.dim();
  const int nq = ctx.volume_rule().size();
  RowMajorMap psi(ctx.volume_psi().data(), nq, tt);
  Eigen::Map<const Eigen::VectorXd> w(w_elem, tt);
  Eigen::VectorXd wq = psi * w;

  const double nvol = 1.0 / std::pow(2.0, d + 1);
  std::vector<double> proj(static_cast<size_t>(d) * tt);
  Eigen::VectorXd fq(nq);
  for (int a = 0; a < d; ++a) {
    for (int q = 0; q < nq; ++q)
      fq[q] = nvol * ctx.volume_rule().weights[q] * law.flux_derivative(wq[q], a);
    Eigen::Map<Eigen::VectorXd>(proj.data() + static_cast<size_t>(a) * tt, tt)
        .noalias() = psi.transpose() * fq;
  }
  return proj;
}

void region_residual(const RegionSystem& sys, const PredictorContext& ctx,
                     Eigen::VectorXd& residual) {
  const int tt = ctx.theta_t();
  residual.resize(ctx.slots() * tt);
  for (int r = 0; r < ctx.slots(); ++r)
    element_block_residual(sys, ctx, r, sys.W, residual.data() + r * tt);
}

void trace_values(const double* w_elem, int axis, int side,
                  const PredictorContext& ctx, Eigen::VectorXd& values) {
  const QqfTables& t = ctx.tables();
  const int nt = t.transverse_size;
  const int nq = ctx.face_rule().size();
  std::vector<double> g(nt);
  trace_coefficients(w_elem, axis, side ? t.endpoint_plus : t.endpoint_minus,
                     t, g.data());
  RowMajorMap trace(ctx.trace_psi().data(), nq, nt);
  values.noalias() = trace * Eigen::Map<const Eigen::VectorXd>(g.data(), nt);
}

namespace {

void jacobian_time_terms(const RegionSystem&, const PredictorContext& ctx,
                         RegionMatrix& jac) {
  const QqfTables& t = ctx.tables();
  const int tt = t.theta_t;
  RowMajorMap mplus(t.endpoint_mass.data(), tt, tt);
  RowMajorMap ktime(t.time_deriv.data(), tt, tt);
  for (int r = 0; r < ctx.slots(); ++r) {
    Eigen::MatrixXd& d = *jac.block(r, r);
    d.noalias() += mplus;
    d.noalias() -= 2.0 * ktime;
  }
}

void jacobian_qqf(const RegionSystem& sys, const PredictorContext& ctx,
                  RegionMatrix& jac) {
  const QqfTables& t = ctx.tables();
  const int tt = t.theta_t;
  const int nt = t.transverse_size;
  const int d = ctx.dim();

  std::vector<std::vector<double>> proj(ctx.slots());
  for (int r = 0; r < ctx.slots(); ++r)
    proj[r] = project_flux_jacobian(sys.W.data() + r * tt, ctx.law(), ctx);

  // Volume term: contract the stored nonzero lists against the projection.
  for (int r = 0; r < ctx.slots(); ++r) {
    Eigen::MatrixXd& diag = *jac.block(r, r);
    for (int a = 0; a < d; ++a) {
      const double coef = 2.0 * sys.dt / sys.h[a];
      const double* fp = proj[r].data() + static_cast<size_t>(a) * tt;
      const TripleList& b = t.volume[a];
      const size_t n = b.size();
      for (size_t i = 0; i < n; ++i)
        diag(b.k[i], b.l[i]) -= coef * b.value[i] * fp[b.p[i]];
    }
  }

  // Face terms. The trace of the projected flux Jacobian of each side is
  // contracted with the transverse triple tensor; endpoint factors and the
  // frozen lambda then expand onto the space-time index pairs.
  std::vector<double> g(nt);
  Eigen::MatrixXd acc(nt, nt), m(nt, nt);
  for (int r = 0; r < ctx.slots(); ++r)
    for (int a = 0; a < d; ++a) {
      const double coef = sys.dt / sys.h[a];
      const int nb = ctx.slot_neighbor(r, a, +1);
      if (nb >= 0) {
        const double lam = sys.face_lambda[static_cast<size_t>(r) * d + a];
        // left side (this slot, trace at +1)
        trace_coefficients(proj[r].data() + static_cast<size_t>(a) * tt, a,
                           t.endpoint_plus, t, g.data());
        contract_face_triple(t.face_triple, g.data(), acc);
        m = 0.5 * acc;
        m.diagonal().array() += 0.5 * lam;
        expand_face_block(*jac.block(r, r), +coef, a, t.endpoint_plus,
                          t.endpoint_plus, m, t);
        expand_face_block(*jac.block(nb, r), -coef, a, t.endpoint_minus,
                          t.endpoint_plus, m, t);
        // right side (neighbor slot, trace at -1)
        trace_coefficients(proj[nb].data() + static_cast<size_t>(a) * tt, a,
                           t.endpoint_minus, t, g.data());
        contract_face_triple(t.face_triple, g.data(), acc);
        m = 0.5 * acc;
        m.diagonal().array() -= 0.5 * lam;
        expand_face_block(*jac.block(r, nb), +coef, a, t.endpoint_plus,
                          t.endpoint_minus, m, t);
        expand_face_block(*jac.block(nb, nb), -coef, a, t.endpoint_minus,
                          t.endpoint_minus, m, t);
      } else {
        // One-sided closure on the region boundary: d/dw F(w_int).
        trace_coefficients(proj[r].data() + static_cast<size_t>(a) * tt, a,
                           t.endpoint_plus, t, g.data());
        contract_face_triple(t.face_triple, g.data(), acc);
        expand_face_block(*jac.block(r, r), +coef, a, t.endpoint_plus,
                          t.endpoint_plus, acc, t);
      }
      if (ctx.slot_neighbor(r, a, -1) < 0) {
        trace_coefficients(proj[r].data() + static_cast<size_t>(a) * tt, a,
                           t.endpoint_minus, t, g.data());
        contract_face_triple(t.face_triple, g.data(), acc);
        expand_face_block(*jac.block(r, r), -coef, a, t.endpoint_minus,
                          t.endpoint_minus, acc, t);
      }
    }
}

void jacobian_quadrature(const RegionSystem& sys, const PredictorContext& ctx,
                         RegionMatrix& jac) {
  const QqfTables& t = ctx.tables();
  const int tt = t.theta_t;
  const int nt = t.transverse_size;
  const int d = ctx.dim();
  const int nq = ctx.volume_rule().size();
  const int nqf = ctx.face_rule().size();
  RowMajorMap psi(ctx.volume_psi().data(), nq, tt);
  RowMajorMap trace(ctx.trace_psi().data(), nqf, nt);
  const double nvol = 1.0 / std::pow(2.0, d + 1);
  const double nface = 1.0 / std::pow(2.0, d);

  // Volume term: traditional quadrature, looping the rule once per (k, l)
  // entry against tabulated basis values.
  Eigen::VectorXd wq(nq), cq(nq);
  std::vector<double> row(nq);
  for (int r = 0; r < ctx.slots(); ++r) {
    wq.noalias() = psi * sys.W.segment(r * tt, tt);
    Eigen::MatrixXd& diag = *jac.block(r, r);
    for (int a = 0; a < d; ++a) {
      const double coef = 2.0 * sys.dt / sys.h[a];
      for (int q = 0; q < nq; ++q)
        cq[q] = coef * nvol * ctx.volume_rule().weights[q] *
                ctx.law().flux_derivative(wq[q], a);
      const double* dpsi_t = ctx.volume_dpsi_t(a).data();
      const double* psi_t = ctx.volume_psi_t().data();
      for (int k = 0; k < tt; ++k) {
        const double* dk = dpsi_t + static_cast<size_t>(k) * nq;
        for (int q = 0; q < nq; ++q) row[q] = dk[q] * cq[q];
        for (int l = 0; l < tt; ++l) {
          const double* pl = psi_t + static_cast<size_t>(l) * nq;
          double acc = 0.0;
          for (int q = 0; q < nq; ++q) acc += row[q] * pl[q];
          diag(k, l) -= acc;
        }
      }
    }
  }

  // Face terms: pointwise linearization of the Rusanov flux on the trace
  // manifold, then endpoint expansion like the qqf path.
  FaceScratch fs;
  Eigen::VectorXd cl(nqf), cr(nqf);
  Eigen::MatrixXd m(nt, nt);
  for (int r = 0; r < ctx.slots(); ++r)
    for (int a = 0; a < d; ++a) {
      const double coef = sys.dt / sys.h[a];
      const int nb = ctx.slot_neighbor(r, a, +1);
      if (nb >= 0) {
        const double lam = sys.face_lambda[static_cast<size_t>(r) * d + a];
        face_values(ctx, a, sys.W.data() + r * tt, sys.W.data() + nb * tt, lam,
                    false, false, fs);
        for (int q = 0; q < nqf; ++q) {
          const double w = nface * ctx.face_rule().weights[q];
          cl[q] = w * (0.5 * ctx.law().flux_derivative(fs.wl[q], a) + 0.5 * lam);
          cr[q] = w * (0.5 * ctx.law().flux_derivative(fs.wr[q], a) - 0.5 * lam);
        }
        m.noalias() = trace.transpose() * cl.asDiagonal() * trace;
        expand_face_block(*jac.block(r, r), +coef, a, t.endpoint_plus,
                          t.endpoint_plus, m, t);
        expand_face_block(*jac.block(nb, r), -coef, a, t.endpoint_minus,
                          t.endpoint_plus, m, t);
        m.noalias() = trace.transpose() * cr.asDiagonal() * trace;
        expand_face_block(*jac.block(r, nb), +coef, a, t.endpoint_plus,
                          t.endpoint_minus, m, t);
        expand_face_block(*jac.block(nb, nb), -coef, a, t.endpoint_minus,
                          t.endpoint_minus, m, t);
      } else {
        face_values(ctx, a, sys.W.data() + r * tt, nullptr, 0.0, true, false, fs);
        for (int q = 0; q < nqf; ++q)
          cl[q] = nface * ctx.face_rule().weights[q] *
                  ctx.law().flux_derivative(fs.wl[q], a);
        m.noalias() = trace.transpose() * cl.asDiagonal() * trace;
        expand_face_block(*jac.block(r, r), +coef, a, t.endpoint_plus,
                          t.endpoint_plus, m, t);
      }
      if (ctx.slot_neighbor(r, a, -1) < 0) {
        face_values(ctx, a, nullptr, sys.W.data() + r * tt, 0.0, false, true, fs);
        for (int q = 0; q < nqf; ++q)
          cr[q] = nface * ctx.face_rule().weights[q] *
                  ctx.law().flux_derivative(fs.wr[q], a);
        m.noalias() = trace.transpose() * cr.asDiagonal() * trace;
        expand_face_block(*jac.block(r, r), -coef, a, t.endpoint_minus,
                          t.endpoint_minus, m, t);
      }
    }
}

void jacobian_perturbation(const RegionSystem& sys, const PredictorContext& ctx,
                           RegionMatrix& jac) {
  const int tt = ctx.theta_t();
  const int d = ctx.dim();

  Eigen::VectorXd base;
  region_residual(sys, ctx, base);
  const double eps =
      1e-7 * std::max(1.0, sys.W.size() ? sys.W.cwiseAbs().maxCoeff() : 0.0);

  Eigen::VectorXd wp = sys.W;
  Eigen::VectorXd blk(tt);
  for (int rj = 0; rj < ctx.slots(); ++rj) {
    // Rows that can depend on this slot's coefficients: the slot itself and
    // its face neighbors inside the region; all other rows difference to zero.
    std::vector<int> rows{rj};
    for (int a = 0; a < d; ++a)
      for (int dir : {-1, +1}) {
        const int nb = ctx.slot_neighbor(rj, a, dir);
        if (nb >= 0) rows.push_back(nb);
      }
    for (int l = 0; l < tt; ++l) {
      const int col = rj * tt + l;
      wp[col] += eps;
      for (int row : rows) {
        element_block_residual(sys, ctx, row, wp, blk.data());
        Eigen::MatrixXd* b = jac.block(row, rj);
        b->col(l) += (blk - base.segment(row * tt, tt)) / eps;
      }
      wp[col] = sys.W[col];
    }
  }
}

}  // namespace

void region_jacobian(const RegionSystem& sys, const PredictorContext& ctx,
                     JacobianBackend backend, RegionMatrix& jac) {
  if (jac.slots() != ctx.slots() || jac.block_size() != ctx.theta_t())
    jac = RegionMatrix(ctx.dim(), ctx.slots(), ctx.theta_t());
  else
    jac.set_zero();

  if (backend == JacobianBackend::Perturbation) {
    // Finite differences of the full residual, including its time terms.
    jacobian_perturbation(sys, ctx, jac);
    return;
  }
  jacobian_time_terms(sys, ctx, jac);
  if (backend == JacobianBackend::Qqf)
    jacobian_qqf(sys, ctx, jac);
  else
    jacobian_quadrature(sys, ctx, jac);
}

PredictResult predict_region(const Eigen::VectorXd& q_region,
                             const PredictorContext& ctx, double dt,
                             const std::array<double, 3>& h,
                             const NewtonConfig& cfg, JacobianBackend backend) {
  if (cfg.tolerance <= 0.0)
    throw ValidationError("NewtonConfig: tolerance must be > 0");
  if (cfg.max_iterations < 1)
    throw ValidationError("NewtonConfig: max_iterations must be >= 1");
  const int n = ctx.slots() * ctx.theta_t();
  if (n > kMaxDenseUnknowns)
    throw ValidationError("region system too large for the dense solve (" +
                          std::to_string(n) + " unknowns)");

  RegionSystem sys;
  sys.Q = q_region;
  sys.dt = dt;
  sys.h = h;
  initial_guess(sys, ctx);

  Eigen::VectorXd residual;
  RegionMatrix jac;
  int updates = 0;
  for (;;) {
    compute_face_speeds(sys, ctx);
    region_residual(sys, ctx, residual);
    const double rnorm = residual.norm();
    if (rnorm < cfg.tolerance) break;
    if (updates >= cfg.max_iterations)
      throw NonConvergence(updates, rnorm,
                           std::vector<double>(sys.W.data(), sys.W.data() + n));
    region_jacobian(sys, ctx, backend, jac);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.dense());
    sys.W -= lu.solve(residual);
    ++updates;
  }

  PredictResult result;
  result.iterations = std::max(1, updates);
  const int tt = ctx.theta_t();
  const int c = ctx.central_slot();
  result.w_central.assign(sys.W.data() + c * tt, sys.W.data() + (c + 1) * tt);
  return result;
}

std::shared_ptr<const Eigen::MatrixXd> PredictorContext::fast_operator(
    double dt, const std::array<double, 3>& h, JacobianBackend backend) const {
  std::array<std::uint64_t, 5> key{};
  key[0] = static_cast<std::uint64_t>(law_.tag);
  key[1] = static_cast<std::uint64_t>(backend);
  for (int a = 0; a < dim(); ++a) {
    double ratio = dt / h[a];
    std::uint64_t bits;
    std::memcpy(&bits, &ratio, sizeof bits);
    key[2 + a] = bits;
  }

  {
    std::lock_guard<std::mutex> lock(fast_mutex_);
    auto it = fast_cache_.find(key);
    if (it != fast_cache_.end()) return it->second;
  }

  const int tt = theta_t();
  const int th = theta();
  const int n = slots_ * tt;
  if (n > kMaxDenseUnknowns)
    throw ValidationError("region system too large for the dense solve (" +
                          std::to_string(n) + " unknowns)");

  // For a linear law the residual is J W - C Q with J state-independent, so
  // one Newton step from any guess lands on W = J^{-1} C Q. Only the central
  // rows of J^{-1} C are ever used; get them from transposed solves.
  RegionSystem sys;
  sys.Q = Eigen::VectorXd::Zero(slots_ * th);
  sys.dt = dt;
  sys.h = h;
  initial_guess(sys, *this);
  compute_face_speeds(sys, *this);
  RegionMatrix jac;
  region_jacobian(sys, *this, backend, jac);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.dense().transpose());
  Eigen::MatrixXd selector = Eigen::MatrixXd::Zero(n, tt);
  const int c = central_slot();
  for (int k = 0; k < tt; ++k) selector(c * tt + k, k) = 1.0;
  Eigen::MatrixXd y = lu.solve(selector);  // n x tt

  auto p = std::make_shared<Eigen::MatrixXd>(tt, slots_ * th);
  const std::vector<double>& em = tables_->endpoint_minus;
  const int s = mdeg() + 1;
  for (int r = 0; r < slots_; ++r)
    for (int m = 0; m < th; ++m) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(tt);
      for (int kt = 0; kt < s; ++kt)
        col += em[kt] * y.row(r * tt + kt * th + m).transpose();
      p->col(r * th + m) = col;
    }

  std::lock_guard<std::mutex> lock(fast_mutex_);
  auto [it, inserted] = fast_cache_.emplace(key, std::move(p));
  (void)inserted;
  return it->second;
}

void gather_region(const CoefficientField& q, const CartesianMesh& mesh,
                   long element, const PredictorContext& ctx,
                   Eigen::VectorXd& q_region) {
  const int th = ctx.theta();
  q_region.resize(ctx.slots() * th);
  for (int r = 0; r < ctx.slots(); ++r) {
    const long nb = mesh.offset_neighbor(element, ctx.slot_offset(r));
    std::memcpy(q_region.data() + r * th, q.block(nb), sizeof(double) * th);
  }
}

namespace {

// A region whose data is one exact constant polynomial predicts its own
// causal extension; recognizing it keeps uniform fields bitwise invariant
// through the fast path.
bool constant_region(const Eigen::VectorXd& q_region, int slots, int theta) {
  for (int k = 1; k < theta; ++k)
    if (q_region[k] != 0.0) return false;
  for (int r = 1; r < slots; ++r)
    if (std::memcmp(q_region.data(), q_region.data() + r * theta,
                    sizeof(double) * theta) != 0)
      return false;
  return true;
}

}  // namespace

void fast_predict_element(const Eigen::VectorXd& q_region,
                          const Eigen::MatrixXd& op,
                          const PredictorContext& ctx, double* w_out) {
  const int tt = ctx.theta_t();
  if (constant_region(q_region, ctx.slots(), ctx.theta())) {
    std::fill(w_out, w_out + tt, 0.0);
    w_out[0] = q_region[0];
    return;
  }
  Eigen::Map<Eigen::VectorXd>(w_out, tt).noalias() = op * q_region;
}

CoefficientField predict_all(const CoefficientField& q,
                             const CartesianMesh& mesh,
                             const PredictorContext& ctx, double dt,
                             const NewtonConfig& cfg, JacobianBackend backend,
                             int threads, PredictStats* stats) {
  for (int a = 0; a < mesh.dim; ++a)
    if (mesh.cells[a] < 3)
      throw ValidationError(
          "the regionally implicit scheme needs at least 3 cells per axis "
          "(axis " + std::to_string(a + 1) + " has " +
          std::to_string(mesh.cells[a]) + ")");

  const long n = mesh.total_cells();
  CoefficientField w(n, ctx.theta_t());
  std::array<double, 3> h{1.0, 1.0, 1.0};
  for (int a = 0; a < mesh.dim; ++a) h[a] = mesh.spacing(a);

  PredictStats local;
  local.regions = n;
  std::mutex stats_mutex;

  if (ctx.law().is_linear() && cfg.linear_fast_path) {
    auto op = ctx.fast_operator(dt, h, backend);
    parallel_for(n, threads, [&](long i) {
      Eigen::VectorXd qreg;
      gather_region(q, mesh, i, ctx, qreg);
      fast_predict_element(qreg, *op, ctx, w.block(i));
    });
    local.max_iterations = 1;
    local.total_iterations = n;
  } else {
    parallel_for(n, threads, [&](long i) {
      Eigen::VectorXd qreg;
      gather_region(q, mesh, i, ctx, qreg);
      PredictResult r;
      try {
        r = predict_region(qreg, ctx, dt, h, cfg, backend);
      } catch (NonConvergence& e) {
        e.element = i;
        throw;
      }
      std::memcpy(w.block(i), r.w_central.data(),
                  sizeof(double) * ctx.theta_t());
      std::lock_guard<std::mutex> lock(stats_mutex);
      local.max_iterations = std::max(local.max_iterations, r.iterations);
      local.total_iterations += r.iterations;
    });
  }
  if (stats) *stats = local;
  return w;
}

}  // namespace ridg

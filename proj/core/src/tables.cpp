#include "ridg/tables.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "ridg/errors.hpp"

namespace ridg {

namespace {

// Selection rule for (1/2) int phi_m phi_n phi_r: nonzero iff the degrees
// satisfy the triangle inequality and have even sum.
bool triple_nonzero(int m, int n, int r) {
  if ((m + n + r) % 2 != 0) return false;
  return std::abs(m - n) <= r && r <= m + n;
}

// d/dx phi_m expands over phi_j with j = m-1, m-3, ..., so the derivative
// triple product is nonzero iff any such j couples to (n, r).
bool dtriple_nonzero(int m, int n, int r) {
  for (int j = m - 1; j >= 0; j -= 2)
    if (triple_nonzero(j, n, r)) return true;
  return false;
}

struct OneDimTables {
  int mdeg;
  std::vector<double> tri;   // (1/2) int phi_m phi_n phi_r, dense (M+1)^3
  std::vector<double> dtri;  // (1/2) int phi_m' phi_n phi_r
  std::vector<double> dmass; // (1/2) int phi_m' phi_n, dense (M+1)^2

  double tri_at(int m, int n, int r) const {
    const int s = mdeg + 1;
    return tri[(m * s + n) * s + r];
  }
  double dtri_at(int m, int n, int r) const {
    const int s = mdeg + 1;
    return dtri[(m * s + n) * s + r];
  }
};

OneDimTables build_1d(int mdeg) {
  OneDimTables t;
  t.mdeg = mdeg;
  const int s = mdeg + 1;
  const QuadratureRule rule = gauss_rule(2 * (mdeg + 1), 1);

  std::vector<double> val(static_cast<size_t>(rule.size()) * s);
  std::vector<double> der(static_cast<size_t>(rule.size()) * s);
  for (int q = 0; q < rule.size(); ++q)
    for (int m = 0; m < s; ++m) {
      val[static_cast<size_t>(q) * s + m] = legendre_orthonormal(m, rule.points[q]);
      der[static_cast<size_t>(q) * s + m] =
          legendre_orthonormal_derivative(m, rule.points[q]);
    }

  t.tri.assign(static_cast<size_t>(s) * s * s, 0.0);
  t.dtri.assign(static_cast<size_t>(s) * s * s, 0.0);
  t.dmass.assign(static_cast<size_t>(s) * s, 0.0);
  for (int m = 0; m < s; ++m)
    for (int n = 0; n < s; ++n) {
      double dm = 0.0;
      for (int q = 0; q < rule.size(); ++q)
        dm += rule.weights[q] * der[static_cast<size_t>(q) * s + m] *
              val[static_cast<size_t>(q) * s + n];
      t.dmass[static_cast<size_t>(m) * s + n] = 0.5 * dm;
      for (int r = 0; r < s; ++r) {
        if (triple_nonzero(m, n, r)) {
          double acc = 0.0;
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * val[static_cast<size_t>(q) * s + m] *
                   val[static_cast<size_t>(q) * s + n] *
                   val[static_cast<size_t>(q) * s + r];
          t.tri[(static_cast<size_t>(m) * s + n) * s + r] = 0.5 * acc;
        }
        if (dtriple_nonzero(m, n, r)) {
          double acc = 0.0;
          for (int q = 0; q < rule.size(); ++q)
            acc += rule.weights[q] * der[static_cast<size_t>(q) * s + m] *
                   val[static_cast<size_t>(q) * s + n] *
                   val[static_cast<size_t>(q) * s + r];
          t.dtri[(static_cast<size_t>(m) * s + n) * s + r] = 0.5 * acc;
        }
      }
    }
  return t;
}

// Cartesian product of per-axis nonzero triples into a flat TripleList.
// axis_kind[i] selects tri (false) or dtri (true) for product axis i; strides
// give the flat-index stride of each product axis.
void product_triples(const OneDimTables& t1, const std::vector<bool>& axis_kind,
                     const std::vector<int>& strides, TripleList& out) {
  const int s = t1.mdeg + 1;
  const int naxes = static_cast<int>(axis_kind.size());

  struct AxisTriple {
    int m, n, r;
    double v;
  };
  std::vector<std::vector<AxisTriple>> per_axis(naxes);
  for (int i = 0; i < naxes; ++i) {
    for (int m = 0; m < s; ++m)
      for (int n = 0; n < s; ++n)
        for (int r = 0; r < s; ++r) {
          const bool nz = axis_kind[i] ? dtriple_nonzero(m, n, r)
                                       : triple_nonzero(m, n, r);
          if (!nz) continue;
          const double v = axis_kind[i] ? t1.dtri_at(m, n, r) : t1.tri_at(m, n, r);
          per_axis[i].push_back({m, n, r, v});
        }
  }

  std::vector<int> idx(naxes, 0);
  for (;;) {
    int k = 0, l = 0, p = 0;
    double v = 1.0;
    for (int i = 0; i < naxes; ++i) {
      const AxisTriple& a = per_axis[i][idx[i]];
      k += a.m * strides[i];
      l += a.n * strides[i];
      p += a.r * strides[i];
      v *= a.v;
    }
    out.push(k, l, p, v);
    int i = 0;
    for (; i < naxes; ++i) {
      if (++idx[i] < static_cast<int>(per_axis[i].size())) break;
      idx[i] = 0;
    }
    if (i == naxes) break;
  }
}

}  // namespace

QqfTables build_tables(int mdeg, int dim) {
  if (mdeg < 0 || mdeg > 11) throw ValidationError("build_tables: mdeg must be in [0,11]");
  if (dim < 1 || dim > 3) throw ValidationError("build_tables: dim must be in [1,3]");

  QqfTables t;
  t.mdeg = mdeg;
  t.dim = dim;
  const int s = mdeg + 1;
  t.theta = 1;
  for (int a = 0; a < dim; ++a) t.theta *= s;
  t.theta_t = t.theta * s;
  t.transverse_size = t.theta;  // (mdeg+1)^dim remaining axes

  const OneDimTables t1 = build_1d(mdeg);

  t.endpoint_plus.resize(s);
  t.endpoint_minus.resize(s);
  for (int m = 0; m < s; ++m) {
    t.endpoint_plus[m] = std::sqrt(2.0 * m + 1.0);
    t.endpoint_minus[m] = (m % 2 == 0) ? t.endpoint_plus[m] : -t.endpoint_plus[m];
  }

  const BasisSet st(dim + 1, mdeg);

  // Endpoint mass, time derivative, and causal matrices are separable: the
  // spatial factors reduce to Kronecker deltas by orthonormality.
  t.endpoint_mass.assign(static_cast<size_t>(t.theta_t) * t.theta_t, 0.0);
  t.time_deriv.assign(static_cast<size_t>(t.theta_t) * t.theta_t, 0.0);
  t.causal.assign(static_cast<size_t>(t.theta_t) * t.theta, 0.0);
  for (int k = 0; k < t.theta_t; ++k) {
    const int ksp = k % t.theta;
    const int kt = k / t.theta;
    for (int lt = 0; lt < s; ++lt) {
      const int l = lt * t.theta + ksp;
      t.endpoint_mass[static_cast<size_t>(k) * t.theta_t + l] =
          t.endpoint_plus[kt] * t.endpoint_plus[lt];
      // (1/2^(dim+1)) integral of Psi_k,tau Psi_l = delta_sp * (1/2) int phi'phi.
      t.time_deriv[static_cast<size_t>(k) * t.theta_t + l] =
          t1.dmass[static_cast<size_t>(kt) * s + lt];
    }
    t.causal[static_cast<size_t>(k) * t.theta + ksp] = t.endpoint_minus[kt];
  }

  // Volume tensors: derivative factor on the normal axis, plain triple
  // products on the remaining spatial axes and on time.
  for (int a = 0; a < dim; ++a) {
    std::vector<bool> kind(dim + 1, false);
    kind[a] = true;
    std::vector<int> strides(dim + 1);
    int stride = 1;
    for (int b = 0; b <= dim; ++b) {
      strides[b] = stride;
      stride *= s;
    }
    product_triples(t1, kind, strides, t.volume[a]);
  }

  // Transverse face tensor: plain triple products over dim generic axes
  // (the non-normal spatial axes plus time).
  {
    std::vector<bool> kind(dim, false);
    std::vector<int> strides(dim);
    int stride = 1;
    for (int b = 0; b < dim; ++b) {
      strides[b] = stride;
      stride *= s;
    }
    product_triples(t1, kind, strides, t.face_triple);
  }

  // Split maps between full space-time indices and (normal digit, transverse).
  for (int a = 0; a < dim; ++a) {
    t.normal_digit[a].resize(t.theta_t);
    t.transverse_index[a].resize(t.theta_t);
    t.from_split[a].assign(static_cast<size_t>(s) * t.transverse_size, 0);
    for (int k = 0; k < t.theta_t; ++k) {
      const std::array<int, 4> m = st.multi_index(k);
      int trans = 0;
      for (int b = dim; b >= 0; --b) {
        if (b == a) continue;
        trans = trans * s + m[b];
      }
      t.normal_digit[a][k] = static_cast<std::uint16_t>(m[a]);
      t.transverse_index[a][k] = static_cast<std::uint16_t>(trans);
      t.from_split[a][static_cast<size_t>(m[a]) * t.transverse_size + trans] =
          static_cast<std::uint16_t>(k);
    }
  }

  return t;
}

namespace {

constexpr std::uint32_t kMagic = 0x51514654;  // "QQFT"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, sizeof v, 1, f); }

std::uint32_t read_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1)
    throw ValidationError("table cache: truncated file");
  return v;
}

template <typename T>
void write_vec(std::FILE* f, const std::vector<T>& v) {
  write_u32(f, static_cast<std::uint32_t>(v.size()));
  if (!v.empty()) std::fwrite(v.data(), sizeof(T), v.size(), f);
}

template <typename T>
void read_vec(std::FILE* f, std::vector<T>& v) {
  v.resize(read_u32(f));
  if (!v.empty() && std::fread(v.data(), sizeof(T), v.size(), f) != v.size())
    throw ValidationError("table cache: truncated array");
}

void write_triple(std::FILE* f, const TripleList& t) {
  write_vec(f, t.k);
  write_vec(f, t.l);
  write_vec(f, t.p);
  write_vec(f, t.value);
}

void read_triple(std::FILE* f, TripleList& t) {
  read_vec(f, t.k);
  read_vec(f, t.l);
  read_vec(f, t.p);
  read_vec(f, t.value);
}

}  // namespace

void save_tables(const QqfTables& t, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ValidationError("table cache: cannot open for writing: " + path);
  write_u32(f, kMagic);
  write_u32(f, kVersion);
  write_u32(f, static_cast<std::uint32_t>(t.mdeg));
  write_u32(f, static_cast<std::uint32_t>(t.dim));
  write_vec(f, t.endpoint_mass);
  write_vec(f, t.time_deriv);
  write_vec(f, t.causal);
  for (int a = 0; a < 3; ++a) write_triple(f, t.volume[a]);
  write_triple(f, t.face_triple);
  write_vec(f, t.endpoint_plus);
  write_vec(f, t.endpoint_minus);
  for (int a = 0; a < 3; ++a) write_vec(f, t.normal_digit[a]);
  for (int a = 0; a < 3; ++a) write_vec(f, t.transverse_index[a]);
  for (int a = 0; a < 3; ++a) write_vec(f, t.from_split[a]);
  std::fclose(f);
}

QqfTables load_tables(const std::string& path, int mdeg, int dim) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ValidationError("table cache: cannot open: " + path);
  QqfTables t;
  try {
    if (read_u32(f) != kMagic) throw ValidationError("table cache: bad magic");
    if (read_u32(f) != kVersion) throw ValidationError("table cache: bad version");
    t.mdeg = static_cast<int>(read_u32(f));
    t.dim = static_cast<int>(read_u32(f));
    if (t.mdeg != mdeg || t.dim != dim)
      throw ValidationError("table cache: key mismatch (file has mdeg=" +
                            std::to_string(t.mdeg) + ", dim=" +
                            std::to_string(t.dim) + ")");
    read_vec(f, t.endpoint_mass);
    read_vec(f, t.time_deriv);
    read_vec(f, t.causal);
    for (int a = 0; a < 3; ++a) read_triple(f, t.volume[a]);
    read_triple(f, t.face_triple);
    read_vec(f, t.endpoint_plus);
    read_vec(f, t.endpoint_minus);
    for (int a = 0; a < 3; ++a) read_vec(f, t.normal_digit[a]);
    for (int a = 0; a < 3; ++a) read_vec(f, t.transverse_index[a]);
    for (int a = 0; a < 3; ++a) read_vec(f, t.from_split[a]);
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  const int s = mdeg + 1;
  t.theta = 1;
  for (int a = 0; a < dim; ++a) t.theta *= s;
  t.theta_t = t.theta * s;
  t.transverse_size = t.theta;
  return t;
}

}  // namespace ridg

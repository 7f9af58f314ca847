#include "ridg/tables.hpp"

#include <cmath>
#include <cstdio>
#include <doctest.h>
#include <map>
#include <tuple>

#include "ridg/basis.hpp"
#include "ridg/errors.hpp"

using namespace ridg;

namespace {

// Brute-force normalized integrals with mdeg+2 points per axis; every
// integrand here is polynomial, so these are exact references.
struct BruteForce {
  int mdeg, dim;
  BasisSet st;
  QuadratureRule vol;
  QuadratureRule slice;

  BruteForce(int mdeg_, int dim_)
      : mdeg(mdeg_), dim(dim_), st(dim_ + 1, mdeg_),
        vol(gauss_rule(mdeg_ + 2, dim_ + 1)), slice(gauss_rule(mdeg_ + 2, dim_)) {}

  double volume_triple(int axis, int k, int l, int p) const {
    double acc = 0.0;
    for (int q = 0; q < vol.size(); ++q)
      acc += vol.weights[q] * st.derivative(k, axis, vol.point(q)) *
             st.value(l, vol.point(q)) * st.value(p, vol.point(q));
    return acc / std::pow(2.0, dim + 1);
  }

  double time_deriv(int k, int l) const {
    double acc = 0.0;
    for (int q = 0; q < vol.size(); ++q)
      acc += vol.weights[q] * st.derivative(k, dim, vol.point(q)) *
             st.value(l, vol.point(q));
    return acc / std::pow(2.0, dim + 1);
  }

  // spatial slice at tau = s against a spatial basis function (or another
  // space-time trace)
  double endpoint_mass(int k, int l, double s) const {
    std::array<double, 4> pt{};
    double acc = 0.0;
    for (int q = 0; q < slice.size(); ++q) {
      for (int a = 0; a < dim; ++a) pt[a] = slice.point(q)[a];
      pt[dim] = s;
      acc += slice.weights[q] * st.value(k, pt.data()) * st.value(l, pt.data());
    }
    return acc / std::pow(2.0, dim);
  }

  double causal(int k, int m, const BasisSet& spatial) const {
    std::array<double, 4> pt{};
    double acc = 0.0;
    for (int q = 0; q < slice.size(); ++q) {
      for (int a = 0; a < dim; ++a) pt[a] = slice.point(q)[a];
      pt[dim] = -1.0;
      acc += slice.weights[q] * st.value(k, pt.data()) *
             spatial.value(m, slice.point(q));
    }
    return acc / std::pow(2.0, dim);
  }

  // face-time integral of three traces on the face xi_axis = sk, sl, sp
  double face_triple(int axis, int k, int l, int p, double sk, double sl,
                     double sp) const {
    std::array<double, 4> a{}, b{}, c{};
    double acc = 0.0;
    for (int q = 0; q < slice.size(); ++q) {
      int pos = 0;
      for (int ax = 0; ax <= dim; ++ax) {
        if (ax == axis) continue;
        a[ax] = b[ax] = c[ax] = slice.point(q)[pos++];
      }
      a[axis] = sk;
      b[axis] = sl;
      c[axis] = sp;
      acc += slice.weights[q] * st.value(k, a.data()) * st.value(l, b.data()) *
             st.value(p, c.data());
    }
    return acc / std::pow(2.0, dim);
  }
};

std::map<std::tuple<int, int, int>, double> as_map(const TripleList& t) {
  std::map<std::tuple<int, int, int>, double> m;
  for (size_t i = 0; i < t.size(); ++i)
    m[{t.k[i], t.l[i], t.p[i]}] = t.value[i];
  return m;
}

}  // namespace

TEST_CASE("constant modes of the time-term matrices") {
  for (int dim = 1; dim <= 3; ++dim) {
    const QqfTables t = build_tables(2, dim);
    CHECK(t.endpoint_mass[0] == doctest::Approx(1.0).epsilon(1e-14));
    for (int l = 0; l < t.theta_t; ++l)
      CHECK(std::abs(t.time_deriv[l]) < 1e-14);  // row k = 0
    CHECK(t.causal[0] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("stored volume entries equal brute force and the rest vanish") {
  struct Case {
    int mdeg, dim;
  };
  for (const Case c : {Case{1, 1}, Case{2, 1}, Case{3, 1}, Case{1, 2},
                       Case{2, 2}, Case{1, 3}}) {
    const QqfTables t = build_tables(c.mdeg, c.dim);
    const BruteForce bf(c.mdeg, c.dim);
    for (int axis = 0; axis < c.dim; ++axis) {
      const auto stored = as_map(t.volume[axis]);
      // stored entries: exact to 1e-13 and genuinely nonzero
      for (const auto& [key, v] : stored) {
        const auto [k, l, p] = key;
        CHECK(std::abs(v - bf.volume_triple(axis, k, l, p)) < 1e-13);
        CHECK(std::abs(v) > 1e-15);
      }
      // full enumeration: everything not stored must integrate to zero
      if (t.theta_t <= 32) {
        long nnz = 0;
        for (int k = 0; k < t.theta_t; ++k)
          for (int l = 0; l < t.theta_t; ++l)
            for (int p = 0; p < t.theta_t; ++p) {
              const double v = bf.volume_triple(axis, k, l, p);
              if (stored.count({k, l, p}) == 0)
                CHECK(std::abs(v) < 1e-13);
              if (std::abs(v) > 1e-13) ++nnz;
            }
        CHECK(nnz == static_cast<long>(t.volume_nonzero_count(axis)));
      }
    }
  }
}

TEST_CASE("endpoint mass, time derivative, and causal matrices are exact") {
  for (int dim = 1; dim <= 2; ++dim) {
    const int mdeg = 2;
    const QqfTables t = build_tables(mdeg, dim);
    const BruteForce bf(mdeg, dim);
    const BasisSet spatial(dim, mdeg);
    for (int k = 0; k < t.theta_t; ++k) {
      for (int l = 0; l < t.theta_t; ++l) {
        CHECK(std::abs(t.endpoint_mass[static_cast<size_t>(k) * t.theta_t + l] -
                       bf.endpoint_mass(k, l, 1.0)) < 1e-13);
        CHECK(std::abs(t.time_deriv[static_cast<size_t>(k) * t.theta_t + l] -
                       bf.time_deriv(k, l)) < 1e-13);
      }
      for (int m = 0; m < t.theta; ++m)
        CHECK(std::abs(t.causal[static_cast<size_t>(k) * t.theta + m] -
                       bf.causal(k, m, spatial)) < 1e-13);
    }
  }
}

TEST_CASE("face tensors reconstruct all trace couplings") {
  // The transverse tensor with endpoint factors must reproduce the brute
  // force face-time integrals for every side combination the assembly uses.
  struct Case {
    int mdeg, dim;
  };
  for (const Case c : {Case{2, 1}, Case{1, 2}, Case{1, 3}}) {
    const QqfTables t = build_tables(c.mdeg, c.dim);
    const BruteForce bf(c.mdeg, c.dim);
    const auto face = as_map(t.face_triple);
    auto reconstructed = [&](int axis, int k, int l, int p, double sk,
                             double sl, double sp) {
      const auto& ep = t.endpoint_plus;
      const auto& em = t.endpoint_minus;
      const double ek = sk > 0 ? ep[t.normal_digit[axis][k]]
                               : em[t.normal_digit[axis][k]];
      const double el = sl > 0 ? ep[t.normal_digit[axis][l]]
                               : em[t.normal_digit[axis][l]];
      const double epp = sp > 0 ? ep[t.normal_digit[axis][p]]
                                : em[t.normal_digit[axis][p]];
      const auto it = face.find({t.transverse_index[axis][k],
                                 t.transverse_index[axis][l],
                                 t.transverse_index[axis][p]});
      return it == face.end() ? 0.0 : ek * el * epp * it->second;
    };
    const double sides[4][3] = {
        {1, 1, 1}, {1, -1, -1}, {-1, -1, -1}, {-1, 1, 1}};
    for (int axis = 0; axis < c.dim; ++axis)
      for (int k = 0; k < t.theta_t; k += 3)
        for (int l = 0; l < t.theta_t; l += 2)
          for (int p = 0; p < t.theta_t; p += 2)
            for (const double* s : sides)
              CHECK(std::abs(
                        reconstructed(axis, k, l, p, s[0], s[1], s[2]) -
                        bf.face_triple(axis, k, l, p, s[0], s[1], s[2])) <
                    1e-13);
  }
}

TEST_CASE("nonzero count of the 1D volume tensor matches enumeration") {
  const QqfTables t = build_tables(1, 1);
  const BruteForce bf(1, 1);
  long nnz = 0;
  for (int k = 0; k < t.theta_t; ++k)
    for (int l = 0; l < t.theta_t; ++l)
      for (int p = 0; p < t.theta_t; ++p)
        if (std::abs(bf.volume_triple(0, k, l, p)) > 1e-13) ++nnz;
  CHECK(static_cast<long>(t.volume_nonzero_count(0)) == nnz);
}

TEST_CASE("index split maps are consistent") {
  const QqfTables t = build_tables(2, 2);
  for (int axis = 0; axis < 2; ++axis)
    for (int k = 0; k < t.theta_t; ++k)
      CHECK(t.full_index(axis, t.normal_digit[axis][k],
                         t.transverse_index[axis][k]) == k);
}

TEST_CASE("binary cache round trips and validates its key") {
  const QqfTables t = build_tables(3, 2);
  const std::string path = "/tmp/ridg_tables_test.tbl";
  save_tables(t, path);
  const QqfTables back = load_tables(path, 3, 2);
  CHECK(back.endpoint_mass == t.endpoint_mass);
  CHECK(back.time_deriv == t.time_deriv);
  CHECK(back.causal == t.causal);
  for (int a = 0; a < 2; ++a) {
    CHECK(back.volume[a].value == t.volume[a].value);
    CHECK(back.volume[a].k == t.volume[a].k);
  }
  CHECK(back.face_triple.value == t.face_triple.value);
  CHECK_THROWS_AS(load_tables(path, 2, 2), ValidationError);
  std::remove(path.c_str());
}

TEST_CASE("table arguments are validated") {
  CHECK_THROWS_AS(build_tables(-1, 1), ValidationError);
  CHECK_THROWS_AS(build_tables(12, 1), ValidationError);
  CHECK_THROWS_AS(build_tables(3, 4), ValidationError);
}

#include "ridg/basis.hpp"

#include <cmath>
#include <cstddef>

#include "ridg/errors.hpp"

namespace ridg {

double legendre(int n, double x) {
  if (n == 0) return 1.0;
  if (n == 1) return x;
  double pm1 = 1.0, p = x;
  for (int m = 2; m <= n; ++m) {
    double pnext = ((2 * m - 1) * x * p - (m - 1) * pm1) / m;
    pm1 = p;
    p = pnext;
  }
  return p;
}

double legendre_derivative(int n, double x) {
  if (n == 0) return 0.0;
  if (n == 1) return 1.0;
  // d/dx P_n via the recurrence P'_n = P'_{n-2} + (2n-1) P_{n-1}.
  double pm1 = 1.0, p = x;
  double dm1 = 0.0, d = 1.0;
  for (int m = 2; m <= n; ++m) {
    double pnext = ((2 * m - 1) * x * p - (m - 1) * pm1) / m;
    double dnext = dm1 + (2 * m - 1) * p;
    pm1 = p;
    p = pnext;
    dm1 = d;
    d = dnext;
  }
  return d;
}

double legendre_orthonormal(int m, double x) {
  return std::sqrt(2.0 * m + 1.0) * legendre(m, x);
}

double legendre_orthonormal_derivative(int m, double x) {
  return std::sqrt(2.0 * m + 1.0) * legendre_derivative(m, x);
}

namespace {

// 1D Gauss-Legendre nodes and weights on [-1,1].
void gauss_nodes_1d(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev initial guess for the i-th largest root.
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double f = legendre(n, xi);
      double df = legendre_derivative(n, xi);
      double dx = f / df;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double df = legendre_derivative(n, xi);
    double wi = 2.0 / ((1.0 - xi * xi) * df * df);
    x[i] = -xi;  // ascending order
    x[n - 1 - i] = xi;
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

}  // namespace

QuadratureRule gauss_rule(int points_per_axis, int dim) {
  if (points_per_axis < 1)
    throw ValidationError("gauss_rule: points_per_axis must be >= 1");
  if (dim < 1) throw ValidationError("gauss_rule: dim must be >= 1");

  std::vector<double> x1, w1;
  gauss_nodes_1d(points_per_axis, x1, w1);

  QuadratureRule rule;
  rule.dim = dim;
  rule.points_per_axis = points_per_axis;
  int npts = 1;
  for (int a = 0; a < dim; ++a) npts *= points_per_axis;
  rule.points.resize(static_cast<size_t>(npts) * dim);
  rule.weights.resize(npts);
  for (int q = 0; q < npts; ++q) {
    int rem = q;
    double wq = 1.0;
    for (int a = 0; a < dim; ++a) {
      int ia = rem % points_per_axis;
      rem /= points_per_axis;
      rule.points[static_cast<size_t>(q) * dim + a] = x1[ia];
      wq *= w1[ia];
    }
    rule.weights[q] = wq;
  }
  return rule;
}

BasisSet::BasisSet(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim < 1 || dim > 4) throw ValidationError("BasisSet: dim must be in [1,4]");
  if (degree < 0) throw ValidationError("BasisSet: degree must be >= 0");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= degree + 1;
}

std::array<int, 4> BasisSet::multi_index(int k) const {
  std::array<int, 4> m{0, 0, 0, 0};
  int rem = k;
  for (int a = 0; a < dim_; ++a) {
    m[a] = rem % (degree_ + 1);
    rem /= degree_ + 1;
  }
  return m;
}

int BasisSet::flat_index(const std::array<int, 4>& m) const {
  int k = 0;
  for (int a = dim_ - 1; a >= 0; --a) k = k * (degree_ + 1) + m[a];
  return k;
}

double BasisSet::value(int k, const double* xi) const {
  if (k < 0 || k >= size_) throw ValidationError("BasisSet::value: index out of range");
  double v = 1.0;
  int rem = k;
  for (int a = 0; a < dim_; ++a) {
    int ka = rem % (degree_ + 1);
    rem /= degree_ + 1;
    v *= legendre_orthonormal(ka, xi[a]);
  }
  return v;
}

double BasisSet::derivative(int k, int axis, const double* xi) const {
  if (k < 0 || k >= size_) throw ValidationError("BasisSet::derivative: index out of range");
  double v = 1.0;
  int rem = k;
  for (int a = 0; a < dim_; ++a) {
    int ka = rem % (degree_ + 1);
    rem /= degree_ + 1;
    v *= (a == axis) ? legendre_orthonormal_derivative(ka, xi[a])
                     : legendre_orthonormal(ka, xi[a]);
  }
  return v;
}

std::vector<double> project(const std::function<double(const double*)>& f,
                            const BasisSet& basis, const QuadratureRule& rule) {
  const double norm = 1.0 / std::pow(2.0, basis.dim());
  // Projecting the deviation from the midpoint value keeps constants exact:
  // a constant f yields zero deviations, so every mode above the first comes
  // out as a true 0.0 instead of quadrature roundoff.
  std::vector<double> mid(basis.dim(), 0.0);
  const double mu = f(mid.data());
  double wsum = 0.0;
  std::vector<double> c(basis.size(), 0.0);
  for (int q = 0; q < rule.size(); ++q) {
    wsum += rule.weights[q];
    const double fq = (f(rule.point(q)) - mu) * rule.weights[q];
    for (int k = 0; k < basis.size(); ++k)
      c[k] += fq * basis.value(k, rule.point(q));
  }
  for (double& ck : c) ck *= norm;
  c[0] += mu * (norm * wsum);
  return c;
}

double reconstruct(const std::vector<double>& coeffs, const BasisSet& basis,
                   const double* xi) {
  double v = 0.0;
  for (int k = 0; k < basis.size(); ++k) v += coeffs[k] * basis.value(k, xi);
  return v;
}

std::vector<double> tabulate(const BasisSet& basis, const QuadratureRule& rule) {
  std::vector<double> tab(static_cast<size_t>(rule.size()) * basis.size());
  for (int q = 0; q < rule.size(); ++q)
    for (int k = 0; k < basis.size(); ++k)
      tab[static_cast<size_t>(q) * basis.size() + k] = basis.value(k, rule.point(q));
  return tab;
}

std::vector<double> tabulate_derivative(const BasisSet& basis,
                                        const QuadratureRule& rule, int axis) {
  std::vector<double> tab(static_cast<size_t>(rule.size()) * basis.size());
  for (int q = 0; q < rule.size(); ++q)
    for (int k = 0; k < basis.size(); ++k)
      tab[static_cast<size_t>(q) * basis.size() + k] =
          basis.derivative(k, axis, rule.point(q));
  return tab;
}

}  // namespace ridg

#pragma once

#include <array>
#include <functional>
#include <vector>

namespace ridg {

// Legendre polynomial P_n and its derivative, by three-term recurrence.
double legendre(int n, double x);
double legendre_derivative(int n, double x);

// 1D factor of the orthonormal basis: sqrt(2m+1) * P_m, normalized so that
// (1/2) * integral over [-1,1] of the square is 1.
double legendre_orthonormal(int m, double x);
double legendre_orthonormal_derivative(int m, double x);

// Tensor-product Gauss-Legendre rule on [-1,1]^dim. Weights sum to 2^dim;
// an n-point-per-axis rule integrates per-axis degree <= 2n-1 exactly.
struct QuadratureRule {
  int dim = 1;
  int points_per_axis = 1;
  std::vector<double> points;   // size() * dim, coordinates of point q at point(q)
  std::vector<double> weights;  // one per point

  int size() const { return static_cast<int>(weights.size()); }
  const double* point(int q) const { return points.data() + static_cast<size_t>(q) * dim; }
};

// Nodes by Newton iteration on P_n with Chebyshev initial guesses, converged
// to 1e-15 and symmetrized about the origin.
QuadratureRule gauss_rule(int points_per_axis, int dim);

// Tensor-product Legendre basis on [-1,1]^dim, orthonormal with respect to
// the normalized measure (1/2^dim) dxi. Flat index k <-> multi-index
// (k_1,...,k_dim), 0 <= k_i <= degree, lexicographic with axis 1 fastest and
// the last axis slowest. The space-time basis is the same object with
// dim = spatial dim + 1 and time as the last axis.
class BasisSet {
 public:
  BasisSet(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return size_; }

  std::array<int, 4> multi_index(int k) const;
  int flat_index(const std::array<int, 4>& m) const;

  // phi_k(xi); evaluation at |xi_i| = 1 is used for face traces.
  double value(int k, const double* xi) const;
  // d/dxi_axis phi_k(xi), reference-coordinate derivative.
  double derivative(int k, int axis, const double* xi) const;

 private:
  int dim_;
  int degree_;
  int size_;
};

// L2 projection under the rule: c_k = (1/2^dim) sum_q w_q phi_k(xi_q) f(xi_q).
std::vector<double> project(const std::function<double(const double*)>& f,
                            const BasisSet& basis, const QuadratureRule& rule);

// Reconstruction sum_k c_k phi_k(xi).
double reconstruct(const std::vector<double>& coeffs, const BasisSet& basis,
                   const double* xi);

// Basis values at all rule points, laid out as tab[q * basis.size() + k].
std::vector<double> tabulate(const BasisSet& basis, const QuadratureRule& rule);
std::vector<double> tabulate_derivative(const BasisSet& basis,
                                        const QuadratureRule& rule, int axis);

}  // namespace ridg

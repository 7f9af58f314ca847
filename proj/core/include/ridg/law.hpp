#pragma once

#include <array>
#include <functional>
#include <string>

#include "ridg/mesh.hpp"

namespace ridg {

// Scalar conservation law q_t + div F(q) = 0 with componentwise flux.
struct ConservationLaw {
  enum class Tag { Advection1D, Advection2D, Advection3D, Burgers2D };

  Tag tag = Tag::Advection1D;
  int dim = 1;

  double flux(double q, int axis) const;
  double flux_derivative(double q, int axis) const;
  double wave_speed(double q, int axis) const;  // |F'(q) . e_axis|
  bool is_linear() const {
    return tag != Tag::Burgers2D;
  }
  std::string name() const;
};

ConservationLaw make_law(ConservationLaw::Tag tag);
ConservationLaw law_by_name(const std::string& name);

// Rusanov (local Lax-Friedrichs) flux in direction sign * e_axis:
//   Fhat = 0.5 (F(q_plus) + F(q_minus)) . n - 0.5 lambda (q_plus - q_minus),
// with q_minus the trace on the side the normal points away from and q_plus
// the trace on the side it points into. lambda must bound both wave speeds.
double rusanov(const ConservationLaw& law, int axis, int sign, double q_plus,
               double q_minus, double lambda);

// C-infinity compactly supported bump: exp(1/(r^2 - omega^2)) inside r < omega,
// zero outside, r = |x - c|.
double bump_ic(const double* x, const double* center, double omega, int dim);

// A named experiment: law, initial data, exact solution when known, defaults.
struct ProblemSetup {
  std::string name;
  ConservationLaw law;
  CartesianMesh domain_template;  // dim, lo, hi (cells filled in by the caller)
  double default_final_time = 1.0;
  std::function<double(const std::array<double, 3>&)> initial;
  // Exact solution at time t, or empty when unknown (Burgers).
  std::function<double(double, const std::array<double, 3>&)> exact;

  bool has_exact() const { return static_cast<bool>(exact); }
};

ProblemSetup make_problem(const std::string& name);

}  // namespace ridg

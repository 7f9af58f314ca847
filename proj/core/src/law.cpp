#include "ridg/law.hpp"

#include <cmath>

#include "ridg/errors.hpp"

namespace ridg {

double ConservationLaw::flux(double q, int axis) const {
  (void)axis;
  switch (tag) {
    case Tag::Advection1D:
    case Tag::Advection2D:
    case Tag::Advection3D:
      return q;  // unit advection speed along every axis
    case Tag::Burgers2D:
      return 0.5 * q * q;
  }
  return 0.0;
}

double ConservationLaw::flux_derivative(double q, int axis) const {
  (void)axis;
  switch (tag) {
    case Tag::Advection1D:
    case Tag::Advection2D:
    case Tag::Advection3D:
      return 1.0;
    case Tag::Burgers2D:
      return q;
  }
  return 0.0;
}

double ConservationLaw::wave_speed(double q, int axis) const {
  return std::abs(flux_derivative(q, axis));
}

std::string ConservationLaw::name() const {
  switch (tag) {
    case Tag::Advection1D: return "adv1d";
    case Tag::Advection2D: return "adv2d";
    case Tag::Advection3D: return "adv3d";
    case Tag::Burgers2D: return "burgers2d";
  }
  return "?";
}

ConservationLaw make_law(ConservationLaw::Tag tag) {
  ConservationLaw law;
  law.tag = tag;
  switch (tag) {
    case ConservationLaw::Tag::Advection1D: law.dim = 1; break;
    case ConservationLaw::Tag::Advection2D: law.dim = 2; break;
    case ConservationLaw::Tag::Advection3D: law.dim = 3; break;
    case ConservationLaw::Tag::Burgers2D: law.dim = 2; break;
  }
  return law;
}

ConservationLaw law_by_name(const std::string& name) {
  if (name == "adv1d") return make_law(ConservationLaw::Tag::Advection1D);
  if (name == "adv2d") return make_law(ConservationLaw::Tag::Advection2D);
  if (name == "adv3d") return make_law(ConservationLaw::Tag::Advection3D);
  if (name == "burgers2d") return make_law(ConservationLaw::Tag::Burgers2D);
  throw ValidationError("unknown law/problem name: " + name);
}

double rusanov(const ConservationLaw& law, int axis, int sign, double q_plus,
               double q_minus, double lambda) {
  const double favg = 0.5 * (law.flux(q_plus, axis) + law.flux(q_minus, axis));
  return sign * favg - 0.5 * lambda * (q_plus - q_minus);
}

double bump_ic(const double* x, const double* center, double omega, int dim) {
  double r2 = 0.0;
  for (int a = 0; a < dim; ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
  const double w2 = omega * omega;
  if (r2 >= w2) return 0.0;
  return std::exp(1.0 / (r2 - w2));
}

namespace {

// Shift x back by t along each axis and wrap into [lo, hi).
std::array<double, 3> advect_back(const std::array<double, 3>& x, double t,
                                  int dim, const std::array<double, 3>& lo,
                                  const std::array<double, 3>& hi) {
  std::array<double, 3> y = x;
  for (int a = 0; a < dim; ++a) {
    const double len = hi[a] - lo[a];
    double v = std::fmod(y[a] - t - lo[a], len);
    if (v < 0) v += len;
    y[a] = lo[a] + v;
  }
  return y;
}

}  // namespace

ProblemSetup make_problem(const std::string& name) {
  ProblemSetup p;
  p.name = name;
  p.law = law_by_name(name);

  const int dim = p.law.dim;
  p.domain_template.dim = dim;
  for (int a = 0; a < 3; ++a) {
    p.domain_template.lo[a] = 0.0;
    p.domain_template.hi[a] = 1.0;
  }

  if (name == "burgers2d") {
    // The cosine product initial state, scaled by 2 pi so that it is periodic
    // on the unit box; run in its smooth (pre-shock) regime.
    p.default_final_time = 0.1;
    p.initial = [](const std::array<double, 3>& x) {
      return 0.25 * (1.0 - std::cos(2.0 * M_PI * x[0])) *
             (1.0 - std::cos(2.0 * M_PI * x[1]));
    };
    return p;
  }

  // Advection of the smooth compact bump at unit speed along each axis; one
  // period returns the initial state at T = 1.
  p.default_final_time = 1.0;
  const double omega = 1.0 / 3.0;
  std::array<double, 3> center{0.5, 0.5, 0.5};
  p.initial = [dim, omega, center](const std::array<double, 3>& x) {
    return bump_ic(x.data(), center.data(), omega, dim);
  };
  auto lo = p.domain_template.lo;
  auto hi = p.domain_template.hi;
  auto initial = p.initial;
  p.exact = [dim, lo, hi, initial](double t, const std::array<double, 3>& x) {
    return initial(advect_back(x, t, dim, lo, hi));
  };
  return p;
}

}  // namespace ridg

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ridg/basis.hpp"

namespace ridg {

// Nonzero entries of a triple-product tensor T[k,l,p]; every stored value is
// mathematically nonzero (selection rules decide membership, quadrature the
// value, and all integrands are polynomial so the values are exact).
struct TripleList {
  std::vector<std::uint16_t> k, l, p;
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
  void push(int k_, int l_, int p_, double v) {
    k.push_back(static_cast<std::uint16_t>(k_));
    l.push_back(static_cast<std::uint16_t>(l_));
    p.push_back(static_cast<std::uint16_t>(p_));
    value.push_back(v);
  }
};

// Precomputed exact integrals for the space-time prediction system at a given
// (mdeg, dim). All stored values are averages over their reference manifold:
// spatial slices use (1/2^dim) dxi, space-time integrals (1/2^(dim+1)) dxi dtau,
// and face-time integrals (1/2^dim) dxi' dtau.
//
// Face trace tensors are stored factored: the normal-axis dependence of a
// trace triple product is rank-one in the endpoint values phi_m(+-1), so one
// transverse tensor (face_triple) serves every axis, face side, and both the
// one-sided and upwind couplings.
struct QqfTables {
  int mdeg = 0;
  int dim = 0;
  int theta = 0;    // spatial basis size
  int theta_t = 0;  // space-time basis size

  // endpoint_mass[k*theta_t + l]: spatial average of Psi_k Psi_l at tau = +1.
  std::vector<double> endpoint_mass;
  // time_deriv[k*theta_t + l]: space-time average of dPsi_k/dtau * Psi_l.
  std::vector<double> time_deriv;
  // causal[k*theta + m]: spatial average of Psi_k(.,-1) Phi_m.
  std::vector<double> causal;

  // volume[a]: space-time average of dPsi_k/dxi_a * Psi_l * Psi_p.
  std::array<TripleList, 3> volume;

  // Transverse (face x time) triple tensor over the dim remaining axes after
  // removing the face normal; indices are transverse flat indices.
  TripleList face_triple;

  // phi_m(+1) and phi_m(-1) for m = 0..mdeg.
  std::vector<double> endpoint_plus;
  std::vector<double> endpoint_minus;

  // Split of a space-time flat index along each spatial axis a:
  // normal_digit[a][k] is the per-axis degree, transverse_index[a][k] the flat
  // index over the remaining dim axes (other spatial axes then time, axis
  // order preserved, first fastest).
  std::array<std::vector<std::uint16_t>, 3> normal_digit;
  std::array<std::vector<std::uint16_t>, 3> transverse_index;
  // Inverse map: full index from (axis, digit, transverse flat index).
  std::array<std::vector<std::uint16_t>, 3> from_split;

  int transverse_size = 0;  // (mdeg+1)^dim

  int full_index(int axis, int digit, int trans) const {
    return from_split[axis][static_cast<std::size_t>(digit) * transverse_size + trans];
  }

  // Total nonzero count of the full volume tensor for one axis.
  std::size_t volume_nonzero_count(int axis) const { return volume[axis].size(); }
};

// Builds all tables for the given degree and spatial dimension (1..3).
QqfTables build_tables(int mdeg, int dim);

// Versioned binary cache, keyed by (mdeg, dim); load verifies the key.
void save_tables(const QqfTables& tables, const std::string& path);
QqfTables load_tables(const std::string& path, int mdeg, int dim);

}  // namespace ridg

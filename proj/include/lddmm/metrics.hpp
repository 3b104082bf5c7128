#pragma once

// Registration quality measures and output maps: endpoint displacements,
// Jacobian determinants, relative mean-squared error, Dice overlap.

#include <cmath>
#include <set>
#include <vector>

#include "variants.hpp"

namespace lddmm {

// Endpoint maps of the flow. The forward points x - u(1, x) pull the source
// into the target frame; the inverse points x - nu(0, x) realize the inverse
// deformation.
struct RegistrationMaps {
  VectorField forward_disp;  // u(1)
  VectorField inverse_disp;  // nu(0)
  VectorField forward_pts;   // id - u(1)
  VectorField inverse_pts;   // id - nu(0)
};

template <class Alg>
RegistrationMaps compute_maps(const Model<Alg>& model,
                              const TimeVaryingVelocity<typename Alg::Vec>& v) {
  VelocityProvider<typename Alg::Vec> prov(v, model.nt);
  auto u = model.solve_displacement(prov, Direction::forward);
  auto nu = model.solve_displacement(prov, Direction::backward);
  RegistrationMaps m;
  m.forward_disp = Alg::to_spatial(u.terminal());
  m.inverse_disp = Alg::to_spatial(nu.initial());
  m.forward_pts = points_from_displacement(m.forward_disp);
  m.inverse_pts = points_from_displacement(m.inverse_disp);
  return m;
}

// det(I - Du) pointwise, derivatives taken spectrally. For maps of the form
// id - u this is the Jacobian determinant of the map itself.
inline ScalarField map_jacobian_determinant(const VectorField& disp) {
  const GridSpec& g = disp.grid;
  ScalarField du[kMaxDim][kMaxDim];
  for (int a = 0; a < g.d; ++a) {
    ScalarField ua{g, disp.comp[a]};
    for (int b = 0; b < g.d; ++b) du[a][b] = spectral_derivative(ua, b);
  }
  ScalarField out(g);
  if (g.d == 2) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a00 = 1.0 - du[0][0].v[i], a01 = -du[0][1].v[i];
      const double a10 = -du[1][0].v[i], a11 = 1.0 - du[1][1].v[i];
      out.v[i] = a00 * a11 - a01 * a10;
    }
  } else {
    for (std::size_t i = 0; i < g.size(); ++i) {
      double m[3][3];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) m[a][b] = (a == b ? 1.0 : 0.0) - du[a][b].v[i];
      out.v[i] = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }
  }
  return out;
}

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

inline ValueRange value_range(const ScalarField& f) {
  ValueRange r{f.v.empty() ? 0.0 : f.v[0], f.v.empty() ? 0.0 : f.v[0]};
  for (double x : f.v) {
    r.min = std::min(r.min, x);
    r.max = std::max(r.max, x);
  }
  return r;
}

// |warped - target|^2 / |source - target|^2; identical inputs give 0.
inline double mse_rel(const ScalarField& warped, const ScalarField& target,
                      const ScalarField& source) {
  ScalarField num = axpy(-1.0, target, warped);
  ScalarField den = axpy(-1.0, target, source);
  const double d = l2_inner(den, den);
  if (d <= 0.0) return 0.0;
  return l2_inner(num, num) / d;
}

struct DiceResult {
  double dsc = 1.0;
  bool both_empty = false;
};

// Dice overlap of one label value between two label images.
inline DiceResult dice(const ScalarField& a, const ScalarField& b, double label) {
  detail::require(a.grid == b.grid, "dice: grid mismatch");
  std::size_t na = 0, nb = 0, nab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ia = a.v[i] == label, ib = b.v[i] == label;
    na += ia;
    nb += ib;
    nab += ia && ib;
  }
  DiceResult r;
  if (na + nb == 0) {
    r.both_empty = true;
    r.dsc = 1.0;
  } else {
    r.dsc = 2.0 * static_cast<double>(nab) / static_cast<double>(na + nb);
  }
  return r;
}

// distinct nonzero values (label inventory)
inline std::vector<double> distinct_labels(const ScalarField& f) {
  std::set<double> s;
  for (double x : f.v)
    if (x != 0.0) s.insert(x);
  return std::vector<double>(s.begin(), s.end());
}

// Mean Dice over the target's label inventory.
inline double mean_dice(const ScalarField& warped_labels, const ScalarField& target_labels) {
  std::vector<double> labels = distinct_labels(target_labels);
  if (labels.empty()) return dice(warped_labels, target_labels, 1.0).dsc;
  double s = 0.0;
  for (double l : labels) s += dice(warped_labels, target_labels, l).dsc;
  return s / static_cast<double>(labels.size());
}

}  // namespace lddmm

#pragma once

// Synthetic images, label maps, and velocity fields for tests, demos, and
// the `synth` CLI command. All randomness flows through mt19937_64 plus a
// local Box-Muller transform, so a given seed yields the same fields on any
// platform (std::normal_distribution is implementation-defined; this is not).

#include <array>
#include <cstdint>
#include <random>

#include "core.hpp"
#include "io.hpp"
#include "spectral.hpp"

namespace lddmm {

namespace synthdetail {

struct Rng {
  std::mt19937_64 eng;
  bool have_spare = false;
  double spare = 0.0;

  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform() { return std::ldexp(static_cast<double>(eng()), -64); }  // [0, 1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * M_PI * u2);
    have_spare = true;
    return r * std::cos(2.0 * M_PI * u2);
  }
};

// squared periodic distance to a center, physical units
inline double periodic_r2(const GridSpec& g, const std::array<int, kMaxDim>& idx,
                          const std::array<double, kMaxDim>& center) {
  double r2 = 0.0;
  for (int a = 0; a < g.d; ++a) {
    const double L = g.extent(a);
    double dx = idx[a] * g.spacing[a] - center[a];
    dx -= L * std::round(dx / L);
    r2 += dx * dx;
  }
  return r2;
}

}  // namespace synthdetail

inline void add_gaussian(ScalarField& f, const std::array<double, kMaxDim>& center, double sigma,
                         double amplitude) {
  std::array<int, kMaxDim> idx{};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.grid.unflatten(i, idx);
    f.v[i] += amplitude * std::exp(-synthdetail::periodic_r2(f.grid, idx, center) * inv);
  }
}

inline ScalarField gaussian_bump(const GridSpec& g, const std::array<double, kMaxDim>& center,
                                 double sigma, double amplitude = 1.0) {
  ScalarField f(g);
  add_gaussian(f, center, sigma, amplitude);
  return f;
}

// smooth disc with a tanh edge of the given width
inline void add_tanh_disc(ScalarField& f, const std::array<double, kMaxDim>& center, double radius,
                          double edge, double amplitude) {
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.grid.unflatten(i, idx);
    const double r = std::sqrt(synthdetail::periodic_r2(f.grid, idx, center));
    f.v[i] += amplitude * 0.5 * (1.0 - std::tanh((r - radius) / edge));
  }
}

inline void paint_disc_label(ScalarField& f, const std::array<double, kMaxDim>& center,
                             double radius, double label) {
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.grid.unflatten(i, idx);
    if (synthdetail::periodic_r2(f.grid, idx, center) <= radius * radius) f.v[i] = label;
  }
}

inline VectorField constant_field(const GridSpec& g, const std::array<double, kMaxDim>& value) {
  VectorField f(g);
  for (int a = 0; a < g.d; ++a)
    std::fill(f.comp[a].begin(), f.comp[a].end(), value[a]);
  return f;
}

// Rigid-style rotation about the domain center (about the z axis in 3D),
// tapered by a Gaussian so the field decays smoothly toward the periodic
// boundary.
inline VectorField rotation_field(const GridSpec& g, double omega, double taper_sigma) {
  VectorField f(g);
  std::array<int, kMaxDim> idx{};
  const double cx = 0.5 * g.extent(0), cy = 0.5 * g.extent(1);
  const double inv = 1.0 / (2.0 * taper_sigma * taper_sigma);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    const double dx = idx[0] * g.spacing[0] - cx;
    const double dy = idx[1] * g.spacing[1] - cy;
    const double taper = std::exp(-(dx * dx + dy * dy) * inv);
    f.comp[0][i] = -omega * dy * taper;
    f.comp[1][i] = omega * dx * taper;
  }
  return f;
}

// ---------------------------------------------------------------------------
// seeded random band-limited fields

// Unit-scale random coefficients with Gaussian spectral decay exp(-|k|^2/k0^2),
// conjugate-symmetrized so the embedded field is real. DC is zeroed.
inline BandScalarField random_band_scalar(const BandSpec& b, std::uint64_t seed, double k0) {
  synthdetail::Rng rng(seed);
  BandScalarField f(b);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    b.unflatten(i, idx);
    double k2 = 0.0;
    for (int a = 0; a < b.d(); ++a) {
      const double k = b.signed_freq(a, idx[a]);
      k2 += k * k;
    }
    const double w = std::exp(-k2 / (k0 * k0));
    f.c[i] = cplx(rng.normal(), rng.normal()) * w;
  }
  f.c[0] = cplx(0.0, 0.0);
  conj_symmetrize(f);
  return f;
}

inline BandVectorField random_band_field(const BandSpec& b, std::uint64_t seed, double amplitude,
                                         double k0) {
  BandVectorField f(b);
  for (int a = 0; a < b.d(); ++a) {
    BandScalarField c = random_band_scalar(b, seed + 1000003ULL * static_cast<std::uint64_t>(a + 1), k0);
    f.comp[a] = std::move(c.c);
  }
  const double m = linf_norm(embed(f));
  if (m > 0.0) return scaled(f, amplitude / m);
  return f;
}

namespace synthdetail {

// an even band bound that comfortably contains modes up to ~k0
inline int band_bound_for(const GridSpec& g, double k0) {
  int min_dim = g.dims[0];
  for (int a = 1; a < g.d; ++a) min_dim = std::min(min_dim, g.dims[a]);
  int bound = std::max(4, std::min(min_dim, 2 * (static_cast<int>(k0) + 3)));
  return bound - bound % 2;
}

}  // namespace synthdetail

inline VectorField random_smooth_field(const GridSpec& g, std::uint64_t seed, double amplitude,
                                       double k0) {
  BandSpec b = BandSpec::uniform(g, synthdetail::band_bound_for(g, k0));
  return embed(random_band_field(b, seed, amplitude, k0));
}

inline ScalarField random_smooth_image(const GridSpec& g, std::uint64_t seed, double k0) {
  BandSpec b = BandSpec::uniform(g, synthdetail::band_bound_for(g, k0));
  ScalarField f = embed(random_band_scalar(b, seed, k0));
  return rescale_unit(f);
}

// ---------------------------------------------------------------------------
// fixture pairs

struct ImagePair {
  ScalarField source;
  ScalarField target;
};

// A handful of Gaussian blobs; the target perturbs centers and widths.
inline ImagePair blob_pair(const GridSpec& g, std::uint64_t seed) {
  synthdetail::Rng rng(seed);
  ImagePair p{ScalarField(g), ScalarField(g)};
  const int n_blobs = 2 + static_cast<int>(rng.uniform() * 2.0);  // 2 or 3
  for (int k = 0; k < n_blobs; ++k) {
    std::array<double, kMaxDim> c{};
    for (int a = 0; a < g.d; ++a) c[a] = rng.uniform(0.3, 0.7) * g.extent(a);
    const double sigma = rng.uniform(0.09, 0.14) * g.extent(0);
    const double amp = rng.uniform(0.6, 1.0);
    add_gaussian(p.source, c, sigma, amp);
    std::array<double, kMaxDim> ct = c;
    for (int a = 0; a < g.d; ++a) ct[a] += rng.uniform(-0.05, 0.05) * g.extent(a);
    const double sigma_t = sigma * rng.uniform(0.88, 1.12);
    add_gaussian(p.target, ct, sigma_t, amp);
  }
  p.source = rescale_unit(p.source);
  p.target = rescale_unit(p.target);
  return p;
}

struct LabelCase {
  ScalarField source;
  ScalarField target;
  ScalarField source_labels;
  ScalarField target_labels;
};

// Two discs with tanh-edged intensity and hard labels 1 and 2; the target
// displaces and rescales both discs.
inline LabelCase two_disc_case(const GridSpec& g, std::uint64_t seed) {
  synthdetail::Rng rng(seed);
  LabelCase c{ScalarField(g), ScalarField(g), ScalarField(g), ScalarField(g)};
  const double L = g.extent(0);
  const double edge = 1.5 * g.min_spacing();

  std::array<double, kMaxDim> c1{}, c2{};
  c1[0] = (0.34 + rng.uniform(-0.03, 0.03)) * L;
  c1[1] = (0.50 + rng.uniform(-0.03, 0.03)) * g.extent(1);
  c2[0] = (0.66 + rng.uniform(-0.03, 0.03)) * L;
  c2[1] = (0.50 + rng.uniform(-0.03, 0.03)) * g.extent(1);
  const double r1 = rng.uniform(0.11, 0.13) * L;
  const double r2 = rng.uniform(0.08, 0.10) * L;

  std::array<double, kMaxDim> t1 = c1, t2 = c2;
  t1[0] += rng.uniform(0.04, 0.08) * L;
  t1[1] += rng.uniform(-0.06, 0.06) * g.extent(1);
  t2[0] -= rng.uniform(0.04, 0.08) * L;
  t2[1] += rng.uniform(-0.06, 0.06) * g.extent(1);
  const double rt1 = r1 * rng.uniform(1.05, 1.2);
  const double rt2 = r2 * rng.uniform(0.8, 0.95);

  add_tanh_disc(c.source, c1, r1, edge, 1.0);
  add_tanh_disc(c.source, c2, r2, edge, 0.6);
  add_tanh_disc(c.target, t1, rt1, edge, 1.0);
  add_tanh_disc(c.target, t2, rt2, edge, 0.6);
  c.source = rescale_unit(c.source);
  c.target = rescale_unit(c.target);

  paint_disc_label(c.source_labels, c1, r1, 1.0);
  paint_disc_label(c.source_labels, c2, r2, 2.0);
  paint_disc_label(c.target_labels, t1, rt1, 1.0);
  paint_disc_label(c.target_labels, t2, rt2, 2.0);
  return c;
}

}  // namespace lddmm

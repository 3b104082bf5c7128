#pragma once

// Fourier-side machinery: band-limited (truncated-spectrum) fields, the
// projection/embedding pair between a grid and its retained band, spectral
// differentiation with the continuous symbol, the Sobolev operator, and
// truncated (de-aliased) products evaluated through the parent grid.
//
// A band-limited field stores the centered truncation of the unscaled
// forward DFT of a real grid field: frequencies k_a in [-K_a/2, K_a/2) are
// retained, and the k_a = -K_a/2 plane is forced to zero so the retained set
// is closed under conjugation. Coefficient layout mirrors DFT order: array
// index f < K/2 holds k = f, index f >= K/2 holds k = f - K.

#include <complex>
#include <vector>

#include "core.hpp"
#include "fft.hpp"

namespace lddmm {

struct BandSpec {
  GridSpec parent;
  std::array<int, kMaxDim> bounds{1, 1, 1};

  BandSpec() = default;
  BandSpec(const GridSpec& g, std::array<int, kMaxDim> k) : parent(g), bounds(k) { validate(); }

  static BandSpec uniform(const GridSpec& g, int k) {
    std::array<int, kMaxDim> b{1, 1, 1};
    for (int a = 0; a < g.d; ++a) b[a] = k;
    return BandSpec(g, b);
  }

  static BandSpec full(const GridSpec& g) {
    std::array<int, kMaxDim> b{1, 1, 1};
    for (int a = 0; a < g.d; ++a) b[a] = g.dims[a];
    return BandSpec(g, b);
  }

  void validate() const {
    parent.validate();
    for (int a = 0; a < parent.d; ++a) {
      if (bounds[a] % 2 != 0 || bounds[a] < 4 || bounds[a] > parent.dims[a])
        throw ShapeError("band bounds must be even and in [4, dims]");
    }
  }

  int d() const { return parent.d; }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < parent.d; ++a) s *= static_cast<std::size_t>(bounds[a]);
    return s;
  }

  void unflatten(std::size_t idx, std::array<int, kMaxDim>& f) const {
    for (int a = parent.d - 1; a >= 0; --a) {
      f[a] = static_cast<int>(idx % bounds[a]);
      idx /= bounds[a];
    }
  }

  std::size_t flat(const std::array<int, kMaxDim>& f) const {
    std::size_t idx = 0;
    for (int a = 0; a < parent.d; ++a) idx = idx * bounds[a] + static_cast<std::size_t>(f[a]);
    return idx;
  }

  int signed_freq(int a, int f) const { return f < bounds[a] / 2 ? f : f - bounds[a]; }
  bool is_band_nyquist(int a, int f) const { return f == bounds[a] / 2; }
  int parent_index(int a, int f) const {
    int k = signed_freq(a, f);
    return k >= 0 ? k : k + parent.dims[a];
  }
  // Continuous derivative symbol: w_a(k) = 2 pi k / (N_a h_a).
  double omega(int a, int f) const {
    return 2.0 * M_PI * signed_freq(a, f) / (parent.dims[a] * parent.spacing[a]);
  }

  bool operator==(const BandSpec& o) const { return parent == o.parent && bounds == o.bounds; }
  bool operator!=(const BandSpec& o) const { return !(*this == o); }
};

struct BandScalarField {
  BandSpec band;
  std::vector<cplx> c;

  BandScalarField() = default;
  explicit BandScalarField(const BandSpec& b) : band(b), c(b.size(), cplx(0.0, 0.0)) {}

  std::size_t size() const { return c.size(); }
};

struct BandVectorField {
  BandSpec band;
  std::array<std::vector<cplx>, kMaxDim> comp;

  BandVectorField() = default;
  explicit BandVectorField(const BandSpec& b) : band(b) {
    for (int a = 0; a < b.d(); ++a) comp[a].assign(b.size(), cplx(0.0, 0.0));
  }

  std::size_t size() const { return band.size(); }
  std::vector<cplx>& operator[](int a) { return comp[a]; }
  const std::vector<cplx>& operator[](int a) const { return comp[a]; }
};

// ---------------------------------------------------------------------------
// elementwise arithmetic on band fields

inline BandScalarField axpy(double a, const BandScalarField& x, const BandScalarField& y) {
  detail::require(x.band == y.band, "axpy: band mismatch");
  BandScalarField r(x.band);
  for (std::size_t i = 0; i < r.size(); ++i) r.c[i] = a * x.c[i] + y.c[i];
  return r;
}

inline BandVectorField axpy(double a, const BandVectorField& x, const BandVectorField& y) {
  detail::require(x.band == y.band, "axpy: band mismatch");
  BandVectorField r(x.band);
  for (int cidx = 0; cidx < x.band.d(); ++cidx)
    for (std::size_t i = 0; i < r.size(); ++i)
      r.comp[cidx][i] = a * x.comp[cidx][i] + y.comp[cidx][i];
  return r;
}

inline BandScalarField scaled(const BandScalarField& x, double a) {
  BandScalarField r(x.band);
  for (std::size_t i = 0; i < r.size(); ++i) r.c[i] = a * x.c[i];
  return r;
}

inline BandVectorField scaled(const BandVectorField& x, double a) {
  BandVectorField r(x.band);
  for (int c = 0; c < x.band.d(); ++c)
    for (std::size_t i = 0; i < r.size(); ++i) r.comp[c][i] = a * x.comp[c][i];
  return r;
}

inline double linf_norm(const BandScalarField& x) {
  double m = 0.0;
  for (const cplx& z : x.c) m = std::max(m, std::abs(z));
  return m;
}

inline double linf_norm(const BandVectorField& x) {
  double m = 0.0;
  for (int c = 0; c < x.band.d(); ++c)
    for (const cplx& z : x.comp[c]) m = std::max(m, std::abs(z));
  return m;
}

inline bool all_finite(const BandScalarField& x) {
  for (const cplx& z : x.c)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline bool all_finite(const BandVectorField& x) {
  for (int c = 0; c < x.band.d(); ++c)
    for (const cplx& z : x.comp[c])
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

// Inner product of the embedded fields, evaluated by Parseval directly on the
// coefficients. Keeping this exactly dual to embedding is what makes
// project/embed an adjoint pair in all the assembled operators.
inline double band_inner(const BandScalarField& x, const BandScalarField& y) {
  detail::require(x.band == y.band, "band_inner: band mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x.c[i].real() * y.c[i].real() + x.c[i].imag() * y.c[i].imag();
  return s * x.band.parent.cell_volume() / static_cast<double>(x.band.parent.size());
}

inline double band_inner(const BandVectorField& x, const BandVectorField& y) {
  detail::require(x.band == y.band, "band_inner: band mismatch");
  double s = 0.0;
  for (int c = 0; c < x.band.d(); ++c)
    for (std::size_t i = 0; i < x.size(); ++i)
      s += x.comp[c][i].real() * y.comp[c][i].real() + x.comp[c][i].imag() * y.comp[c][i].imag();
  return s * x.band.parent.cell_volume() / static_cast<double>(x.band.parent.size());
}

// ---------------------------------------------------------------------------
// projection (grid -> band) and embedding (band -> grid)

namespace specdetail {

// Gather retained coefficients from a full spectrum; band Nyquist planes are
// dropped to keep the truncated set closed under conjugation.
inline void gather(const BandSpec& b, const std::vector<cplx>& full, std::vector<cplx>& out) {
  std::array<int, kMaxDim> f{};
  const int d = b.d();
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.unflatten(i, f);
    bool nyq = false;
    std::size_t src = 0;
    for (int a = 0; a < d; ++a) {
      if (b.is_band_nyquist(a, f[a])) {
        nyq = true;
        break;
      }
      src = src * b.parent.dims[a] + static_cast<std::size_t>(b.parent_index(a, f[a]));
    }
    out[i] = nyq ? cplx(0.0, 0.0) : full[src];
  }
}

inline void scatter(const BandSpec& b, const std::vector<cplx>& coeffs, std::vector<cplx>& full) {
  std::array<int, kMaxDim> f{};
  const int d = b.d();
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.unflatten(i, f);
    bool nyq = false;
    std::size_t dst = 0;
    for (int a = 0; a < d; ++a) {
      if (b.is_band_nyquist(a, f[a])) {
        nyq = true;
        break;
      }
      dst = dst * b.parent.dims[a] + static_cast<std::size_t>(b.parent_index(a, f[a]));
    }
    if (!nyq) full[dst] = coeffs[i];
  }
}

inline void check_imag_residue(const GridSpec& g, const std::vector<cplx>& buf) {
  double max_re = 0.0, max_im = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    max_re = std::max(max_re, std::abs(buf[i].real()));
    max_im = std::max(max_im, std::abs(buf[i].imag()));
  }
  if (max_im > 1e-9 * std::max(max_re, 1e-12))
    throw Error("embed: conjugate symmetry violated (imaginary residue too large)");
}

}  // namespace specdetail

inline BandScalarField project(const ScalarField& f, const BandSpec& b) {
  detail::require(f.grid == b.parent, "project: grid mismatch");
  std::vector<cplx> full = fft_of(f);
  BandScalarField out(b);
  specdetail::gather(b, full, out.c);
  return out;
}

inline BandVectorField project(const VectorField& f, const BandSpec& b) {
  detail::require(f.grid == b.parent, "project: grid mismatch");
  BandVectorField out(b);
  std::vector<cplx> buf(f.grid.size());
  for (int a = 0; a < f.grid.d; ++a) {
    for (std::size_t i = 0; i < f.grid.size(); ++i) buf[i] = f.comp[a][i];
    fft_forward(f.grid, buf.data());
    specdetail::gather(b, buf, out.comp[a]);
  }
  return out;
}

inline ScalarField embed(const BandScalarField& f) {
  const GridSpec& g = f.band.parent;
  std::vector<cplx> full(g.size(), cplx(0.0, 0.0));
  specdetail::scatter(f.band, f.c, full);
  fft_backward(g, full.data());
  specdetail::check_imag_residue(g, full);
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out.v[i] = full[i].real();
  return out;
}

inline VectorField embed(const BandVectorField& f) {
  const GridSpec& g = f.band.parent;
  VectorField out(g);
  std::vector<cplx> full(g.size());
  for (int a = 0; a < g.d; ++a) {
    std::fill(full.begin(), full.end(), cplx(0.0, 0.0));
    specdetail::scatter(f.band, f.comp[a], full);
    fft_backward(g, full.data());
    specdetail::check_imag_residue(g, full);
    for (std::size_t i = 0; i < g.size(); ++i) out.comp[a][i] = full[i].real();
  }
  return out;
}

// Force exact conjugate symmetry (used when coefficients are synthesized
// directly rather than projected from a real field).
inline void conj_symmetrize(BandScalarField& f) {
  const BandSpec& b = f.band;
  std::array<int, kMaxDim> idx{}, mir{};
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.unflatten(i, idx);
    bool nyq = false;
    for (int a = 0; a < b.d(); ++a)
      if (b.is_band_nyquist(a, idx[a])) nyq = true;
    if (nyq) {
      f.c[i] = cplx(0.0, 0.0);
      continue;
    }
    for (int a = 0; a < b.d(); ++a) mir[a] = (b.bounds[a] - idx[a]) % b.bounds[a];
    std::size_t j = b.flat(mir);
    if (j < i) continue;
    cplx avg = 0.5 * (f.c[i] + std::conj(f.c[j]));
    f.c[i] = avg;
    f.c[j] = std::conj(avg);
  }
}

inline void conj_symmetrize(BandVectorField& f) {
  for (int a = 0; a < f.band.d(); ++a) {
    BandScalarField tmp(f.band);
    tmp.c = f.comp[a];
    conj_symmetrize(tmp);
    f.comp[a] = std::move(tmp.c);
  }
}

// ---------------------------------------------------------------------------
// spectral differentiation on the full grid

namespace specdetail {

// Signed frequency table for one axis with the Nyquist entry zeroed, as
// required for odd-order derivatives of real fields.
inline std::vector<double> omega_table(const GridSpec& g, int axis) {
  const int n = g.dims[axis];
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) {
    int k = j < n / 2 ? j : j - n;
    w[j] = (j == n / 2) ? 0.0 : 2.0 * M_PI * k / (n * g.spacing[axis]);
  }
  return w;
}

template <class Fn>
inline void for_each_freq(const GridSpec& g, Fn&& fn) {
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    fn(i, idx);
  }
}

}  // namespace specdetail

inline ScalarField spectral_derivative(const ScalarField& f, int axis) {
  std::vector<cplx> buf = fft_of(f);
  auto w = specdetail::omega_table(f.grid, axis);
  specdetail::for_each_freq(f.grid, [&](std::size_t i, const std::array<int, kMaxDim>& idx) {
    buf[i] *= cplx(0.0, w[idx[axis]]);
  });
  return real_ifft(f.grid, std::move(buf));
}

inline VectorField spectral_gradient(const ScalarField& f) {
  VectorField out(f.grid);
  std::vector<cplx> spec = fft_of(f);
  std::vector<cplx> buf(spec.size());
  for (int a = 0; a < f.grid.d; ++a) {
    auto w = specdetail::omega_table(f.grid, a);
    buf = spec;
    specdetail::for_each_freq(f.grid, [&](std::size_t i, const std::array<int, kMaxDim>& idx) {
      buf[i] *= cplx(0.0, w[idx[a]]);
    });
    ScalarField comp = real_ifft(f.grid, buf);
    out.comp[a] = std::move(comp.v);
  }
  return out;
}

inline ScalarField spectral_divergence(const VectorField& f) {
  const GridSpec& g = f.grid;
  std::vector<cplx> acc(g.size(), cplx(0.0, 0.0));
  std::vector<cplx> buf(g.size());
  for (int a = 0; a < g.d; ++a) {
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] = f.comp[a][i];
    fft_forward(g, buf.data());
    auto w = specdetail::omega_table(g, a);
    specdetail::for_each_freq(g, [&](std::size_t i, const std::array<int, kMaxDim>& idx) {
      acc[i] += buf[i] * cplx(0.0, w[idx[a]]);
    });
  }
  return real_ifft(g, std::move(acc));
}

// Jacobian-vector products with spectral derivatives and pointwise products:
// jac_mul(u, w)_a  = sum_b (d_b u_a) w_b
// jacT_mul(u, w)_b = sum_a (d_b u_a) w_a
inline VectorField jac_mul(const VectorField& u, const VectorField& w) {
  detail::require(u.grid == w.grid, "jac_mul: grid mismatch");
  VectorField out(u.grid);
  for (int a = 0; a < u.grid.d; ++a) {
    ScalarField ua{u.grid, u.comp[a]};
    for (int b = 0; b < u.grid.d; ++b) {
      ScalarField dba = spectral_derivative(ua, b);
      for (std::size_t i = 0; i < out.size(); ++i) out.comp[a][i] += dba.v[i] * w.comp[b][i];
    }
  }
  return out;
}

inline VectorField jacT_mul(const VectorField& u, const VectorField& w) {
  detail::require(u.grid == w.grid, "jacT_mul: grid mismatch");
  VectorField out(u.grid);
  for (int a = 0; a < u.grid.d; ++a) {
    ScalarField ua{u.grid, u.comp[a]};
    for (int b = 0; b < u.grid.d; ++b) {
      ScalarField dba = spectral_derivative(ua, b);
      for (std::size_t i = 0; i < out.size(); ++i) out.comp[b][i] += dba.v[i] * w.comp[a][i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// band-space differentiation (diagonal, no transforms)

inline BandScalarField band_derivative(const BandScalarField& f, int axis) {
  BandScalarField out(f.band);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.band.unflatten(i, idx);
    out.c[i] = f.c[i] * cplx(0.0, f.band.omega(axis, idx[axis]));
  }
  return out;
}

inline BandVectorField band_gradient(const BandScalarField& f) {
  BandVectorField out(f.band);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.band.unflatten(i, idx);
    for (int a = 0; a < f.band.d(); ++a)
      out.comp[a][i] = f.c[i] * cplx(0.0, f.band.omega(a, idx[a]));
  }
  return out;
}

inline BandScalarField band_divergence(const BandVectorField& f) {
  BandScalarField out(f.band);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.band.unflatten(i, idx);
    cplx s(0.0, 0.0);
    for (int a = 0; a < f.band.d(); ++a)
      s += f.comp[a][i] * cplx(0.0, f.band.omega(a, idx[a]));
    out.c[i] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// truncated products: star(a, b) = project(embed(a) * embed(b))
//
// Evaluated through the full parent grid, which is exact for products of
// band-limited fields up to the truncation (and alias-free whenever the
// band bounds do not exceed half the parent dims).

inline BandScalarField star(const BandScalarField& a, const BandScalarField& b) {
  detail::require(a.band == b.band, "star: band mismatch");
  ScalarField fa = embed(a), fb = embed(b);
  return project(multiply(fa, fb), a.band);
}

inline BandVectorField star(const BandScalarField& s, const BandVectorField& x) {
  detail::require(s.band == x.band, "star: band mismatch");
  ScalarField fs = embed(s);
  VectorField fx = embed(x);
  return project(multiply(fs, fx), s.band);
}

// sum_a (a_comp_a star b_comp_a) -> scalar
inline BandScalarField star_dot(const BandVectorField& a, const BandVectorField& b) {
  detail::require(a.band == b.band, "star_dot: band mismatch");
  VectorField fa = embed(a), fb = embed(b);
  return project(dot(fa, fb), a.band);
}

inline BandVectorField band_jac_mul(const BandVectorField& u, const BandVectorField& w) {
  detail::require(u.band == w.band, "band_jac_mul: band mismatch");
  VectorField we = embed(w);
  const GridSpec& g = u.band.parent;
  VectorField acc(g);
  for (int a = 0; a < u.band.d(); ++a) {
    for (int b = 0; b < u.band.d(); ++b) {
      BandScalarField comp(u.band);
      comp.c = u.comp[a];
      ScalarField dba = embed(band_derivative(comp, b));
      for (std::size_t i = 0; i < g.size(); ++i) acc.comp[a][i] += dba.v[i] * we.comp[b][i];
    }
  }
  return project(acc, u.band);
}

inline BandVectorField band_jacT_mul(const BandVectorField& u, const BandVectorField& w) {
  detail::require(u.band == w.band, "band_jacT_mul: band mismatch");
  VectorField we = embed(w);
  const GridSpec& g = u.band.parent;
  VectorField acc(g);
  for (int a = 0; a < u.band.d(); ++a) {
    for (int b = 0; b < u.band.d(); ++b) {
      BandScalarField comp(u.band);
      comp.c = u.comp[a];
      ScalarField dba = embed(band_derivative(comp, b));
      for (std::size_t i = 0; i < g.size(); ++i) acc.comp[b][i] += dba.v[i] * we.comp[a][i];
    }
  }
  return project(acc, u.band);
}

// ---------------------------------------------------------------------------
// Sobolev operator L = (Id - alpha Laplacian)^s, diagonal in frequency with
// symbol (1 + alpha sum_a w_a(k)^2)^s. The symbol is >= 1 everywhere and
// equals 1 at k = 0, so L is self-adjoint positive definite and its inverse
// is a smoothing preconditioner.

struct SobolevOperator {
  double alpha = 0.0025;
  int s = 2;

  SobolevOperator() = default;
  SobolevOperator(double alpha_, int s_) : alpha(alpha_), s(s_) {
    if (!(alpha > 0.0) || s < 1) throw ShapeError("sobolev: alpha > 0 and s >= 1 required");
  }

  double symbol(double omega_sq_sum) const { return std::pow(1.0 + alpha * omega_sq_sum, s); }

  BandVectorField apply(const BandVectorField& v, bool inverse = false) const {
    BandVectorField out(v.band);
    std::array<int, kMaxDim> idx{};
    for (std::size_t i = 0; i < v.size(); ++i) {
      v.band.unflatten(i, idx);
      double w2 = 0.0;
      for (int a = 0; a < v.band.d(); ++a) {
        double w = v.band.omega(a, idx[a]);
        w2 += w * w;
      }
      double m = symbol(w2);
      if (inverse) m = 1.0 / m;
      for (int a = 0; a < v.band.d(); ++a) out.comp[a][i] = v.comp[a][i] * m;
    }
    return out;
  }

  VectorField apply(const VectorField& v, bool inverse = false) const {
    const GridSpec& g = v.grid;
    VectorField out(g);
    std::array<std::vector<double>, kMaxDim> w;
    for (int a = 0; a < g.d; ++a) {
      // Even symbol: keep the Nyquist frequency (it enters squared).
      w[a].resize(g.dims[a]);
      for (int j = 0; j < g.dims[a]; ++j) {
        int k = j < g.dims[a] / 2 ? j : j - g.dims[a];
        w[a][j] = 2.0 * M_PI * k / (g.dims[a] * g.spacing[a]);
      }
    }
    std::vector<cplx> buf(g.size());
    for (int c = 0; c < g.d; ++c) {
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] = v.comp[c][i];
      fft_forward(g, buf.data());
      specdetail::for_each_freq(g, [&](std::size_t i, const std::array<int, kMaxDim>& idx) {
        double w2 = 0.0;
        for (int a = 0; a < g.d; ++a) w2 += w[a][idx[a]] * w[a][idx[a]];
        double m = symbol(w2);
        buf[i] *= inverse ? 1.0 / m : m;
      });
      fft_backward(g, buf.data());
      for (std::size_t i = 0; i < g.size(); ++i) out.comp[c][i] = buf[i].real();
    }
    return out;
  }
};

}  // namespace lddmm

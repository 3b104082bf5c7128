#pragma once

// Grids, scalar/vector fields on periodic rectangular domains, and the
// elementwise arithmetic shared by every other header.
//
// Conventions:
//  - fields are immutable value objects; every operation returns a new field
//  - storage is row-major with the fastest axis last (axis 0 is slowest)
//  - the domain is periodic with extent dims[a]*spacing[a] along axis a

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lddmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structural problems: mismatched grids, invalid sizes, bad arguments.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values detected during time integration; carries the step index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step_index)
      : Error(what + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
  int step = -1;
};

inline constexpr int kMaxDim = 3;

struct GridSpec {
  int d = 0;
  std::array<int, kMaxDim> dims{1, 1, 1};
  std::array<double, kMaxDim> spacing{1.0, 1.0, 1.0};

  GridSpec() = default;

  GridSpec(std::vector<int> n, std::vector<double> h) {
    d = static_cast<int>(n.size());
    if (d < 2 || d > kMaxDim) throw ShapeError("grid dimension must be 2 or 3");
    if (h.size() != n.size()) throw ShapeError("dims/spacing size mismatch");
    for (int a = 0; a < d; ++a) {
      dims[a] = n[a];
      spacing[a] = h[a];
    }
    validate();
  }

  static GridSpec uniform(int d, int n, double h = 1.0) {
    GridSpec g;
    g.d = d;
    if (d < 2 || d > kMaxDim) throw ShapeError("grid dimension must be 2 or 3");
    for (int a = 0; a < d; ++a) {
      g.dims[a] = n;
      g.spacing[a] = h;
    }
    g.validate();
    return g;
  }

  void validate() const {
    if (d < 2 || d > kMaxDim) throw ShapeError("grid dimension must be 2 or 3");
    for (int a = 0; a < d; ++a) {
      if (dims[a] < 4 || dims[a] % 2 != 0)
        throw ShapeError("grid dims must be even and >= 4");
      if (!(spacing[a] > 0.0)) throw ShapeError("grid spacing must be positive");
    }
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(dims[a]);
    return s;
  }

  double extent(int a) const { return dims[a] * spacing[a]; }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < d; ++a) v *= spacing[a];
    return v;
  }

  double min_spacing() const {
    double h = spacing[0];
    for (int a = 1; a < d; ++a) h = std::min(h, spacing[a]);
    return h;
  }

  // Flat index from per-axis indices (only the first d entries are read).
  std::size_t flat(const std::array<int, kMaxDim>& i) const {
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * dims[a] + static_cast<std::size_t>(i[a]);
    return idx;
  }

  void unflatten(std::size_t idx, std::array<int, kMaxDim>& i) const {
    for (int a = d - 1; a >= 0; --a) {
      i[a] = static_cast<int>(idx % dims[a]);
      idx /= dims[a];
    }
  }

  bool operator==(const GridSpec& o) const {
    if (d != o.d) return false;
    for (int a = 0; a < d; ++a)
      if (dims[a] != o.dims[a] || spacing[a] != o.spacing[a]) return false;
    return true;
  }
  bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

namespace detail {
inline void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}
}  // namespace detail

struct ScalarField {
  GridSpec grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), v(g.size(), fill) {}
  ScalarField(const GridSpec& g, std::vector<double> values) : grid(g), v(std::move(values)) {
    detail::require(v.size() == grid.size(), "scalar field payload size mismatch");
  }

  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

struct VectorField {
  GridSpec grid;
  std::array<std::vector<double>, kMaxDim> comp;

  VectorField() = default;
  explicit VectorField(const GridSpec& g, double fill = 0.0) : grid(g) {
    for (int a = 0; a < g.d; ++a) comp[a].assign(g.size(), fill);
  }

  std::size_t size() const { return grid.size(); }
  std::vector<double>& operator[](int a) { return comp[a]; }
  const std::vector<double>& operator[](int a) const { return comp[a]; }
};

inline bool all_finite(const ScalarField& f) {
  for (double x : f.v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const VectorField& f) {
  for (int a = 0; a < f.grid.d; ++a)
    for (double x : f.comp[a])
      if (!std::isfinite(x)) return false;
  return true;
}

inline double linf_norm(const ScalarField& f) {
  double m = 0.0;
  for (double x : f.v) m = std::max(m, std::abs(x));
  return m;
}

inline double linf_norm(const VectorField& f) {
  double m = 0.0;
  for (int a = 0; a < f.grid.d; ++a)
    for (double x : f.comp[a]) m = std::max(m, std::abs(x));
  return m;
}

// a*x + y
inline ScalarField axpy(double a, const ScalarField& x, const ScalarField& y) {
  detail::require(x.grid == y.grid, "axpy: grid mismatch");
  ScalarField r(x.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r.v[i] = a * x.v[i] + y.v[i];
  return r;
}

inline VectorField axpy(double a, const VectorField& x, const VectorField& y) {
  detail::require(x.grid == y.grid, "axpy: grid mismatch");
  VectorField r(x.grid);
  for (int c = 0; c < x.grid.d; ++c)
    for (std::size_t i = 0; i < r.size(); ++i) r.comp[c][i] = a * x.comp[c][i] + y.comp[c][i];
  return r;
}

inline ScalarField scaled(const ScalarField& x, double a) {
  ScalarField r(x.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r.v[i] = a * x.v[i];
  return r;
}

inline VectorField scaled(const VectorField& x, double a) {
  VectorField r(x.grid);
  for (int c = 0; c < x.grid.d; ++c)
    for (std::size_t i = 0; i < r.size(); ++i) r.comp[c][i] = a * x.comp[c][i];
  return r;
}

// Discrete L2 inner product with voxel-volume weighting.
inline double l2_inner(const ScalarField& x, const ScalarField& y) {
  detail::require(x.grid == y.grid, "l2_inner: grid mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.v[i] * y.v[i];
  return s * x.grid.cell_volume();
}

inline double l2_inner(const VectorField& x, const VectorField& y) {
  detail::require(x.grid == y.grid, "l2_inner: grid mismatch");
  double s = 0.0;
  for (int a = 0; a < x.grid.d; ++a)
    for (std::size_t i = 0; i < x.size(); ++i) s += x.comp[a][i] * y.comp[a][i];
  return s * x.grid.cell_volume();
}

inline double l2_norm(const ScalarField& x) { return std::sqrt(l2_inner(x, x)); }
inline double l2_norm(const VectorField& x) { return std::sqrt(l2_inner(x, x)); }

// Pointwise products.
inline ScalarField multiply(const ScalarField& x, const ScalarField& y) {
  detail::require(x.grid == y.grid, "multiply: grid mismatch");
  ScalarField r(x.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r.v[i] = x.v[i] * y.v[i];
  return r;
}

inline VectorField multiply(const ScalarField& s, const VectorField& x) {
  detail::require(s.grid == x.grid, "multiply: grid mismatch");
  VectorField r(x.grid);
  for (int a = 0; a < x.grid.d; ++a)
    for (std::size_t i = 0; i < r.size(); ++i) r.comp[a][i] = s.v[i] * x.comp[a][i];
  return r;
}

inline ScalarField dot(const VectorField& x, const VectorField& y) {
  detail::require(x.grid == y.grid, "dot: grid mismatch");
  ScalarField r(x.grid);
  for (int a = 0; a < x.grid.d; ++a)
    for (std::size_t i = 0; i < r.size(); ++i) r.v[i] += x.comp[a][i] * y.comp[a][i];
  return r;
}

// Map holding the node coordinates x (the identity transformation).
inline VectorField identity_map(const GridSpec& g) {
  VectorField r(g);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    for (int a = 0; a < g.d; ++a) r.comp[a][i] = idx[a] * g.spacing[a];
  }
  return r;
}

enum class Parameterization { stationary, nonstationary };

// Velocity flow over [0,1]: one field (stationary) or nt+1 node fields at
// t_i = i/nt with piecewise-linear interpolation in time.
template <class VecT>
struct TimeVaryingVelocity {
  Parameterization param = Parameterization::stationary;
  int nt = 1;
  std::vector<VecT> fields;

  static TimeVaryingVelocity stationary(VecT f, int nt) {
    detail::require(nt >= 1, "velocity: nt must be >= 1");
    TimeVaryingVelocity v;
    v.param = Parameterization::stationary;
    v.nt = nt;
    v.fields.push_back(std::move(f));
    return v;
  }

  static TimeVaryingVelocity nonstationary(std::vector<VecT> fs) {
    detail::require(fs.size() >= 2, "velocity: nonstationary needs >= 2 node fields");
    TimeVaryingVelocity v;
    v.param = Parameterization::nonstationary;
    v.nt = static_cast<int>(fs.size()) - 1;
    v.fields = std::move(fs);
    return v;
  }

  bool is_stationary() const { return param == Parameterization::stationary; }
  int node_count() const { return is_stationary() ? 1 : nt + 1; }

  const VecT& node(int i) const { return is_stationary() ? fields[0] : fields[i]; }
  VecT& node(int i) { return is_stationary() ? fields[0] : fields[i]; }

  VecT sample(double t) const {
    if (t < -1e-12 || t > 1.0 + 1e-12) throw ShapeError("sample: t outside [0,1]");
    if (is_stationary()) return fields[0];
    double s = t * nt;
    int i = static_cast<int>(std::floor(s));
    if (i < 0) i = 0;
    if (i >= nt) i = nt - 1;
    double w = s - i;
    if (w < 1e-14) return fields[i];
    if (w > 1.0 - 1e-14) return fields[i + 1];
    return axpy(1.0 - w, fields[i], scaled(fields[i + 1], w));
  }
};

}  // namespace lddmm

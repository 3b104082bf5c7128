#pragma once

// Time integration of transport equations on [0, 1].
//
// Every equation in the registration models is integrated in material form
//   D_t q = f(q, t)   (D_t = material derivative along v)
// either forward from an initial condition or backward from a terminal one.
// Two schemes are provided through one interface:
//   - rk4_integrate: classic RK4 in Eulerian form; the caller supplies the
//     full right-hand side (source minus advection).
//   - sl_integrate: semi-Lagrangian RK2. Departure points are traced with a
//     second-order two-stage rule, states are pulled back by cubic
//     interpolation, and sources enter through the trapezoidal (Heun)
//     correction along the characteristic.
// Both store all nt+1 time nodes (node i lives at t = i/nt).

#include <optional>
#include <type_traits>
#include <vector>

#include "core.hpp"
#include "interp.hpp"
#include "spectral.hpp"

namespace lddmm {

enum class Direction { forward, backward };

template <class Q>
struct TransportSeries {
  int nt = 0;
  std::vector<Q> nodes;  // nt + 1 entries
  double cfl = 0.0;      // max over nodes of |v|_inf * dt / min(h), informational

  const Q& node(int i) const { return nodes.at(static_cast<std::size_t>(i)); }
  const Q& initial() const { return nodes.front(); }
  const Q& terminal() const { return nodes.back(); }
};

// Linear-in-time sample of a stored trajectory. Incremental right-hand sides
// evaluate the base trajectory this way at RK4 stage midpoints, which keeps
// the discrete forward and adjoint integrators exact transposes.
template <class Q>
Q sample_nodes(const TransportSeries<Q>& s, double t) {
  detail::require(s.nt >= 1 && !s.nodes.empty(), "sample_nodes: empty series");
  if (t < -1e-12 || t > 1.0 + 1e-12) throw ShapeError("sample_nodes: t outside [0, 1]");
  double u = std::min(std::max(t, 0.0), 1.0) * s.nt;
  int i = std::min(static_cast<int>(std::floor(u)), s.nt - 1);
  double w = u - i;
  if (w < 1e-14) return s.nodes[static_cast<std::size_t>(i)];
  if (w > 1.0 - 1e-14) return s.nodes[static_cast<std::size_t>(i) + 1];
  return axpy(1.0 - w, s.nodes[static_cast<std::size_t>(i)],
              scaled(s.nodes[static_cast<std::size_t>(i) + 1], w));
}

// ---------------------------------------------------------------------------
// state composition with departure points (cubic pull-back)

inline ScalarField advect_state(const ScalarField& q, const VectorField& points) {
  return warp(q, points, Interp::cubic);
}

inline VectorField advect_state(const VectorField& q, const VectorField& points) {
  return warp(q, points, Interp::cubic);
}

inline BandScalarField advect_state(const BandScalarField& q, const VectorField& points) {
  return project(warp(embed(q), points, Interp::cubic), q.band);
}

inline BandVectorField advect_state(const BandVectorField& q, const VectorField& points) {
  return project(warp(embed(q), points, Interp::cubic), q.band);
}

// ---------------------------------------------------------------------------
// departure-point tracing (one step of size dt)
//
// Forward marching (arrival at the later node): X* = x - dt v_grid(x),
// X = x - dt/2 (v_traced(X*) + v_grid(x)), where v_grid is the velocity at
// the arrival time on the grid and v_traced the velocity at the departure
// time. Backward marching mirrors with a positive trace direction.

inline VectorField sl_departure(const VectorField& v_grid, const VectorSampler& v_traced,
                                double dt, Direction dir) {
  const GridSpec& g = v_grid.grid;
  detail::require(v_traced.grid == g, "sl_departure: grid mismatch");
  const double sgn = (dir == Direction::forward) ? -1.0 : 1.0;
  VectorField out(g);
  std::array<int, kMaxDim> idx{};
  double x[kMaxDim], xs[kMaxDim], vm[kMaxDim];
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    for (int a = 0; a < g.d; ++a) {
      x[a] = idx[a] * g.spacing[a];
      xs[a] = x[a] + sgn * dt * v_grid.comp[a][i];
    }
    v_traced(xs, vm);
    for (int a = 0; a < g.d; ++a)
      out.comp[a][i] = x[a] + sgn * 0.5 * dt * (vm[a] + v_grid.comp[a][i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// velocity provider: memoizes per-node spatial embeddings, cubic samplers,
// divergences, and departure points. Stationary velocities collapse every
// node onto one cache slot.

template <class VecT>
struct VelocityProvider {
  using DivT =
      std::conditional_t<std::is_same_v<VecT, BandVectorField>, BandScalarField, ScalarField>;

  TimeVaryingVelocity<VecT> vel;
  int nt = 0;
  double dt = 0.0;

  explicit VelocityProvider(TimeVaryingVelocity<VecT> v, int nt_) : vel(std::move(v)), nt(nt_) {
    detail::require(nt >= 1, "velocity provider: nt >= 1 required");
    if (!vel.is_stationary())
      detail::require(vel.node_count() == nt + 1,
                      "nonstationary velocity nodes must align with transport nodes");
    dt = 1.0 / nt;
    const int slots = vel.is_stationary() ? 1 : nt + 1;
    spatial_.resize(slots);
    sampler_.resize(slots);
    div_.resize(slots);
    const int dep_slots = vel.is_stationary() ? 1 : nt;
    dep_fwd_.resize(dep_slots);
    dep_bwd_.resize(dep_slots);
  }

  bool is_stationary() const { return vel.is_stationary(); }

  const VecT& node(int i) const {
    check_node(i);
    return vel.node(vel.is_stationary() ? 0 : i);
  }

  // Linear-in-time value at arbitrary t (RK4 stage midpoints).
  VecT at(double t) const { return vel.sample(t); }

  const VectorField& spatial_node(int i) const {
    check_node(i);
    auto& slot = spatial_[node_slot(i)];
    if (!slot) slot = to_spatial(node(i));
    return *slot;
  }

  const VectorSampler& sampler_node(int i) const {
    check_node(i);
    auto& slot = sampler_[node_slot(i)];
    if (!slot) slot = VectorSampler(spatial_node(i), Interp::cubic);
    return *slot;
  }

  const DivT& div_node(int i) const {
    check_node(i);
    auto& slot = div_[node_slot(i)];
    if (!slot) slot = divergence_of(node(i));
    return *slot;
  }

  DivT div_at(double t) const {
    if (vel.is_stationary()) return div_node(0);
    double u = std::min(std::max(t, 0.0), 1.0) * nt;
    int i = std::min(static_cast<int>(std::floor(u)), nt - 1);
    double w = u - i;
    if (w < 1e-14) return div_node(i);
    if (w > 1.0 - 1e-14) return div_node(i + 1);
    return axpy(1.0 - w, div_node(i), scaled(div_node(i + 1), w));
  }

  // Departure points for step i: forward serves the march from node i to
  // node i+1, backward the march from node i+1 down to node i.
  const VectorField& departure(int step, Direction dir) const {
    detail::require(step >= 0 && step < nt, "departure: step out of range");
    const int slot_idx = vel.is_stationary() ? 0 : step;
    auto& slot = (dir == Direction::forward) ? dep_fwd_[slot_idx] : dep_bwd_[slot_idx];
    if (!slot) {
      if (dir == Direction::forward)
        slot = sl_departure(spatial_node(step + 1), sampler_node(step), dt, dir);
      else
        slot = sl_departure(spatial_node(step), sampler_node(step + 1), dt, dir);
    }
    return *slot;
  }

  double cfl() const {
    const int last = vel.is_stationary() ? 0 : nt;
    double vmax = 0.0;
    for (int i = 0; i <= last; ++i) vmax = std::max(vmax, linf_norm(spatial_node(i)));
    return vmax * dt / grid().min_spacing();
  }

  const GridSpec& grid() const {
    if constexpr (std::is_same_v<VecT, BandVectorField>)
      return vel.node(0).band.parent;
    else
      return vel.node(0).grid;
  }

 private:
  int node_slot(int i) const { return vel.is_stationary() ? 0 : i; }
  void check_node(int i) const {
    detail::require(i >= 0 && i <= nt, "velocity provider: node out of range");
  }

  static VectorField to_spatial(const VectorField& v) { return v; }
  static VectorField to_spatial(const BandVectorField& v) { return embed(v); }
  static ScalarField divergence_of(const VectorField& v) { return spectral_divergence(v); }
  static BandScalarField divergence_of(const BandVectorField& v) { return band_divergence(v); }

  mutable std::vector<std::optional<VectorField>> spatial_;
  mutable std::vector<std::optional<VectorSampler>> sampler_;
  mutable std::vector<std::optional<DivT>> div_;
  mutable std::vector<std::optional<VectorField>> dep_fwd_, dep_bwd_;
};

// ---------------------------------------------------------------------------
// integrators

namespace transportdetail {

template <class Q>
void check_finite(const Q& q, int step) {
  if (!all_finite(q)) throw DivergenceError("transport produced non-finite values", step);
}

}  // namespace transportdetail

// Classic RK4 on dq/dt = rhs(q, t), rhs being the full Eulerian derivative.
// Direction::backward starts from the terminal condition at t = 1.
template <class Q, class Rhs>
TransportSeries<Q> rk4_integrate(const Q& q_init, int nt, Direction dir, Rhs&& rhs) {
  if (nt < 2) throw ShapeError("rk4 requires nt >= 2");
  TransportSeries<Q> out;
  out.nt = nt;
  out.nodes.resize(static_cast<std::size_t>(nt) + 1);
  const bool fwd = (dir == Direction::forward);
  const double dt = fwd ? 1.0 / nt : -1.0 / nt;
  int at = fwd ? 0 : nt;
  out.nodes[static_cast<std::size_t>(at)] = q_init;
  for (int s = 0; s < nt; ++s) {
    const Q& q = out.nodes[static_cast<std::size_t>(at)];
    const double t = static_cast<double>(at) / nt;
    Q k1 = rhs(q, t);
    Q k2 = rhs(axpy(0.5 * dt, k1, q), t + 0.5 * dt);
    Q k3 = rhs(axpy(0.5 * dt, k2, q), t + 0.5 * dt);
    Q k4 = rhs(axpy(dt, k3, q), t + dt);
    Q next = axpy(dt / 6.0, k1,
                  axpy(dt / 3.0, k2, axpy(dt / 3.0, k3, axpy(dt / 6.0, k4, q))));
    transportdetail::check_finite(next, s);
    at += fwd ? 1 : -1;
    out.nodes[static_cast<std::size_t>(at)] = std::move(next);
  }
  return out;
}

// Semi-Lagrangian RK2. src(q, node_index) returns the material source D_t q;
// pass nullptr for pure advection. Sources are injected trapezoidally: the
// old-time source is advected along the characteristic, a predictor state is
// formed, and the new-time source is evaluated on it.
template <class Q, class VecT, class Src>
TransportSeries<Q> sl_integrate(const Q& q_init, int nt, Direction dir,
                                const VelocityProvider<VecT>& vel, Src&& src) {
  detail::require(nt >= 1, "sl requires nt >= 1");
  detail::require(vel.nt == nt, "sl_integrate: provider step count mismatch");
  constexpr bool kZeroSource = std::is_same_v<std::decay_t<Src>, std::nullptr_t>;
  TransportSeries<Q> out;
  out.nt = nt;
  out.nodes.resize(static_cast<std::size_t>(nt) + 1);
  const double dt = 1.0 / nt;
  const bool fwd = (dir == Direction::forward);
  out.nodes[static_cast<std::size_t>(fwd ? 0 : nt)] = q_init;
  for (int s = 0; s < nt; ++s) {
    const int from = fwd ? s : nt - s;        // node being left
    const int to = fwd ? s + 1 : nt - s - 1;  // node being filled
    const int step = fwd ? s : nt - s - 1;    // spatial step index in [0, nt)
    const VectorField& X = vel.departure(step, dir);
    const Q& q_from = out.nodes[static_cast<std::size_t>(from)];
    Q A = advect_state(q_from, X);
    if constexpr (kZeroSource) {
      (void)src;
      transportdetail::check_finite(A, s);
      out.nodes[static_cast<std::size_t>(to)] = std::move(A);
    } else {
      const double sdt = fwd ? dt : -dt;
      Q f_from = advect_state(src(q_from, from), X);
      Q q_star = axpy(sdt, f_from, A);
      Q f_to = src(q_star, to);
      Q next = axpy(0.5 * sdt, f_from, axpy(0.5 * sdt, f_to, A));
      transportdetail::check_finite(next, s);
      out.nodes[static_cast<std::size_t>(to)] = std::move(next);
    }
  }
  return out;
}

}  // namespace lddmm

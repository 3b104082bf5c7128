#pragma once

// The three registration formulations over one algebra abstraction.
//
// Energy: E(v) = 1/2 sum_i w_i <L v_i, v_i>  +  (1/sigma^2) |m(1) - I1|^2,
// with trapezoidal time weights w_i and m transported by v from m(0) = I0.
// The formulations differ in which quantities are evolved:
//   original:    image state m forward, scalar adjoint lambda backward
//                (continuity), gradient node term lambda grad(m).
//   state:       displacement u forward; m(t) and lambda(t) reconstructed
//                through the flow maps (u, nu, and the Jacobian factor U),
//                gradient node term as in `original` on the reconstructions.
//   deformation: displacement u forward; vector momentum rho backward by
//                componentwise continuity, gradient node term
//                rho - (Du)^T rho.
// Hessian-vector products are Gauss-Newton: the data term is linearized
// through the incremental state and the resulting normal-operator form is
// symmetric positive definite about any velocity (exactly so at v = 0 under
// this discretization, to O(dt^2) elsewhere).
//
// The algebra parameter selects where velocities live: SpatialAlgebra keeps
// everything on the grid, BandAlgebra keeps velocity-like quantities as
// truncated Fourier coefficients with products evaluated through the grid.

#include <vector>

#include "core.hpp"
#include "interp.hpp"
#include "spectral.hpp"
#include "transport.hpp"

namespace lddmm {

enum class Variant { original, state_equation, deformation_state_equation };
enum class Integrator { rk4, sl };

// Trapezoid weights over nt+1 time nodes; they sum to 1. These are the only
// quadrature weights compatible with the transport discretization: both
// integrators reduce to exactly this rule for source integration at v = 0.
inline std::vector<double> trapezoid_weights(int nt) {
  detail::require(nt >= 1, "trapezoid_weights: nt >= 1");
  std::vector<double> w(static_cast<std::size_t>(nt) + 1, 1.0 / nt);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

// maps: points(x) = x - displacement(x)
inline VectorField points_from_displacement(const VectorField& disp) {
  return axpy(-1.0, disp, identity_map(disp.grid));
}

// ---------------------------------------------------------------------------
// representation-generic inner products and velocity-container helpers

inline double rep_inner(const ScalarField& a, const ScalarField& b) { return l2_inner(a, b); }
inline double rep_inner(const VectorField& a, const VectorField& b) { return l2_inner(a, b); }
inline double rep_inner(const BandScalarField& a, const BandScalarField& b) {
  return band_inner(a, b);
}
inline double rep_inner(const BandVectorField& a, const BandVectorField& b) {
  return band_inner(a, b);
}

template <class VecT>
const VecT& tv_node(const TimeVaryingVelocity<VecT>& tv, int i) {
  return tv.is_stationary() ? tv.node(0) : tv.node(i);
}

template <class VecT>
TimeVaryingVelocity<VecT> tv_axpy(double a, const TimeVaryingVelocity<VecT>& x,
                                  const TimeVaryingVelocity<VecT>& y) {
  detail::require(x.param == y.param && x.node_count() == y.node_count() && x.nt == y.nt,
                  "tv_axpy: shape mismatch");
  std::vector<VecT> fields;
  fields.reserve(x.node_count());
  for (int i = 0; i < x.node_count(); ++i) fields.push_back(axpy(a, x.node(i), y.node(i)));
  if (x.is_stationary()) return TimeVaryingVelocity<VecT>::stationary(std::move(fields[0]), x.nt);
  return TimeVaryingVelocity<VecT>::nonstationary(std::move(fields));
}

template <class VecT>
TimeVaryingVelocity<VecT> tv_scaled(const TimeVaryingVelocity<VecT>& x, double a) {
  std::vector<VecT> fields;
  fields.reserve(x.node_count());
  for (int i = 0; i < x.node_count(); ++i) fields.push_back(scaled(x.node(i), a));
  if (x.is_stationary()) return TimeVaryingVelocity<VecT>::stationary(std::move(fields[0]), x.nt);
  return TimeVaryingVelocity<VecT>::nonstationary(std::move(fields));
}

// Inner product of the optimization space: plain for stationary fields,
// trapezoid-weighted over time nodes otherwise. Node gradients are Riesz
// representers under exactly this product.
template <class VecT>
double tv_inner(const TimeVaryingVelocity<VecT>& a, const TimeVaryingVelocity<VecT>& b) {
  detail::require(a.param == b.param && a.node_count() == b.node_count(),
                  "tv_inner: shape mismatch");
  if (a.is_stationary()) return rep_inner(a.node(0), b.node(0));
  const auto w = trapezoid_weights(a.nt);
  double s = 0.0;
  for (int i = 0; i < a.node_count(); ++i) s += w[static_cast<std::size_t>(i)] * rep_inner(a.node(i), b.node(i));
  return s;
}

template <class VecT>
double tv_linf(const TimeVaryingVelocity<VecT>& a) {
  double m = 0.0;
  for (int i = 0; i < a.node_count(); ++i) m = std::max(m, linf_norm(a.node(i)));
  return m;
}

template <class VecT>
bool tv_all_finite(const TimeVaryingVelocity<VecT>& a) {
  for (int i = 0; i < a.node_count(); ++i)
    if (!all_finite(a.node(i))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// algebra policies

struct SpatialAlgebra {
  using Scal = ScalarField;
  using Vec = VectorField;
  using Domain = GridSpec;

  static const GridSpec& grid(const Domain& d) { return d; }
  static Scal zero_scal(const Domain& d) { return ScalarField(d); }
  static Vec zero_vec(const Domain& d) { return VectorField(d); }

  static Vec grad(const Scal& f) { return spectral_gradient(f); }
  static Scal div(const Vec& v) { return spectral_divergence(v); }
  static Vec jac(const Vec& u, const Vec& w) { return jac_mul(u, w); }
  static Vec jacT(const Vec& u, const Vec& w) { return jacT_mul(u, w); }
  static Scal mul(const Scal& a, const Scal& b) { return multiply(a, b); }
  static Vec mul(const Scal& a, const Vec& b) { return multiply(a, b); }
  static Scal vdot(const Vec& a, const Vec& b) { return dot(a, b); }

  static ScalarField to_spatial(const Scal& f) { return f; }
  static VectorField to_spatial(const Vec& f) { return f; }
  static Scal from_spatial(const ScalarField& f, const Domain&) { return f; }
  static Vec from_spatial(const VectorField& f, const Domain&) { return f; }

  // image gradient as seen by this representation
  static VectorField filtered_gradient(const ScalarField& img, const Domain&) {
    return spectral_gradient(img);
  }

  static void check_vec(const Vec& v, const Domain& d) {
    detail::require(v.grid == d, "velocity grid does not match the model domain");
  }
};

struct BandAlgebra {
  using Scal = BandScalarField;
  using Vec = BandVectorField;
  using Domain = BandSpec;

  static const GridSpec& grid(const Domain& d) { return d.parent; }
  static Scal zero_scal(const Domain& d) { return BandScalarField(d); }
  static Vec zero_vec(const Domain& d) { return BandVectorField(d); }

  static Vec grad(const Scal& f) { return band_gradient(f); }
  static Scal div(const Vec& v) { return band_divergence(v); }
  static Vec jac(const Vec& u, const Vec& w) { return band_jac_mul(u, w); }
  static Vec jacT(const Vec& u, const Vec& w) { return band_jacT_mul(u, w); }
  static Scal mul(const Scal& a, const Scal& b) { return star(a, b); }
  static Vec mul(const Scal& a, const Vec& b) { return star(a, b); }
  static Scal vdot(const Vec& a, const Vec& b) { return star_dot(a, b); }

  static ScalarField to_spatial(const Scal& f) { return embed(f); }
  static VectorField to_spatial(const Vec& f) { return embed(f); }
  static Scal from_spatial(const ScalarField& f, const Domain& d) { return project(f, d); }
  static Vec from_spatial(const VectorField& f, const Domain& d) { return project(f, d); }

  static VectorField filtered_gradient(const ScalarField& img, const Domain& d) {
    return embed(band_gradient(project(img, d)));
  }

  static void check_vec(const Vec& v, const Domain& d) {
    detail::require(v.band == d, "velocity band does not match the model domain");
  }
};

// ---------------------------------------------------------------------------
// forward cache: everything the gradient and Hessian-vector products reuse

template <class Alg>
struct ForwardCache {
  using Scal = typename Alg::Scal;
  using Vec = typename Alg::Vec;

  explicit ForwardCache(VelocityProvider<Vec> p) : provider(std::move(p)) {}

  VelocityProvider<Vec> provider;
  bool with_adjoint = false;
  double cfl = 0.0;
  double energy = 0.0, energy_reg = 0.0, energy_data = 0.0;

  ScalarField m1;        // final transported/warped image on the grid
  ScalarField residual;  // m1 - I1

  // original: image trajectory, its node gradients, scalar adjoint
  TransportSeries<Scal> m;
  TransportSeries<Vec> gm;
  TransportSeries<Scal> lam;

  // state/deformation: displacement trajectory and the map at t = 1
  TransportSeries<Vec> u;
  VectorField phi1_pts;

  // state: reconstruction machinery
  TransportSeries<Vec> nu;
  TransportSeries<Scal> big_u;
  std::vector<ScalarField> jac_factor;  // J(t_i) = 1 - embed(U_i)
  std::vector<VectorField> psi_pts;     // inverse-side points at t_i
  std::vector<Scal> lam_nodes;          // reconstructed adjoint, projected

  // state/deformation: image gradient pulled to t = 1
  VectorField grad_src_warped;

  // deformation: vector momentum trajectory
  TransportSeries<Vec> rho;
};

// ---------------------------------------------------------------------------
// the model

template <class Alg>
struct Model {
  using Scal = typename Alg::Scal;
  using Vec = typename Alg::Vec;
  using Domain = typename Alg::Domain;
  using TV = TimeVaryingVelocity<Vec>;
  using Cache = ForwardCache<Alg>;

  Domain dom;
  ScalarField source;  // I0
  ScalarField target;  // I1
  Variant variant = Variant::original;
  Integrator integrator = Integrator::sl;
  int nt = 5;
  double sigma2 = 1.0;
  SobolevOperator lop{};

  Model(Domain d, ScalarField I0, ScalarField I1)
      : dom(std::move(d)), source(std::move(I0)), target(std::move(I1)) {
    detail::require(source.grid == Alg::grid(dom) && target.grid == Alg::grid(dom),
                    "model images must live on the domain grid");
  }

  const GridSpec& grid() const { return Alg::grid(dom); }

  TV zero_velocity(Parameterization p) const {
    if (p == Parameterization::stationary) return TV::stationary(Alg::zero_vec(dom), nt);
    std::vector<Vec> fields(static_cast<std::size_t>(nt) + 1, Alg::zero_vec(dom));
    return TV::nonstationary(std::move(fields));
  }

  // ---- forward solve -----------------------------------------------------

  Cache forward(const TV& v, bool with_adjoint) const {
    Alg::check_vec(v.node(0), dom);
    Cache c(VelocityProvider<Vec>(v, nt));
    c.with_adjoint = with_adjoint;
    c.cfl = c.provider.cfl();
    switch (variant) {
      case Variant::original: forward_original(c); break;
      case Variant::state_equation: forward_state(c); break;
      case Variant::deformation_state_equation: forward_deformation(c); break;
    }
    c.energy_reg = reg_energy(c.provider.vel);
    c.energy_data = l2_inner(c.residual, c.residual) / sigma2;
    c.energy = c.energy_reg + c.energy_data;
    return c;
  }

  double energy(const TV& v) const { return forward(v, false).energy; }

  double reg_energy(const TV& v) const {
    if (v.is_stationary()) return 0.5 * rep_inner(lop.apply(v.node(0)), v.node(0));
    const auto w = trapezoid_weights(nt);
    double s = 0.0;
    for (int i = 0; i <= nt; ++i)
      s += w[static_cast<std::size_t>(i)] * rep_inner(lop.apply(v.node(i)), v.node(i));
    return 0.5 * s;
  }

  // ---- gradient ------------------------------------------------------------

  TV gradient(const Cache& c) const {
    detail::require(c.with_adjoint, "gradient requires an adjoint-enabled forward cache");
    std::vector<Vec> terms;
    terms.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) {
      switch (variant) {
        case Variant::original:
          terms.push_back(Alg::mul(c.lam.node(i), c.gm.node(i)));
          break;
        case Variant::state_equation:
          terms.push_back(Alg::mul(c.lam_nodes[static_cast<std::size_t>(i)], c.gm.node(i)));
          break;
        case Variant::deformation_state_equation:
          terms.push_back(axpy(-1.0, Alg::jacT(c.u.node(i), c.rho.node(i)), c.rho.node(i)));
          break;
      }
    }
    return assemble(c.provider.vel, terms);
  }

  // ---- Gauss-Newton Hessian-vector product ---------------------------------

  TV hessvec(const Cache& c, const TV& dv) const {
    detail::require(c.with_adjoint, "hessvec requires an adjoint-enabled forward cache");
    std::vector<Vec> terms;
    terms.reserve(static_cast<std::size_t>(nt) + 1);
    if (variant == Variant::original) {
      TransportSeries<Scal> dm = solve_incremental_image(c.provider, c.gm, dv);
      Scal dlam1 = scaled(dm.terminal(), -2.0 / sigma2);
      TransportSeries<Scal> dlam = solve_scalar_continuity_backward(c.provider, dlam1);
      for (int i = 0; i <= nt; ++i) terms.push_back(Alg::mul(dlam.node(i), c.gm.node(i)));
    } else {
      TransportSeries<Vec> du = solve_incremental_displacement(c.provider, c.u, dv);
      VectorField du1 = Alg::to_spatial(du.terminal());
      // chain rule at t = 1: the map perturbation is -du1
      ScalarField dm1 = scaled(dot(c.grad_src_warped, du1), -1.0);
      ScalarField dlam1 = scaled(dm1, -2.0 / sigma2);
      if (variant == Variant::state_equation) {
        ScalarSampler dls(dlam1, Interp::cubic);
        for (int i = 0; i <= nt; ++i) {
          ScalarField dli = multiply(c.jac_factor[static_cast<std::size_t>(i)],
                                     warp(dls, c.psi_pts[static_cast<std::size_t>(i)]));
          terms.push_back(Alg::mul(Alg::from_spatial(dli, dom), c.gm.node(i)));
        }
      } else {
        VectorField dr1 = multiply(dlam1, c.grad_src_warped);
        TransportSeries<Vec> drho =
            solve_vector_continuity_backward(c.provider, Alg::from_spatial(dr1, dom));
        for (int i = 0; i <= nt; ++i)
          terms.push_back(axpy(-1.0, Alg::jacT(c.u.node(i), drho.node(i)), drho.node(i)));
      }
    }
    return assemble(dv, terms);
  }

  // inverse Sobolev operator per node (preconditioner)
  TV precondition(const TV& g) const {
    std::vector<Vec> fields;
    fields.reserve(g.node_count());
    for (int i = 0; i < g.node_count(); ++i) fields.push_back(lop.apply(g.node(i), true));
    if (g.is_stationary()) return TV::stationary(std::move(fields[0]), g.nt);
    return TV::nonstationary(std::move(fields));
  }

 private:
  // Regularizer-plus-node-term assembly; `like` fixes the parameterization.
  TV assemble(const TV& like, const std::vector<Vec>& terms) const {
    if (like.is_stationary()) {
      const auto w = trapezoid_weights(nt);
      Vec acc = Alg::zero_vec(dom);
      for (int i = 0; i <= nt; ++i) acc = axpy(w[static_cast<std::size_t>(i)], terms[static_cast<std::size_t>(i)], acc);
      return TV::stationary(axpy(1.0, lop.apply(like.node(0)), acc), like.nt);
    }
    std::vector<Vec> fields;
    fields.reserve(terms.size());
    for (int i = 0; i <= nt; ++i)
      fields.push_back(axpy(1.0, lop.apply(like.node(i)), terms[static_cast<std::size_t>(i)]));
    return TV::nonstationary(std::move(fields));
  }

  // ---- per-variant forward passes ------------------------------------------

  void forward_original(Cache& c) const {
    Scal m0 = Alg::from_spatial(source, dom);
    c.m = solve_image_forward(c.provider, m0);
    c.m1 = Alg::to_spatial(c.m.terminal());
    c.residual = axpy(-1.0, target, c.m1);
    if (!c.with_adjoint) return;
    c.gm.nt = nt;
    c.gm.nodes.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) c.gm.nodes.push_back(Alg::grad(c.m.node(i)));
    Scal lam1 = Alg::from_spatial(scaled(c.residual, -2.0 / sigma2), dom);
    c.lam = solve_scalar_continuity_backward(c.provider, lam1);
  }

  void forward_state(Cache& c) const {
    c.u = solve_displacement(c.provider, Direction::forward);
    c.phi1_pts = points_from_displacement(Alg::to_spatial(c.u.terminal()));
    ScalarSampler src_samp(source, Interp::cubic);
    c.m1 = warp(src_samp, c.phi1_pts);
    c.residual = axpy(-1.0, target, c.m1);
    if (!c.with_adjoint) return;

    // image reconstructions and their gradients at every node
    c.gm.nt = nt;
    c.gm.nodes.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) {
      VectorField pts = points_from_displacement(Alg::to_spatial(c.u.node(i)));
      Scal mi = Alg::from_spatial(warp(src_samp, pts), dom);
      c.gm.nodes.push_back(Alg::grad(mi));
    }

    // adjoint reconstruction: lambda(t) = J(t) (lambda(1) o psi(t))
    c.nu = solve_displacement(c.provider, Direction::backward);
    c.big_u = solve_jacobian_factor(c.provider);
    ScalarField one(grid(), 1.0);
    c.jac_factor.reserve(static_cast<std::size_t>(nt) + 1);
    c.psi_pts.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) {
      c.jac_factor.push_back(axpy(-1.0, Alg::to_spatial(c.big_u.node(i)), one));
      c.psi_pts.push_back(points_from_displacement(Alg::to_spatial(c.nu.node(i))));
    }
    ScalarField lam1 = scaled(c.residual, -2.0 / sigma2);
    ScalarSampler lam1_samp(lam1, Interp::cubic);
    c.lam_nodes.reserve(static_cast<std::size_t>(nt) + 1);
    for (int i = 0; i <= nt; ++i) {
      ScalarField li = multiply(c.jac_factor[static_cast<std::size_t>(i)],
                                warp(lam1_samp, c.psi_pts[static_cast<std::size_t>(i)]));
      c.lam_nodes.push_back(Alg::from_spatial(li, dom));
    }
    c.grad_src_warped = warp(Alg::filtered_gradient(source, dom), c.phi1_pts, Interp::cubic);
  }

  void forward_deformation(Cache& c) const {
    c.u = solve_displacement(c.provider, Direction::forward);
    c.phi1_pts = points_from_displacement(Alg::to_spatial(c.u.terminal()));
    c.m1 = warp(source, c.phi1_pts, Interp::cubic);
    c.residual = axpy(-1.0, target, c.m1);
    if (!c.with_adjoint) return;
    c.grad_src_warped = warp(spectral_gradient(source), c.phi1_pts, Interp::cubic);
    VectorField r1 = multiply(scaled(c.residual, -2.0 / sigma2), c.grad_src_warped);
    c.rho = solve_vector_continuity_backward(c.provider, Alg::from_spatial(r1, dom));
  }

 public:
  // ---- equation solvers -----------------------------------------------------
  // Material form D_t q = f; RK4 gets the Eulerian right-hand side
  // (f minus advection), the semi-Lagrangian integrator gets f at nodes.
  // Public so transport diagnostics and map extraction can reuse them.

  using Prov = VelocityProvider<Vec>;

  // D_t m = 0, forward
  TransportSeries<Scal> solve_image_forward(const Prov& pv, const Scal& m0) const {
    if (integrator == Integrator::sl)
      return sl_integrate(m0, nt, Direction::forward, pv, nullptr);
    auto rhs = [&](const Scal& q, double t) {
      return scaled(Alg::vdot(Alg::grad(q), pv.at(t)), -1.0);
    };
    return rk4_integrate(m0, nt, Direction::forward, rhs);
  }

  // D_t q = -q div(v), backward from q(1)
  TransportSeries<Scal> solve_scalar_continuity_backward(const Prov& pv, const Scal& q1) const {
    if (integrator == Integrator::sl) {
      auto src = [&](const Scal& q, int i) { return scaled(Alg::mul(q, pv.div_node(i)), -1.0); };
      return sl_integrate(q1, nt, Direction::backward, pv, src);
    }
    auto rhs = [&](const Scal& q, double t) {
      return scaled(
          axpy(1.0, Alg::mul(q, pv.div_at(t)), Alg::vdot(Alg::grad(q), pv.at(t))), -1.0);
    };
    return rk4_integrate(q1, nt, Direction::backward, rhs);
  }

  // D_t u = v, forward from 0 (the inverse-map displacement) or backward
  // from 0 (its counterpart carrying points to t = 1)
  TransportSeries<Vec> solve_displacement(const Prov& pv, Direction dir) const {
    Vec z = Alg::zero_vec(dom);
    if (integrator == Integrator::sl) {
      auto src = [&](const Vec&, int i) { return Vec(pv.node(i)); };
      return sl_integrate(z, nt, dir, pv, src);
    }
    auto rhs = [&](const Vec& q, double t) {
      Vec vt = pv.at(t);
      return axpy(-1.0, Alg::jac(q, vt), vt);
    };
    return rk4_integrate(z, nt, dir, rhs);
  }

  // D_t U = div(v) - U div(v), backward from 0; J(t) = 1 - embed(U(t))
  TransportSeries<Scal> solve_jacobian_factor(const Prov& pv) const {
    Scal z = Alg::zero_scal(dom);
    if (integrator == Integrator::sl) {
      auto src = [&](const Scal& q, int i) {
        const auto& dv = pv.div_node(i);
        return axpy(-1.0, Alg::mul(q, dv), dv);
      };
      return sl_integrate(z, nt, Direction::backward, pv, src);
    }
    auto rhs = [&](const Scal& q, double t) {
      auto dv = pv.div_at(t);
      return axpy(-1.0, Alg::vdot(Alg::grad(q), pv.at(t)), axpy(-1.0, Alg::mul(q, dv), dv));
    };
    return rk4_integrate(z, nt, Direction::backward, rhs);
  }

  // componentwise continuity: D_t rho_a = -rho_a div(v), backward from rho(1)
  TransportSeries<Vec> solve_vector_continuity_backward(const Prov& pv, const Vec& q1) const {
    if (integrator == Integrator::sl) {
      auto src = [&](const Vec& q, int i) { return scaled(Alg::mul(pv.div_node(i), q), -1.0); };
      return sl_integrate(q1, nt, Direction::backward, pv, src);
    }
    auto rhs = [&](const Vec& q, double t) {
      return scaled(axpy(1.0, Alg::mul(pv.div_at(t), q), Alg::jac(q, pv.at(t))), -1.0);
    };
    return rk4_integrate(q1, nt, Direction::backward, rhs);
  }

  // D_t dm = -grad(m)(t) . dv(t), forward from 0; grad(m) sampled linearly
  // from the cached node values
  TransportSeries<Scal> solve_incremental_image(const Prov& pv, const TransportSeries<Vec>& gm,
                                                const TV& dv) const {
    Scal z = Alg::zero_scal(dom);
    if (integrator == Integrator::sl) {
      auto src = [&](const Scal&, int i) {
        return scaled(Alg::vdot(gm.node(i), tv_node(dv, i)), -1.0);
      };
      return sl_integrate(z, nt, Direction::forward, pv, src);
    }
    auto rhs = [&](const Scal& q, double t) {
      Vec gmt = sample_nodes(gm, t);
      return scaled(
          axpy(1.0, Alg::vdot(gmt, dv.sample(t)), Alg::vdot(Alg::grad(q), pv.at(t))), -1.0);
    };
    return rk4_integrate(z, nt, Direction::forward, rhs);
  }

  // D_t du = dv - (Du)(t) dv(t), forward from 0
  TransportSeries<Vec> solve_incremental_displacement(const Prov& pv,
                                                      const TransportSeries<Vec>& u,
                                                      const TV& dv) const {
    Vec z = Alg::zero_vec(dom);
    if (integrator == Integrator::sl) {
      auto src = [&](const Vec&, int i) {
        const Vec& dvi = tv_node(dv, i);
        return axpy(-1.0, Alg::jac(u.node(i), dvi), dvi);
      };
      return sl_integrate(z, nt, Direction::forward, pv, src);
    }
    auto rhs = [&](const Vec& q, double t) {
      Vec dvt = dv.sample(t);
      Vec ut = sample_nodes(u, t);
      return axpy(-1.0, Alg::jac(q, pv.at(t)), axpy(-1.0, Alg::jac(ut, dvt), dvt));
    };
    return rk4_integrate(z, nt, Direction::forward, rhs);
  }
};

using SpatialModel = Model<SpatialAlgebra>;
using BandModel = Model<BandAlgebra>;

}  // namespace lddmm

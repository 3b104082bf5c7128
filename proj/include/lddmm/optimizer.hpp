#pragma once

// Outer inexact Gauss-Newton loop: at each iterate the linearized system
// H dv = -g is solved by preconditioned conjugate gradients (inverse Sobolev
// operator as preconditioner, all inner products in the time-weighted
// velocity space), followed by Armijo backtracking on the step length.

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "variants.hpp"

namespace lddmm {

struct OptimizeOptions {
  int max_iter = 50;
  int pcg_max_iter = 5;
  double pcg_tol = 0.1;        // relative preconditioned residual
  double grad_tol = 1e-2;      // |g_n|_inf / |g_0|_inf
  double energy_tol = 1e-4;    // |E_prev - E| / |E_prev|
  double step_tol = 1e-4;      // eps * |dv|_inf
  double armijo_c = 1e-4;
  int armijo_max_trials = 10;
};

enum class StopReason {
  gradient,
  energy_change,
  step_size,
  zero_gradient,
  max_iterations,
  line_search_failure,
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::gradient: return "gradient";
    case StopReason::energy_change: return "energy_change";
    case StopReason::step_size: return "step_size";
    case StopReason::zero_gradient: return "zero_gradient";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

struct IterationRecord {
  int iter = 0;
  double energy = 0.0, energy_data = 0.0, energy_reg = 0.0;
  double mse_rel = 0.0;
  double rel_grad = 1.0;
  int pcg_iters = 0;
  bool pcg_fallback = false;
  double epsilon = 0.0;
  double cfl = 0.0;
  double wall_ms = 0.0;
  std::vector<double> pcg_residuals;
};

template <class Alg>
struct OptimizeResult {
  TimeVaryingVelocity<typename Alg::Vec> v;
  std::vector<IterationRecord> history;
  StopReason stop = StopReason::max_iterations;
  bool converged = false;
  int iterations = 0;
  double final_energy = 0.0;
  double rel_grad = 1.0;
  ScalarField m1;        // warped/transported source at the final iterate
  ScalarField residual;  // m1 - target
};

struct PcgInfo {
  int iters = 0;
  bool negative_curvature = false;
  std::vector<double> residuals;  // relative preconditioned residual per iteration
};

// PCG on H x = rhs with x0 = 0. H is the Gauss-Newton operator of `cache`,
// the preconditioner is the inverse Sobolev operator, and the inner product
// is the weighted velocity product (so the residual measure matches the
// space the gradient lives in).
template <class Alg>
TimeVaryingVelocity<typename Alg::Vec> pcg_solve(const Model<Alg>& model,
                                                 const ForwardCache<Alg>& cache,
                                                 const TimeVaryingVelocity<typename Alg::Vec>& rhs,
                                                 int max_iter, double tol, PcgInfo& info) {
  using TV = TimeVaryingVelocity<typename Alg::Vec>;
  info = PcgInfo{};
  TV x = tv_scaled(rhs, 0.0);
  TV r = rhs;
  TV z = model.precondition(r);
  double rz = tv_inner(r, z);
  if (!(rz > 0.0)) return x;  // zero right-hand side
  const double res0 = std::sqrt(rz);
  TV p = z;
  for (int k = 0; k < max_iter; ++k) {
    TV hp = model.hessvec(cache, p);
    double php = tv_inner(p, hp);
    if (!(php > 0.0)) {
      info.negative_curvature = true;
      break;
    }
    double alpha = rz / php;
    x = tv_axpy(alpha, p, x);
    r = tv_axpy(-alpha, hp, r);
    z = model.precondition(r);
    double rz_next = std::max(tv_inner(r, z), 0.0);
    double rel = std::sqrt(rz_next) / res0;
    info.residuals.push_back(rel);
    info.iters = k + 1;
    if (rel <= tol) break;
    p = tv_axpy(rz_next / rz, p, z);
    rz = rz_next;
  }
  return x;
}

namespace optdetail {

// Energy of a trial step; a transport blow-up rejects the trial rather than
// aborting the search.
template <class Alg>
double trial_energy(const Model<Alg>& model, const TimeVaryingVelocity<typename Alg::Vec>& v) {
  try {
    double e = model.energy(v);
    return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
  } catch (const DivergenceError&) {
    return std::numeric_limits<double>::infinity();
  }
}

inline double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

}  // namespace optdetail

template <class Alg>
OptimizeResult<Alg> optimize(const Model<Alg>& model,
                             const TimeVaryingVelocity<typename Alg::Vec>& v0,
                             const OptimizeOptions& opt = {}) {
  using TV = TimeVaryingVelocity<typename Alg::Vec>;
  OptimizeResult<Alg> out;
  out.v = v0;

  const double mse_denom = [&] {
    ScalarField d = axpy(-1.0, model.target, model.source);
    return l2_inner(d, d);
  }();
  auto mse_rel = [&](const ScalarField& residual) {
    return mse_denom > 0.0 ? l2_inner(residual, residual) / mse_denom : 0.0;
  };

  auto cache = model.forward(out.v, true);
  TV g = model.gradient(cache);
  const double g0 = tv_linf(g);

  IterationRecord first;
  first.iter = 0;
  first.energy = cache.energy;
  first.energy_data = cache.energy_data;
  first.energy_reg = cache.energy_reg;
  first.mse_rel = mse_rel(cache.residual);
  first.rel_grad = g0 > 0.0 ? 1.0 : 0.0;
  first.cfl = cache.cfl;
  out.history.push_back(first);
  out.m1 = cache.m1;
  out.residual = cache.residual;
  out.final_energy = cache.energy;

  if (g0 == 0.0) {
    out.stop = StopReason::zero_gradient;
    out.converged = true;
    out.rel_grad = 0.0;
    return out;
  }

  double e_prev = cache.energy;
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const double t0 = optdetail::now_ms();

    PcgInfo pcg;
    TV rhs = tv_scaled(g, -1.0);
    TV dv = pcg_solve(model, cache, rhs, opt.pcg_max_iter, opt.pcg_tol, pcg);
    double gd = tv_inner(g, dv);
    bool fallback = false;
    if (!(gd < 0.0)) {  // not a descent direction: preconditioned steepest descent
      dv = model.precondition(rhs);
      gd = tv_inner(g, dv);
      fallback = true;
    }

    double eps = 1.0;
    double e_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int trial = 0; trial < opt.armijo_max_trials; ++trial) {
      e_trial = optdetail::trial_energy(model, tv_axpy(eps, dv, out.v));
      if (e_trial <= e_prev + opt.armijo_c * eps * gd) {
        accepted = true;
        break;
      }
      eps *= 0.5;
    }
    if (!accepted) {
      out.stop = StopReason::line_search_failure;
      out.converged = false;
      return out;
    }

    out.v = tv_axpy(eps, dv, out.v);
    cache = model.forward(out.v, true);
    g = model.gradient(cache);
    const double relg = tv_linf(g) / g0;
    out.iterations = iter;
    out.m1 = cache.m1;
    out.residual = cache.residual;
    out.final_energy = cache.energy;
    out.rel_grad = relg;

    IterationRecord rec;
    rec.iter = iter;
    rec.energy = cache.energy;
    rec.energy_data = cache.energy_data;
    rec.energy_reg = cache.energy_reg;
    rec.mse_rel = mse_rel(cache.residual);
    rec.rel_grad = relg;
    rec.pcg_iters = pcg.iters;
    rec.pcg_fallback = fallback;
    rec.pcg_residuals = pcg.residuals;
    rec.epsilon = eps;
    rec.cfl = cache.cfl;
    rec.wall_ms = optdetail::now_ms() - t0;
    out.history.push_back(rec);

    const double step_norm = eps * tv_linf(dv);
    const double de = std::abs(e_prev - cache.energy) / std::max(std::abs(e_prev), 1e-30);
    e_prev = cache.energy;
    if (relg <= opt.grad_tol) {
      out.stop = StopReason::gradient;
      out.converged = true;
      return out;
    }
    if (de <= opt.energy_tol) {
      out.stop = StopReason::energy_change;
      out.converged = true;
      return out;
    }
    if (step_norm <= opt.step_tol) {
      out.stop = StopReason::step_size;
      out.converged = true;
      return out;
    }
  }
  out.stop = StopReason::max_iterations;
  out.converged = false;
  return out;
}

}  // namespace lddmm

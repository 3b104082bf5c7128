#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lddmm;

namespace {

using TVS = TimeVaryingVelocity<VectorField>;

// analytic periodic shift of a band-restricted field via phase modulation
ScalarField shifted_exactly(const ScalarField& f, const BandSpec& b,
                            const std::array<double, kMaxDim>& s) {
  BandScalarField c = project(f, b);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < c.size(); ++i) {
    b.unflatten(i, idx);
    double phase = 0.0;
    for (int a = 0; a < b.d(); ++a) phase -= b.omega(a, idx[a]) * s[a];
    c.c[i] *= std::polar(1.0, phase);
  }
  return embed(c);
}

double mass_of(const ScalarField& q) {
  ScalarField ones(q.grid, 1.0);
  return l2_inner(q, ones);
}

}  // namespace

TEST_CASE("semi-Lagrangian advection of a bump by a constant flow is exact up to interpolation") {
  GridSpec g = GridSpec::uniform(2, 32);
  const std::array<double, kMaxDim> vel{3.5, -2.25, 0.0};
  auto v = TVS::stationary(constant_field(g, vel), 5);
  VelocityProvider<VectorField> prov(v, 5);

  ScalarField m0 = gaussian_bump(g, {16.0, 16.0, 0.0}, 3.0, 1.0);
  auto series = sl_integrate(m0, 5, Direction::forward, prov, nullptr);
  ScalarField want = gaussian_bump(g, {19.5, 13.75, 0.0}, 3.0, 1.0);
  CHECK(th::max_abs_diff(series.terminal(), want) < 1e-3);

  SECTION("backward integration recovers the initial state") {
    auto back = sl_integrate(want, 5, Direction::backward, prov, nullptr);
    CHECK(th::max_abs_diff(back.initial(), m0) < 1e-3);
  }
}

TEST_CASE("explicit advection of a bump by a constant flow matches the analytic shift") {
  GridSpec g = GridSpec::uniform(2, 64);
  const std::array<double, kMaxDim> vel{3.5, -2.25, 0.0};
  VectorField vf = constant_field(g, vel);
  ScalarField m0 = gaussian_bump(g, {32.0, 32.0, 0.0}, 3.0, 1.0);
  auto rhs = [&](const ScalarField& q, double) {
    return scaled(dot(spectral_gradient(q), vf), -1.0);
  };
  auto series = rk4_integrate(m0, 25, Direction::forward, rhs);
  ScalarField want = gaussian_bump(g, {35.5, 29.75, 0.0}, 3.0, 1.0);
  CHECK(th::max_abs_diff(series.terminal(), want) < 1e-3);
}

TEST_CASE("departure points of a constant flow move exactly one step upstream") {
  GridSpec g = GridSpec::uniform(2, 16, 0.5);
  const std::array<double, kMaxDim> vel{0.9, -0.4, 0.0};
  auto v = TVS::stationary(constant_field(g, vel), 4);
  VelocityProvider<VectorField> prov(v, 4);
  VectorField id = identity_map(g);
  const double dt = 0.25;
  const VectorField& fwd = prov.departure(2, Direction::forward);
  const VectorField& bwd = prov.departure(2, Direction::backward);
  double worst_f = 0.0, worst_b = 0.0;
  for (int a = 0; a < 2; ++a)
    for (std::size_t i = 0; i < g.size(); ++i) {
      worst_f = std::max(worst_f, std::abs(fwd.comp[a][i] - (id.comp[a][i] - dt * vel[a])));
      worst_b = std::max(worst_b, std::abs(bwd.comp[a][i] - (id.comp[a][i] + dt * vel[a])));
    }
  CHECK(worst_f < 1e-13);
  CHECK(worst_b < 1e-13);
}

TEST_CASE("velocity provider reports step geometry and caches nodes") {
  GridSpec g = GridSpec::uniform(2, 16);
  auto v = TVS::stationary(constant_field(g, {3.0, 4.0, 0.0}), 5);
  VelocityProvider<VectorField> prov(v, 5);
  CHECK(prov.dt == Catch::Approx(0.2));
  CHECK(prov.cfl() == Catch::Approx(4.0 * 0.2 / 1.0));
  // stationary: every node is the same field
  CHECK(&prov.node(0) == &prov.node(4));

  SECTION("node count must match the step count") {
    std::vector<VectorField> fs(4, VectorField(g));  // nt = 3
    auto w = TVS::nonstationary(std::move(fs));
    CHECK_THROWS_AS(VelocityProvider<VectorField>(w, 5), ShapeError);
  }

  SECTION("divergence interpolates linearly between node divergences") {
    std::vector<VectorField> fs;
    fs.push_back(random_smooth_field(g, 1, 1.0, 2.0));
    fs.push_back(random_smooth_field(g, 2, 1.0, 2.0));
    fs.push_back(random_smooth_field(g, 3, 1.0, 2.0));
    auto w = TVS::nonstationary(std::move(fs));
    VelocityProvider<VectorField> p2(w, 2);
    ScalarField manual = axpy(0.5, spectral_divergence(w.node(0)),
                              scaled(spectral_divergence(w.node(1)), 0.5));
    CHECK(th::max_abs_diff(p2.div_at(0.25), manual) < 1e-12);
    CHECK(th::max_abs_diff(p2.div_at(0.5), spectral_divergence(w.node(1))) < 1e-12);
  }
}

TEST_CASE("node series sampling is piecewise linear in time") {
  TransportSeries<ScalarField> s;
  s.nt = 2;
  GridSpec g = GridSpec::uniform(2, 4);
  s.nodes = {ScalarField(g, 0.0), ScalarField(g, 1.0), ScalarField(g, 2.0)};
  CHECK(sample_nodes(s, 0.25).v[0] == Catch::Approx(0.5));
  CHECK(sample_nodes(s, 0.5).v[0] == Catch::Approx(1.0));
  CHECK(sample_nodes(s, 1.0).v[0] == Catch::Approx(2.0));
  CHECK(s.initial().v[0] == Catch::Approx(0.0));
  CHECK(s.terminal().v[0] == Catch::Approx(2.0));
}

TEST_CASE("mass is conserved when a density rides a compressible flow") {
  GridSpec g = GridSpec::uniform(2, 32);
  VectorField vf = random_smooth_field(g, 21, 0.8, 1.5);
  ScalarField q1 = random_smooth_image(g, 22, 1.5);
  const double m1 = mass_of(q1);
  const int nt = 20;
  auto v = TVS::stationary(vf, nt);
  VelocityProvider<VectorField> prov(v, nt);

  SECTION("explicit integration") {
    auto rhs = [&](const ScalarField& q, double) {
      return scaled(axpy(1.0, multiply(q, spectral_divergence(vf)),
                         dot(spectral_gradient(q), vf)),
                    -1.0);
    };
    auto series = rk4_integrate(q1, nt, Direction::backward, rhs);
    CHECK(th::rel_diff(mass_of(series.initial()), m1) < 1e-12);
  }
  SECTION("semi-Lagrangian integration") {
    ScalarField dv = spectral_divergence(vf);
    auto src = [&](const ScalarField& q, int) { return scaled(multiply(q, dv), -1.0); };
    auto series = sl_integrate(q1, nt, Direction::backward, prov, src);
    CHECK(th::rel_diff(mass_of(series.initial()), m1) < 2e-6);
  }
}

TEST_CASE("semi-Lagrangian advection tracks a fine explicit reference") {
  GridSpec g = GridSpec::uniform(2, 32);
  const int nodes = 10;
  std::vector<VectorField> fs;
  for (int i = 0; i <= nodes; ++i) fs.push_back(random_smooth_field(g, 31 + i, 1.2, 1.5));
  auto v = TVS::nonstationary(std::move(fs));
  ScalarField m0 = random_smooth_image(g, 50, 1.5);

  auto rhs = [&](const ScalarField& q, double t) {
    return scaled(dot(spectral_gradient(q), v.sample(t)), -1.0);
  };
  auto ref = rk4_integrate(m0, 320, Direction::forward, rhs);

  VelocityProvider<VectorField> prov(v, nodes);
  auto sl = sl_integrate(m0, nodes, Direction::forward, prov, nullptr);
  auto rk = rk4_integrate(m0, 20, Direction::forward, [&](const ScalarField& q, double t) {
    return scaled(dot(spectral_gradient(q), v.sample(t)), -1.0);
  });
  CHECK(th::max_abs_diff(sl.terminal(), ref.terminal()) < 5e-4);
  CHECK(th::max_abs_diff(rk.terminal(), ref.terminal()) < 1e-7);
}

TEST_CASE("band states advect through the embedded grid") {
  GridSpec g = GridSpec::uniform(2, 32);
  BandSpec b = BandSpec::uniform(g, 8);
  BandScalarField q = random_band_scalar(b, 61, 1.5);
  const std::array<double, kMaxDim> shift{1.3, -0.6, 0.0};
  VectorField pts = identity_map(g);
  for (int a = 0; a < 2; ++a)
    for (auto& x : pts.comp[a]) x -= shift[a];
  BandScalarField adv = advect_state(q, pts);
  ScalarField want = shifted_exactly(embed(q), b, shift);
  CHECK(th::max_abs_diff(embed(adv), want) < 2e-3 * std::max(1.0, linf_norm(embed(q))));
}

TEST_CASE("explicit integration refuses a single step") {
  GridSpec g = GridSpec::uniform(2, 16);
  ScalarField q(g, 1.0);
  auto rhs = [&](const ScalarField& s, double) { return s; };
  CHECK_THROWS_AS(rk4_integrate(q, 1, Direction::forward, rhs), ShapeError);
  CHECK_NOTHROW(rk4_integrate(q, 2, Direction::forward, rhs));
}

TEST_CASE("semi-Lagrangian integration allows a single step") {
  GridSpec g = GridSpec::uniform(2, 16);
  auto v = TVS::stationary(constant_field(g, {1.0, 0.0, 0.0}), 1);
  VelocityProvider<VectorField> prov(v, 1);
  ScalarField m0 = gaussian_bump(g, {8.0, 8.0, 0.0}, 2.5, 1.0);
  auto series = sl_integrate(m0, 1, Direction::forward, prov, nullptr);
  CHECK(series.nodes.size() == 2);
  CHECK(all_finite(series.terminal()));
}

TEST_CASE("runaway explicit integration raises a divergence error with the step index") {
  GridSpec g = GridSpec::uniform(2, 16);
  // RK4 multiplies the state by roughly (dt |v| k)^4 per step, so the
  // amplitude must be large enough to actually overflow within five steps.
  VectorField vf = random_smooth_field(g, 71, 1e80, 1.5);
  ScalarField m0 = random_smooth_image(g, 72, 2.0);
  auto rhs = [&](const ScalarField& q, double) {
    return scaled(dot(spectral_gradient(q), vf), -1.0);
  };
  try {
    rk4_integrate(m0, 5, Direction::forward, rhs);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(e.step >= 0);
    CHECK(e.step < 5);
  }
}

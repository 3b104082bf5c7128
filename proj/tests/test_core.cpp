#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lddmm;

TEST_CASE("grid validation rejects bad shapes") {
  CHECK_THROWS_AS(GridSpec({5, 8}, {1.0, 1.0}), ShapeError);  // odd
  CHECK_THROWS_AS(GridSpec({2, 8}, {1.0, 1.0}), ShapeError);  // too small
  CHECK_THROWS_AS(GridSpec({8, 8}, {1.0, -1.0}), ShapeError);
  CHECK_THROWS_AS(GridSpec({8}, {1.0}), ShapeError);              // 1-d
  CHECK_THROWS_AS(GridSpec({8, 8, 8, 8}, std::vector<double>(4, 1.0)), ShapeError);
  CHECK_NOTHROW(GridSpec({4, 6}, {0.5, 2.0}));
}

TEST_CASE("flat index is row-major with axis 0 slowest") {
  GridSpec g({4, 6}, {1.0, 1.0});
  CHECK(g.flat({0, 0, 0}) == 0);
  CHECK(g.flat({0, 1, 0}) == 1);
  CHECK(g.flat({1, 0, 0}) == 6);
  CHECK(g.flat({3, 5, 0}) == 23);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    CHECK(g.flat(idx) == i);
  }

  GridSpec g3 = GridSpec::uniform(3, 4);
  CHECK(g3.flat({1, 2, 3}) == 1 * 16 + 2 * 4 + 3);
}

TEST_CASE("grid geometry") {
  GridSpec g({4, 6}, {0.5, 2.0});
  CHECK(g.extent(0) == Catch::Approx(2.0));
  CHECK(g.extent(1) == Catch::Approx(12.0));
  CHECK(g.cell_volume() == Catch::Approx(1.0));
  CHECK(g.min_spacing() == Catch::Approx(0.5));
  CHECK(g.size() == 24);
}

TEST_CASE("l2 inner product carries the cell volume") {
  GridSpec g({4, 6}, {0.5, 2.0});
  ScalarField ones(g, 1.0);
  CHECK(l2_inner(ones, ones) == Catch::Approx(24.0));  // 24 cells of volume 1
  GridSpec gu = GridSpec::uniform(2, 8, 0.25);
  ScalarField f(gu, 3.0);
  CHECK(l2_inner(f, f) == Catch::Approx(64 * 9 * 0.0625));
  CHECK(l2_norm(f) == Catch::Approx(std::sqrt(64 * 9 * 0.0625)));
}

TEST_CASE("field arithmetic") {
  GridSpec g = GridSpec::uniform(2, 4);
  ScalarField x(g, 2.0), y(g, 1.0);
  ScalarField r = axpy(3.0, x, y);
  CHECK(r.v[0] == Catch::Approx(7.0));
  CHECK(scaled(x, -0.5).v[5] == Catch::Approx(-1.0));
  CHECK(multiply(x, r).v[3] == Catch::Approx(14.0));
  CHECK(linf_norm(scaled(x, -3.0)) == Catch::Approx(6.0));

  VectorField u(g, 1.0), w(g, 2.0);
  ScalarField d = dot(u, w);
  CHECK(d.v[0] == Catch::Approx(4.0));  // two components of 1*2

  GridSpec other = GridSpec::uniform(2, 6);
  ScalarField z(other);
  CHECK_THROWS_AS(axpy(1.0, x, z), ShapeError);
  CHECK_THROWS_AS(l2_inner(x, z), ShapeError);
}

TEST_CASE("identity map holds physical node coordinates") {
  GridSpec g({4, 6}, {0.5, 2.0});
  VectorField id = identity_map(g);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    CHECK(id.comp[0][i] == Catch::Approx(idx[0] * 0.5));
    CHECK(id.comp[1][i] == Catch::Approx(idx[1] * 2.0));
  }
}

TEST_CASE("all_finite flags NaN and infinity") {
  GridSpec g = GridSpec::uniform(2, 4);
  ScalarField f(g, 1.0);
  CHECK(all_finite(f));
  f.v[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(all_finite(f));
  VectorField u(g, 0.0);
  u.comp[1][3] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(u));
}

TEST_CASE("divergence error carries the step index") {
  DivergenceError e("blew up", 3);
  CHECK(e.step == 3);
  CHECK(std::string(e.what()).find("step 3") != std::string::npos);
}

TEST_CASE("velocity flow sampling interpolates linearly in time") {
  GridSpec g = GridSpec::uniform(2, 4);
  SECTION("stationary trajectories return the single field at every t") {
    auto v = TimeVaryingVelocity<VectorField>::stationary(VectorField(g, 2.5), 5);
    CHECK(v.is_stationary());
    CHECK(v.node_count() == 1);
    CHECK(v.sample(0.37).comp[0][0] == Catch::Approx(2.5));
    CHECK(v.node(4).comp[1][3] == Catch::Approx(2.5));
  }
  SECTION("nonstationary nodes interpolate between neighbors") {
    std::vector<VectorField> fs{VectorField(g, 0.0), VectorField(g, 1.0), VectorField(g, 2.0)};
    auto v = TimeVaryingVelocity<VectorField>::nonstationary(std::move(fs));
    CHECK(v.nt == 2);
    CHECK(v.node_count() == 3);
    CHECK_FALSE(v.is_stationary());
    CHECK(v.sample(0.0).comp[0][0] == Catch::Approx(0.0));
    CHECK(v.sample(0.25).comp[0][0] == Catch::Approx(0.5));
    CHECK(v.sample(0.5).comp[0][0] == Catch::Approx(1.0));
    CHECK(v.sample(1.0).comp[0][0] == Catch::Approx(2.0));
    CHECK(v.node(2).comp[1][0] == Catch::Approx(2.0));
  }
  SECTION("nonstationary needs at least two nodes") {
    std::vector<VectorField> one{VectorField(g, 0.0)};
    CHECK_THROWS_AS(TimeVaryingVelocity<VectorField>::nonstationary(std::move(one)), ShapeError);
  }
}

TEST_CASE("time-varying velocity algebra matches per-node arithmetic") {
  GridSpec g = GridSpec::uniform(2, 8);
  auto a = th::random_tv<SpatialAlgebra>(g, Parameterization::nonstationary, 3, 11, 1.0, 2.0);
  auto b = th::random_tv<SpatialAlgebra>(g, Parameterization::nonstationary, 3, 12, 1.0, 2.0);
  auto c = tv_axpy(2.0, a, b);
  for (int i = 0; i <= 3; ++i) {
    ScalarField diff(g);
    auto expect = axpy(2.0, a.node(i), b.node(i));
    CHECK(th::max_abs_diff(expect, c.node(i)) < 1e-14);
  }
  CHECK(tv_linf(tv_scaled(a, -2.0)) == Catch::Approx(2.0 * tv_linf(a)));
  // weighted inner product: trapezoid in time
  double manual = 0.0;
  auto w = trapezoid_weights(3);
  for (int i = 0; i <= 3; ++i) manual += w[i] * l2_inner(a.node(i), b.node(i));
  CHECK(tv_inner(a, b) == Catch::Approx(manual));
  CHECK(tv_all_finite(a));
}

TEST_CASE("trapezoid weights sum to one with half-weight endpoints") {
  auto w = trapezoid_weights(4);
  REQUIRE(w.size() == 5);
  CHECK(w[0] == Catch::Approx(0.125));
  CHECK(w[1] == Catch::Approx(0.25));
  CHECK(w[4] == Catch::Approx(0.125));
  double s = 0.0;
  for (double x : w) s += x;
  CHECK(s == Catch::Approx(1.0));
}

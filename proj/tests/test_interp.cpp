#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"

using namespace lddmm;

namespace {

// Dense reference: solve the periodic interpolation system c_{i-1} + 4 c_i +
// c_{i+1} = 6 f_i by Gaussian elimination with partial pivoting.
std::vector<double> dense_periodic_spline(const std::vector<double>& f) {
  const int n = static_cast<int>(f.size());
  std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
  std::vector<double> b(f);
  for (int i = 0; i < n; ++i) {
    A[i][i] = 4.0 / 6.0;
    A[i][(i + 1) % n] += 1.0 / 6.0;
    A[i][(i + n - 1) % n] += 1.0 / 6.0;
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < n; ++r) {
      const double m = A[r][col] / A[col][col];
      for (int c2 = col; c2 < n; ++c2) A[r][c2] -= m * A[col][c2];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c2 = r + 1; c2 < n; ++c2) s -= A[r][c2] * x[c2];
    x[r] = s / A[r][r];
  }
  return x;
}

// Cardinal cubic B-spline, written from the piecewise definition.
double bspline3(double x) {
  x = std::abs(x);
  if (x < 1.0) return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
  if (x < 2.0) {
    const double y = 2.0 - x;
    return y * y * y / 6.0;
  }
  return 0.0;
}

int imod(long long i, int n) {
  long long r = i % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

// Independent 2-d spline evaluation from dense per-axis solves.
double dense_spline_eval(const ScalarField& f, double x0, double x1) {
  const GridSpec& g = f.grid;
  const int n0 = g.dims[0], n1 = g.dims[1];
  // coefficients: filter rows (axis 1), then columns (axis 0)
  std::vector<double> c(f.v);
  for (int i = 0; i < n0; ++i) {
    std::vector<double> line(n1);
    for (int j = 0; j < n1; ++j) line[j] = c[i * n1 + j];
    line = dense_periodic_spline(line);
    for (int j = 0; j < n1; ++j) c[i * n1 + j] = line[j];
  }
  for (int j = 0; j < n1; ++j) {
    std::vector<double> line(n0);
    for (int i = 0; i < n0; ++i) line[i] = c[i * n1 + j];
    line = dense_periodic_spline(line);
    for (int i = 0; i < n0; ++i) c[i * n1 + j] = line[i];
  }
  const double u0 = x0 / g.spacing[0], u1 = x1 / g.spacing[1];
  const long long b0 = static_cast<long long>(std::floor(u0));
  const long long b1 = static_cast<long long>(std::floor(u1));
  double s = 0.0;
  for (int di = -1; di <= 2; ++di)
    for (int dj = -1; dj <= 2; ++dj) {
      const double w = bspline3(u0 - (b0 + di)) * bspline3(u1 - (b1 + dj));
      s += w * c[imod(b0 + di, n0) * n1 + imod(b1 + dj, n1)];
    }
  return s;
}

}  // namespace

TEST_CASE("spline prefilter matches a dense periodic solve") {
  std::mt19937_64 eng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {4, 6, 16}) {
    GridSpec g({n, 4}, {1.0, 1.0});
    ScalarField f(g);
    std::vector<double> line(n);
    for (int i = 0; i < n; ++i) line[i] = u(eng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) f.v[i * 4 + j] = line[i];  // constant along axis 1
    ScalarField c = spline_coefficients(f);
    std::vector<double> ref = dense_periodic_spline(line);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(c.v[i * 4 + j] - ref[i]));
    INFO("n = " << n);
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("cubic sampling reproduces grid values exactly at the nodes") {
  GridSpec g({12, 10}, {0.5, 1.5});
  ScalarField f = random_smooth_image(g, 31, 3.0);
  ScalarSampler s(f, Interp::cubic);
  std::array<int, kMaxDim> idx{};
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    double x[kMaxDim] = {idx[0] * 0.5, idx[1] * 1.5, 0.0};
    worst = std::max(worst, std::abs(s(x) - f.v[i]));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("cubic sampling agrees with an independent dense evaluation off the nodes") {
  GridSpec g({12, 10}, {0.5, 1.5});
  std::mt19937_64 eng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarField f(g);
  for (auto& x : f.v) x = u(eng) - 0.5;
  ScalarSampler s(f, Interp::cubic);
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    // include points outside the principal period to exercise wrapping
    const double x0 = (u(eng) * 3.0 - 1.0) * g.extent(0);
    const double x1 = (u(eng) * 3.0 - 1.0) * g.extent(1);
    double x[kMaxDim] = {x0, x1, 0.0};
    worst = std::max(worst, std::abs(s(x) - dense_spline_eval(f, x0, x1)));
  }
  CHECK(worst < 1e-11);
}

TEST_CASE("cubic sampling of a smooth wave is fourth-order accurate") {
  GridSpec g = GridSpec::uniform(2, 64, 1.0);
  ScalarField f(g);
  std::array<int, kMaxDim> idx{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    f.v[i] = std::cos(2.0 * M_PI * (2.0 * idx[0] + 1.0 * idx[1]) / 64.0);
  }
  ScalarSampler s(f, Interp::cubic);
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> u(0.0, 64.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    double x[kMaxDim] = {u(eng), u(eng), 0.0};
    const double want = std::cos(2.0 * M_PI * (2.0 * x[0] + 1.0 * x[1]) / 64.0);
    worst = std::max(worst, std::abs(s(x) - want));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("linear sampling is exact at nodes and averages at midpoints") {
  GridSpec g({6, 4}, {2.0, 1.0});
  std::mt19937_64 eng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g);
  for (auto& x : f.v) x = u(eng);
  ScalarSampler s(f, Interp::linear);
  double xm[kMaxDim] = {3.0, 0.0, 0.0};  // midpoint between rows 1 and 2
  CHECK(s(xm) == Catch::Approx(0.5 * (f.v[1 * 4 + 0] + f.v[2 * 4 + 0])).margin(1e-14));
  double xn[kMaxDim] = {4.0, 3.0, 0.0};
  CHECK(s(xn) == Catch::Approx(f.v[2 * 4 + 3]).margin(1e-14));
}

TEST_CASE("sampling is periodic across the domain boundary") {
  GridSpec g({8, 6}, {1.0, 1.0});
  ScalarField f = random_smooth_image(g, 12, 2.0);
  for (Interp kind : {Interp::linear, Interp::cubic}) {
    ScalarSampler s(f, kind);
    double a[kMaxDim] = {2.3, 4.1, 0.0};
    double b[kMaxDim] = {2.3 + 8.0, 4.1 - 6.0, 0.0};
    CHECK(s(a) == Catch::Approx(s(b)).margin(1e-12));
  }
}

TEST_CASE("warp at the identity returns the input field") {
  GridSpec g({10, 8}, {0.7, 1.3});
  ScalarField f = random_smooth_image(g, 3, 2.5);
  VectorField id = identity_map(g);
  CHECK(th::max_abs_diff(warp(f, id, Interp::cubic), f) < 1e-12);
  CHECK(th::max_abs_diff(warp(f, id, Interp::linear), f) < 1e-14);
  VectorField vf = random_smooth_field(g, 4, 1.0, 2.0);
  CHECK(th::max_abs_diff(warp(vf, id, Interp::cubic), vf) < 1e-12);
}

TEST_CASE("warp by a whole-voxel shift rolls the field") {
  GridSpec g({8, 6}, {2.0, 1.0});
  std::mt19937_64 eng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g);
  for (auto& x : f.v) x = u(eng);
  // points(x) = x - (2, 0): one voxel along axis 0
  VectorField pts = identity_map(g);
  for (auto& x : pts.comp[0]) x -= 2.0;
  for (Interp kind : {Interp::linear, Interp::cubic}) {
    ScalarField w = warp(f, pts, kind);
    double worst = 0.0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 6; ++j)
        worst = std::max(worst, std::abs(w.v[i * 6 + j] - f.v[((i + 7) % 8) * 6 + j]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("nearest-neighbor warp keeps label values intact") {
  GridSpec g({8, 8}, {1.0, 1.0});
  ScalarField labels(g);
  for (std::size_t i = 0; i < labels.size(); ++i) labels.v[i] = static_cast<double>(i % 3);
  VectorField pts = identity_map(g);
  for (auto& x : pts.comp[1]) x += 0.4;  // rounds back to the same node
  ScalarField same = warp_nearest(labels, pts);
  CHECK(th::max_abs_diff(same, labels) == 0.0);
  for (auto& x : pts.comp[1]) x += 0.2;  // now rounds to the next node
  ScalarField rolled = warp_nearest(labels, pts);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) CHECK(rolled.v[i * 8 + j] == labels.v[i * 8 + (j + 1) % 8]);
}

TEST_CASE("vector sampler matches per-component scalar samplers") {
  GridSpec g({10, 6}, {1.0, 1.0});
  VectorField vf = random_smooth_field(g, 19, 1.0, 2.0);
  VectorSampler vs(vf, Interp::cubic);
  ScalarSampler s0(ScalarField{g, vf.comp[0]}, Interp::cubic);
  ScalarSampler s1(ScalarField{g, vf.comp[1]}, Interp::cubic);
  double x[kMaxDim] = {3.7, 1.9, 0.0};
  double out[kMaxDim];
  vs(x, out);
  CHECK(out[0] == Catch::Approx(s0(x)).margin(1e-14));
  CHECK(out[1] == Catch::Approx(s1(x)).margin(1e-14));
}

TEST_CASE("three-dimensional cubic sampling stays exact at nodes") {
  GridSpec g = GridSpec::uniform(3, 6, 0.9);
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScalarField f(g);
  for (auto& x : f.v) x = u(eng);
  ScalarSampler s(f, Interp::cubic);
  std::array<int, kMaxDim> idx{};
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    double x[kMaxDim] = {idx[0] * 0.9, idx[1] * 0.9, idx[2] * 0.9};
    worst = std::max(worst, std::abs(s(x) - f.v[i]));
  }
  CHECK(worst < 1e-12);
}

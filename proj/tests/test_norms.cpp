#include <catch2/catch_amalgamated.hpp>

#include "snowpoly/norms.hpp"
#include "snowpoly/random.hpp"
#include "snowpoly/study.hpp"

using namespace snowpoly;

namespace {

// independent radial oracle for the fractional norm of a centered Gaussian
// exp(-|x|^2 / (2 sigma^2)): norm^2 = 2 pi sigma^4 int_0^inf (1+rho^2)^s
// exp(-sigma^2 rho^2) rho d rho, by high-order composite Gauss quadrature
double gaussian_norm2_oracle(double sigma, double s) {
  const GaussRule& g = gauss_legendre(24);
  const double rho_max = 12.0 / sigma + 12.0;
  const int panels = 400;
  const double w = rho_max / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = p * w;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      const double rho = a + 0.5 * w * (1.0 + g.nodes[i]);
      acc += 0.5 * w * g.weights[i] * std::pow(1.0 + rho * rho, s) *
             std::exp(-sigma * sigma * rho * rho) * rho;
    }
  }
  return 2.0 * kPi * std::pow(sigma, 4) * acc;
}

PiecewisePoly zero_poly(std::shared_ptr<const Mesh> mesh, int degree) {
  PiecewisePoly v;
  v.mesh = std::move(mesh);
  v.degree = degree;
  for (size_t i = 0; i < v.mesh->elements.size(); ++i)
    v.coeffs.push_back(Eigen::VectorXd::Zero(basis_size(degree)));
  return v;
}

}  // namespace

TEST_CASE("broken norm facts", "[norms]") {
  auto square = std::make_shared<Mesh>(
      single_element_mesh(make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}})));

  SECTION("hand oracle: u = x, v = 0, j = 1 on the unit square") {
    SmoothFunction u;
    u.value = [](Vec2 p) { return p.x; };
    u.grad = [](Vec2) { return Vec2{1.0, 0.0}; };
    const auto r = broken_norm(u, zero_poly(square, 0), 1, 5);
    // norm^2 = int (x^2 + 1) = 4/3, seminorm = 1
    REQUIRE(r.value * r.value == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
    REQUIRE(r.seminorm == Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("j = 0 equals the plain L2 route") {
    SmoothFunction u;
    u.value = [](Vec2 p) { return std::sin(p.x + 2.0 * p.y); };
    const auto dec = decompose(square->elements[0].geom, 5);
    const auto direct = integrate_fn(
        *dec, [&u](Vec2 p) { return u.value(p) * u.value(p); }, 4);
    const auto r = broken_norm(u, zero_poly(square, 0), 0, 5, 4);
    REQUIRE(r.value == Catch::Approx(std::sqrt(direct.value)).epsilon(1e-12));
  }
  SECTION("u = v gives zero") {
    const auto domain = make_snowflake(1.0);
    const TestFunction u = make_test_function({{"id", "poly"}, {"p0", 2}},
                                              domain);
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    auto [v, rep] = l2_project(mesh, u.fn.value, 2, 6);
    REQUIRE(broken_norm(u.fn, v, 1, 6).value < 1e-9);
  }
  SECTION("missing derivative callables are rejected") {
    SmoothFunction u;
    u.value = [](Vec2) { return 1.0; };
    REQUIRE_THROWS_AS(broken_norm(u, zero_poly(square, 0), 1, 3),
                      std::invalid_argument);
  }
  SECTION("additivity over elements") {
    const auto domain = make_snowflake(1.0);
    const TestFunction u = make_test_function({{"id", "gaussian"}}, domain);
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    const auto whole = broken_norm(u.fn, zero_poly(mesh, 0), 0, 5);
    double sum2 = 0.0;
    for (const auto& e : mesh->elements) {
      auto sub = std::make_shared<Mesh>(single_element_mesh(e.geom));
      const auto part = broken_norm(u.fn, zero_poly(sub, 0), 0, 5);
      sum2 += part.value * part.value;
    }
    REQUIRE(whole.value == Catch::Approx(std::sqrt(sum2)).epsilon(1e-12));
  }
}

TEST_CASE("zero extension sampling", "[norms]") {
  const Mesh m = single_element_mesh(make_snowflake(1.0));
  const double diam0 = diameter(m.domain);
  const double box = 2.5 * diam0;
  const Vec2 origin{-0.5 * box, -0.5 * box};

  SECTION("zero function samples to zero") {
    const auto g = sample_zero_extension(
        m, [](Vec2) { return 0.0; }, nullptr, origin, box, 128);
    for (double v : g.values) REQUIRE(v == 0.0);
  }
  SECTION("outside and uncertain points are exactly zero") {
    const auto g = sample_zero_extension(
        m, [](Vec2) { return 1.0; }, nullptr, origin, box, 128);
    for (size_t i = 0; i < g.values.size(); ++i)
      if (g.mask[i] != GridMask::Inside) REQUIRE(g.values[i] == 0.0);
    REQUIRE(g.uncertain_count > 0);
    REQUIRE(g.inside_count > 0);
  }
  SECTION("inside mask measures the domain area") {
    const int n = 256;
    const auto g = sample_zero_extension(
        m, [](Vec2) { return 1.0; }, nullptr, origin, box, n);
    const double est = double(g.inside_count) * g.cell() * g.cell();
    // midpoint counting error is a perimeter-proportional O(1/N) effect
    REQUIRE(std::abs(est - 2.0 * std::sqrt(3.0) / 5.0) < 10.0 * box / n);
  }
  SECTION("constant residual vanishes after projection") {
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    auto [v, rep] = l2_project(mesh, [](Vec2) { return 1.0; }, 0, 6);
    const auto g = sample_zero_extension(
        *mesh, [](Vec2) { return 1.0; }, &v, origin, box, 256);
    double sup = 0.0;
    for (double val : g.values) sup = std::max(sup, std::abs(val));
    REQUIRE(sup < 1e-9);
  }
  SECTION("undersized boxes are rejected") {
    REQUIRE_THROWS_AS(sample_zero_extension(m, [](Vec2) { return 1.0; },
                                            nullptr, origin, 1.5 * diam0, 64),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(sample_zero_extension(m, [](Vec2) { return 1.0; },
                                            nullptr, origin, box, 100),
                      std::invalid_argument);
  }
}

TEST_CASE("fourier norm: Parseval identity at s = 0", "[norms]") {
  std::mt19937_64 rng(12);
  const GridSample g = grid_sample_function(
      [&rng](Vec2) { return 2.0 * uniform01(rng) - 1.0; }, {-3, -3}, 6.0, 128);
  const double l2 = grid_l2_norm(g);
  const double sp = sobolev_norm_fourier(g, 0.0).value;
  REQUIRE(sp == Catch::Approx(l2).epsilon(1e-12));
}

TEST_CASE("fourier norm matches the radial oracle for a Gaussian", "[norms]") {
  const double box = 16.0, sigma = box / 16.0;
  const GridSample g = grid_sample_function(
      [sigma](Vec2 x) {
        return std::exp(-dot(x, x) / (2.0 * sigma * sigma));
      },
      {-0.5 * box, -0.5 * box}, box, 256);
  for (double s : {-1.0, -0.5, 0.0, 1.0}) {
    const double got = sobolev_norm_fourier(g, s).value;
    const double expect = std::sqrt(gaussian_norm2_oracle(sigma, s));
    REQUIRE(got == Catch::Approx(expect).epsilon(1e-3));
  }
}

TEST_CASE("fourier norm is monotone in s", "[norms][property]") {
  const GridSample g = grid_sample_function(
      [](Vec2 x) { return std::exp(-3.0 * dot(x, x)) * (1.0 + x.x); },
      {-4, -4}, 8.0, 128);
  double prev = -1.0;
  for (double s : {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0}) {
    const double v = sobolev_norm_fourier(g, s).value;
    REQUIRE(v >= prev);
    prev = v;
  }
}

TEST_CASE("self-convergence delta shrinks with resolution", "[norms]") {
  auto sampler = [](int n) {
    return grid_sample_function(
        [](Vec2 x) { return std::exp(-2.0 * dot(x, x)); }, {-5, -5}, 10.0, n);
  };
  const NormResult a = sobolev_norm_with_delta(sampler, 128, -1.0);
  const NormResult b = sobolev_norm_with_delta(sampler, 256, -1.0);
  REQUIRE(std::isfinite(a.delta));
  REQUIRE(b.delta <= a.delta + 1e-12);
}

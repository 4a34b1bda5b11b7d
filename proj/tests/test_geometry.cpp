#include <catch2/catch_amalgamated.hpp>

#include "snowpoly/geometry.hpp"
#include "snowpoly/random.hpp"

using namespace snowpoly;

namespace {

// independent even-odd point-in-polygon oracle
bool winding_oracle_inside(const std::vector<Vec2>& poly, Vec2 p) {
  bool in = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[j], b = poly[i];
    if ((b.y > p.y) != (a.y > p.y) &&
        p.x < b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y))
      in = !in;
  }
  return in;
}

// streaming variant for deep prefractals: walks every segment of the
// depth-k snowflake polyline by plain substitution, no pruning, no storage
int oracle_crossings_rec(Vec2 a, Vec2 b, int depth, Vec2 p) {
  if (depth == 0) {
    if ((a.y > p.y) == (b.y > p.y)) return 0;
    return p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) ? 1 : 0;
  }
  const Vec2 d = b - a;
  const Vec2 c1 = a + d * (1.0 / 3.0);
  const Vec2 c2 = a + d * (2.0 / 3.0);
  const double hx = 0.5 * d.x / 3.0 + std::sqrt(3.0) / 2.0 * d.y / 3.0;
  const double hy = -std::sqrt(3.0) / 2.0 * d.x / 3.0 + 0.5 * d.y / 3.0;
  const Vec2 peak{c1.x + hx, c1.y + hy};
  return oracle_crossings_rec(a, c1, depth - 1, p) +
         oracle_crossings_rec(c1, peak, depth - 1, p) +
         oracle_crossings_rec(peak, c2, depth - 1, p) +
         oracle_crossings_rec(c2, b, depth - 1, p);
}

bool deep_snowflake_oracle_inside(double side, int depth, Vec2 p) {
  const auto tri = snowflake_boundary(side, 0);
  int n = 0;
  for (int i = 0; i < 3; ++i)
    n += oracle_crossings_rec(tri[i], tri[(i + 1) % 3], depth, p);
  return n % 2 == 1;
}

double perimeter(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (size_t i = 0; i < pts.size(); ++i)
    s += dist(pts[i], pts[(i + 1) % pts.size()]);
  return s;
}

// area of the snowflake by summing the triangles added at each substitution
// step (geometric series oracle)
double area_series_oracle(double side, int terms) {
  double area = std::sqrt(3.0) / 4.0 * side * side;
  double edges = 3.0, len = side;
  for (int i = 0; i < terms; ++i) {
    len /= 3.0;
    area += edges * std::sqrt(3.0) / 4.0 * len * len;
    edges *= 4.0;
  }
  return area;
}

}  // namespace

TEST_CASE("apply_similarity basic maps", "[geometry]") {
  REQUIRE(apply_similarity(Similarity{}, {2, 3}).x == 2.0);
  REQUIRE(apply_similarity(Similarity{}, {2, 3}).y == 3.0);
  const Vec2 a = apply_similarity(Similarity{1.0 / 3.0, 0, false, {0, 0}},
                                  {3, 0});
  REQUIRE(a.x == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(a.y == Catch::Approx(0.0).margin(1e-15));
  const Vec2 b = apply_similarity(Similarity{1.0, kPi / 2, false, {0, 0}},
                                  {1, 0});
  REQUIRE(b.x == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(b.y == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("similarity composition and inverse", "[geometry]") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Similarity s{0.1 + 5.0 * uniform01(rng), 8.0 * uniform01(rng) - 4.0,
                       uniform01(rng) < 0.5,
                       {2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0}};
    const Similarity t{0.1 + 2.0 * uniform01(rng), 8.0 * uniform01(rng) - 4.0,
                       uniform01(rng) < 0.5,
                       {2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0}};
    const Vec2 x{20.0 * uniform01(rng) - 10.0, 20.0 * uniform01(rng) - 10.0};
    // composition is a similarity with the product scale
    const Similarity st = compose(s, t);
    REQUIRE(st.scale == Catch::Approx(s.scale * t.scale).epsilon(1e-14));
    const Vec2 via = s.apply(t.apply(x));
    REQUIRE(dist(st.apply(x), via) < 1e-10 * (1.0 + norm(via)));
    // inverse roundtrip within 1e-12 for |x| <= 10
    REQUIRE(dist(s.inverse().apply(s.apply(x)), x) < 1e-12 * s.scale + 1e-12);
  }
  REQUIRE_THROWS_AS(validate(Similarity{1e-10, 0, false, {0, 0}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(validate(Similarity{1e10, 0, false, {0, 0}}),
                    std::invalid_argument);
}

TEST_CASE("snowflake boundary follows the Koch substitution", "[geometry]") {
  // substitution oracle: each step multiplies segment count by 4 and divides
  // segment length by 3
  for (double side : {1.0, 2.5}) {
    const auto p0 = snowflake_boundary(side, 0);
    REQUIRE(p0.size() == 3);
    REQUIRE(perimeter(p0) == Catch::Approx(3.0 * side).epsilon(1e-13));

    const auto p1 = snowflake_boundary(side, 1);
    REQUIRE(p1.size() == 12);
    REQUIRE(perimeter(p1) == Catch::Approx(4.0 * side).epsilon(1e-13));
    for (size_t i = 0; i < p1.size(); ++i)
      REQUIRE(dist(p1[i], p1[(i + 1) % p1.size()]) ==
              Catch::Approx(side / 3.0).epsilon(1e-12));

    const auto p5 = snowflake_boundary(side, 5);
    REQUIRE(p5.size() == 3 * (1u << 10));
    REQUIRE(perimeter(p5) ==
            Catch::Approx(3.0 * std::pow(4.0 / 3.0, 5) * side).epsilon(1e-13));
  }
  // positively oriented and closed
  REQUIRE(polygon_area(snowflake_boundary(1.0, 3)) > 0.0);
}

TEST_CASE("classification is certified against the true domain", "[geometry]") {
  const auto snow = make_snowflake(1.0);

  SECTION("centroid is Inside at every depth") {
    for (int k = 0; k <= 9; ++k)
      REQUIRE(classify_point(snow, {0, 0}, k) == Location::Inside);
  }
  SECTION("far point is Outside") {
    for (int k = 0; k <= 6; ++k)
      REQUIRE(classify_point(snow, {10, 0}, k) == Location::Outside);
  }
  SECTION("band points resolve with depth and match the winding oracle") {
    // a depth-3 prefractal vertex sits on the true boundary, so it stays in
    // the uncertainty band at every depth
    const auto poly3 = snowflake_boundary(1.0, 3);
    REQUIRE(classify_point(snow, poly3[5], 3) == Location::Uncertain);
    REQUIRE(classify_point(snow, poly3[5], 8) == Location::Uncertain);

    // points nudged off a vertex: Uncertain at depth 3, resolved by depth 6
    // when they fall outside the deeper band, and the resolution matches an
    // independent winding-number oracle on the depth-(6+6) polyline
    std::mt19937_64 rng(3);
    int resolved = 0;
    for (int trial = 0; trial < 24 && resolved < 4; ++trial) {
      const Vec2 v = poly3[rng() % poly3.size()];
      const double ang = 2.0 * kPi * uniform01(rng);
      const Vec2 p = v + std::pow(3.0, -5.0) * Vec2{std::cos(ang), std::sin(ang)};
      const Location coarse = classify_point(snow, p, 3);
      // within the depth-3 band the point is either certified Inside (the
      // depth-3 polygon already contains it) or Uncertain, never Outside
      REQUIRE(coarse != Location::Outside);
      if (coarse != Location::Uncertain) continue;
      const Location fine = classify_point(snow, p, 6);
      if (fine == Location::Uncertain) continue;
      ++resolved;
      REQUIRE((fine == Location::Inside) ==
              deep_snowflake_oracle_inside(1.0, 6 + 6, p));
    }
    REQUIRE(resolved >= 2);
  }
}

TEST_CASE("classification consistency across depths", "[geometry][property]") {
  const auto snow = make_snowflake(1.0);
  const Rect bb = certified_bbox(snow);
  std::mt19937_64 rng(0);
  for (int i = 0; i < 10000; ++i) {
    const Vec2 p{bb.lo.x + uniform01(rng) * (bb.hi.x - bb.lo.x),
                 bb.lo.y + uniform01(rng) * (bb.hi.y - bb.lo.y)};
    const Location coarse = classify_point(snow, p, 3);
    const Location fine = classify_point(snow, p, 7);
    if (coarse == Location::Inside) REQUIRE(fine != Location::Outside);
    if (coarse == Location::Outside) REQUIRE(fine != Location::Inside);
  }
}

TEST_CASE("similarity group action on classification", "[geometry][property]") {
  const auto snow = make_snowflake(1.0);
  const Similarity s{1.0 / 3.0, kPi / 6.0, false, {2.0 / 9.0, 0.0}};
  const auto mapped = make_mapped_snowflake({s});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 3000; ++i) {
    const Vec2 p{uniform01(rng) - 0.5, uniform01(rng) - 0.5};
    REQUIRE(classify_point(mapped, p, 6) ==
            classify_point(snow, s.inverse().apply(p), 6));
  }
}

TEST_CASE("reference areas", "[geometry]") {
  const double a_series = area_series_oracle(1.0, 60);
  REQUIRE(reference_area(make_snowflake(1.0)) ==
          Catch::Approx(a_series).epsilon(1e-14));
  REQUIRE(reference_area(make_snowflake(1.0)) ==
          Catch::Approx(2.0 * std::sqrt(3.0) / 5.0).epsilon(1e-15));
  REQUIRE(reference_area(make_triangle({0, 0}, {1, 0}, {0, 1})) ==
          Catch::Approx(0.5).epsilon(1e-15));
  REQUIRE(reference_area(make_mapped_snowflake(
              {Similarity{1.0 / 3.0, 0.4, false, {1, 2}}})) ==
          Catch::Approx(2.0 * std::sqrt(3.0) / 5.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("prefractal polygon area increases to the closed form",
          "[geometry][property]") {
  const double limit = 2.0 * std::sqrt(3.0) / 5.0;
  double prev = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const double a = polygon_area(snowflake_boundary(1.0, k));
    REQUIRE(a > prev);
    // remaining gap is exactly (3/5) A0 (4/9)^k for the substitution series
    // (shoelace roundoff grows with the segment count, hence the margin)
    const double gap = 0.6 * std::sqrt(3.0) / 4.0 * std::pow(4.0 / 9.0, k);
    REQUIRE(limit - a == Catch::Approx(gap).epsilon(1e-7).margin(1e-12));
    prev = a;
  }
}

TEST_CASE("diameter via hull oracle", "[geometry]") {
  REQUIRE(diameter(make_triangle({0, 0}, {1, 0}, {0, 1})) ==
          Catch::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const double d = diameter(make_snowflake(1.0));
  // bracket from the circumdiameter of the base triangle (attained at the
  // tips) and the depth-1 perimeter bound
  const double lo = 2.0 / std::sqrt(3.0);
  REQUIRE(d >= lo - 1e-12);
  REQUIRE(d <= 4.0 / 3.0 * lo);
  // hull oracle at depth 12 agrees
  REQUIRE(hull_diameter(snowflake_boundary(1.0, 12)) ==
          Catch::Approx(d).epsilon(1e-9));
  // scaling law
  REQUIRE(diameter(make_mapped_snowflake(
              {Similarity{1.0 / 3.0, 1.0, false, {5, 5}}})) ==
          Catch::Approx(d / 3.0).epsilon(1e-12));
}

TEST_CASE("certified bounding boxes", "[geometry]") {
  // snowflake box is exactly the box of its six tips
  const Rect bb = certified_bbox(make_snowflake(1.0));
  const double r = 1.0 / std::sqrt(3.0);
  REQUIRE(bb.lo.x == Catch::Approx(-0.5).margin(1e-15));
  REQUIRE(bb.hi.x == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(bb.lo.y == Catch::Approx(-r).margin(1e-15));
  REQUIRE(bb.hi.y == Catch::Approx(r).margin(1e-15));
  // deep prefractal stays within it
  for (const Vec2& p : snowflake_boundary(1.0, 10)) {
    REQUIRE(p.x >= bb.lo.x - 1e-12);
    REQUIRE(p.x <= bb.hi.x + 1e-12);
    REQUIRE(p.y >= bb.lo.y - 1e-12);
    REQUIRE(p.y <= bb.hi.y + 1e-12);
  }
}

TEST_CASE("degenerate construction is rejected", "[geometry]") {
  REQUIRE_THROWS_AS(make_triangle({0, 0}, {1, 1}, {2, 2}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(make_fractal_edged({Edge{{0, 0}, {0, 0}, false},
                                        Edge{{0, 0}, {1, 0}, false}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(make_snowflake(-1.0), std::invalid_argument);
}

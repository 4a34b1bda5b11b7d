#include <catch2/catch_amalgamated.hpp>

#include "snowpoly/mesh.hpp"

using namespace snowpoly;

TEST_CASE("self-similar mesh structure", "[mesh]") {
  const double diam0 = diameter(make_snowflake(1.0));

  SECTION("level 0 is the domain itself") {
    const Mesh m = snowflake_self_similar_mesh(0);
    REQUIRE(m.elements.size() == 1);
    REQUIRE(m.meshwidth == Catch::Approx(diam0).epsilon(1e-12));
  }
  SECTION("level 1 has 7 large and 6 small copies") {
    const Mesh m = snowflake_self_similar_mesh(1);
    REQUIRE(m.elements.size() == 13);
    int large = 0, small = 0;
    for (const auto& e : m.elements) {
      const double s = frame(e.geom).scale;
      if (std::abs(s - 1.0 / 3.0) < 1e-12) ++large;
      if (std::abs(s - std::pow(3.0, -1.5)) < 1e-12) ++small;
    }
    REQUIRE(large == 7);
    REQUIRE(small == 6);
    // area-conservation oracle fixing the small scale:
    // 7 (1/3)^2 + 6 s^2 = 1  =>  s = 3^(-3/2)
    REQUIRE(7.0 / 9.0 + 6.0 * std::pow(std::pow(3.0, -1.5), 2) ==
            Catch::Approx(1.0).epsilon(1e-15));
    REQUIRE(m.meshwidth == Catch::Approx(diam0 / 3.0).epsilon(1e-12));
  }
  SECTION("level 2 by recursive substitution") {
    const Mesh m = snowflake_self_similar_mesh(2);
    REQUIRE(m.elements.size() == 169);
    REQUIRE(m.meshwidth == Catch::Approx(diam0 / 9.0).epsilon(1e-12));
  }
  SECTION("element count guard") {
    REQUIRE_THROWS_AS(snowflake_self_similar_mesh(7), std::invalid_argument);
    REQUIRE_THROWS_AS(snowflake_self_similar_mesh(-1), std::invalid_argument);
  }
  SECTION("element diameters match their geometry") {
    const Mesh m = snowflake_self_similar_mesh(1);
    for (const auto& e : m.elements)
      REQUIRE(e.h_k == Catch::Approx(diameter(e.geom)).epsilon(1e-9));
  }
}

TEST_CASE("refine reproduces the next level up to ordering", "[mesh]") {
  const Mesh m1 = snowflake_self_similar_mesh(1);
  const Mesh m2 = snowflake_self_similar_mesh(2);
  const Mesh r = refine(m1);
  REQUIRE(r.elements.size() == m1.elements.size() * 13);
  REQUIRE(r.meshwidth == Catch::Approx(m1.meshwidth / 3.0).epsilon(1e-12));
  auto keys = [](const Mesh& m) {
    std::vector<std::uint64_t> k;
    for (const auto& e : m.elements) k.push_back(descriptor_hash(e.geom));
    std::sort(k.begin(), k.end());
    return k;
  };
  REQUIRE(keys(r) == keys(m2));
}

TEST_CASE("hybrid mesh structure", "[mesh]") {
  const Mesh m = hybrid_mesh();
  REQUIRE(m.elements.size() == 12);
  int triangles = 0, lobes = 0;
  for (const auto& e : m.elements) {
    if (std::holds_alternative<Triangle>(e.geom.shape)) ++triangles;
    if (std::holds_alternative<FractalEdged>(e.geom.shape)) ++lobes;
  }
  REQUIRE(triangles == 6);
  REQUIRE(lobes == 6);

  // six congruent triangles tiling the inner hexagon
  const double tri_area = reference_area(m.elements[0].geom);
  for (int i = 0; i < 6; ++i)
    REQUIRE(reference_area(m.elements[i].geom) ==
            Catch::Approx(tri_area).epsilon(1e-13));
  // hexagon of side 1/3
  REQUIRE(6.0 * tri_area ==
          Catch::Approx(6.0 * std::sqrt(3.0) / 4.0 / 9.0).epsilon(1e-13));

  // fractal-edged elements congruent by 60-degree rotation
  const double lobe_area = reference_area(m.elements[6].geom);
  for (int i = 6; i < 12; ++i) {
    REQUIRE(reference_area(m.elements[i].geom) ==
            Catch::Approx(lobe_area).epsilon(1e-13));
    const auto p0 = boundary_polyline(m.elements[6].geom, 3);
    auto pi = boundary_polyline(m.elements[i].geom, 3);
    REQUIRE(p0.size() == pi.size());
    double worst = 0.0;
    for (size_t k = 0; k < p0.size(); ++k)
      worst = std::max(worst,
                       dist(rotate(p0[k], (i - 6) * kPi / 3.0), pi[k]));
    REQUIRE(worst < 1e-12);
  }

  // areas partition the domain: 6 triangles + 6 lobes = |Omega|
  REQUIRE(6.0 * tri_area + 6.0 * lobe_area ==
          Catch::Approx(2.0 * std::sqrt(3.0) / 5.0).epsilon(1e-12));
  // and the certified (quadrature) bracket agrees
  REQUIRE(check_measure_partition(m).pass);
}

TEST_CASE("hybrid refinement splits lobes into triangles and caps", "[mesh]") {
  const Mesh m0 = hybrid_mesh();
  const Mesh m1 = refine(m0);
  // 6 triangles -> 24 triangles; 6 lobes -> 6 triangles + 12 caps
  REQUIRE(m1.elements.size() == 42);
  REQUIRE(check_measure_partition(m1).pass);
  const Mesh m2 = refine(m1);
  REQUIRE(check_measure_partition(m2).pass);
  REQUIRE(check_disjointness(m2, 4000, 17).pass);
}

TEST_CASE("generic fractal-edged shapes do not refine", "[mesh]") {
  const Mesh sq =
      single_element_mesh(make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  REQUIRE_THROWS_WITH(refine(sq),
                      Catch::Matchers::ContainsSubstring("refine"));
}

TEST_CASE("measure partition and disjointness", "[mesh][property]") {
  for (int level : {1, 2}) {
    const Mesh m = snowflake_self_similar_mesh(level);
    const auto part = check_measure_partition(m);
    REQUIRE(part.pass);
    const auto dis = check_disjointness(m, 10000, 42 + level);
    REQUIRE(dis.pass);
    // coverage: the vast majority of domain-inside points belong to exactly
    // one element (the rest sit in uncertainty bands)
    REQUIRE(dis.unclaimed < dis.points / 100);
  }
  SECTION("tampered mesh fails the partition check") {
    Mesh m = snowflake_self_similar_mesh(1);
    m.elements.pop_back();
    REQUIRE_FALSE(check_measure_partition(m).pass);
  }
}

TEST_CASE("covering choice function", "[mesh]") {
  SECTION("element strictly inside one lattice cube") {
    const Mesh m = single_element_mesh(
        make_polygon({{0.05, 0.05}, {0.3, 0.05}, {0.3, 0.3}, {0.05, 0.3}}));
    const Covering cov = build_covering(m);
    REQUIRE(cov.kappa[0] == LatticeIndex{0, 0});
    REQUIRE(cov.certified_cubes[0].size() == 1);
  }
  SECTION("element straddling one grid line picks the lexicographic minimum") {
    const Mesh m = single_element_mesh(
        make_polygon({{-0.1, 0.02}, {0.2, 0.02}, {0.2, 0.12}, {-0.1, 0.12}}));
    const Covering cov = build_covering(m);
    REQUIRE(cov.certified_cubes[0].size() == 2);
    REQUIRE(cov.kappa[0] == LatticeIndex{-1, 0});
    REQUIRE(cov.possible_cube_count(0) == 2);
  }
  SECTION("each lattice cube lies in exactly nine big cubes") {
    const auto ws = big_cubes_containing({2, -1});
    REQUIRE(ws.size() == 9);
    for (const auto& w : ws) {
      REQUIRE(std::abs(w[0] - 2) <= 1);
      REQUIRE(std::abs(w[1] + 1) <= 1);
    }
  }
  SECTION("element-cube count bound 1..4 on mesh levels 1 to 3") {
    for (int level : {1, 2, 3}) {
      const Mesh m = snowflake_self_similar_mesh(level);
      const Covering cov = build_covering(m);
      REQUIRE(cov.big_cube_diameter() ==
              Catch::Approx(3.0 * std::sqrt(2.0) * m.meshwidth).epsilon(1e-13));
      for (size_t i = 0; i < m.elements.size(); ++i) {
        REQUIRE(cov.certified_cubes[i].size() >= 1);
        REQUIRE(cov.possible_cube_count((int)i) <= 4);
        REQUIRE((int)cov.certified_cubes[i].size() <=
                cov.possible_cube_count((int)i));
      }
    }
  }
}

TEST_CASE("mesh serialization round-trips", "[mesh]") {
  const auto path =
      (std::filesystem::temp_directory_path() / "snowpoly_mesh_test.json")
          .string();
  for (const Mesh& m : {snowflake_self_similar_mesh(1), hybrid_mesh()}) {
    save_mesh(m, path);
    const Mesh r = load_mesh(path);
    REQUIRE(r.elements.size() == m.elements.size());
    REQUIRE(r.meshwidth == m.meshwidth);
    REQUIRE(mesh_hash(r) == mesh_hash(m));
    for (size_t i = 0; i < m.elements.size(); ++i) {
      REQUIRE(r.elements[i].h_k == m.elements[i].h_k);
      REQUIRE(r.elements[i].area_lo == m.elements[i].area_lo);
    }
  }
  std::filesystem::remove(path);
}

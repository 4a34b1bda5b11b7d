// Invariant battery behind the `verify` subcommand: geometry oracles,
// covering counts, measure partition, polynomial reproduction, Galerkin
// residuals, the Parseval identity, and projection optimality, each reported
// as an independent pass/fail check.
#pragma once

#include "snowpoly/study.hpp"

namespace snowpoly {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace detail {

class CheckRunner {
 public:
  explicit CheckRunner(VerifyReport& r) : report_(r) {}

  template <class F>
  void operator()(const std::string& name, F&& body) {
    CheckResult c;
    c.name = name;
    try {
      c.detail = body(c.pass);
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    report_.checks.push_back(std::move(c));
  }

 private:
  VerifyReport& report_;
};

inline std::string num_pair(double a, double b) {
  return fmt_num(a) + " vs " + fmt_num(b);
}

}  // namespace detail

/// Runs the full invariant battery. Sample sizes are chosen so a fresh run
/// finishes in a few minutes.
inline VerifyReport verify(std::uint64_t seed = 0) {
  VerifyReport report;
  detail::CheckRunner check(report);
  const double kArea = 2.0 * std::sqrt(3.0) / 5.0;
  const auto snow = make_snowflake(1.0);
  const double diam0 = diameter(snow);

  check("similarity_inverse_roundtrip", [&](bool& pass) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      Similarity s{0.2 + 3.0 * uniform01(rng), 6.0 * uniform01(rng) - 3.0,
                   uniform01(rng) < 0.5,
                   {4.0 * uniform01(rng) - 2.0, 4.0 * uniform01(rng) - 2.0}};
      const Vec2 x{20.0 * uniform01(rng) - 10.0, 20.0 * uniform01(rng) - 10.0};
      worst = std::max(worst, dist(s.inverse().apply(s.apply(x)), x));
      Similarity t{0.5 + uniform01(rng), uniform01(rng), false,
                   {uniform01(rng), uniform01(rng)}};
      if (std::abs(compose(s, t).scale - s.scale * t.scale) > 1e-12)
        worst = 1.0;
    }
    pass = worst <= 1e-12;
    return "max roundtrip error " + detail::fmt_num(worst);
  });

  check("snowflake_boundary_substitution", [&](bool& pass) {
    const auto p0 = snowflake_boundary(1.0, 0);
    const auto p1 = snowflake_boundary(1.0, 1);
    const auto p5 = snowflake_boundary(1.0, 5);
    auto perim = [](const std::vector<Vec2>& pts) {
      double s = 0.0;
      for (size_t i = 0; i < pts.size(); ++i)
        s += dist(pts[i], pts[(i + 1) % pts.size()]);
      return s;
    };
    pass = p0.size() == 3 && p1.size() == 12 &&
           std::abs(perim(p1) - 4.0) < 1e-12 &&
           p5.size() == 3 * (1u << 10) &&
           std::abs(perim(p5) - 3.0 * std::pow(4.0 / 3.0, 5)) < 1e-12;
    return "segments " + std::to_string(p0.size()) + "/" +
           std::to_string(p1.size()) + "/" + std::to_string(p5.size());
  });

  check("area_bracket_contains_closed_form", [&](bool& pass) {
    const auto d = decompose(snow, 8);
    pass = d->measure_lo <= kArea && kArea <= d->measure_hi;
    return "[" + detail::fmt_num(d->measure_lo) + ", " +
           detail::fmt_num(d->measure_hi) + "] vs " + detail::fmt_num(kArea);
  });

  check("diameter_bracket_and_scaling", [&](bool& pass) {
    const double lo = 2.0 / std::sqrt(3.0);
    const double hi = 4.0 / 3.0 * lo;
    const auto copy = make_mapped_snowflake(
        {Similarity{1.0 / 3.0, 0.7, false, {0.2, -0.1}}});
    pass = diam0 >= lo - 1e-12 && diam0 <= hi &&
           std::abs(diameter(copy) - diam0 / 3.0) < 1e-12 &&
           std::abs(diameter(make_triangle({0, 0}, {1, 0}, {0, 1})) -
                    std::sqrt(2.0)) < 1e-15;
    return "diam " + detail::fmt_num(diam0);
  });

  check("prefractal_area_monotone_with_rate", [&](bool& pass) {
    pass = true;
    double prev = -1.0;
    for (int k = 0; k <= 7; ++k) {
      const double a = polygon_area(snowflake_boundary(1.0, k));
      const double gap_exact =
          0.6 * std::sqrt(3.0) / 4.0 * std::pow(4.0 / 9.0, k);
      if (a <= prev || std::abs((kArea - a) - gap_exact) > 1e-9) pass = false;
      prev = a;
    }
    return "gap follows (4/9)^k geometric series";
  });

  check("classification_depth_consistency", [&](bool& pass) {
    std::mt19937_64 rng(seed + 1);
    const Rect bb = certified_bbox(snow);
    size_t flips = 0;
    for (int i = 0; i < 10000; ++i) {
      const Vec2 p{bb.lo.x + uniform01(rng) * (bb.hi.x - bb.lo.x),
                   bb.lo.y + uniform01(rng) * (bb.hi.y - bb.lo.y)};
      const Location a = classify_point(snow, p, 4);
      const Location b = classify_point(snow, p, 8);
      if ((a == Location::Inside && b == Location::Outside) ||
          (a == Location::Outside && b == Location::Inside))
        ++flips;
    }
    pass = flips == 0;
    return std::to_string(flips) + " certified flips in 10000 points";
  });

  check("similarity_group_action", [&](bool& pass) {
    std::mt19937_64 rng(seed + 2);
    const Similarity s{0.5, 0.9, false, {0.3, -0.2}};
    const auto mapped = make_mapped_snowflake({s});
    size_t bad = 0;
    for (int i = 0; i < 2000; ++i) {
      const Vec2 p{2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0};
      if (classify_point(mapped, p, 7) !=
          classify_point(snow, s.inverse().apply(p), 7))
        ++bad;
    }
    pass = bad == 0;
    return std::to_string(bad) + " mismatches";
  });

  check("self_similar_mesh_structure", [&](bool& pass) {
    const Mesh m = snowflake_self_similar_mesh(1);
    int large = 0, small = 0;
    for (const auto& e : m.elements) {
      const double s = frame(e.geom).scale;
      if (std::abs(s - 1.0 / 3.0) < 1e-12) ++large;
      if (std::abs(s - std::pow(3.0, -1.5)) < 1e-12) ++small;
    }
    pass = m.elements.size() == 13 && large == 7 && small == 6 &&
           std::abs(m.meshwidth - diam0 / 3.0) < 1e-12 &&
           std::abs(7.0 / 9.0 + 6.0 / 27.0 - 1.0) < 1e-15;
    return std::to_string(large) + " large + " + std::to_string(small) +
           " small";
  });

  check("measure_partition", [&](bool& pass) {
    const auto c1 = check_measure_partition(snowflake_self_similar_mesh(1));
    const auto ch = check_measure_partition(hybrid_mesh());
    pass = c1.pass && ch.pass;
    return "self-similar " + detail::num_pair(c1.element_sum_mid, c1.domain_area) +
           "; hybrid " + detail::num_pair(ch.element_sum_mid, ch.domain_area);
  });

  check("partition_detects_tampering", [&](bool& pass) {
    Mesh m = snowflake_self_similar_mesh(1);
    m.elements.erase(m.elements.begin());
    pass = !check_measure_partition(m).pass;
    return pass ? "tampered mesh rejected" : "tampered mesh accepted";
  });

  check("element_disjointness", [&](bool& pass) {
    const auto d1 = check_disjointness(snowflake_self_similar_mesh(1), 10000,
                                       seed + 3);
    const auto dh = check_disjointness(hybrid_mesh(), 10000, seed + 4);
    pass = d1.pass && dh.pass;
    return "multiply claimed: " + std::to_string(d1.multiply_claimed) + ", " +
           std::to_string(dh.multiply_claimed);
  });

  check("covering_counts_and_containment", [&](bool& pass) {
    pass = true;
    for (int l : {1, 2}) {
      const Mesh m = snowflake_self_similar_mesh(l);
      const Covering cov = build_covering(m);  // throws if not contained
      for (size_t i = 0; i < m.elements.size(); ++i) {
        const size_t cert = cov.certified_cubes[i].size();
        const int poss = cov.possible_cube_count((int)i);
        if (cert < 1 || poss > 4 || (int)cert > poss) pass = false;
      }
      if (std::abs(cov.big_cube_diameter() -
                   3.0 * std::sqrt(2.0) * m.meshwidth) > 1e-12)
        pass = false;
    }
    return "1 <= #cubes <= 4 on levels 1, 2";
  });

  check("nine_big_cubes_per_lattice_cube", [&](bool& pass) {
    Covering cov;
    cov.cube_size = 0.37;
    pass = true;
    for (LatticeIndex z : {LatticeIndex{0, 0}, LatticeIndex{-3, 5}}) {
      const auto ws = big_cubes_containing(z);
      if (ws.size() != 9) pass = false;
      const Rect q = cov.small_cube(z);
      for (const auto& w : ws) {
        const Rect big = cov.big_cube(w);
        if (!(big.lo.x <= q.lo.x && big.lo.y <= q.lo.y && big.hi.x >= q.hi.x &&
              big.hi.y >= q.hi.y))
          pass = false;
      }
      // and no tenth cube
      const Rect far_cube = cov.big_cube({z[0] + 2, z[1]});
      if (far_cube.lo.x <= q.lo.x) pass = false;
    }
    return "each Q_z lies in exactly 9 cubes Q'_w";
  });

  check("square_decomposes_all_interior", [&](bool& pass) {
    const auto sq = make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const auto d = decompose(sq, 6);
    pass = d->boundary_cells.empty() &&
           std::abs(d->measure_lo - 1.0) < 1e-12 &&
           std::abs(d->measure_hi - 1.0) < 1e-12;
    return "measure [" + detail::num_pair(d->measure_lo, d->measure_hi) + "]";
  });

  check("bracket_width_monotone_tightening", [&](bool& pass) {
    pass = true;
    double prev = 1e300;
    for (int d = 3; d <= 8; ++d) {
      const auto dec = decompose(snow, d);
      const double w = dec->measure_hi - dec->measure_lo;
      if (w > prev + 1e-15) pass = false;
      prev = w;
    }
    return "width nonincreasing to " + detail::fmt_num(prev);
  });

  check("triangle_moment_oracles", [&](bool& pass) {
    pass = std::abs(reference_simplex_moment(0, 0) - 0.5) < 1e-15 &&
           std::abs(reference_simplex_moment(1, 0) - 1.0 / 6.0) < 1e-15;
    const Triangle tri{{0.3, -0.1}, {1.1, 0.4}, {0.2, 1.2}};
    const auto t = triangle_moments(tri, 4);
    // affine invariance: area and centroid from the moment table
    const double area = 0.5 * std::abs(cross(tri.v1 - tri.v0, tri.v2 - tri.v0));
    if (std::abs(t.at(0, 0) - area) > 1e-13) pass = false;
    const Vec2 centroid = (1.0 / 3.0) * (tri.v0 + tri.v1 + tri.v2);
    if (std::abs(t.at(1, 0) / t.at(0, 0) - centroid.x) > 1e-13) pass = false;
    return "reference and mapped moments agree";
  });

  check("galerkin_and_reproduction", [&](bool& pass) {
    pass = true;
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    const TestFunction g = make_test_function({{"id", "gaussian"}}, snow);
    for (int p : {0, 1, 2, 3}) {
      const TestFunction u =
          make_test_function({{"id", "poly"}, {"p0", p}}, snow);
      auto [v, rep] = l2_project(mesh, u.fn.value, p, 6);
      const double err = broken_norm(u.fn, v, 0, 6).value;
      const double scale = detail::function_scale(snow, u.fn);
      if (err > 1e-10 * (1.0 + scale)) pass = false;
      if (rep.max_residual > 1e-8) pass = false;
      const Covering cov = build_covering(*mesh);
      const PiecewisePoly vc = covering_project(mesh, cov, u.fn.value, p);
      if (broken_norm(u.fn, vc, 0, 6).value > 1e-10 * (1.0 + scale))
        pass = false;
    }
    auto [vg, repg] = l2_project(mesh, g.fn.value, 2, 6);
    if (repg.max_residual > 1e-8) pass = false;
    return "reproduction < 1e-10, residuals < 1e-8";
  });

  check("projection_minimality_spot_check", [&](bool& pass) {
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    const TestFunction u = make_test_function({{"id", "gaussian"}}, snow);
    auto [v, rep] = l2_project(mesh, u.fn.value, 1, 6);
    const double base = broken_norm(u.fn, v, 0, 6).value;
    std::mt19937_64 rng(seed + 5);
    pass = true;
    for (int trial = 0; trial < 20; ++trial) {
      PiecewisePoly w = v;
      for (auto& c : w.coeffs)
        for (int i = 0; i < c.size(); ++i)
          c[i] += 1e-3 * (2.0 * uniform01(rng) - 1.0);
      if (broken_norm(u.fn, w, 0, 6).value < base - 1e-12) pass = false;
    }
    return "20 perturbations all at least as far from u";
  });

  check("projection_idempotence", [&](bool& pass) {
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(1));
    const TestFunction u = make_test_function({{"id", "gaussian"}}, snow);
    auto [v, rep] = l2_project(mesh, u.fn.value, 2, 6);
    auto [v2, rep2] = l2_project(
        mesh,
        [&v](Vec2 x) {
          const auto r = eval_piecewise(v, x);
          return r ? *r : 0.0;
        },
        2, 6);
    double worst = 0.0;
    for (size_t i = 0; i < v.coeffs.size(); ++i)
      worst = std::max(worst,
                       (v.coeffs[i] - v2.coeffs[i]).cwiseAbs().maxCoeff());
    pass = worst <= 1e-9;
    return "max coefficient drift " + detail::fmt_num(worst);
  });

  check("optimality_dominance_and_degree_monotonicity", [&](bool& pass) {
    pass = true;
    const TestFunction u = make_test_function({{"id", "gaussian"}}, snow);
    double prev = 1e300;
    for (int l : {1, 2}) {
      auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(l));
      const Covering cov = build_covering(*mesh);
      for (int p : {0, 1, 2}) {
        auto [v, rep] = l2_project(mesh, u.fn.value, p, 6);
        const double ep = broken_norm(u.fn, v, 0, 6).value;
        const PiecewisePoly vc = covering_project(mesh, cov, u.fn.value, p);
        const double ec = broken_norm(u.fn, vc, 0, 6).value;
        if (ep > ec + 1e-12) pass = false;
        if (l == 1) {
          if (ep > prev + 1e-12) pass = false;
          prev = ep;
        }
      }
    }
    return "projection error <= covering error; error(p+1) <= error(p)";
  });

  check("gram_condition_guard", [&](bool& pass) {
    pass = true;
    double worst = 1.0;
    std::vector<DomainDescriptor> shapes{snow,
                                         make_triangle({0, 0}, {1, 0}, {0, 1})};
    const Mesh hy = hybrid_mesh();
    shapes.push_back(hy.elements[6].geom);   // lobe
    for (const auto& sh : shapes)
      for (int p = 0; p <= 4; ++p)
        worst = std::max(worst, local_gram(sh, p, 6)->condition);
    pass = worst < 1e6;
    return "max condition " + detail::fmt_num(worst);
  });

  check("parseval_identity", [&](bool& pass) {
    std::mt19937_64 rng(seed + 6);
    GridSample g = grid_sample_function(
        [&rng](Vec2) { return 2.0 * uniform01(rng) - 1.0; }, {-1, -1}, 2.0, 64);
    const double l2 = grid_l2_norm(g);
    const double sp = sobolev_norm_fourier(g, 0.0).value;
    pass = std::abs(l2 - sp) <= 1e-12 * std::max(1.0, l2);
    return detail::num_pair(sp, l2);
  });

  check("norm_nesting_in_s", [&](bool& pass) {
    GridSample g = grid_sample_function(
        [](Vec2 x) { return std::exp(-4.0 * dot(x, x)); }, {-2, -2}, 4.0, 64);
    const double a = sobolev_norm_fourier(g, -1.0).value;
    const double b = sobolev_norm_fourier(g, -0.5).value;
    const double c = sobolev_norm_fourier(g, 0.0).value;
    pass = a <= b && b <= c;
    return detail::fmt_num(a) + " <= " + detail::fmt_num(b) +
           " <= " + detail::fmt_num(c);
  });

  check("broken_norm_hand_oracle", [&](bool& pass) {
    auto mesh = std::make_shared<Mesh>(
        single_element_mesh(make_polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}})));
    PiecewisePoly zero;
    zero.mesh = mesh;
    zero.degree = 0;
    zero.coeffs = {Eigen::VectorXd::Zero(1)};
    SmoothFunction u;
    u.value = [](Vec2 x) { return x.x; };
    u.grad = [](Vec2) { return Vec2{1.0, 0.0}; };
    const auto r = broken_norm(u, zero, 1, 5);
    pass = std::abs(r.value * r.value - 4.0 / 3.0) < 1e-12 &&
           std::abs(r.seminorm - 1.0) < 1e-12;
    return "norm^2 = " + detail::fmt_num(r.value * r.value) +
           ", seminorm = " + detail::fmt_num(r.seminorm);
  });

  check("zero_extension_mask", [&](bool& pass) {
    const Mesh m = single_element_mesh(snow);
    const double box = 2.5 * diam0;
    const GridSample g = sample_zero_extension(
        m, [](Vec2) { return 1.0; }, nullptr, {-0.5 * box, -0.5 * box}, box,
        256);
    const double area_est = double(g.inside_count) * g.cell() * g.cell();
    pass = std::abs(area_est - kArea) < 0.05;
    for (size_t i = 0; i < g.mask.size(); ++i)
      if (g.mask[i] != GridMask::Inside && g.values[i] != 0.0) pass = false;
    return "inside-mask area " + detail::fmt_num(area_est);
  });

  check("test_function_derivative_consistency", [&](bool& pass) {
    pass = true;
    std::mt19937_64 rng(seed + 7);
    for (const char* id : {"gaussian", "sinprod", "poly", "radial_singular"}) {
      const TestFunction u = make_test_function({{"id", id}}, snow);
      if (!u.fn.grad) continue;
      for (int i = 0; i < 50; ++i) {
        const Vec2 p{0.6 * uniform01(rng) - 0.3, 0.6 * uniform01(rng) - 0.3};
        if (norm(p) < 0.05) continue;  // keep clear of the singular center
        const double e = 1e-6;
        const Vec2 g = u.fn.grad(p);
        const double gx =
            (u.fn.value({p.x + e, p.y}) - u.fn.value({p.x - e, p.y})) / (2 * e);
        const double gy =
            (u.fn.value({p.x, p.y + e}) - u.fn.value({p.x, p.y - e})) / (2 * e);
        const double scale = std::max({1.0, std::abs(g.x), std::abs(g.y)});
        if (std::abs(g.x - gx) > 1e-5 * scale * 10 ||
            std::abs(g.y - gy) > 1e-5 * scale * 10)
          pass = false;
      }
    }
    return "analytic gradients match finite differences";
  });

  return report;
}

}  // namespace snowpoly

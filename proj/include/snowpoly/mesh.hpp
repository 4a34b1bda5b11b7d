// Meshes of the Koch snowflake domain: the 13-copy self-similar mesh, the
// 12-element hybrid mesh (6 triangles + 6 fractal-edged lobes), refinement,
// serialization, and the overlapping-cube covering with its choice function.
#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "snowpoly/geometry.hpp"
#include "snowpoly/quadrature.hpp"
#include "snowpoly/random.hpp"

namespace snowpoly {

constexpr int kAreaBoundDepth = 8;
// snowflake copies all share one unit decomposition, so a deep one is cheap;
// tight element certificates are what lets the partition check notice a
// single missing element
constexpr int kSnowflakeAreaDepth = 12;
constexpr int kMaxSelfSimilarLevel = 6;

inline int area_depth_for(const DomainDescriptor& d) {
  if (std::holds_alternative<Snowflake>(d.shape) ||
      std::holds_alternative<MappedSnowflake>(d.shape))
    return kSnowflakeAreaDepth;
  return kAreaBoundDepth;
}

struct Element {
  int id = 0;
  DomainDescriptor geom;
  double h_k = 0.0;               // diam(geom)
  double area_lo = 0.0, area_hi = 0.0;  // certified bounds
};

struct Mesh {
  DomainDescriptor domain;
  std::vector<Element> elements;
  double meshwidth = 0.0;  // max over elements of h_k
};

namespace detail {

inline Element make_element(int id, DomainDescriptor geom, int area_depth) {
  Element e;
  e.id = id;
  e.h_k = diameter(geom);
  const auto dec = decompose(geom, std::max(area_depth, area_depth_for(geom)));
  const double s2 = frame(geom).scale * frame(geom).scale;
  e.area_lo = dec->measure_lo * s2;
  e.area_hi = dec->measure_hi * s2;
  e.geom = std::move(geom);
  return e;
}

}  // namespace detail

inline Mesh mesh_from_descriptors(DomainDescriptor domain,
                                  std::vector<DomainDescriptor> elems,
                                  int area_depth = kAreaBoundDepth) {
  Mesh m;
  m.domain = std::move(domain);
  m.elements.reserve(elems.size());
  for (size_t i = 0; i < elems.size(); ++i)
    m.elements.push_back(detail::make_element((int)i, std::move(elems[i]),
                                              area_depth));
  for (const auto& e : m.elements) m.meshwidth = std::max(m.meshwidth, e.h_k);
  return m;
}

inline Mesh single_element_mesh(const DomainDescriptor& d) {
  return mesh_from_descriptors(d, {d});
}

// ---------------------------------------------------------------------------
// Self-similar snowflake mesh
// ---------------------------------------------------------------------------

/// The 13 similarities of one substitution step, in the frame of a unit
/// snowflake: 7 copies at scale 1/3 (one central, six towards the tips) and
/// 6 copies at scale 3^(-3/2) rotated by 30 degrees in the valleys. Scales
/// satisfy 7*(1/3)^2 + 6*(3^(-3/2))^2 = 1, so measure is conserved exactly.
inline const std::vector<Similarity>& snowflake_substitution() {
  static const std::vector<Similarity> subs = [] {
    std::vector<Similarity> s;
    const double arm_r = 2.0 * std::sqrt(3.0) / 9.0;
    const double small_r = 2.0 / 9.0;
    const double small_scale = std::pow(3.0, -1.5);
    s.push_back({1.0 / 3.0, 0.0, false, {0.0, 0.0}});
    for (int k = 0; k < 6; ++k) {
      const double a = kPi / 6.0 + k * kPi / 3.0;
      s.push_back({1.0 / 3.0, 0.0, false,
                   {arm_r * std::cos(a), arm_r * std::sin(a)}});
    }
    for (int k = 0; k < 6; ++k) {
      const double a = k * kPi / 3.0;
      s.push_back({small_scale, kPi / 6.0, false,
                   {small_r * std::cos(a), small_r * std::sin(a)}});
    }
    return s;
  }();
  return subs;
}

namespace detail {

inline void expand_chains(std::vector<Similarity>& chain, int level,
                          std::vector<std::vector<Similarity>>& out) {
  if (level == 0) {
    out.push_back(chain);
    return;
  }
  for (const Similarity& s : snowflake_substitution()) {
    chain.push_back(s);
    expand_chains(chain, level - 1, out);
    chain.pop_back();
  }
}

}  // namespace detail

/// Level-l self-similar mesh of the snowflake: 13^l elements, meshwidth
/// diam(domain) * 3^-l.
inline Mesh snowflake_self_similar_mesh(int level, double side = 1.0) {
  if (level < 0) throw std::invalid_argument("level must be >= 0");
  if (level > kMaxSelfSimilarLevel)
    throw std::invalid_argument("level > 6 rejected (13^l element guard)");
  std::vector<Similarity> root{Similarity{side, 0.0, false, {0.0, 0.0}}};
  std::vector<std::vector<Similarity>> chains;
  detail::expand_chains(root, level, chains);
  std::vector<DomainDescriptor> elems;
  elems.reserve(chains.size());
  for (auto& c : chains) elems.push_back(make_mapped_snowflake(std::move(c)));
  return mesh_from_descriptors(make_snowflake(side), std::move(elems));
}

// ---------------------------------------------------------------------------
// Hybrid mesh: 6 triangles + 6 fractal-edged lobes
// ---------------------------------------------------------------------------

namespace detail {

inline DomainDescriptor make_cap(Vec2 a, Vec2 m) {
  return make_fractal_edged({Edge{a, m, true}, Edge{m, a, false}});
}

inline DomainDescriptor make_lobe(Vec2 p, Vec2 m, Vec2 q) {
  return make_fractal_edged(
      {Edge{p, m, true}, Edge{m, q, true}, Edge{q, p, false}});
}

}  // namespace detail

/// The 12-element mesh of the snowflake: a central hexagon fan of 6
/// congruent triangles, plus 6 lobes (congruent under 60-degree rotation),
/// each bounded by one hexagon side and the fractal boundary arc between
/// two adjacent valley points of the domain.
inline Mesh hybrid_mesh(double side = 1.0) {
  const double valley_r = side / 3.0;
  const double tip_r = side / std::sqrt(3.0);
  std::vector<Vec2> p(6), m(6);
  for (int k = 0; k < 6; ++k) {
    const double a = k * kPi / 3.0;
    p[k] = {valley_r * std::cos(a), valley_r * std::sin(a)};
    const double b = kPi / 6.0 + k * kPi / 3.0;
    m[k] = {tip_r * std::cos(b), tip_r * std::sin(b)};
  }
  std::vector<DomainDescriptor> elems;
  for (int k = 0; k < 6; ++k)
    elems.push_back(make_triangle({0.0, 0.0}, p[k], p[(k + 1) % 6]));
  for (int k = 0; k < 6; ++k)
    elems.push_back(detail::make_lobe(p[k], m[k], p[(k + 1) % 6]));
  return mesh_from_descriptors(make_snowflake(side), std::move(elems));
}

// ---------------------------------------------------------------------------
// Refinement
// ---------------------------------------------------------------------------

namespace detail {

inline void refine_into(const DomainDescriptor& geom,
                        std::vector<DomainDescriptor>& out) {
  if (const auto* ms = std::get_if<MappedSnowflake>(&geom.shape)) {
    for (const Similarity& s : snowflake_substitution()) {
      auto chain = ms->chain;
      chain.push_back(s);
      out.push_back(make_mapped_snowflake(std::move(chain)));
    }
    return;
  }
  if (const auto* t = std::get_if<Triangle>(&geom.shape)) {
    const Vec2 m01 = 0.5 * (t->v0 + t->v1);
    const Vec2 m12 = 0.5 * (t->v1 + t->v2);
    const Vec2 m02 = 0.5 * (t->v0 + t->v2);
    out.push_back(make_triangle(t->v0, m01, m02));
    out.push_back(make_triangle(m01, t->v1, m12));
    out.push_back(make_triangle(m02, m12, t->v2));
    out.push_back(make_triangle(m01, m12, m02));
    return;
  }
  if (const auto* f = std::get_if<FractalEdged>(&geom.shape)) {
    // one-level Koch substitution split: a lobe peels off its chord triangle
    // and two curve caps; a cap peels off the bump triangle and four caps.
    std::vector<const Edge*> koch;
    int straight = 0;
    for (const auto& e : f->loop) (e.koch ? (void)koch.push_back(&e) : (void)++straight);
    if (koch.size() == 1 && straight == 1) {
      const auto kids = koch_children(*koch[0]);
      out.push_back(make_triangle(kids[1].a, kids[1].b, kids[2].b));
      for (const Edge& e : kids) out.push_back(make_cap(e.a, e.b));
      return;
    }
    if (koch.size() == 2 && straight == 1 && koch[0]->b.x == koch[1]->a.x &&
        koch[0]->b.y == koch[1]->a.y) {
      out.push_back(make_triangle(koch[0]->a, koch[0]->b, koch[1]->b));
      out.push_back(make_cap(koch[0]->a, koch[0]->b));
      out.push_back(make_cap(koch[1]->a, koch[1]->b));
      return;
    }
    throw std::invalid_argument(
        "refine: unsupported fractal-edged element (only lobes and caps of "
        "the hybrid family refine)");
  }
  throw std::invalid_argument("refine: element kind not refinable");
}

}  // namespace detail

/// One refinement step. Mapped-snowflake elements get the 13-copy
/// substitution (meshwidth divides by 3); hybrid elements split into
/// triangles and curve caps as documented above.
inline Mesh refine(const Mesh& m) {
  std::vector<DomainDescriptor> next;
  next.reserve(m.elements.size() * 13);
  for (const Element& e : m.elements) detail::refine_into(e.geom, next);
  return mesh_from_descriptors(m.domain, std::move(next));
}

// ---------------------------------------------------------------------------
// Serialization (structured text with version tag)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json descriptor_to_json(const DomainDescriptor& d) {
  nlohmann::json j;
  struct V {
    nlohmann::json& j;
    void operator()(const Snowflake& s) const {
      j["kind"] = "snowflake";
      j["side"] = s.side;
    }
    void operator()(const Triangle& t) const {
      j["kind"] = "triangle";
      j["vertices"] = {{t.v0.x, t.v0.y}, {t.v1.x, t.v1.y}, {t.v2.x, t.v2.y}};
    }
    void operator()(const MappedSnowflake& m) const {
      j["kind"] = "mapped_snowflake";
      auto& c = j["chain"] = nlohmann::json::array();
      for (const auto& s : m.chain)
        c.push_back({{"scale", s.scale},
                     {"rotation", s.rotation},
                     {"reflect", s.reflect},
                     {"translation", {s.translation.x, s.translation.y}}});
    }
    void operator()(const FractalEdged& f) const {
      j["kind"] = "fractal_edged";
      auto& l = j["loop"] = nlohmann::json::array();
      for (const auto& e : f.loop)
        l.push_back({{"a", {e.a.x, e.a.y}},
                     {"b", {e.b.x, e.b.y}},
                     {"koch", e.koch}});
    }
  };
  std::visit(V{j}, d.shape);
  j["boundary_depth"] = d.boundary_depth;
  return j;
}

inline DomainDescriptor descriptor_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  DomainDescriptor d;
  if (kind == "snowflake") {
    d = make_snowflake(j.at("side").get<double>());
  } else if (kind == "triangle") {
    const auto& v = j.at("vertices");
    d = make_triangle({v[0][0], v[0][1]}, {v[1][0], v[1][1]},
                      {v[2][0], v[2][1]});
  } else if (kind == "mapped_snowflake") {
    std::vector<Similarity> chain;
    for (const auto& s : j.at("chain"))
      chain.push_back({s.at("scale"), s.at("rotation"), s.at("reflect"),
                       {s.at("translation")[0], s.at("translation")[1]}});
    d = make_mapped_snowflake(std::move(chain));
  } else if (kind == "fractal_edged") {
    std::vector<Edge> loop;
    for (const auto& e : j.at("loop"))
      loop.push_back({{e.at("a")[0], e.at("a")[1]},
                      {e.at("b")[0], e.at("b")[1]},
                      e.at("koch")});
    d = make_fractal_edged(std::move(loop));
  } else {
    throw std::invalid_argument("unknown descriptor kind: " + kind);
  }
  d.boundary_depth = j.value("boundary_depth", 8);
  return d;
}

}  // namespace detail

inline void save_mesh(const Mesh& m, const std::string& path) {
  nlohmann::json j;
  j["format"] = "snowpoly-mesh";
  j["version"] = 1;
  j["domain"] = detail::descriptor_to_json(m.domain);
  j["meshwidth"] = m.meshwidth;
  auto& es = j["elements"] = nlohmann::json::array();
  for (const Element& e : m.elements) {
    nlohmann::json je = detail::descriptor_to_json(e.geom);
    je["id"] = e.id;
    je["h_k"] = e.h_k;
    je["area_lo"] = e.area_lo;
    je["area_hi"] = e.area_hi;
    es.push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file: " + path);
  out << j.dump(1) << '\n';
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mesh file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format") != "snowpoly-mesh" || j.at("version") != 1)
    throw std::runtime_error("unsupported mesh file format");
  Mesh m;
  m.domain = detail::descriptor_from_json(j.at("domain"));
  m.meshwidth = j.at("meshwidth");
  for (const auto& je : j.at("elements")) {
    Element e;
    e.id = je.at("id");
    e.h_k = je.at("h_k");
    e.area_lo = je.at("area_lo");
    e.area_hi = je.at("area_hi");
    e.geom = detail::descriptor_from_json(je);
    m.elements.push_back(std::move(e));
  }
  return m;
}

/// Stable content hash of a mesh, used to tag dependent artifacts.
inline std::uint64_t mesh_hash(const Mesh& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mixi = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mixi(descriptor_hash(m.domain));
  for (const auto& e : m.elements) mixi(descriptor_hash(e.geom));
  return h;
}

// ---------------------------------------------------------------------------
// Covering by overlapping lattice cubes
// ---------------------------------------------------------------------------

using LatticeIndex = std::array<int, 2>;

/// Covering of a mesh by the cubes Q'_z = [-h, 2h]^2 + h z of the lattice
/// with spacing h = meshwidth: every element K satisfies K inside
/// Q'_{kappa(K)}. Q_z = [0, h]^2 + h z are the small lattice cubes.
struct Covering {
  double cube_size = 0.0;  // h
  std::vector<LatticeIndex> kappa;  // by element id
  std::vector<std::vector<LatticeIndex>> certified_cubes;  // by element id
  std::vector<Rect> element_bbox;  // certified outer boxes

  double big_cube_diameter() const {
    return 3.0 * std::sqrt(2.0) * cube_size;
  }
  Rect small_cube(LatticeIndex z) const {
    return {{cube_size * z[0], cube_size * z[1]},
            {cube_size * (z[0] + 1), cube_size * (z[1] + 1)}};
  }
  Rect big_cube(LatticeIndex z) const {
    return {{cube_size * (z[0] - 1), cube_size * (z[1] - 1)},
            {cube_size * (z[0] + 2), cube_size * (z[1] + 2)}};
  }
  /// Number of lattice cubes Q_z that could meet the element. An open set
  /// meets a closed cube iff it meets its open interior, so only cubes whose
  /// interior overlaps the certified bounding box count; exact-tangency
  /// contacts (element tips on lattice lines) are excluded.
  int possible_cube_count(int id) const {
    const Rect& b = element_bbox[id];
    auto span = [this](double lo, double hi) {
      const int z0 = (int)std::floor(lo / cube_size) - 1;
      const int z1 = (int)std::floor(hi / cube_size) + 1;
      int n = 0;
      for (int z = z0; z <= z1; ++z)
        if (z * cube_size < hi && (z + 1) * cube_size > lo) ++n;
      return n;
    };
    return span(b.lo.x, b.hi.x) * span(b.lo.y, b.hi.y);
  }
};

/// All w with Q_z contained in Q'_w: the 3^2 = 9 indices z + {-1,0,1}^2.
inline std::vector<LatticeIndex> big_cubes_containing(LatticeIndex z) {
  std::vector<LatticeIndex> out;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      out.push_back({z[0] + dx, z[1] + dy});
  return out;
}

/// Builds the covering choice function kappa: for each element, the
/// lexicographically smallest lattice index z whose cube Q_z provably meets
/// the element (certified via interior cells of its decomposition at
/// `certify_depth`). Containment K inside Q'_{kappa(K)} is checked against
/// the certified bounding box.
inline Covering build_covering(const Mesh& m, int certify_depth = 6) {
  if (!(m.meshwidth > 0)) throw std::invalid_argument("meshwidth must be > 0");
  Covering cov;
  cov.cube_size = m.meshwidth;
  const double h = cov.cube_size;
  for (const Element& e : m.elements) {
    const Similarity f = frame(e.geom);
    const auto dec = decompose(e.geom, certify_depth);
    std::set<LatticeIndex> zs;
    for (const Cell& c : dec->interior_cells) {
      const Vec2 w = f.apply(c.center());
      zs.insert({(int)std::floor(w.x / h), (int)std::floor(w.y / h)});
    }
    if (zs.empty())
      throw std::runtime_error("covering: no certified interior cell for element " +
                               std::to_string(e.id));
    const LatticeIndex z = *zs.begin();  // lexicographic minimum
    const Rect bb = certified_bbox(e.geom);
    const Rect big = {{h * (z[0] - 1), h * (z[1] - 1)},
                      {h * (z[0] + 2), h * (z[1] + 2)}};
    if (!(bb.lo.x >= big.lo.x && bb.lo.y >= big.lo.y && bb.hi.x <= big.hi.x &&
          bb.hi.y <= big.hi.y))
      throw std::runtime_error("covering: element " + std::to_string(e.id) +
                               " not contained in its chosen cube");
    cov.kappa.push_back(z);
    cov.certified_cubes.emplace_back(zs.begin(), zs.end());
    cov.element_bbox.push_back(bb);
  }
  return cov;
}

// ---------------------------------------------------------------------------
// Mesh-level checks (used by the verify battery and tests)
// ---------------------------------------------------------------------------

/// Pseudo-random points certified Inside the domain.
inline std::vector<Vec2> sample_inside_points(const DomainDescriptor& d,
                                              size_t n, std::uint64_t seed,
                                              int depth = 9) {
  std::mt19937_64 rng(seed);
  const Rect bb = certified_bbox(d);
  std::vector<Vec2> pts;
  pts.reserve(n);
  size_t guard = 0;
  while (pts.size() < n && guard < 1000 * n + 1000) {
    ++guard;
    const Vec2 p{bb.lo.x + uniform01(rng) * (bb.hi.x - bb.lo.x),
                 bb.lo.y + uniform01(rng) * (bb.hi.y - bb.lo.y)};
    if (classify_point(d, p, depth) == Location::Inside) pts.push_back(p);
  }
  return pts;
}

struct PartitionCheck {
  double element_sum_mid = 0.0;
  double domain_area = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Eq.-style measure partition: the mid-areas of the elements must add up
/// to the domain area within the summed certificate widths.
inline PartitionCheck check_measure_partition(const Mesh& m, int depth = 0) {
  PartitionCheck c;
  double width_sum = 0.0;
  for (const Element& e : m.elements) {
    c.element_sum_mid += 0.5 * (e.area_lo + e.area_hi);
    width_sum += e.area_hi - e.area_lo;
  }
  const auto dom = decompose(m.domain, std::max(depth, area_depth_for(m.domain)));
  const double dscale = frame(m.domain).scale;
  c.domain_area = 0.5 * (dom->measure_lo + dom->measure_hi) * dscale * dscale;
  c.tolerance = width_sum + (dom->measure_hi - dom->measure_lo) * dscale * dscale;
  c.pass = std::abs(c.element_sum_mid - c.domain_area) <= c.tolerance;
  return c;
}

struct DisjointnessCheck {
  size_t points = 0;
  size_t multiply_claimed = 0;
  size_t unclaimed = 0;
  bool pass = false;
};

/// Samples Inside points of the domain and verifies that each is claimed
/// Inside by at most one element (open elements are pairwise disjoint).
inline DisjointnessCheck check_disjointness(const Mesh& m, size_t n_points,
                                            std::uint64_t seed,
                                            int depth = 9) {
  DisjointnessCheck c;
  const auto pts = sample_inside_points(m.domain, n_points, seed, depth);
  c.points = pts.size();
  std::vector<Rect> boxes;
  boxes.reserve(m.elements.size());
  for (const auto& e : m.elements) boxes.push_back(certified_bbox(e.geom));
  for (const Vec2& p : pts) {
    int claims = 0;
    for (size_t i = 0; i < m.elements.size(); ++i) {
      if (!boxes[i].contains(p)) continue;
      if (classify_point(m.elements[i].geom, p, depth) == Location::Inside)
        ++claims;
    }
    if (claims > 1) ++c.multiply_claimed;
    if (claims == 0) ++c.unclaimed;
  }
  c.pass = c.multiply_claimed == 0;
  return c;
}

}  // namespace snowpoly

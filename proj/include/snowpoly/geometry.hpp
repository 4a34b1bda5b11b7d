// Geometry kernel: Koch snowflake domains, similarity maps, certified
// point classification against fractal boundaries.
//
// All fractal boundaries are closed CCW loops of edges; a "koch" edge stands
// for the limit Koch curve built on its chord, with bumps pointing to the
// right of the direction of travel (i.e. outward for a CCW loop). Replacing
// each koch edge by its depth-k prefractal polyline yields a polygon whose
// region grows monotonically with k and exhausts the true domain; this
// one-sided monotonicity is what makes cheap certified classification work.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace snowpoly {

constexpr double kPi = 3.14159265358979323846;

// Prefractal-to-limit deviation bound: the Koch curve on a chord stays within
// 0.45 * |chord| of the chord segment (true constant is sqrt(3)/4).
constexpr double kKochDeviation = 0.45;

// Uncertainty band constant for classification: points outside the depth-k
// polygon but within c_band * (segment length) of it are reported Uncertain.
// The limit curve deviates outward by at most kKochDeviation * segment
// length, so c_band = 1 is a safe, documented over-estimate.
constexpr double kBandConstant = 1.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Direct similarity of the plane, applied as scale -> reflect -> rotate ->
/// translate. Reflection is across the x-axis.
struct Similarity {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  bool reflect = false;
  Vec2 translation{0.0, 0.0};

  Vec2 apply_linear(Vec2 p) const {
    Vec2 q{p.x * scale, (reflect ? -p.y : p.y) * scale};
    return rotate(q, rotation);
  }
  Vec2 apply(Vec2 p) const { return apply_linear(p) + translation; }

  Similarity inverse() const {
    Similarity inv;
    inv.scale = 1.0 / scale;
    inv.reflect = reflect;
    inv.rotation = reflect ? rotation : -rotation;
    inv.translation = -inv.apply_linear(translation);
    return inv;
  }
};

inline void validate(const Similarity& s) {
  if (!(s.scale >= 1e-9 && s.scale <= 1e9))
    throw std::invalid_argument("similarity scale out of [1e-9, 1e9]");
}

/// Composition a(b(x)).
inline Similarity compose(const Similarity& a, const Similarity& b) {
  Similarity c;
  c.scale = a.scale * b.scale;
  c.reflect = a.reflect != b.reflect;
  c.rotation = a.rotation + (a.reflect ? -b.rotation : b.rotation);
  c.translation = a.apply(b.translation);
  validate(c);
  return c;
}

inline Similarity compose_chain(const std::vector<Similarity>& chain) {
  Similarity s;
  for (const auto& link : chain) s = compose(s, link);
  return s;
}

inline Vec2 apply_similarity(const Similarity& s, Vec2 p) { return s.apply(p); }

// ---------------------------------------------------------------------------
// Boundary edges
// ---------------------------------------------------------------------------

/// One edge of a boundary loop; a koch edge carries the Koch curve on its
/// chord (bumps to the right of a->b).
struct Edge {
  Vec2 a, b;
  bool koch = false;
};

/// The four sub-chords of one Koch substitution step.
inline std::array<Edge, 4> koch_children(const Edge& e) {
  const Vec2 d = e.b - e.a;
  const Vec2 c1 = e.a + d * (1.0 / 3.0);
  const Vec2 c2 = e.a + d * (2.0 / 3.0);
  // rotate d/3 by -60 degrees: bump to the right of travel
  const double hx = 0.5 * d.x / 3.0 + (std::sqrt(3.0) / 2.0) * d.y / 3.0;
  const double hy = -(std::sqrt(3.0) / 2.0) * d.x / 3.0 + 0.5 * d.y / 3.0;
  const Vec2 peak = c1 + Vec2{hx, hy};
  return {Edge{e.a, c1, true}, Edge{c1, peak, true}, Edge{peak, c2, true},
          Edge{c2, e.b, true}};
}

inline void append_prefractal(const Edge& e, int depth, std::vector<Vec2>& out) {
  if (!e.koch || depth == 0) {
    out.push_back(e.a);
    return;
  }
  for (const Edge& c : koch_children(e)) append_prefractal(c, depth - 1, out);
}

/// Depth-k polyline of a closed loop (first point not repeated at the end).
inline std::vector<Vec2> loop_polyline(const std::vector<Edge>& loop, int depth) {
  std::vector<Vec2> pts;
  for (const Edge& e : loop) append_prefractal(e, depth, pts);
  return pts;
}

inline double polygon_area(const std::vector<Vec2>& pts) {
  double a = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % pts.size()];
    a += cross(p, q);
  }
  return 0.5 * a;
}

// ---------------------------------------------------------------------------
// Distance and crossing primitives
// ---------------------------------------------------------------------------

inline double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  double t = len2 > 0.0 ? dot(p - a, d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return dist(p, a + d * t);
}

struct Rect {
  Vec2 lo, hi;
  bool contains(Vec2 p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
};

inline double dist_point_rect(Vec2 p, const Rect& r) {
  const double dx = std::max({r.lo.x - p.x, 0.0, p.x - r.hi.x});
  const double dy = std::max({r.lo.y - p.y, 0.0, p.y - r.hi.y});
  return std::hypot(dx, dy);
}

inline bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0))) return true;
  auto on = [](Vec2 p, Vec2 q, Vec2 r) {
    return cross(q - p, r - p) == 0.0 && std::min(p.x, q.x) <= r.x &&
           r.x <= std::max(p.x, q.x) && std::min(p.y, q.y) <= r.y &&
           r.y <= std::max(p.y, q.y);
  };
  return on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b);
}

inline bool point_in_open_rect(Vec2 p, const Rect& r) {
  return p.x > r.lo.x && p.x < r.hi.x && p.y > r.lo.y && p.y < r.hi.y;
}

/// Exact-ish test for segment against the open rectangle interior: segments
/// running along the border do not count as intersecting.
inline bool segment_intersects_open_rect(Vec2 a, Vec2 b, const Rect& r) {
  if (a.x <= r.lo.x && b.x <= r.lo.x) return false;
  if (a.x >= r.hi.x && b.x >= r.hi.x) return false;
  if (a.y <= r.lo.y && b.y <= r.lo.y) return false;
  if (a.y >= r.hi.y && b.y >= r.hi.y) return false;
  if (point_in_open_rect(a, r) || point_in_open_rect(b, r)) return true;
  const Vec2 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  auto clip = [&](double p, double q) {  // keep the window with p*t <= q
    if (p == 0.0) return q >= 0.0;
    const double t = q / p;
    if (p < 0.0) {
      if (t > t1) return false;
      if (t > t0) t0 = t;
    } else {
      if (t < t0) return false;
      if (t < t1) t1 = t;
    }
    return true;
  };
  if (!clip(-d.x, a.x - r.lo.x) || !clip(d.x, r.hi.x - a.x) ||
      !clip(-d.y, a.y - r.lo.y) || !clip(d.y, r.hi.y - a.y))
    return false;
  return point_in_open_rect(a + (0.5 * (t0 + t1)) * d, r);
}

/// Distance between a segment and a closed axis-aligned rectangle.
inline double dist_segment_rect(Vec2 a, Vec2 b, const Rect& r) {
  if (r.contains(a) || r.contains(b)) return 0.0;
  const Vec2 c00 = r.lo, c11 = r.hi, c10{r.hi.x, r.lo.y}, c01{r.lo.x, r.hi.y};
  if (segments_intersect(a, b, c00, c10) || segments_intersect(a, b, c10, c11) ||
      segments_intersect(a, b, c11, c01) || segments_intersect(a, b, c01, c00))
    return 0.0;
  double d = std::min(dist_point_rect(a, r), dist_point_rect(b, r));
  for (Vec2 c : {c00, c10, c11, c01}) d = std::min(d, dist_point_segment(c, a, b));
  return d;
}

/// True if the depth-k prefractal of edge e comes within `band` of p.
inline bool koch_within(const Edge& e, int depth, Vec2 p, double band) {
  const double d = dist_point_segment(p, e.a, e.b);
  if (!e.koch || depth == 0) return d <= band;
  if (d > band + kKochDeviation * dist(e.a, e.b)) return false;
  for (const Edge& c : koch_children(e))
    if (koch_within(c, depth - 1, p, band)) return true;
  return false;
}

/// True if the depth-k prefractal of edge e comes within `band` of rect r.
inline bool koch_near_rect(const Edge& e, int depth, const Rect& r, double band) {
  const double d = dist_segment_rect(e.a, e.b, r);
  if (!e.koch || depth == 0) return d <= band;
  if (d > band + kKochDeviation * dist(e.a, e.b)) return false;
  for (const Edge& c : koch_children(e))
    if (koch_near_rect(c, depth - 1, r, band)) return true;
  return false;
}

inline int segment_ray_crossing(Vec2 a, Vec2 b, Vec2 p) {
  // half-open rule; ray shoots in +x direction
  if ((a.y > p.y) == (b.y > p.y)) return 0;
  const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
  return xint > p.x ? 1 : 0;
}

/// Crossing count of the +x ray from p with the depth-k prefractal of e.
inline int koch_ray_crossings(const Edge& e, int depth, Vec2 p) {
  if (!e.koch || depth == 0) return segment_ray_crossing(e.a, e.b, p);
  const double pad = kKochDeviation * dist(e.a, e.b);
  const double ylo = std::min(e.a.y, e.b.y) - pad;
  const double yhi = std::max(e.a.y, e.b.y) + pad;
  if (p.y < ylo || p.y > yhi) return 0;
  if (std::max(e.a.x, e.b.x) + pad < p.x) return 0;
  int n = 0;
  for (const Edge& c : koch_children(e)) n += koch_ray_crossings(c, depth - 1, p);
  return n;
}

// ---------------------------------------------------------------------------
// Domain descriptors
// ---------------------------------------------------------------------------

/// Koch snowflake generated from the equilateral triangle with centroid at
/// the origin and one vertex on the positive y-axis.
struct Snowflake {
  double side = 1.0;
};

struct Triangle {
  Vec2 v0, v1, v2;
};

/// Chain of similarities applied to the unit (side 1) snowflake; the last
/// entry acts first.
struct MappedSnowflake {
  std::vector<Similarity> chain;
};

/// Closed CCW loop mixing straight and Koch-curve edges. With no koch edge
/// this is a plain polygon.
struct FractalEdged {
  std::vector<Edge> loop;
};

struct DomainDescriptor {
  std::variant<Snowflake, Triangle, MappedSnowflake, FractalEdged> shape;
  int boundary_depth = 8;  // default polyline resolution
};

enum class Location { Inside, Outside, Uncertain };

inline DomainDescriptor make_snowflake(double side) {
  if (!(side > 0)) throw std::invalid_argument("snowflake side must be positive");
  return DomainDescriptor{Snowflake{side}};
}

inline DomainDescriptor make_triangle(Vec2 v0, Vec2 v1, Vec2 v2) {
  if (cross(v1 - v0, v2 - v0) == 0.0)
    throw std::invalid_argument("triangle vertices are collinear");
  return DomainDescriptor{Triangle{v0, v1, v2}};
}

inline DomainDescriptor make_mapped_snowflake(std::vector<Similarity> chain) {
  for (const auto& s : chain) validate(s);
  validate(compose_chain(chain));
  return DomainDescriptor{MappedSnowflake{std::move(chain)}};
}

inline DomainDescriptor make_fractal_edged(std::vector<Edge> loop) {
  if (loop.size() < 2) throw std::invalid_argument("loop needs >= 2 edges");
  for (const auto& e : loop)
    if (dist(e.a, e.b) == 0.0)
      throw std::invalid_argument("zero-length edge in loop");
  return DomainDescriptor{FractalEdged{std::move(loop)}};
}

/// Convenience: CCW polygon as a FractalEdged loop of straight edges.
inline DomainDescriptor make_polygon(const std::vector<Vec2>& pts) {
  std::vector<Vec2> p = pts;
  if (polygon_area(p) < 0.0) std::reverse(p.begin(), p.end());
  std::vector<Edge> loop;
  for (size_t i = 0; i < p.size(); ++i)
    loop.push_back(Edge{p[i], p[(i + 1) % p.size()], false});
  return make_fractal_edged(std::move(loop));
}

/// CCW edge loop of a snowflake with the given side, in its own frame.
inline std::vector<Edge> snowflake_loop(double side) {
  const double r = side / std::sqrt(3.0);
  const Vec2 v0{0.0, r};
  const Vec2 v1{-side / 2.0, -r / 2.0};
  const Vec2 v2{side / 2.0, -r / 2.0};
  return {Edge{v0, v1, true}, Edge{v1, v2, true}, Edge{v2, v0, true}};
}

/// World-from-local frame: mapped snowflakes live in the unit-snowflake
/// frame; everything else is in world coordinates already.
inline Similarity frame(const DomainDescriptor& d) {
  if (const auto* m = std::get_if<MappedSnowflake>(&d.shape))
    return compose_chain(m->chain);
  return Similarity{};
}

/// Descriptor of the shape in its local frame (shared by all similar copies).
inline DomainDescriptor local_shape(const DomainDescriptor& d) {
  if (std::holds_alternative<MappedSnowflake>(d.shape))
    return DomainDescriptor{Snowflake{1.0}, d.boundary_depth};
  return d;
}

/// Edge loop of the local shape, CCW.
inline std::vector<Edge> edge_loop(const DomainDescriptor& d) {
  struct V {
    std::vector<Edge> operator()(const Snowflake& s) const {
      return snowflake_loop(s.side);
    }
    std::vector<Edge> operator()(const Triangle& t) const {
      Vec2 a = t.v0, b = t.v1, c = t.v2;
      if (cross(b - a, c - a) < 0.0) std::swap(b, c);
      return {Edge{a, b, false}, Edge{b, c, false}, Edge{c, a, false}};
    }
    std::vector<Edge> operator()(const MappedSnowflake&) const {
      return snowflake_loop(1.0);
    }
    std::vector<Edge> operator()(const FractalEdged& f) const { return f.loop; }
  };
  return std::visit(V{}, d.shape);
}

inline double max_chord(const std::vector<Edge>& loop) {
  double m = 0.0;
  for (const auto& e : loop) m = std::max(m, dist(e.a, e.b));
  return m;
}

/// Depth-k boundary polyline in world coordinates, positively oriented.
inline std::vector<Vec2> boundary_polyline(const DomainDescriptor& d, int depth) {
  std::vector<Vec2> pts = loop_polyline(edge_loop(local_shape(d)), depth);
  if (std::holds_alternative<MappedSnowflake>(d.shape)) {
    const Similarity s = frame(d);
    for (auto& p : pts) p = s.apply(p);
    if (s.reflect) std::reverse(pts.begin(), pts.end());
  }
  return pts;
}

/// Depth-k Koch snowflake prefractal: 3*4^k segments of length side/3^k.
inline std::vector<Vec2> snowflake_boundary(double side, int depth) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  return boundary_polyline(make_snowflake(side), depth);
}

namespace detail {

inline Location classify_loop(const std::vector<Edge>& loop, Vec2 p, int depth) {
  const double scale = max_chord(loop);
  const double eps_on = 1e-13 * scale;

  // reject points sitting numerically on the depth-k polyline
  for (const Edge& e : loop) {
    if (e.koch ? koch_within(e, depth, p, eps_on)
               : dist_point_segment(p, e.a, e.b) <= eps_on)
      return Location::Uncertain;
  }

  int crossings = 0;
  for (const Edge& e : loop)
    crossings += e.koch ? koch_ray_crossings(e, depth, p)
                        : segment_ray_crossing(e.a, e.b, p);
  if (crossings % 2 == 1) return Location::Inside;  // region grows with depth

  // outside the depth-k polygon: certified Outside only beyond the band
  for (const Edge& e : loop) {
    if (!e.koch) continue;
    const double band = kBandConstant * dist(e.a, e.b) * std::pow(3.0, -depth);
    if (koch_within(e, depth, p, band)) return Location::Uncertain;
  }
  return Location::Outside;
}

}  // namespace detail

/// Certified classification of x against the true domain: Inside implies
/// x is in the domain, Outside implies x is outside its closure. Uncertain
/// points lie within the depth-k uncertainty band (width <= c_band * chord *
/// 3^-k per koch edge, c_band = 1).
inline Location classify_point(const DomainDescriptor& d, Vec2 x, int depth) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  if (const auto* m = std::get_if<MappedSnowflake>(&d.shape)) {
    const Vec2 local = compose_chain(m->chain).inverse().apply(x);
    return detail::classify_loop(snowflake_loop(1.0), local, depth);
  }
  return detail::classify_loop(edge_loop(d), x, depth);
}

/// Smallest prefractal depth whose uncertainty band is <= band (local frame).
inline int depth_for_band(const DomainDescriptor& d, double band) {
  const auto loop = edge_loop(local_shape(d));
  double scl = 1.0;
  if (const auto* m = std::get_if<MappedSnowflake>(&d.shape))
    scl = compose_chain(m->chain).scale;
  int k = 0;
  for (const Edge& e : loop) {
    if (!e.koch) continue;
    const double chord = dist(e.a, e.b) * scl;
    if (band < kBandConstant * chord)
      k = std::max(k, (int)std::ceil(std::log(kBandConstant * chord / band) /
                                     std::log(3.0)));
  }
  return std::min(k, 24);
}

// ---------------------------------------------------------------------------
// Areas, hulls, diameters, boxes
// ---------------------------------------------------------------------------

/// Closed-form area. A koch edge contributes the area between its chord and
/// the Koch curve, sqrt(3)/20 * |chord|^2, outward of the chord polygon.
inline double reference_area(const DomainDescriptor& d) {
  struct V {
    double operator()(const Snowflake& s) const {
      return 2.0 * std::sqrt(3.0) / 5.0 * s.side * s.side;
    }
    double operator()(const Triangle& t) const {
      return 0.5 * std::abs(cross(t.v1 - t.v0, t.v2 - t.v0));
    }
    double operator()(const MappedSnowflake& m) const {
      const double s = compose_chain(m.chain).scale;
      return 2.0 * std::sqrt(3.0) / 5.0 * s * s;
    }
    double operator()(const FractalEdged& f) const {
      std::vector<Vec2> chordpoly;
      double bumps = 0.0;
      for (const Edge& e : f.loop) {
        chordpoly.push_back(e.a);
        if (e.koch) {
          const double c = dist(e.a, e.b);
          bumps += std::sqrt(3.0) / 20.0 * c * c;
        }
      }
      return polygon_area(chordpoly) + bumps;
    }
  };
  return std::visit(V{}, d.shape);
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

inline double hull_diameter(const std::vector<Vec2>& pts) {
  const auto h = convex_hull(pts);
  double d2 = 0.0;
  for (size_t i = 0; i < h.size(); ++i)
    for (size_t j = i + 1; j < h.size(); ++j) {
      const Vec2 d = h[i] - h[j];
      d2 = std::max(d2, dot(d, d));
    }
  return std::sqrt(d2);
}

namespace detail {

inline double escalating_hull_diameter(const DomainDescriptor& d) {
  double prev = hull_diameter(boundary_polyline(d, 2));
  for (int k = 4; k <= 14; k += 2) {
    const double cur = hull_diameter(boundary_polyline(d, k));
    if (std::abs(cur - prev) < 1e-9 * std::max(cur, 1e-300)) return cur;
    prev = cur;
  }
  return prev;
}

inline double unit_snowflake_diameter() {
  static const double d =
      escalating_hull_diameter(DomainDescriptor{Snowflake{1.0}});
  return d;
}

}  // namespace detail

/// Convex-hull diameter of the domain, computed on boundary polylines of
/// increasing depth until stationary to 1e-9 relative.
inline double diameter(const DomainDescriptor& d) {
  struct V {
    double operator()(const Snowflake& s) const {
      return s.side * detail::unit_snowflake_diameter();
    }
    double operator()(const Triangle& t) const {
      return std::max({dist(t.v0, t.v1), dist(t.v1, t.v2), dist(t.v2, t.v0)});
    }
    double operator()(const MappedSnowflake& m) const {
      return compose_chain(m.chain).scale * detail::unit_snowflake_diameter();
    }
    double operator()(const FractalEdged& f) const {
      return detail::escalating_hull_diameter(DomainDescriptor{f});
    }
  };
  return std::visit(V{}, d.shape);
}

namespace detail {

/// The snowflake is inscribed in the regular hexagon through its six tips
/// (radius side/sqrt(3), directions 30 + 60k degrees), touching every edge,
/// so its bounding box is exactly the box of the mapped tips.
inline Rect snowflake_tip_bbox(const Similarity& s, double side) {
  const double r = side / std::sqrt(3.0);
  Rect out{{1e300, 1e300}, {-1e300, -1e300}};
  for (int k = 0; k < 6; ++k) {
    const double a = kPi / 6.0 + k * kPi / 3.0;
    const Vec2 p = s.apply({r * std::cos(a), r * std::sin(a)});
    out.lo.x = std::min(out.lo.x, p.x);
    out.lo.y = std::min(out.lo.y, p.y);
    out.hi.x = std::max(out.hi.x, p.x);
    out.hi.y = std::max(out.hi.y, p.y);
  }
  return out;
}

}  // namespace detail

/// Axis box certified to contain the closure of the domain; exact for
/// snowflakes and triangles.
inline Rect certified_bbox(const DomainDescriptor& d, int depth = 8) {
  if (const auto* s = std::get_if<Snowflake>(&d.shape))
    return detail::snowflake_tip_bbox(Similarity{}, s->side);
  if (std::holds_alternative<MappedSnowflake>(d.shape))
    return detail::snowflake_tip_bbox(frame(d), 1.0);
  if (const auto* t = std::get_if<Triangle>(&d.shape)) {
    Rect r{{1e300, 1e300}, {-1e300, -1e300}};
    for (Vec2 p : {t->v0, t->v1, t->v2}) {
      r.lo.x = std::min(r.lo.x, p.x);
      r.lo.y = std::min(r.lo.y, p.y);
      r.hi.x = std::max(r.hi.x, p.x);
      r.hi.y = std::max(r.hi.y, p.y);
    }
    return r;
  }
  const DomainDescriptor loc = local_shape(d);
  const auto loop = edge_loop(loc);
  const auto pts = loop_polyline(loop, depth);
  Rect r{{1e300, 1e300}, {-1e300, -1e300}};
  for (const Vec2& p : pts) {
    r.lo.x = std::min(r.lo.x, p.x);
    r.lo.y = std::min(r.lo.y, p.y);
    r.hi.x = std::max(r.hi.x, p.x);
    r.hi.y = std::max(r.hi.y, p.y);
  }
  double margin = 0.0;
  for (const Edge& e : loop)
    if (e.koch)
      margin = std::max(margin, kKochDeviation * dist(e.a, e.b) *
                                    std::pow(3.0, -depth));
  r.lo.x -= margin;
  r.lo.y -= margin;
  r.hi.x += margin;
  r.hi.y += margin;
  return r;
}

/// Stable content hash of a descriptor, used as cache key.
inline std::uint64_t descriptor_hash(const DomainDescriptor& d) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  auto mixi = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  struct V {
    decltype(mix)& mx;
    decltype(mixi)& mi;
    void operator()(const Snowflake& s) const {
      mi(1);
      mx(s.side);
    }
    void operator()(const Triangle& t) const {
      mi(2);
      for (Vec2 p : {t.v0, t.v1, t.v2}) {
        mx(p.x);
        mx(p.y);
      }
    }
    void operator()(const MappedSnowflake& m) const {
      mi(3);
      for (const auto& s : m.chain) {
        mx(s.scale);
        mx(s.rotation);
        mi(s.reflect ? 1 : 0);
        mx(s.translation.x);
        mx(s.translation.y);
      }
    }
    void operator()(const FractalEdged& f) const {
      mi(4);
      for (const auto& e : f.loop) {
        mx(e.a.x);
        mx(e.a.y);
        mx(e.b.x);
        mx(e.b.y);
        mi(e.koch ? 1 : 0);
      }
    }
  };
  std::visit(V{mix, mixi}, d.shape);
  return h;
}

}  // namespace snowpoly

// Certified integration over fractal and polygonal domains via quadtree cell
// decomposition: exact monomial integrals on certified-interior cells, with
// two-sided measure bounds; tensor Gauss rules for smooth integrands; exact
// triangle moments for the polygonal pieces of hybrid meshes.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <unordered_map>

#include "snowpoly/geometry.hpp"

namespace snowpoly {

constexpr int kMaxPolyDegree = 16;

// ---------------------------------------------------------------------------
// Gauss-Legendre rules on [-1, 1]
// ---------------------------------------------------------------------------

struct GaussRule {
  std::vector<double> nodes, weights;
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
inline const GaussRule& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1 || n > 64) throw std::invalid_argument("gauss order out of range");
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      if (n == 1) p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? x : p1;
      const double pm = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  auto [pos, _] = cache.emplace(n, std::move(r));
  return pos->second;
}

// ---------------------------------------------------------------------------
// Quadtree cell decomposition
// ---------------------------------------------------------------------------

struct Cell {
  Vec2 lo;
  double size = 0.0;
  Vec2 center() const { return {lo.x + 0.5 * size, lo.y + 0.5 * size}; }
  double area() const { return size * size; }
  Rect rect() const { return {lo, {lo.x + size, lo.y + size}}; }
};

/// Certified interior/boundary split of a domain at quadtree depth `depth`.
/// Interior cells are provably inside the true domain, discarded cells
/// provably outside; what remains is boundary, so
/// measure_lo <= |domain| <= measure_hi.
struct CellDecomposition {
  int depth = 0;
  Cell root;
  std::vector<Cell> interior_cells;
  std::vector<Cell> boundary_cells;
  double measure_lo = 0.0;
  double measure_hi = 0.0;
};

using DecompPtr = std::shared_ptr<const CellDecomposition>;

namespace detail {

enum class CellClass { In, Out, Split };

inline CellClass classify_cell(const std::vector<Edge>& loop, const Cell& cell) {
  const Rect r = cell.rect();
  const double eps = 1e-12 * cell.size;

  // prefractal depth tied to the cell size, per edge
  auto edge_depth = [&](const Edge& e) {
    const double chord = dist(e.a, e.b);
    const double target = 0.25 * cell.size;
    if (kBandConstant * chord <= target) return 0;
    int k = (int)std::ceil(std::log(kBandConstant * chord / target) /
                           std::log(3.0));
    return std::min(std::max(k, 0), 24);
  };

  // does the depth-k polyline touch the open cell? (straight edges running
  // along a cell border do not)
  for (const Edge& e : loop) {
    const bool touch = e.koch ? koch_near_rect(e, edge_depth(e), r, eps)
                              : segment_intersects_open_rect(e.a, e.b, r);
    if (touch) return CellClass::Split;
  }

  // cell is uniformly inside or outside the depth-k polygon
  const Vec2 c = cell.center();
  int crossings = 0;
  for (const Edge& e : loop)
    crossings += e.koch ? koch_ray_crossings(e, edge_depth(e), c)
                        : segment_ray_crossing(e.a, e.b, c);
  if (crossings % 2 == 1) return CellClass::In;  // monotone: inside for real

  // outside the polygon; certified Outside only beyond the outward band
  for (const Edge& e : loop) {
    if (!e.koch) continue;
    const int k = edge_depth(e);
    const double band = kBandConstant * dist(e.a, e.b) * std::pow(3.0, -k);
    if (koch_near_rect(e, k, r, band)) return CellClass::Split;
  }
  return CellClass::Out;
}

inline void decompose_rec(const std::vector<Edge>& loop, const Cell& cell,
                          int remaining, CellDecomposition& out) {
  switch (classify_cell(loop, cell)) {
    case CellClass::In:
      out.interior_cells.push_back(cell);
      return;
    case CellClass::Out:
      return;
    case CellClass::Split:
      break;
  }
  if (remaining == 0) {
    out.boundary_cells.push_back(cell);
    return;
  }
  const double h = 0.5 * cell.size;
  // fixed child order keeps cell lists deterministic
  for (int qy = 0; qy < 2; ++qy)
    for (int qx = 0; qx < 2; ++qx)
      decompose_rec(loop,
                    Cell{{cell.lo.x + qx * h, cell.lo.y + qy * h}, h},
                    remaining - 1, out);
}

inline std::filesystem::path cache_file(std::uint64_t hash, int depth) {
  const char* dir = std::getenv("SNOWPOLY_CACHE_DIR");
  if (!dir || !*dir) return {};
  char name[64];
  std::snprintf(name, sizeof(name), "%016llx_d%02d.cells",
                (unsigned long long)hash, depth);
  return std::filesystem::path(dir) / name;
}

inline bool load_decomposition(const std::filesystem::path& p,
                               CellDecomposition& d) {
  std::ifstream in(p);
  if (!in) return false;
  std::string tag;
  int version = 0;
  size_t ni = 0, nb = 0;
  in >> tag >> version >> d.depth >> d.root.lo.x >> d.root.lo.y >>
      d.root.size >> ni >> nb;
  if (tag != "snowpoly-cells" || version != 1 || !in) return false;
  auto read = [&in](std::vector<Cell>& v, size_t n) {
    v.resize(n);
    for (auto& c : v) in >> c.lo.x >> c.lo.y >> c.size;
  };
  read(d.interior_cells, ni);
  read(d.boundary_cells, nb);
  return bool(in);
}

inline void save_decomposition(const std::filesystem::path& p,
                               const CellDecomposition& d) {
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p);
  if (!out) return;
  out.precision(17);
  out << "snowpoly-cells 1\n"
      << d.depth << ' ' << d.root.lo.x << ' ' << d.root.lo.y << ' '
      << d.root.size << '\n'
      << d.interior_cells.size() << ' ' << d.boundary_cells.size() << '\n';
  for (const auto& v : {d.interior_cells, d.boundary_cells})
    for (const auto& c : v)
      out << c.lo.x << ' ' << c.lo.y << ' ' << c.size << '\n';
}

}  // namespace detail

/// Quadtree decomposition of the domain's bounding box; memoized per
/// (descriptor, depth), with optional on-disk cache via SNOWPOLY_CACHE_DIR.
/// Safe for concurrent readers; insertion is serialized.
inline DecompPtr decompose(const DomainDescriptor& domain, int depth) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  const DomainDescriptor local = local_shape(domain);
  const std::uint64_t key = descriptor_hash(local);

  static std::mutex mu;
  static std::map<std::pair<std::uint64_t, int>, DecompPtr> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({key, depth});
    if (it != cache.end()) return it->second;
  }

  auto out = std::make_shared<CellDecomposition>();
  const auto file = detail::cache_file(key, depth);
  if (file.empty() || !detail::load_decomposition(file, *out)) {
    out->depth = depth;
    const Rect bb = certified_bbox(local, 10);
    const double side = std::max(bb.hi.x - bb.lo.x, bb.hi.y - bb.lo.y);
    const Vec2 c{0.5 * (bb.lo.x + bb.hi.x), 0.5 * (bb.lo.y + bb.hi.y)};
    out->root = Cell{{c.x - 0.5 * side, c.y - 0.5 * side}, side};
    detail::decompose_rec(edge_loop(local), out->root, depth, *out);
    if (!file.empty()) detail::save_decomposition(file, *out);
  }
  for (const Cell& c : out->interior_cells) out->measure_lo += c.area();
  out->measure_hi = out->measure_lo;
  for (const Cell& c : out->boundary_cells) out->measure_hi += c.area();

  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::make_pair(key, depth), std::move(out))
      .first->second;
}

// ---------------------------------------------------------------------------
// Monomial moments and polynomial integration
// ---------------------------------------------------------------------------

/// Lower-triangular table of values indexed by monomial powers (a, b),
/// a + b <= maxdeg.
struct MomentTable {
  int maxdeg = 0;
  std::vector<double> v;
  explicit MomentTable(int deg = 0)
      : maxdeg(deg), v(size_t(deg + 1) * (deg + 1), 0.0) {}
  double& at(int a, int b) { return v[size_t(a) * (maxdeg + 1) + b]; }
  double at(int a, int b) const { return v[size_t(a) * (maxdeg + 1) + b]; }
};

/// How boundary cells enter an integral: excluded (value is a pure interior
/// sum) or added as midpoint value times cell measure.
enum class BoundaryRule { Exclude, Midpoint };

namespace detail {

// exact integral of ((x - c)/r)^a over [x0, x1]
inline double monomial_1d(double x0, double x1, double c, double r, int a) {
  const double u0 = (x0 - c) / r, u1 = (x1 - c) / r;
  return r / (a + 1) * (std::pow(u1, a + 1) - std::pow(u0, a + 1));
}

inline double monomial_max_1d(double x0, double x1, double c, double r, int a) {
  const double u0 = std::abs((x0 - c) / r), u1 = std::abs((x1 - c) / r);
  return std::pow(std::max(u0, u1), a);
}

}  // namespace detail

/// Moments of the scaled monomials ((x-c.x)/r)^a ((y-c.y)/r)^b over the
/// certified region of the decomposition.
inline MomentTable cell_moments(const CellDecomposition& d, Vec2 c, double r,
                                int maxdeg,
                                BoundaryRule rule = BoundaryRule::Exclude) {
  if (maxdeg > kMaxPolyDegree)
    throw std::invalid_argument("monomial degree over limit");
  MomentTable t(maxdeg);
  for (const Cell& cell : d.interior_cells) {
    for (int a = 0; a <= maxdeg; ++a) {
      const double ix =
          detail::monomial_1d(cell.lo.x, cell.lo.x + cell.size, c.x, r, a);
      for (int b = 0; a + b <= maxdeg; ++b)
        t.at(a, b) += ix * detail::monomial_1d(cell.lo.y,
                                               cell.lo.y + cell.size, c.y, r, b);
    }
  }
  if (rule == BoundaryRule::Midpoint) {
    for (const Cell& cell : d.boundary_cells) {
      const Vec2 m = cell.center();
      const double ux = (m.x - c.x) / r, uy = (m.y - c.y) / r;
      for (int a = 0; a <= maxdeg; ++a)
        for (int b = 0; a + b <= maxdeg; ++b)
          t.at(a, b) += cell.area() * std::pow(ux, a) * std::pow(uy, b);
    }
  }
  return t;
}

/// Per-monomial certificate: sum over boundary cells of |cell| * sup |m_ab|.
inline MomentTable cell_moment_bounds(const CellDecomposition& d, Vec2 c,
                                      double r, int maxdeg) {
  MomentTable t(maxdeg);
  for (const Cell& cell : d.boundary_cells) {
    for (int a = 0; a <= maxdeg; ++a) {
      const double mx =
          detail::monomial_max_1d(cell.lo.x, cell.lo.x + cell.size, c.x, r, a);
      for (int b = 0; a + b <= maxdeg; ++b)
        t.at(a, b) += cell.area() * mx *
                      detail::monomial_max_1d(cell.lo.y, cell.lo.y + cell.size,
                                              c.y, r, b);
    }
  }
  return t;
}

struct MonomialTerm {
  int a = 0, b = 0;
  double coeff = 0.0;
};

struct CertifiedValue {
  double value = 0.0;
  double error_bound = 0.0;
};

/// Integral of a polynomial (in scaled monomials around c, r) over the
/// certified interior; error_bound covers the unresolved boundary cells.
inline CertifiedValue integrate_poly(const CellDecomposition& d, Vec2 c,
                                     double r,
                                     std::span<const MonomialTerm> terms) {
  int deg = 0;
  for (const auto& t : terms) deg = std::max(deg, t.a + t.b);
  if (deg > kMaxPolyDegree)
    throw std::invalid_argument("polynomial degree over limit");
  const MomentTable m = cell_moments(d, c, r, deg, BoundaryRule::Exclude);
  const MomentTable e = cell_moment_bounds(d, c, r, deg);
  CertifiedValue out;
  for (const auto& t : terms) {
    out.value += t.coeff * m.at(t.a, t.b);
    out.error_bound += std::abs(t.coeff) * e.at(t.a, t.b);
  }
  return out;
}

/// Tensor Gauss integration of f over interior cells; boundary cells add
/// midpoint value x measure, and their full measure times a local |f| bound
/// (sampled at corners and center) enters the error estimate.
inline CertifiedValue integrate_fn(const CellDecomposition& d,
                                   const std::function<double(Vec2)>& f,
                                   int gauss_order,
                                   BoundaryRule rule = BoundaryRule::Midpoint) {
  const GaussRule& g = gauss_legendre(gauss_order);
  CertifiedValue out;
  for (const Cell& cell : d.interior_cells) {
    const double h2 = 0.5 * cell.size;
    const Vec2 c = cell.center();
    double s = 0.0;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      double row = 0.0;
      for (size_t j = 0; j < g.nodes.size(); ++j)
        row += g.weights[j] * f({c.x + h2 * g.nodes[j], c.y + h2 * g.nodes[i]});
      s += g.weights[i] * row;
    }
    out.value += s * h2 * h2;
  }
  for (const Cell& cell : d.boundary_cells) {
    const Vec2 m = cell.center();
    if (rule == BoundaryRule::Midpoint) out.value += f(m) * cell.area();
    double bound = std::abs(f(m));
    const Rect r = cell.rect();
    for (Vec2 p : {r.lo, r.hi, Vec2{r.lo.x, r.hi.y}, Vec2{r.hi.x, r.lo.y}})
      bound = std::max(bound, std::abs(f(p)));
    out.error_bound += bound * cell.area();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact triangle moments
// ---------------------------------------------------------------------------

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;  // exact in double for n <= 18
}

// dense (a, b) coefficient grid for polynomials in two variables
struct Poly2 {
  int deg = 0;
  std::vector<double> c;
  explicit Poly2(int d) : deg(d), c(size_t(d + 1) * (d + 1), 0.0) {}
  double& at(int a, int b) { return c[size_t(a) * (deg + 1) + b]; }
  double at(int a, int b) const { return c[size_t(a) * (deg + 1) + b]; }
};

inline Poly2 poly_mul(const Poly2& p, const Poly2& q, int deg) {
  Poly2 r(deg);
  for (int a = 0; a <= p.deg; ++a)
    for (int b = 0; a + b <= p.deg; ++b) {
      if (p.at(a, b) == 0.0) continue;
      for (int u = 0; u <= q.deg && a + u <= deg; ++u)
        for (int v = 0; u + v <= q.deg && a + b + u + v <= deg; ++v)
          r.at(a + u, b + v) += p.at(a, b) * q.at(u, v);
    }
  return r;
}

}  // namespace detail

/// Exact moments over the reference simplex {x, y >= 0, x + y <= 1}:
/// integral of x^a y^b equals a! b! / (a + b + 2)!.
inline double reference_simplex_moment(int a, int b) {
  return detail::factorial(a) * detail::factorial(b) /
         detail::factorial(a + b + 2);
}

/// Exact integrals of x^a y^b, a + b <= maxdeg, over a triangle, via affine
/// pullback to the reference simplex.
inline MomentTable triangle_moments(const Triangle& tri, int maxdeg) {
  const Vec2 e1 = tri.v1 - tri.v0, e2 = tri.v2 - tri.v0;
  const double det = cross(e1, e2);
  if (det == 0.0) throw std::invalid_argument("degenerate triangle");
  if (maxdeg > kMaxPolyDegree)
    throw std::invalid_argument("moment degree over limit");

  detail::Poly2 X(1), Y(1);
  X.at(0, 0) = tri.v0.x;
  X.at(1, 0) = e1.x;
  X.at(0, 1) = e2.x;
  Y.at(0, 0) = tri.v0.y;
  Y.at(1, 0) = e1.y;
  Y.at(0, 1) = e2.y;

  MomentTable t(maxdeg);
  // powers of X and Y built incrementally
  std::vector<detail::Poly2> xp, yp;
  detail::Poly2 one(0);
  one.at(0, 0) = 1.0;
  xp.push_back(one);
  yp.push_back(one);
  for (int k = 1; k <= maxdeg; ++k) {
    xp.push_back(detail::poly_mul(xp.back(), X, maxdeg));
    yp.push_back(detail::poly_mul(yp.back(), Y, maxdeg));
  }
  for (int a = 0; a <= maxdeg; ++a)
    for (int b = 0; a + b <= maxdeg; ++b) {
      const detail::Poly2 p = detail::poly_mul(xp[a], yp[b], maxdeg);
      double s = 0.0;
      for (int u = 0; u <= p.deg; ++u)
        for (int v = 0; u + v <= p.deg; ++v)
          if (p.at(u, v) != 0.0) s += p.at(u, v) * reference_simplex_moment(u, v);
      t.at(a, b) = std::abs(det) * s;
    }
  return t;
}

/// Boundary-cell count of the decomposition at each depth in [dmin, dmax],
/// with the least-squares slope of log(count) against depth * log 2. For a
/// fractal boundary this estimates its box-counting dimension.
struct BoxCountResult {
  std::vector<int> depths;
  std::vector<size_t> counts;
  double slope = 0.0;
};

inline BoxCountResult box_counting(const DomainDescriptor& d, int dmin,
                                   int dmax) {
  BoxCountResult r;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int k = dmin; k <= dmax; ++k) {
    const auto dec = decompose(d, k);
    r.depths.push_back(k);
    r.counts.push_back(dec->boundary_cells.size());
    const double x = k * std::log(2.0), y = std::log((double)r.counts.back());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return r;
}

}  // namespace snowpoly

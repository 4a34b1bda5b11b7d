// Polynomial spaces on mesh elements, the element-wise L2-orthogonal
// projection, and the covering-cube projection (project a global function
// onto polynomials on each covering cube, restrict to the elements assigned
// to it).
//
// All element inner products use one fixed discrete measure per
// (element, depth): exact integration over the certified-interior quadtree
// cells. Gram matrices and right-hand sides share that measure, which is
// what makes the projection reproduce polynomials to solver precision and
// keeps the orthogonal projection an exact minimizer of the reported broken
// norms; the unresolved boundary mass is carried as a certificate, never
// silently mixed into values.
//
// Bases are scaled monomials ((x - c)/r)^a ((y - c)/r)^b in the element's
// local frame (mapped snowflakes live in the unit-snowflake frame), ordered
// by total degree. Similar elements therefore share decompositions, moments
// and Gram factorizations.
#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <numeric>

#include "snowpoly/mesh.hpp"
#include "snowpoly/quadrature.hpp"

namespace snowpoly {

inline int basis_size(int degree) { return (degree + 1) * (degree + 2) / 2; }

inline int default_gauss_order(int degree) { return degree + 2; }

struct PolyBasis {
  int degree = 0;
  Vec2 center{0, 0};    // of the local-frame certified bounding box
  double halfwidth = 1.0;
  std::vector<std::array<int, 2>> powers;  // (a, b), total-degree order

  size_t size() const { return powers.size(); }

  static PolyBasis for_shape(const DomainDescriptor& local, int degree) {
    PolyBasis b;
    b.degree = degree;
    const Rect r = certified_bbox(local);
    b.center = {0.5 * (r.lo.x + r.hi.x), 0.5 * (r.lo.y + r.hi.y)};
    b.halfwidth = 0.5 * std::max(r.hi.x - r.lo.x, r.hi.y - r.lo.y);
    for (int l = 0; l <= degree; ++l)
      for (int bb = 0; bb <= l; ++bb) b.powers.push_back({l - bb, bb});
    return b;
  }

  Vec2 scaled(Vec2 local) const {
    return {(local.x - center.x) / halfwidth, (local.y - center.y) / halfwidth};
  }

  void eval_all(Vec2 local, double* out) const {
    const Vec2 u = scaled(local);
    double px[kMaxPolyDegree + 1], py[kMaxPolyDegree + 1];
    px[0] = py[0] = 1.0;
    for (int k = 1; k <= degree; ++k) {
      px[k] = px[k - 1] * u.x;
      py[k] = py[k - 1] * u.y;
    }
    for (size_t i = 0; i < powers.size(); ++i)
      out[i] = px[powers[i][0]] * py[powers[i][1]];
  }

  double eval(const Eigen::VectorXd& coeffs, Vec2 local) const {
    std::vector<double> phi(size());
    eval_all(local, phi.data());
    double s = 0.0;
    for (size_t i = 0; i < size(); ++i) s += coeffs[i] * phi[i];
    return s;
  }

  /// Coefficients of d/du applied in scaled coordinates (chain-rule factors
  /// for the local or world frame are the caller's business).
  Eigen::VectorXd derivative_u(const Eigen::VectorXd& c) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(c.size());
    for (size_t i = 0; i < powers.size(); ++i) {
      const int a = powers[i][0], b = powers[i][1];
      if (a == 0) continue;
      d[index_of(a - 1, b)] += a * c[i];
    }
    return d;
  }
  Eigen::VectorXd derivative_v(const Eigen::VectorXd& c) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(c.size());
    for (size_t i = 0; i < powers.size(); ++i) {
      const int a = powers[i][0], b = powers[i][1];
      if (b == 0) continue;
      d[index_of(a, b - 1)] += b * c[i];
    }
    return d;
  }

  int index_of(int a, int b) const {
    const int l = a + b;
    return l * (l + 1) / 2 + b;
  }
};

// ---------------------------------------------------------------------------
// Element context and Gram matrices
// ---------------------------------------------------------------------------

struct GramData {
  Eigen::MatrixXd matrix;          // local-frame Gram (world = scale^2 * this)
  Eigen::LLT<Eigen::MatrixXd> llt;
  double condition = 1.0;
};

using GramPtr = std::shared_ptr<const GramData>;

/// Gram matrix of the scaled monomial basis in the element's quadrature
/// measure; shared between all elements with the same local shape. Throws if
/// the factorization fails (degenerate element or insufficient depth).
inline GramPtr local_gram(const DomainDescriptor& geom, int degree, int depth) {
  const DomainDescriptor local = local_shape(geom);
  const std::uint64_t key = descriptor_hash(local);

  static std::mutex mu;
  static std::map<std::tuple<std::uint64_t, int, int>, GramPtr> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({key, degree, depth});
    if (it != cache.end()) return it->second;
  }

  const PolyBasis basis = PolyBasis::for_shape(local, degree);
  const auto dec = decompose(local, depth);
  const MomentTable mom = cell_moments(*dec, basis.center, basis.halfwidth,
                                       2 * degree, BoundaryRule::Exclude);
  auto g = std::make_shared<GramData>();
  const int n = (int)basis.size();
  g->matrix.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g->matrix(i, j) = mom.at(basis.powers[i][0] + basis.powers[j][0],
                               basis.powers[i][1] + basis.powers[j][1]);
  g->matrix = 0.5 * (g->matrix + g->matrix.transpose()).eval();
  g->llt.compute(g->matrix);
  if (g->llt.info() != Eigen::Success)
    throw std::runtime_error("gram matrix not positive definite (shape hash " +
                             std::to_string(key) + ", degree " +
                             std::to_string(degree) + ", depth " +
                             std::to_string(depth) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g->matrix);
  g->condition = es.eigenvalues().maxCoeff() /
                 std::max(es.eigenvalues().minCoeff(), 1e-300);

  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::make_tuple(key, degree, depth), std::move(g))
      .first->second;
}

/// World-frame Gram matrix of an element, G_ij = <phi_i, phi_j>.
inline Eigen::MatrixXd gram(const Element& e, int degree, int depth) {
  const double s = frame(e.geom).scale;
  return s * s * local_gram(e.geom, degree, depth)->matrix;
}

// ---------------------------------------------------------------------------
// Piecewise polynomials
// ---------------------------------------------------------------------------

struct PiecewisePoly {
  std::shared_ptr<const Mesh> mesh;
  int degree = 0;
  std::vector<Eigen::VectorXd> coeffs;  // per element, local basis

  size_t dofs() const {
    return mesh->elements.size() * basis_size(degree);
  }
};

struct ProjectionReport {
  std::vector<double> gram_condition;  // per element
  double max_residual = 0.0;           // normalized Galerkin residual
  double quadrature_certificate = 0.0; // summed boundary-cell bounds
};

namespace detail {

struct ElementQuadrature {
  Similarity world_from_local, local_from_world;
  double scale = 1.0;
  PolyBasis basis;
  DecompPtr decomp;
};

inline ElementQuadrature element_quadrature(const DomainDescriptor& geom,
                                            int degree, int depth) {
  ElementQuadrature q;
  q.world_from_local = frame(geom);
  q.local_from_world = q.world_from_local.inverse();
  q.scale = q.world_from_local.scale;
  q.basis = PolyBasis::for_shape(local_shape(geom), degree);
  q.decomp = decompose(geom, depth);
  return q;
}

}  // namespace detail

/// Element-wise L2-orthogonal projection of u onto piecewise polynomials of
/// total degree <= degree, in the per-element quadrature measure. Gauss
/// order defaults to degree + 2.
inline std::pair<PiecewisePoly, ProjectionReport> l2_project(
    std::shared_ptr<const Mesh> mesh, const std::function<double(Vec2)>& u,
    int degree, int depth, int gauss_order = -1) {
  if (gauss_order < 1) gauss_order = default_gauss_order(degree);
  PiecewisePoly v;
  v.mesh = mesh;
  v.degree = degree;
  v.coeffs.resize(mesh->elements.size());
  ProjectionReport rep;
  rep.gram_condition.resize(mesh->elements.size());

  const GaussRule& g = gauss_legendre(gauss_order);
  for (size_t ei = 0; ei < mesh->elements.size(); ++ei) {
    const Element& e = mesh->elements[ei];
    const auto q = detail::element_quadrature(e.geom, degree, depth);
    const GramPtr gd = local_gram(e.geom, degree, depth);
    rep.gram_condition[ei] = gd->condition;

    const int n = (int)q.basis.size();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    std::vector<double> phi(n);
    double u_norm2 = 0.0;
    for (const Cell& cell : q.decomp->interior_cells) {
      const double h2 = 0.5 * cell.size;
      const Vec2 c = cell.center();
      for (size_t i = 0; i < g.nodes.size(); ++i)
        for (size_t j = 0; j < g.nodes.size(); ++j) {
          const Vec2 p{c.x + h2 * g.nodes[j], c.y + h2 * g.nodes[i]};
          const double w = g.weights[i] * g.weights[j] * h2 * h2;
          const double uv = u(q.world_from_local.apply(p));
          q.basis.eval_all(p, phi.data());
          for (int k = 0; k < n; ++k) b[k] += w * uv * phi[k];
          u_norm2 += w * uv * uv;
        }
    }
    double cert = 0.0;
    for (const Cell& cell : q.decomp->boundary_cells) {
      const Vec2 mpt = cell.center();
      cert += cell.area() * std::abs(u(q.world_from_local.apply(mpt)));
    }
    rep.quadrature_certificate += q.scale * q.scale * cert;

    v.coeffs[ei] = gd->llt.solve(b);
    const Eigen::VectorXd res = gd->matrix * v.coeffs[ei] - b;
    const double unorm = std::sqrt(std::max(u_norm2, 1e-300));
    for (int k = 0; k < n; ++k) {
      const double scale_k = unorm * std::sqrt(gd->matrix(k, k));
      rep.max_residual =
          std::max(rep.max_residual, std::abs(res[k]) / std::max(scale_k, 1e-300));
    }
  }
  return {std::move(v), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Covering-cube projection
// ---------------------------------------------------------------------------

namespace detail {

/// Re-expands a polynomial given in the scaled monomials of (c_src, r_src)
/// composed with an affine map into the scaled monomials of the target
/// basis: result(u) = sum_ab d_ab (A u + t)^ab.
inline Eigen::VectorXd compose_affine(const PolyBasis& target,
                                      const Eigen::VectorXd& src,
                                      const PolyBasis& src_basis,
                                      const std::array<double, 4>& lin,
                                      Vec2 off) {
  const int deg = src_basis.degree;
  Poly2 X(deg > 0 ? 1 : 0), Y(deg > 0 ? 1 : 0);
  X.at(0, 0) = off.x;
  Y.at(0, 0) = off.y;
  if (deg > 0) {
    X.at(1, 0) = lin[0];
    X.at(0, 1) = lin[1];
    Y.at(1, 0) = lin[2];
    Y.at(0, 1) = lin[3];
  }
  std::vector<Poly2> xp{Poly2(0)}, yp{Poly2(0)};
  xp[0].at(0, 0) = 1.0;
  yp[0].at(0, 0) = 1.0;
  for (int k = 1; k <= deg; ++k) {
    xp.push_back(poly_mul(xp.back(), X, deg));
    yp.push_back(poly_mul(yp.back(), Y, deg));
  }
  Poly2 acc(deg);
  for (size_t i = 0; i < src_basis.powers.size(); ++i) {
    if (src[i] == 0.0) continue;
    const Poly2 term =
        poly_mul(xp[src_basis.powers[i][0]], yp[src_basis.powers[i][1]], deg);
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b) acc.at(a, b) += src[i] * term.at(a, b);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(target.size());
  for (size_t i = 0; i < target.powers.size(); ++i)
    out[i] = acc.at(target.powers[i][0], target.powers[i][1]);
  return out;
}

}  // namespace detail

/// Projects a globally defined function onto polynomials on each used
/// covering cube (exact cube Gram, composite Gauss right-hand side) and
/// restricts the cube polynomial to every element assigned to that cube.
/// The result lies in the same piecewise polynomial space as l2_project's.
inline PiecewisePoly covering_project(std::shared_ptr<const Mesh> mesh,
                                      const Covering& cov,
                                      const std::function<double(Vec2)>& U,
                                      int degree, int gauss_order = -1,
                                      int subdivisions = 12) {
  if (gauss_order < 1) gauss_order = default_gauss_order(degree);
  const double h = cov.cube_size;
  const GaussRule& g = gauss_legendre(gauss_order);

  std::map<LatticeIndex, Eigen::VectorXd> cube_coeffs;
  std::map<LatticeIndex, PolyBasis> cube_basis;
  for (const LatticeIndex& z : cov.kappa) {
    if (cube_coeffs.count(z)) continue;
    const Rect big = cov.big_cube(z);
    PolyBasis basis;
    basis.degree = degree;
    basis.center = {0.5 * (big.lo.x + big.hi.x), 0.5 * (big.lo.y + big.hi.y)};
    basis.halfwidth = 1.5 * h;
    for (int l = 0; l <= degree; ++l)
      for (int bb = 0; bb <= l; ++bb) basis.powers.push_back({l - bb, bb});

    const int n = (int)basis.size();
    // exact Gram of scaled monomials on the cube
    auto g1 = [](int k) { return k % 2 == 0 ? 2.0 / (k + 1) : 0.0; };
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        G(i, j) = g1(basis.powers[i][0] + basis.powers[j][0]) *
                  g1(basis.powers[i][1] + basis.powers[j][1]);

    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    std::vector<double> phi(n);
    const double cell = 3.0 * h / subdivisions;
    for (int cy = 0; cy < subdivisions; ++cy)
      for (int cx = 0; cx < subdivisions; ++cx) {
        const Vec2 c{big.lo.x + (cx + 0.5) * cell, big.lo.y + (cy + 0.5) * cell};
        for (size_t i = 0; i < g.nodes.size(); ++i)
          for (size_t j = 0; j < g.nodes.size(); ++j) {
            const Vec2 p{c.x + 0.5 * cell * g.nodes[j],
                         c.y + 0.5 * cell * g.nodes[i]};
            // weight in scaled coordinates: dx = halfwidth^2 du dv
            const double w = g.weights[i] * g.weights[j] *
                             (0.5 * cell / basis.halfwidth) *
                             (0.5 * cell / basis.halfwidth);
            basis.eval_all(p, phi.data());
            const double uv = U(p);
            for (int k = 0; k < n; ++k) b[k] += w * uv * phi[k];
          }
      }
    cube_coeffs.emplace(z, G.llt().solve(b));
    cube_basis.emplace(z, std::move(basis));
  }

  PiecewisePoly v;
  v.mesh = mesh;
  v.degree = degree;
  v.coeffs.resize(mesh->elements.size());
  for (size_t ei = 0; ei < mesh->elements.size(); ++ei) {
    const Element& e = mesh->elements[ei];
    const LatticeIndex z = cov.kappa[ei];
    const PolyBasis& cb = cube_basis.at(z);
    const PolyBasis eb = PolyBasis::for_shape(local_shape(e.geom), degree);
    const Similarity S = frame(e.geom);
    // scaled element coords -> world -> scaled cube coords
    const double c = std::cos(S.rotation), s = std::sin(S.rotation);
    const double fy = S.reflect ? -1.0 : 1.0;
    const double a = S.scale * eb.halfwidth / cb.halfwidth;
    const std::array<double, 4> lin{a * c, -a * s * fy, a * s, a * c * fy};
    const Vec2 base = S.apply({eb.center.x, eb.center.y});
    const Vec2 off{(base.x - cb.center.x) / cb.halfwidth,
                   (base.y - cb.center.y) / cb.halfwidth};
    v.coeffs[ei] = detail::compose_affine(eb, cube_coeffs.at(z), cb, lin, off);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluates v at x through the unique element claiming x Inside; nullopt if
/// no element does (outside the domain or in an uncertainty band). With the
/// default depth < 0 the classification escalates until the point resolves,
/// so almost every point of the domain gets a value.
inline std::optional<double> eval_piecewise(const PiecewisePoly& v, Vec2 x,
                                            int classify_depth = -1) {
  for (size_t ei = 0; ei < v.mesh->elements.size(); ++ei) {
    const Element& e = v.mesh->elements[ei];
    if (!certified_bbox(e.geom).contains(x)) continue;
    Location loc = Location::Uncertain;
    if (classify_depth >= 0) {
      loc = classify_point(e.geom, x, classify_depth);
    } else {
      for (int k = 6; k <= 24 && loc == Location::Uncertain; k += 3)
        loc = classify_point(e.geom, x, k);
    }
    if (loc != Location::Inside) continue;
    const Similarity inv = frame(e.geom).inverse();
    const PolyBasis basis = PolyBasis::for_shape(local_shape(e.geom), v.degree);
    return basis.eval(v.coeffs[ei], inv.apply(x));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void save_piecewise(const PiecewisePoly& v, const std::string& path) {
  nlohmann::json j;
  j["format"] = "snowpoly-pwpoly";
  j["version"] = 1;
  char tag[32];
  std::snprintf(tag, sizeof(tag), "%016llx",
                (unsigned long long)mesh_hash(*v.mesh));
  j["mesh_tag"] = tag;
  j["degree"] = v.degree;
  auto& cs = j["coeffs"] = nlohmann::json::array();
  for (const auto& c : v.coeffs)
    cs.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(1) << '\n';
}

inline PiecewisePoly load_piecewise(std::shared_ptr<const Mesh> mesh,
                                    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format") != "snowpoly-pwpoly" || j.at("version") != 1)
    throw std::runtime_error("unsupported piecewise polynomial format");
  char tag[32];
  std::snprintf(tag, sizeof(tag), "%016llx",
                (unsigned long long)mesh_hash(*mesh));
  if (j.at("mesh_tag") != tag)
    throw std::runtime_error("piecewise polynomial does not match this mesh");
  PiecewisePoly v;
  v.mesh = std::move(mesh);
  v.degree = j.at("degree");
  for (const auto& c : j.at("coeffs")) {
    Eigen::VectorXd x(c.size());
    for (size_t i = 0; i < c.size(); ++i) x[i] = c[i];
    v.coeffs.push_back(std::move(x));
  }
  if (v.coeffs.size() != v.mesh->elements.size())
    throw std::runtime_error("coefficient count does not match mesh");
  return v;
}

}  // namespace snowpoly

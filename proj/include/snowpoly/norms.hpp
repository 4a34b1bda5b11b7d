// Broken Sobolev norms of (u - v) over a mesh, zero-extension grid sampling,
// and a discrete fractional Sobolev norm of the zero extension computed from
// its discrete Fourier transform on a padded periodic box with
// Parseval-consistent normalization: the s = 0 norm equals the grid L2 norm
// to roundoff.
#pragma once

#include <fftw3.h>

#include <complex>

#include "snowpoly/approx.hpp"

namespace snowpoly {

/// A function with analytic derivatives up to second order; grad and hess
/// may be empty when the caller only needs lower orders.
struct SmoothFunction {
  std::function<double(Vec2)> value;
  std::function<Vec2(Vec2)> grad;
  std::function<std::array<double, 3>(Vec2)> hess;  // (wxx, wxy, wyy)
};

struct BrokenNormResult {
  double value = 0.0;      // full broken W^j norm of u - v
  double seminorm = 0.0;   // order-j terms only
  double certificate = 0.0;
};

namespace detail {

struct Lin2 {
  // row-major 2x2
  double m[4];
  Vec2 apply(Vec2 v) const {
    return {m[0] * v.x + m[1] * v.y, m[2] * v.x + m[3] * v.y};
  }
};

inline Lin2 similarity_linear(const Similarity& s) {
  const double c = std::cos(s.rotation), sn = std::sin(s.rotation);
  const double fy = s.reflect ? -1.0 : 1.0;
  return {{s.scale * c, -s.scale * sn * fy, s.scale * sn, s.scale * c * fy}};
}

inline Lin2 inverse_transpose(const Lin2& a) {
  const double det = a.m[0] * a.m[3] - a.m[1] * a.m[2];
  return {{a.m[3] / det, -a.m[2] / det, -a.m[1] / det, a.m[0] / det}};
}

}  // namespace detail

/// Broken norm (sum over elements of all derivative orders 0..j) of u - v,
/// with the order-j seminorm reported separately. Polynomial derivatives are
/// exact; u must supply analytic derivatives up to order j.
inline BrokenNormResult broken_norm(const SmoothFunction& u,
                                    const PiecewisePoly& v, int j, int depth,
                                    int gauss_order = -1) {
  if (j < 0 || j > 2) throw std::invalid_argument("broken_norm: j must be 0..2");
  if (j >= 1 && !u.grad)
    throw std::invalid_argument("broken_norm: gradient callable required");
  if (j >= 2 && !u.hess)
    throw std::invalid_argument("broken_norm: hessian callable required");
  if (gauss_order < 1) gauss_order = default_gauss_order(v.degree) + 1;
  const GaussRule& g = gauss_legendre(gauss_order);

  double total = 0.0, semi = 0.0, cert = 0.0;
  for (size_t ei = 0; ei < v.mesh->elements.size(); ++ei) {
    const Element& e = v.mesh->elements[ei];
    const auto q = detail::element_quadrature(e.geom, v.degree, depth);
    const detail::Lin2 lin = detail::similarity_linear(q.world_from_local);
    const detail::Lin2 grad_map = detail::inverse_transpose(lin);
    const double r = q.basis.halfwidth;

    const Eigen::VectorXd& c = v.coeffs[ei];
    const Eigen::VectorXd du = q.basis.derivative_u(c);
    const Eigen::VectorXd dv = q.basis.derivative_v(c);
    const Eigen::VectorXd duu = q.basis.derivative_u(du);
    const Eigen::VectorXd duv = q.basis.derivative_v(du);
    const Eigen::VectorXd dvv = q.basis.derivative_v(dv);

    // squared residual derivative terms, orders 0..j, at a local point
    auto terms = [&](Vec2 p, double* full, double* top) {
      const Vec2 w = q.world_from_local.apply(p);
      double f = 0.0, t = 0.0;
      const double r0 = u.value(w) - q.basis.eval(c, p);
      f += r0 * r0;
      if (j == 0) t = r0 * r0;
      if (j >= 1) {
        const Vec2 gl{q.basis.eval(du, p) / r, q.basis.eval(dv, p) / r};
        const Vec2 gw = grad_map.apply(gl);
        const Vec2 gu = u.grad(w);
        const double gx = gu.x - gw.x, gy = gu.y - gw.y;
        f += gx * gx + gy * gy;
        if (j == 1) t = gx * gx + gy * gy;
      }
      if (j >= 2) {
        const double huu = q.basis.eval(duu, p) / (r * r);
        const double huv = q.basis.eval(duv, p) / (r * r);
        const double hvv = q.basis.eval(dvv, p) / (r * r);
        // H_world = M^{-T} H_local M^{-1} with M the similarity linear part
        const auto& a = grad_map.m;  // M^{-T}
        const double b00 = a[0] * huu + a[1] * huv;
        const double b01 = a[0] * huv + a[1] * hvv;
        const double b10 = a[2] * huu + a[3] * huv;
        const double b11 = a[2] * huv + a[3] * hvv;
        const double wxx = b00 * a[0] + b01 * a[1];
        const double wxy = b00 * a[2] + b01 * a[3];
        const double wyy = b10 * a[2] + b11 * a[3];
        const auto hu = u.hess(w);
        const double e0 = hu[0] - wxx, e1 = hu[1] - wxy, e2 = hu[2] - wyy;
        // one term per multi-index: (2,0), (1,1), (0,2)
        f += e0 * e0 + e1 * e1 + e2 * e2;
        t = e0 * e0 + e1 * e1 + e2 * e2;
      }
      *full = f;
      *top = t;
    };

    const double s2 = q.scale * q.scale;
    for (const Cell& cell : q.decomp->interior_cells) {
      const double h2 = 0.5 * cell.size;
      const Vec2 cc = cell.center();
      for (size_t i = 0; i < g.nodes.size(); ++i)
        for (size_t jn = 0; jn < g.nodes.size(); ++jn) {
          const Vec2 p{cc.x + h2 * g.nodes[jn], cc.y + h2 * g.nodes[i]};
          const double w = g.weights[i] * g.weights[jn] * h2 * h2 * s2;
          double f, t;
          terms(p, &f, &t);
          total += w * f;
          semi += w * t;
        }
    }
    // value stays a certified interior sum; boundary cells only feed the
    // certificate (cell measure times a sampled local bound)
    for (const Cell& cell : q.decomp->boundary_cells) {
      double bound = 0.0;
      const Rect rc = cell.rect();
      for (Vec2 p : {cell.center(), rc.lo, rc.hi, Vec2{rc.lo.x, rc.hi.y},
                     Vec2{rc.hi.x, rc.lo.y}}) {
        double fb, tb;
        terms(p, &fb, &tb);
        bound = std::max(bound, fb);
      }
      cert += cell.area() * s2 * bound;
    }
  }
  BrokenNormResult out;
  out.value = std::sqrt(total);
  out.seminorm = std::sqrt(semi);
  // certificate on the norm: |sqrt(a+c) - sqrt(a)| <= c / (2 sqrt(a)) or sqrt(c)
  out.certificate =
      total > 0 ? std::min(std::sqrt(cert), cert / (2.0 * std::sqrt(total)))
                : std::sqrt(cert);
  return out;
}

// ---------------------------------------------------------------------------
// Zero-extension grid samples
// ---------------------------------------------------------------------------

enum class GridMask : std::uint8_t { Inside = 0, Outside = 1, Uncertain = 2 };

struct GridSample {
  Vec2 origin{0, 0};  // lower-left corner of the periodic box
  double box = 0.0;   // side length L
  int n = 0;          // N x N samples at cell centers
  std::vector<double> values;      // zero at Outside/Uncertain points
  std::vector<GridMask> mask;
  size_t inside_count = 0;
  size_t uncertain_count = 0;

  double cell() const { return box / n; }
  Vec2 point(int ix, int iy) const {
    return {origin.x + (ix + 0.5) * cell(), origin.y + (iy + 0.5) * cell()};
  }
  double& at(int ix, int iy) { return values[size_t(iy) * n + ix]; }
};

/// Samples a plain function on the box (no domain masking); for oracle and
/// spectral tests.
inline GridSample grid_sample_function(const std::function<double(Vec2)>& f,
                                       Vec2 origin, double box, int n) {
  GridSample g;
  g.origin = origin;
  g.box = box;
  g.n = n;
  g.values.resize(size_t(n) * n);
  g.mask.assign(size_t(n) * n, GridMask::Inside);
  g.inside_count = g.values.size();
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) g.at(ix, iy) = f(g.point(ix, iy));
  return g;
}

/// Samples the zero extension of u - v (or of u when v is null) at cell
/// centers: the value is set where the point is certified Inside an element
/// (or the domain, when v is null) at grid resolution, and is exactly zero
/// at Outside and Uncertain points. The box must satisfy L >= 2 diam(domain).
inline GridSample sample_zero_extension(const Mesh& mesh,
                                        const std::function<double(Vec2)>& u,
                                        const PiecewisePoly* v, Vec2 origin,
                                        double box, int n) {
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::invalid_argument("grid size must be a power of two");
  if (box < 2.0 * diameter(mesh.domain) * (1.0 - 1e-12))
    throw std::invalid_argument("box must be at least twice the domain diameter");
  GridSample g;
  g.origin = origin;
  g.box = box;
  g.n = n;
  g.values.assign(size_t(n) * n, 0.0);
  g.mask.assign(size_t(n) * n, GridMask::Outside);

  const double d = g.cell();
  const int k_dom = depth_for_band(mesh.domain, 0.5 * d);
  std::vector<std::uint8_t> claimed(size_t(n) * n, 0);

  // domain-level mask
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const Location loc = classify_point(mesh.domain, g.point(ix, iy), k_dom);
      g.mask[size_t(iy) * n + ix] =
          loc == Location::Inside
              ? GridMask::Inside
              : (loc == Location::Outside ? GridMask::Outside
                                          : GridMask::Uncertain);
    }

  if (v == nullptr) {
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        if (g.mask[size_t(iy) * n + ix] == GridMask::Inside)
          g.at(ix, iy) = u(g.point(ix, iy));
  } else {
    for (size_t ei = 0; ei < mesh.elements.size(); ++ei) {
      const Element& e = mesh.elements[ei];
      const Rect bb = certified_bbox(e.geom);
      const int x0 = std::max(0, (int)std::floor((bb.lo.x - origin.x) / d));
      const int x1 = std::min(n - 1, (int)std::ceil((bb.hi.x - origin.x) / d));
      const int y0 = std::max(0, (int)std::floor((bb.lo.y - origin.y) / d));
      const int y1 = std::min(n - 1, (int)std::ceil((bb.hi.y - origin.y) / d));
      const int k_e = depth_for_band(e.geom, 0.5 * d);
      const Similarity inv = frame(e.geom).inverse();
      const PolyBasis basis =
          PolyBasis::for_shape(local_shape(e.geom), v->degree);
      for (int iy = y0; iy <= y1; ++iy)
        for (int ix = x0; ix <= x1; ++ix) {
          const Vec2 p = g.point(ix, iy);
          if (classify_point(e.geom, p, k_e) != Location::Inside) continue;
          g.at(ix, iy) = u(p) - basis.eval(v->coeffs[ei], inv.apply(p));
          claimed[size_t(iy) * n + ix] = 1;
        }
    }
    // inside the domain but in no element's certified interior: zeroed
    for (size_t i = 0; i < g.mask.size(); ++i)
      if (g.mask[i] == GridMask::Inside && !claimed[i])
        g.mask[i] = GridMask::Uncertain;
  }

  for (size_t i = 0; i < g.mask.size(); ++i) {
    if (g.mask[i] == GridMask::Inside)
      ++g.inside_count;
    else {
      if (g.mask[i] == GridMask::Uncertain) ++g.uncertain_count;
      g.values[i] = 0.0;
    }
  }
  return g;
}

inline double grid_l2_norm(const GridSample& g) {
  double s = 0.0;
  for (double v : g.values) s += v * v;
  return std::sqrt(s * g.cell() * g.cell());
}

// ---------------------------------------------------------------------------
// Discrete fractional Sobolev norm via FFT
// ---------------------------------------------------------------------------

struct NormResult {
  double value = 0.0;
  int n = 0;
  double box = 0.0;
  double s = 0.0;
  double delta = 0.0;  // self-convergence: |value(N) - value(N/2)|
};

/// Discrete H^s norm of the sampled zero extension on the periodic box:
/// sqrt(sum_k (1 + |xi_k|^2)^s |u_hat(xi_k)|^2 d xi) with xi_k = 2 pi k / L
/// and unitary-Fourier normalization, so s = 0 reproduces the grid L2 norm
/// (Parseval identity).
inline NormResult sobolev_norm_fourier(const GridSample& g, double s) {
  const int n = g.n;
  static std::mutex plan_mu;
  std::vector<std::complex<double>> data(size_t(n) * n);
  for (size_t i = 0; i < data.size(); ++i) data[i] = {g.values[i], 0.0};
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mu);
    plan = fftw_plan_dft_2d(
        n, n, reinterpret_cast<fftw_complex*>(data.data()),
        reinterpret_cast<fftw_complex*>(data.data()), FFTW_FORWARD,
        FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mu);
    fftw_destroy_plan(plan);
  }
  const double dxi = 2.0 * kPi / g.box;
  double acc = 0.0;
  for (int ky = 0; ky < n; ++ky) {
    const int wy = ky <= n / 2 ? ky : ky - n;
    const double xi_y = dxi * wy;
    for (int kx = 0; kx < n; ++kx) {
      const int wx = kx <= n / 2 ? kx : kx - n;
      const double xi_x = dxi * wx;
      const double w = std::pow(1.0 + xi_x * xi_x + xi_y * xi_y, s);
      acc += w * std::norm(data[size_t(ky) * n + kx]);
    }
  }
  NormResult out;
  const double nn = double(n) * n;
  out.value = std::sqrt(acc * g.box * g.box / (nn * nn));
  out.n = n;
  out.box = g.box;
  out.s = s;
  out.delta = std::numeric_limits<double>::quiet_NaN();
  return out;
}

/// Runs the norm at N and N/2 (resampling through `sampler`) and records the
/// difference as the self-convergence delta.
inline NormResult sobolev_norm_with_delta(
    const std::function<GridSample(int)>& sampler, int n, double s) {
  const GridSample fine = sampler(n);
  NormResult r = sobolev_norm_fourier(fine, s);
  const GridSample coarse = sampler(n / 2);
  r.delta = std::abs(r.value - sobolev_norm_fourier(coarse, s).value);
  return r;
}

}  // namespace snowpoly

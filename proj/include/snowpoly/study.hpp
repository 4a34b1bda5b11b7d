// Convergence-study harness: declarative studies over (mesh level, degree,
// norm target), log-log slope fits, CSV/SVG emission, and the verify battery
// that exercises the library's invariants end to end.
#pragma once

#include <atomic>
#include <chrono>
#include <thread>

#include "snowpoly/norms.hpp"

namespace snowpoly {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StudyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kEntireRegularity = 1e9;

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

struct TestFunction {
  std::string id;
  std::string params;  // printable, e.g. "sigma=0.5;x0=0.1,0.05"
  SmoothFunction fn;
  double regularity = kEntireRegularity;  // in H^s for all s < regularity
  bool is_poly = false;
  int poly_degree = -1;
};

namespace detail {

inline double bump_f(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double bump_fp(double s) {
  return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0;
}

/// C-infinity cutoff: 1 for t <= 0, 0 for t >= 1.
inline double cutoff(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = bump_f(1.0 - t), b = bump_f(t);
  return a / (a + b);
}
inline double cutoff_d(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double a = bump_f(1.0 - t), b = bump_f(t);
  const double ap = -bump_fp(1.0 - t), bp = bump_fp(t);
  const double s = a + b;
  return (ap * s - a * (ap + bp)) / (s * s);
}

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

/// Builds a test function from its JSON description; geometric defaults
/// (centers, widths, cutoff radii) are relative to the domain.
inline TestFunction make_test_function(const nlohmann::json& spec,
                                       const DomainDescriptor& domain) {
  const double diam_dom = diameter(domain);
  TestFunction t;
  t.id = spec.at("id").get<std::string>();

  if (t.id == "poly") {
    const int p0 = spec.value("p0", 2);
    if (p0 < 0 || p0 > 8) throw ConfigError("poly: p0 out of range");
    t.params = "p0=" + std::to_string(p0);
    t.is_poly = true;
    t.poly_degree = p0;
    struct Term {
      int a, b;
      double c;
    };
    auto terms = std::make_shared<std::vector<Term>>();
    for (int a = 0; a <= p0; ++a)
      for (int b = 0; a + b <= p0; ++b)
        terms->push_back({a, b, ((a + 2 * b) % 3 + 1) * (a % 2 ? -0.5 : 1.0) /
                                    (1.0 + a + b)});
    t.fn.value = [terms](Vec2 x) {
      double s = 0.0;
      for (const auto& tm : *terms)
        s += tm.c * std::pow(x.x, tm.a) * std::pow(x.y, tm.b);
      return s;
    };
    t.fn.grad = [terms](Vec2 x) {
      Vec2 g{0, 0};
      for (const auto& tm : *terms) {
        if (tm.a > 0)
          g.x += tm.c * tm.a * std::pow(x.x, tm.a - 1) * std::pow(x.y, tm.b);
        if (tm.b > 0)
          g.y += tm.c * tm.b * std::pow(x.x, tm.a) * std::pow(x.y, tm.b - 1);
      }
      return g;
    };
    t.fn.hess = [terms](Vec2 x) {
      std::array<double, 3> h{0, 0, 0};
      for (const auto& tm : *terms) {
        if (tm.a > 1)
          h[0] += tm.c * tm.a * (tm.a - 1) * std::pow(x.x, tm.a - 2) *
                  std::pow(x.y, tm.b);
        if (tm.a > 0 && tm.b > 0)
          h[1] += tm.c * tm.a * tm.b * std::pow(x.x, tm.a - 1) *
                  std::pow(x.y, tm.b - 1);
        if (tm.b > 1)
          h[2] += tm.c * tm.b * (tm.b - 1) * std::pow(x.x, tm.a) *
                  std::pow(x.y, tm.b - 2);
      }
      return h;
    };
    return t;
  }

  if (t.id == "gaussian") {
    const double sigma = spec.value("sigma", 0.45 * diam_dom);
    Vec2 x0{0.07 * diam_dom, 0.04 * diam_dom};
    if (spec.contains("x0")) x0 = {spec["x0"][0], spec["x0"][1]};
    if (!(sigma > 0)) throw ConfigError("gaussian: sigma must be positive");
    t.params = "sigma=" + detail::fmt_num(sigma) + ";x0=" +
               detail::fmt_num(x0.x) + "," + detail::fmt_num(x0.y);
    t.fn.value = [sigma, x0](Vec2 x) {
      const Vec2 d = x - x0;
      return std::exp(-dot(d, d) / (2.0 * sigma * sigma));
    };
    t.fn.grad = [sigma, x0, v = t.fn.value](Vec2 x) {
      const Vec2 d = x - x0;
      return (-1.0 / (sigma * sigma)) * v(x) * d;
    };
    t.fn.hess = [sigma, x0, v = t.fn.value](Vec2 x) {
      const Vec2 d = x - x0;
      const double s2 = sigma * sigma, u = v(x);
      return std::array<double, 3>{(d.x * d.x / s2 - 1.0) / s2 * u,
                                   d.x * d.y / (s2 * s2) * u,
                                   (d.y * d.y / s2 - 1.0) / s2 * u};
    };
    return t;
  }

  if (t.id == "sinprod") {
    const double k = spec.value("k", 2.0);
    t.params = "k=" + detail::fmt_num(k);
    const double w = k * kPi;
    t.fn.value = [w](Vec2 x) { return std::sin(w * x.x) * std::sin(w * x.y); };
    t.fn.grad = [w](Vec2 x) {
      return Vec2{w * std::cos(w * x.x) * std::sin(w * x.y),
                  w * std::sin(w * x.x) * std::cos(w * x.y)};
    };
    t.fn.hess = [w](Vec2 x) {
      return std::array<double, 3>{
          -w * w * std::sin(w * x.x) * std::sin(w * x.y),
          w * w * std::cos(w * x.x) * std::cos(w * x.y),
          -w * w * std::sin(w * x.x) * std::sin(w * x.y)};
    };
    return t;
  }

  if (t.id == "radial_singular") {
    const double alpha = spec.value("alpha", 0.5);
    Vec2 x0{0.0, 0.0};  // centroid
    if (spec.contains("x0")) x0 = {spec["x0"][0], spec["x0"][1]};
    if (!(alpha > 0 && alpha < 2))
      throw ConfigError("radial_singular: alpha must be in (0, 2)");
    const double r2c = 0.3 * diam_dom;  // cutoff radius
    const double r1c = 0.5 * r2c;
    t.params = "alpha=" + detail::fmt_num(alpha) + ";x0=" +
               detail::fmt_num(x0.x) + "," + detail::fmt_num(x0.y);
    t.regularity = 1.0 + alpha;  // |x|^alpha in 2D lies in H^s for s < 1+alpha
    t.fn.value = [alpha, x0, r1c, r2c](Vec2 x) {
      const double r = dist(x, x0);
      if (r >= r2c) return 0.0;
      return std::pow(r, alpha) * detail::cutoff((r - r1c) / (r2c - r1c));
    };
    t.fn.grad = [alpha, x0, r1c, r2c](Vec2 x) {
      const Vec2 d = x - x0;
      const double r = norm(d);
      if (r >= r2c || r < 1e-300) return Vec2{0.0, 0.0};
      const double tt = (r - r1c) / (r2c - r1c);
      const double ur = alpha * std::pow(r, alpha - 1.0) * detail::cutoff(tt) +
                        std::pow(r, alpha) * detail::cutoff_d(tt) / (r2c - r1c);
      return (ur / r) * d;
    };
    return t;
  }

  throw ConfigError("unknown test function id: " + t.id);
}

// ---------------------------------------------------------------------------
// Study configuration
// ---------------------------------------------------------------------------

struct NormTarget {
  enum class Kind { BrokenWj, L2, NegSobolev };
  Kind kind = Kind::L2;
  int j = 0;             // BrokenWj
  double s1 = 0.0;       // NegSobolev
  double s2 = 1.0;       // NegSobolev: regularity cap used for the rate
  std::string kind_name() const {
    switch (kind) {
      case Kind::BrokenWj: return "brokenWj";
      case Kind::L2: return "L2";
      case Kind::NegSobolev: return "negSobolev";
    }
    return "?";
  }
  std::string params_name() const {
    switch (kind) {
      case Kind::BrokenWj: return "j=" + std::to_string(j);
      case Kind::L2: return "";
      case Kind::NegSobolev:
        return "s1=" + detail::fmt_num(s1) + ";s2=" + detail::fmt_num(s2);
    }
    return "";
  }
};

struct StudyConfig {
  nlohmann::json domain = {{"kind", "snowflake"}, {"side", 1.0}};
  std::string family = "self_similar";  // or "hybrid_then_refine"
  std::vector<int> levels{1, 2, 3};
  std::vector<int> p_list{1};
  int m = 1;
  std::vector<NormTarget> targets{NormTarget{}};
  nlohmann::json test_function = {{"id", "gaussian"}};
  int depth = 8;
  int gauss_order = 0;  // 0: p + 2
  int grid_n = 1024;
  double box_scale = 2.5;  // L = box_scale * diam(domain)
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int workers = 1;
};

inline DomainDescriptor domain_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "snowflake");
  if (kind == "snowflake") return make_snowflake(j.value("side", 1.0));
  throw ConfigError("unsupported study domain kind: " + kind);
}

inline StudyConfig parse_config(const nlohmann::json& j) {
  StudyConfig c;
  try {
    if (j.contains("domain")) c.domain = j["domain"];
    if (j.contains("family")) c.family = j["family"];
    if (j.contains("levels")) c.levels = j["levels"].get<std::vector<int>>();
    if (j.contains("p_list")) c.p_list = j["p_list"].get<std::vector<int>>();
    if (j.contains("m")) c.m = j["m"];
    if (j.contains("targets")) {
      c.targets.clear();
      for (const auto& t : j["targets"]) {
        NormTarget nt;
        const std::string k = t.at("kind");
        if (k == "brokenWj") {
          nt.kind = NormTarget::Kind::BrokenWj;
          nt.j = t.value("j", 0);
        } else if (k == "L2") {
          nt.kind = NormTarget::Kind::L2;
        } else if (k == "negSobolev") {
          nt.kind = NormTarget::Kind::NegSobolev;
          nt.s1 = t.at("s1");
          nt.s2 = t.value("s2", double(c.m));
        } else {
          throw ConfigError("unknown target kind: " + k);
        }
        c.targets.push_back(nt);
      }
    }
    if (j.contains("test_function")) c.test_function = j["test_function"];
    if (j.contains("depth")) c.depth = j["depth"];
    if (j.contains("gauss_order")) c.gauss_order = j["gauss_order"];
    if (j.contains("grid_n")) c.grid_n = j["grid_n"];
    if (j.contains("box_scale")) c.box_scale = j["box_scale"];
    if (j.contains("output_dir")) c.output_dir = j["output_dir"];
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) c.workers = j["workers"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (c.m < 1) throw ConfigError("m must be >= 1");
  for (size_t i = 1; i < c.levels.size(); ++i)
    if (c.levels[i] <= c.levels[i - 1])
      throw ConfigError("levels must be strictly increasing");
  if (c.family != "self_similar" && c.family != "hybrid_then_refine")
    throw ConfigError("unknown mesh family: " + c.family);
  if (c.depth < 0 || c.depth > 14) throw ConfigError("depth out of range");
  return c;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Records, fits, results
// ---------------------------------------------------------------------------

struct ConvergenceRecord {
  std::string study_id;
  int level = 0;
  double h = 0.0;
  int p = 0;
  size_t elements = 0;
  size_t dofs = 0;
  std::string target_kind;
  std::string target_params;
  double error = 0.0;
  double certificate = 0.0;
  bool exact = false;
  double wall_time = 0.0;  // seconds; never serialized to CSV
};

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  int points = 0;
  bool reliable = false;
};

/// Least-squares line through (x_i, y_i) with coefficient of determination.
inline SlopeFit linear_fit(const std::vector<double>& x,
                           const std::vector<double>& y) {
  SlopeFit f;
  const int n = (int)x.size();
  f.points = n;
  if (n < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = sy / n;
  for (int i = 0; i < n; ++i) {
    const double pred = f.slope * x[i] + f.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  f.reliable = n >= 2 && f.r2 >= 0.98;
  return f;
}

struct StudySummary {
  std::string study_id;
  int p = 0;
  std::string target_kind;
  std::string target_params;
  SlopeFit fit;
  double expected_slope = 0.0;
  bool exact = false;
};

struct StudyResult {
  std::vector<ConvergenceRecord> records;
  std::vector<StudySummary> summaries;
};

// ---------------------------------------------------------------------------
// Mesh families
// ---------------------------------------------------------------------------

/// Lazily built, cached mesh hierarchy for a family. Thread-safe.
class MeshProvider {
 public:
  MeshProvider(std::string family, DomainDescriptor domain)
      : family_(std::move(family)), domain_(std::move(domain)) {}

  std::shared_ptr<const Mesh> level(int l) {
    std::lock_guard<std::mutex> lock(mu_);
    return level_locked(l);
  }

 private:
  std::shared_ptr<const Mesh> level_locked(int l) {
    auto it = cache_.find(l);
    if (it != cache_.end()) return it->second;
    std::shared_ptr<const Mesh> m;
    if (family_ == "self_similar") {
      const auto* s = std::get_if<Snowflake>(&domain_.shape);
      if (!s) throw ConfigError("self_similar family needs a snowflake domain");
      m = std::make_shared<Mesh>(snowflake_self_similar_mesh(l, s->side));
    } else {
      if (l == 0) {
        const auto* s = std::get_if<Snowflake>(&domain_.shape);
        if (!s) throw ConfigError("hybrid family needs a snowflake domain");
        m = std::make_shared<Mesh>(hybrid_mesh(s->side));
      } else {
        m = std::make_shared<Mesh>(refine(*level_locked(l - 1)));
      }
    }
    cache_.emplace(l, m);
    return m;
  }

  std::string family_;
  DomainDescriptor domain_;
  std::mutex mu_;
  std::map<int, std::shared_ptr<const Mesh>> cache_;
};

namespace detail {

template <class F>
inline void parallel_for(int n, int workers, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(count);
  for (int w = 0; w < count; ++w)
    pool.emplace_back([&] {
      for (int i; (i = next.fetch_add(1)) < n;) f(i);
    });
  for (auto& t : pool) t.join();
}

/// Reference scale of u over the domain, used to flag exact rows.
inline double function_scale(const DomainDescriptor& domain,
                             const SmoothFunction& u) {
  const auto dec = decompose(domain, 6);
  const auto v = integrate_fn(
      *dec, [&u](Vec2 x) { return u.value(x) * u.value(x); }, 4);
  return std::sqrt(std::max(v.value, 0.0));
}

/// Certificate discipline per (p, target) series: the worst quadrature
/// certificate must stay below 10% of the smallest error of that series.
inline void enforce_certificates(const StudyResult& r) {
  std::map<std::tuple<int, std::string, std::string>, std::pair<double, double>>
      series;  // -> (min error, max certificate)
  for (const auto& rec : r.records) {
    if (rec.exact) continue;
    auto& s = series
                  .try_emplace({rec.p, rec.target_kind, rec.target_params},
                               std::numeric_limits<double>::infinity(), 0.0)
                  .first->second;
    s.first = std::min(s.first, rec.error);
    s.second = std::max(s.second, rec.certificate);
  }
  for (const auto& [key, s] : series)
    if (s.second > 0.1 * s.first)
      throw StudyError(
          "quadrature certificates exceed 10% of the smallest error (" +
          detail::fmt_num(s.second) + " vs " + detail::fmt_num(s.first) +
          " for p=" + std::to_string(std::get<0>(key)) + " " +
          std::get<1>(key) + "); increase the decomposition depth d");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

/// h-refinement study: errors across mesh levels for each degree and target,
/// with slope fitted on (log h, log error) dropping the coarsest level.
/// Polynomial-exact series are marked exact and not fitted.
inline StudyResult run_h_study(const StudyConfig& cfg,
                               const std::string& study_id = "h") {
  if (cfg.levels.size() < 3) throw ConfigError("h study needs >= 3 levels");
  const DomainDescriptor domain = domain_from_json(cfg.domain);
  const TestFunction u = make_test_function(cfg.test_function, domain);
  MeshProvider meshes(cfg.family, domain);
  const double u_scale = detail::function_scale(domain, u.fn);

  struct Cell {
    int level, p;
  };
  std::vector<Cell> cells;
  for (int p : cfg.p_list)
    for (int l : cfg.levels) cells.push_back({l, p});
  std::vector<std::vector<ConvergenceRecord>> out(cells.size());

  detail::parallel_for((int)cells.size(), cfg.workers, [&](int ci) {
    const auto [l, p] = cells[ci];
    const auto t0 = std::chrono::steady_clock::now();
    auto mesh = meshes.level(l);
    const int q = cfg.gauss_order > 0 ? cfg.gauss_order : p + 2;
    auto [v, rep] = l2_project(mesh, u.fn.value, p, cfg.depth, q);
    for (const NormTarget& tgt : cfg.targets) {
      if (tgt.kind == NormTarget::Kind::NegSobolev)
        throw ConfigError("negSobolev targets belong to the neg study");
      const int j = tgt.kind == NormTarget::Kind::L2 ? 0 : tgt.j;
      const auto bn = broken_norm(u.fn, v, j, cfg.depth);
      ConvergenceRecord rec;
      rec.study_id = study_id + "_" + u.id;
      rec.level = l;
      rec.h = mesh->meshwidth;
      rec.p = p;
      rec.elements = mesh->elements.size();
      rec.dofs = v.dofs();
      rec.target_kind = tgt.kind_name();
      rec.target_params = tgt.params_name();
      rec.error = bn.value;
      rec.certificate = bn.certificate;
      rec.exact = u.is_poly && u.poly_degree <= p &&
                  bn.value < 1e-10 * (1.0 + u_scale);
      rec.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      out[ci].push_back(std::move(rec));
    }
  });

  StudyResult res;
  for (auto& v : out)
    for (auto& r : v) res.records.push_back(std::move(r));
  for (int p : cfg.p_list)
    for (const NormTarget& tgt : cfg.targets) {
      StudySummary s;
      s.study_id = study_id + "_" + u.id;
      s.p = p;
      s.target_kind = tgt.kind_name();
      s.target_params = tgt.params_name();
      const int j = tgt.kind == NormTarget::Kind::L2 ? 0 : tgt.j;
      s.expected_slope = std::min<double>(cfg.m, p + 1) - j;
      std::vector<double> xs, ys;
      bool exact = false;
      for (const auto& r : res.records) {
        if (r.p != p || r.target_kind != tgt.kind_name() ||
            r.target_params != tgt.params_name())
          continue;
        exact = exact || r.exact;
        xs.push_back(std::log(r.h));
        ys.push_back(std::log(std::max(r.error, 1e-300)));
      }
      s.exact = exact;
      if (!exact && xs.size() >= 2) {
        // drop the coarsest level (largest h)
        const size_t imax =
            std::max_element(xs.begin(), xs.end()) - xs.begin();
        std::vector<double> fx, fy;
        for (size_t i = 0; i < xs.size(); ++i)
          if (i != imax) {
            fx.push_back(xs[i]);
            fy.push_back(ys[i]);
          }
        s.fit = linear_fit(fx, fy);
      }
      res.summaries.push_back(std::move(s));
    }
  detail::enforce_certificates(res);
  return res;
}

/// p-refinement study at a fixed level: slope of log error against
/// log(p + 1).
inline StudyResult run_p_study(const StudyConfig& cfg,
                               const std::string& study_id = "p") {
  if (cfg.p_list.size() < 4) throw ConfigError("p study needs >= 4 degrees");
  if (cfg.levels.size() != 1)
    throw ConfigError("p study runs at one fixed level");
  const DomainDescriptor domain = domain_from_json(cfg.domain);
  const TestFunction u = make_test_function(cfg.test_function, domain);
  MeshProvider meshes(cfg.family, domain);
  const double u_scale = detail::function_scale(domain, u.fn);
  const int l = cfg.levels[0];
  auto mesh = meshes.level(l);

  std::vector<std::vector<ConvergenceRecord>> out(cfg.p_list.size());
  detail::parallel_for((int)cfg.p_list.size(), cfg.workers, [&](int pi) {
    const int p = cfg.p_list[pi];
    const auto t0 = std::chrono::steady_clock::now();
    const int q = cfg.gauss_order > 0 ? cfg.gauss_order : p + 2;
    auto [v, rep] = l2_project(mesh, u.fn.value, p, cfg.depth, q);
    for (const NormTarget& tgt : cfg.targets) {
      const int j = tgt.kind == NormTarget::Kind::L2 ? 0 : tgt.j;
      const auto bn = broken_norm(u.fn, v, j, cfg.depth);
      ConvergenceRecord rec;
      rec.study_id = study_id + "_" + u.id;
      rec.level = l;
      rec.h = mesh->meshwidth;
      rec.p = p;
      rec.elements = mesh->elements.size();
      rec.dofs = v.dofs();
      rec.target_kind = tgt.kind_name();
      rec.target_params = tgt.params_name();
      rec.error = bn.value;
      rec.certificate = bn.certificate;
      rec.exact = u.is_poly && u.poly_degree <= p &&
                  bn.value < 1e-10 * (1.0 + u_scale);
      rec.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      out[pi].push_back(std::move(rec));
    }
  });

  StudyResult res;
  for (auto& v : out)
    for (auto& r : v) res.records.push_back(std::move(r));
  for (const NormTarget& tgt : cfg.targets) {
    StudySummary s;
    s.study_id = study_id + "_" + u.id;
    s.p = -1;  // one summary across the p sweep
    s.target_kind = tgt.kind_name();
    s.target_params = tgt.params_name();
    const int j = tgt.kind == NormTarget::Kind::L2 ? 0 : tgt.j;
    s.expected_slope =
        u.regularity >= kEntireRegularity ? 0.0 : -(u.regularity - j);
    std::vector<double> xs, ys;
    bool any_exact = false;
    for (const auto& r : res.records) {
      if (r.target_kind != tgt.kind_name() ||
          r.target_params != tgt.params_name())
        continue;
      if (r.exact) {
        any_exact = true;
        continue;
      }
      xs.push_back(std::log(r.p + 1.0));
      ys.push_back(std::log(std::max(r.error, 1e-300)));
    }
    s.exact = any_exact && xs.empty();
    if (xs.size() >= 2) s.fit = linear_fit(xs, ys);
    res.summaries.push_back(std::move(s));
  }
  detail::enforce_certificates(res);
  return res;
}

/// Fractional-regularity L2 rate study: the expected slope of the L2 error
/// against h is min(regularity, p + 1).
inline StudyResult run_fractional_study(const StudyConfig& cfg,
                                        const std::string& study_id = "frac") {
  for (int p : cfg.p_list)
    if (p < cfg.m - 1)
      throw ConfigError("fractional study requires p >= m - 1");
  StudyConfig c2 = cfg;
  c2.targets = {NormTarget{NormTarget::Kind::L2, 0, 0, 0}};
  StudyResult res = run_h_study(c2, study_id);
  const DomainDescriptor domain = domain_from_json(cfg.domain);
  const TestFunction u = make_test_function(cfg.test_function, domain);
  for (auto& s : res.summaries)
    s.expected_slope = std::min(u.regularity, double(s.p + 1));
  return res;
}

/// Negative-order rate study: computes the discrete H^{s1} norm of the zero
/// extension of u - Pi u on a fixed padded grid across levels. The s1 = 0
/// row doubles as a Parseval cross-check against the grid L2 norm.
inline StudyResult run_negative_norm_study(const StudyConfig& cfg,
                                           const std::string& study_id = "neg") {
  const DomainDescriptor domain = domain_from_json(cfg.domain);
  const TestFunction u = make_test_function(cfg.test_function, domain);
  MeshProvider meshes(cfg.family, domain);
  for (int p : cfg.p_list)
    if (p < cfg.m - 1)
      throw ConfigError("negative-norm study requires p >= m - 1");
  for (const auto& t : cfg.targets) {
    if (t.kind != NormTarget::Kind::NegSobolev)
      throw ConfigError("negative-norm study takes negSobolev targets");
    if (!(-cfg.m <= t.s1 && t.s1 <= 0.0 && 0.0 <= t.s2 && t.s2 <= cfg.m))
      throw ConfigError("need -m <= s1 <= 0 <= s2 <= m");
  }
  const double diam_dom = diameter(domain);
  const double box = cfg.box_scale * diam_dom;
  const Vec2 origin{-0.5 * box, -0.5 * box};
  const int n = cfg.grid_n;
  if (n < 2 || (n & (n - 1)) != 0)
    throw ConfigError("grid_n must be a power of two");

  StudyResult res;
  for (int p : cfg.p_list) {
    for (int l : cfg.levels) {
      auto mesh = meshes.level(l);
      if (n < 64.0 / mesh->meshwidth)
        throw ConfigError("grid_n too small to resolve level " +
                          std::to_string(l) + " (need >= 64 / h)");
      const auto t0 = std::chrono::steady_clock::now();
      const int q = cfg.gauss_order > 0 ? cfg.gauss_order : p + 2;
      auto [v, rep] = l2_project(mesh, u.fn.value, p, cfg.depth, q);
      auto sampler = [&](int nn) {
        return sample_zero_extension(*mesh, u.fn.value, &v, origin, box, nn);
      };
      const GridSample fine = sampler(n);
      const GridSample coarse = sampler(n / 2);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      for (const NormTarget& tgt : cfg.targets) {
        NormResult nr = sobolev_norm_fourier(fine, tgt.s1);
        nr.delta = std::abs(nr.value - sobolev_norm_fourier(coarse, tgt.s1).value);
        if (tgt.s1 == 0.0) {
          const double gl2 = grid_l2_norm(fine);
          if (std::abs(nr.value - gl2) > 1e-10 * std::max(1.0, gl2))
            throw StudyError("Parseval cross-check failed at s1 = 0");
        }
        ConvergenceRecord rec;
        rec.study_id = study_id + "_" + u.id;
        rec.level = l;
        rec.h = mesh->meshwidth;
        rec.p = p;
        rec.elements = mesh->elements.size();
        rec.dofs = v.dofs();
        rec.target_kind = tgt.kind_name();
        rec.target_params = tgt.params_name();
        rec.error = nr.value;
        // visible bound for the zeroed Uncertain points
        double supv = 0.0;
        for (double val : fine.values) supv = std::max(supv, std::abs(val));
        rec.certificate = std::sqrt(double(fine.uncertain_count)) *
                          fine.cell() * supv;
        rec.wall_time = wall;
        res.records.push_back(std::move(rec));
      }
    }
  }
  for (int p : cfg.p_list)
    for (const NormTarget& tgt : cfg.targets) {
      StudySummary s;
      s.study_id = study_id + "_" + u.id;
      s.p = p;
      s.target_kind = tgt.kind_name();
      s.target_params = tgt.params_name();
      s.expected_slope = std::min(tgt.s2, std::min(u.regularity, double(cfg.m))) - tgt.s1;
      std::vector<double> xs, ys;
      for (const auto& r : res.records) {
        if (r.p != p || r.target_params != tgt.params_name()) continue;
        xs.push_back(std::log(r.h));
        ys.push_back(std::log(std::max(r.error, 1e-300)));
      }
      if (xs.size() >= 2) {
        const size_t imax =
            std::max_element(xs.begin(), xs.end()) - xs.begin();
        std::vector<double> fx, fy;
        for (size_t i = 0; i < xs.size(); ++i)
          if (i != imax) {
            fx.push_back(xs[i]);
            fy.push_back(ys[i]);
          }
        s.fit = linear_fit(fx, fy);
      }
      res.summaries.push_back(std::move(s));
    }
  return res;
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Writes the study CSV (one data row per record, one summary row per fitted
/// series) and returns the path.
inline std::string emit_csv(const StudyResult& r, const std::string& dir,
                            const std::string& name = "study.csv") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StudyError("cannot write output file: " + path);
  out << "study_id,level,h,p,dofs,target_kind,target_params,error,"
         "certificate,slope,r2\n";
  for (const auto& rec : r.records) {
    out << detail::csv_escape(rec.study_id) << ',' << rec.level << ','
        << detail::fmt_num(rec.h) << ',' << rec.p << ',' << rec.dofs << ','
        << rec.target_kind << ',' << detail::csv_escape(rec.target_params)
        << ',' << detail::fmt_num(rec.error) << ','
        << detail::fmt_num(rec.certificate) << ",,\n";
  }
  for (const auto& s : r.summaries) {
    out << detail::csv_escape(s.study_id) << ",,," << (s.p >= 0 ? std::to_string(s.p) : "")
        << ",," << s.target_kind << ',' << detail::csv_escape(s.target_params)
        << ",,,";
    if (s.exact)
      out << "exact,";
    else if (s.fit.points >= 2)
      out << detail::fmt_num(s.fit.slope) << ',' << detail::fmt_num(s.fit.r2);
    else
      out << ',';
    out << '\n';
  }
  return path;
}

/// Minimal log-log SVG plot: one polyline per (p, target) series against h,
/// plus a dashed reference line at the theoretical slope.
inline std::string emit_svg(const StudyResult& r, const std::string& dir,
                            const std::string& name = "study.svg") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StudyError("cannot write output file: " + path);

  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> pts;  // (log10 h, log10 err)
    double expected = 0.0;
  };
  std::vector<Series> series;
  for (const auto& s : r.summaries) {
    if (s.exact) continue;
    Series se;
    se.label = s.target_kind +
               (s.target_params.empty() ? "" : "(" + s.target_params + ")") +
               (s.p >= 0 ? " p=" + std::to_string(s.p) : "");
    se.expected = s.expected_slope;
    for (const auto& rec : r.records) {
      if ((s.p >= 0 && rec.p != s.p) || rec.target_kind != s.target_kind ||
          rec.target_params != s.target_params)
        continue;
      se.pts.push_back({std::log10(rec.h),
                        std::log10(std::max(rec.error, 1e-300))});
    }
    if (!se.pts.empty()) series.push_back(std::move(se));
  }

  const int W = 640, H = 460, ML = 70, MR = 170, MT = 30, MB = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (series.empty()) {
    x0 = y0 = 0;
    x1 = y1 = 1;
  }
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  const double padx = 0.06 * (x1 - x0), pady = 0.08 * (y1 - y0);
  x0 -= padx; x1 += padx; y0 -= pady; y1 += pady;
  auto px = [&](double x) {
    return ML + (x - x0) / (x1 - x0) * (W - ML - MR);
  };
  auto py = [&](double y) {
    return H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
      << "' height='" << H << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<rect x='" << ML << "' y='" << MT << "' width='" << (W - ML - MR)
      << "' height='" << (H - MT - MB)
      << "' fill='none' stroke='#999'/>\n";
  for (int t = (int)std::ceil(x0); t <= (int)std::floor(x1); ++t)
    out << "<text x='" << px(t) << "' y='" << H - MB + 18
        << "' font-size='11' text-anchor='middle'>1e" << t << "</text>\n";
  for (int t = (int)std::ceil(y0); t <= (int)std::floor(y1); ++t)
    out << "<text x='" << ML - 8 << "' y='" << py(t) + 4
        << "' font-size='11' text-anchor='end'>1e" << t << "</text>\n";
  out << "<text x='" << (ML + (W - ML - MR) / 2) << "' y='" << H - 12
      << "' font-size='12' text-anchor='middle'>h</text>\n";
  out << "<text x='16' y='" << (MT + (H - MT - MB) / 2)
      << "' font-size='12' text-anchor='middle' transform='rotate(-90 16 "
      << (MT + (H - MT - MB) / 2) << ")'>error</text>\n";

  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci % 6];
    out << "<polyline fill='none' stroke='" << col << "' stroke-width='1.6' points='";
    for (auto [x, y] : s.pts) out << px(x) << ',' << py(y) << ' ';
    out << "'/>\n";
    for (auto [x, y] : s.pts)
      out << "<circle cx='" << px(x) << "' cy='" << py(y)
          << "' r='3' fill='" << col << "'/>\n";
    // dashed reference line through the finest point with the expected slope
    if (!s.pts.empty()) {
      const auto [xa, ya] = *std::min_element(s.pts.begin(), s.pts.end());
      const double xb = x1 - padx, yb = ya + s.expected * (xb - xa);
      out << "<line x1='" << px(xa) << "' y1='" << py(ya) << "' x2='"
          << px(xb) << "' y2='" << py(yb) << "' stroke='" << col
          << "' stroke-dasharray='5,4' stroke-width='1'/>\n";
    }
    out << "<text x='" << W - MR + 12 << "' y='" << MT + 16 + 16 * ci
        << "' font-size='11' fill='" << col << "'>" << s.label << " (ref "
        << detail::fmt_num(s.expected) << ")</text>\n";
    ++ci;
  }
  out << "</svg>\n";
  return path;
}

struct EmitResult {
  std::string csv;
  std::string svg;
};

inline EmitResult emit_outputs(const StudyResult& r, const std::string& dir,
                               const std::string& basename = "study") {
  EmitResult e;
  e.csv = emit_csv(r, dir, basename + ".csv");
  e.svg = emit_svg(r, dir, basename + ".svg");
  return e;
}

}  // namespace snowpoly

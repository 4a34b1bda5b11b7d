#include <catch2/catch_amalgamated.hpp>

#include "snowpoly/study.hpp"
#include "snowpoly/verify.hpp"

using namespace snowpoly;

namespace {

nlohmann::json base_config() {
  return {
      {"domain", {{"kind", "snowflake"}, {"side", 1.0}}},
      {"family", "self_similar"},
      {"levels", {1, 2, 3}},
      {"p_list", {0}},
      {"m", 3},
      {"targets", {{{"kind", "L2"}}}},
      {"test_function", {{"id", "gaussian"}}},
      {"depth", 6},
      {"grid_n", 256},
      {"seed", 0},
  };
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config validation", "[study]") {
  REQUIRE_THROWS_AS(parse_config({{"m", 0}}), ConfigError);
  REQUIRE_THROWS_AS(parse_config({{"levels", {2, 1}}}), ConfigError);
  REQUIRE_THROWS_AS(parse_config({{"family", "unknown"}}), ConfigError);
  REQUIRE_THROWS_AS(parse_config({{"targets", {{{"kind", "bogus"}}}}}),
                    ConfigError);
  const StudyConfig c = parse_config(base_config());
  REQUIRE(c.levels == std::vector<int>{1, 2, 3});
  REQUIRE(c.m == 3);
}

TEST_CASE("linear fit recovers an exact line", "[study]") {
  std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  std::vector<double> y;
  for (double xi : x) y.push_back(-2.5 * xi + 0.7);
  const SlopeFit f = linear_fit(x, y);
  REQUIRE(f.slope == Catch::Approx(-2.5).epsilon(1e-13));
  REQUIRE(f.intercept == Catch::Approx(0.7).margin(1e-12));
  REQUIRE(f.r2 == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("test function derivatives agree with finite differences",
          "[study][property]") {
  const auto domain = make_snowflake(1.0);
  std::mt19937_64 rng(1);
  for (const char* id : {"poly", "gaussian", "sinprod", "radial_singular"}) {
    const TestFunction u = make_test_function({{"id", id}}, domain);
    REQUIRE(u.fn.grad);
    int tested = 0;
    while (tested < 60) {
      const Vec2 p{0.8 * uniform01(rng) - 0.4, 0.8 * uniform01(rng) - 0.4};
      if (std::string(id) == "radial_singular" && norm(p) < 0.08) continue;
      ++tested;
      const double e = 1e-6;
      const Vec2 g = u.fn.grad(p);
      const double fd_x =
          (u.fn.value({p.x + e, p.y}) - u.fn.value({p.x - e, p.y})) / (2 * e);
      const double fd_y =
          (u.fn.value({p.x, p.y + e}) - u.fn.value({p.x, p.y - e})) / (2 * e);
      const double scale = std::max({1.0, std::abs(g.x), std::abs(g.y)});
      REQUIRE(std::abs(g.x - fd_x) < 1e-4 * scale);
      REQUIRE(std::abs(g.y - fd_y) < 1e-4 * scale);
    }
  }
}

TEST_CASE("polynomial h-study reports exact rows", "[study]") {
  auto j = base_config();
  j["levels"] = {1, 2, 3};
  j["p_list"] = {2};
  j["test_function"] = {{"id", "poly"}, {"p0", 2}};
  const StudyResult r = run_h_study(parse_config(j));
  REQUIRE(r.records.size() == 3);
  for (const auto& rec : r.records) {
    REQUIRE(rec.exact);
    REQUIRE(rec.error < 1e-10);
  }
  REQUIRE(r.summaries.size() == 1);
  REQUIRE(r.summaries[0].exact);
}

TEST_CASE("gaussian h-study matches first-order rate at p = 0", "[study]") {
  auto j = base_config();
  j["levels"] = {1, 2, 3};
  j["p_list"] = {0};
  const StudyResult r = run_h_study(parse_config(j));
  REQUIRE(r.summaries.size() == 1);
  const SlopeFit f = r.summaries[0].fit;
  REQUIRE(f.points == 2);
  REQUIRE(f.slope > 0.85);
  REQUIRE(f.slope < 1.15);
  // monotone improvement across levels
  double prev = 1e300;
  for (const auto& rec : r.records) {
    REQUIRE(rec.error < prev);
    prev = rec.error;
  }
}

TEST_CASE("p-study on the singular function decays algebraically", "[study]") {
  auto j = base_config();
  j["levels"] = {2};
  j["p_list"] = {0, 1, 2, 3, 4};
  j["m"] = 1;
  j["test_function"] = {{"id", "radial_singular"}, {"alpha", 0.5}};
  const StudyResult r = run_p_study(parse_config(j));
  REQUIRE(r.summaries.size() == 1);
  // regularity 1 + alpha = 1.5: slope of log error vs log(p+1) at most
  // -(1.5 - 0) + 0.3
  REQUIRE(r.summaries[0].fit.slope <= -1.5 + 0.3);
}

TEST_CASE("p-study on an entire function beats any algebraic rate", "[study]") {
  auto j = base_config();
  j["levels"] = {1};
  j["p_list"] = {0, 1, 2, 3, 4};
  const StudyResult r = run_p_study(parse_config(j));
  std::vector<double> loge;
  for (const auto& rec : r.records)
    loge.push_back(std::log(std::max(rec.error, 1e-300)));
  // log error against p is convex decreasing: ratios keep improving
  for (size_t i = 0; i + 1 < loge.size(); ++i) REQUIRE(loge[i + 1] < loge[i]);
  for (size_t i = 0; i + 2 < loge.size(); ++i)
    REQUIRE(loge[i + 2] - loge[i + 1] < loge[i + 1] - loge[i] + 0.2);
  REQUIRE_THROWS_AS(
      run_p_study(parse_config([&] {
        auto k = base_config();
        k["levels"] = {1};
        k["p_list"] = {0, 1};
        return k;
      }())),
      ConfigError);
}

TEST_CASE("fractional study validates hypotheses", "[study]") {
  auto j = base_config();
  j["p_list"] = {0};
  j["m"] = 2;
  REQUIRE_THROWS_AS(run_fractional_study(parse_config(j)), ConfigError);
}

TEST_CASE("negative-norm study basics", "[study]") {
  auto j = base_config();
  j["levels"] = {0, 1};
  j["p_list"] = {1};
  j["m"] = 1;
  j["grid_n"] = 256;
  j["targets"] = {{{"kind", "negSobolev"}, {"s1", 0.0}, {"s2", 1.0}},
                  {{"kind", "negSobolev"}, {"s1", -1.0}, {"s2", 1.0}}};
  const StudyResult r = run_negative_norm_study(parse_config(j));
  REQUIRE(r.records.size() == 4);
  // the negative norm never exceeds the L2 norm of the same residual
  for (size_t i = 0; i + 1 < r.records.size(); i += 2)
    REQUIRE(r.records[i + 1].error <= r.records[i].error + 1e-12);

  SECTION("grid too small for the requested level is rejected") {
    auto k = j;
    k["levels"] = {0, 1, 2, 3};
    k["grid_n"] = 256;
    REQUIRE_THROWS_AS(run_negative_norm_study(parse_config(k)), ConfigError);
  }
  SECTION("p < m - 1 is rejected") {
    auto k = j;
    k["p_list"] = {0};
    k["m"] = 2;
    REQUIRE_THROWS_AS(run_negative_norm_study(parse_config(k)), ConfigError);
  }
}

TEST_CASE("shallow quadrature aborts with a depth hint", "[study]") {
  auto j = base_config();
  j["depth"] = 1;
  j["p_list"] = {2};
  REQUIRE_THROWS_WITH(run_h_study(parse_config(j)),
                      Catch::Matchers::ContainsSubstring("depth"));
}

TEST_CASE("csv emission", "[study]") {
  const auto dir =
      (std::filesystem::temp_directory_path() / "snowpoly_study_test").string();
  std::filesystem::remove_all(dir);

  SECTION("empty record list emits a header-only csv") {
    const StudyResult empty;
    const auto path = emit_csv(empty, dir, "empty.csv");
    const std::string text = read_file(path);
    REQUIRE(text ==
            "study_id,level,h,p,dofs,target_kind,target_params,error,"
            "certificate,slope,r2\n");
  }

  SECTION("h-study emits one summary row per (p, target) with the slope") {
    auto j = base_config();
    j["p_list"] = {0, 1};
    const StudyResult r = run_h_study(parse_config(j));
    const auto paths = emit_outputs(r, dir, "study_h");
    const std::string text = read_file(paths.csv);
    size_t data_rows = 0, summary_rows = 0;
    std::istringstream ss(text);
    std::string line;
    std::getline(ss, line);  // header
    while (std::getline(ss, line)) {
      if (line.find(",,,") != std::string::npos)
        ++summary_rows;
      else
        ++data_rows;
    }
    REQUIRE(data_rows == 6);
    REQUIRE(summary_rows == 2);
    REQUIRE(read_file(paths.svg).find("<svg") == 0);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("single-threaded determinism and worker agreement", "[study]") {
  auto j = base_config();
  j["levels"] = {1, 2, 3};
  j["p_list"] = {0, 1};
  const StudyConfig cfg = parse_config(j);

  const auto dir =
      (std::filesystem::temp_directory_path() / "snowpoly_dettest").string();
  std::filesystem::remove_all(dir);
  const StudyResult a = run_h_study(cfg);
  const StudyResult b = run_h_study(cfg);
  const auto pa = emit_csv(a, dir, "a.csv");
  const auto pb = emit_csv(b, dir, "b.csv");
  REQUIRE(read_file(pa) == read_file(pb));

  StudyConfig par = cfg;
  par.workers = 4;
  const StudyResult c = run_h_study(par);
  REQUIRE(c.records.size() == a.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(c.records[i].level == a.records[i].level);
    REQUIRE(c.records[i].error ==
            Catch::Approx(a.records[i].error).epsilon(1e-10));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify battery passes on a fresh tree", "[study][verify]") {
  const VerifyReport report = verify();
  for (const auto& c : report.checks) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.pass);
  }
  REQUIRE(report.all_pass());
}

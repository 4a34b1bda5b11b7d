// snowpoly command-line interface:
//   snowpoly mesh info --family self_similar --level 2 [--out mesh.json]
//   snowpoly study h|p|frac|neg --config FILE
//   snowpoly verify
//   snowpoly plot --csv FILE [--out FILE]
// Exit codes: 0 success, 1 invariant failure, 2 configuration error.
#include <CLI11.hpp>

#include <cstdio>

#include "snowpoly/snowpoly.hpp"

namespace {

int run_mesh_info(const std::string& family, int level,
                  const std::string& out) {
  using namespace snowpoly;
  MeshProvider provider(family, make_snowflake(1.0));
  const auto mesh = provider.level(level);
  std::printf("family      : %s\n", family.c_str());
  std::printf("level       : %d\n", level);
  std::printf("elements    : %zu\n", mesh->elements.size());
  std::printf("meshwidth h : %.12g\n", mesh->meshwidth);
  double area_lo = 0, area_hi = 0;
  std::map<std::string, int> kinds;
  for (const auto& e : mesh->elements) {
    area_lo += e.area_lo;
    area_hi += e.area_hi;
    if (std::holds_alternative<MappedSnowflake>(e.geom.shape))
      ++kinds["mapped_snowflake"];
    else if (std::holds_alternative<Triangle>(e.geom.shape))
      ++kinds["triangle"];
    else if (std::holds_alternative<FractalEdged>(e.geom.shape))
      ++kinds["fractal_edged"];
    else
      ++kinds["snowflake"];
  }
  for (const auto& [k, n] : kinds)
    std::printf("  %-16s: %d\n", k.c_str(), n);
  std::printf("certified element area sum: [%.9f, %.9f]\n", area_lo, area_hi);
  std::printf("domain area (closed form) : %.9f\n",
              reference_area(mesh->domain));
  const auto cov = build_covering(*mesh);
  std::printf("covering cube size        : %.12g (big-cube diameter %.12g)\n",
              cov.cube_size, cov.big_cube_diameter());
  if (!out.empty()) {
    save_mesh(*mesh, out);
    std::printf("mesh written to %s\n", out.c_str());
  }
  return 0;
}

int run_study(const std::string& kind, const std::string& config_path) {
  using namespace snowpoly;
  const StudyConfig cfg = load_config(config_path);
  StudyResult res;
  if (kind == "h")
    res = run_h_study(cfg);
  else if (kind == "p")
    res = run_p_study(cfg);
  else if (kind == "frac")
    res = run_fractional_study(cfg);
  else if (kind == "neg")
    res = run_negative_norm_study(cfg);
  else
    throw ConfigError("unknown study kind: " + kind);
  const auto paths = emit_outputs(res, cfg.output_dir, "study_" + kind);
  for (const auto& s : res.summaries) {
    if (s.exact) {
      std::printf("%-14s p=%-2d %-10s %-14s exact\n", s.study_id.c_str(), s.p,
                  s.target_kind.c_str(), s.target_params.c_str());
    } else {
      std::printf(
          "%-14s p=%-2d %-10s %-14s slope=%8.4f (expected %.3f, R2=%.4f%s)\n",
          s.study_id.c_str(), s.p, s.target_kind.c_str(),
          s.target_params.c_str(), s.fit.slope, s.expected_slope, s.fit.r2,
          s.fit.reliable ? "" : ", unreliable");
    }
  }
  std::printf("wrote %s and %s\n", paths.csv.c_str(), paths.svg.c_str());
  return 0;
}

int run_verify() {
  const auto report = snowpoly::verify();
  for (const auto& c : report.checks)
    std::printf("[%s] %-42s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.c_str());
  std::printf("%zu checks, %s\n", report.checks.size(),
              report.all_pass() ? "all passed" : "FAILURES present");
  return report.all_pass() ? 0 : 1;
}

// Re-plot a CSV produced by `study` (data rows only; summaries are
// recomputed from the points).
int run_plot(const std::string& csv_path, std::string out_path) {
  using namespace snowpoly;
  std::ifstream in(csv_path);
  if (!in) throw ConfigError("cannot read csv: " + csv_path);
  std::string line;
  std::getline(in, line);  // header
  StudyResult res;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      else if (c == ',' && !quoted) {
        f.push_back(cur);
        cur.clear();
      } else
        cur += c;
    }
    f.push_back(cur);
    if (f.size() < 11 || f[1].empty()) continue;  // skip summary rows
    ConvergenceRecord r;
    r.study_id = f[0];
    r.level = std::stoi(f[1]);
    r.h = std::stod(f[2]);
    r.p = std::stoi(f[3]);
    r.dofs = f[4].empty() ? 0 : std::stoull(f[4]);
    r.target_kind = f[5];
    r.target_params = f[6];
    r.error = std::stod(f[7]);
    r.certificate = f[8].empty() ? 0.0 : std::stod(f[8]);
    res.records.push_back(std::move(r));
  }
  std::set<std::tuple<int, std::string, std::string>> series;
  for (const auto& r : res.records)
    series.insert({r.p, r.target_kind, r.target_params});
  for (const auto& [p, kind, params] : series) {
    StudySummary s;
    s.study_id = res.records.front().study_id;
    s.p = p;
    s.target_kind = kind;
    s.target_params = params;
    std::vector<double> xs, ys;
    for (const auto& r : res.records)
      if (r.p == p && r.target_kind == kind && r.target_params == params) {
        xs.push_back(std::log(r.h));
        ys.push_back(std::log(std::max(r.error, 1e-300)));
      }
    s.fit = linear_fit(xs, ys);
    s.expected_slope = s.fit.points >= 2 ? s.fit.slope : 0.0;
    res.summaries.push_back(std::move(s));
  }
  if (out_path.empty())
    out_path = std::filesystem::path(csv_path).replace_extension(".svg");
  const auto dir = std::filesystem::path(out_path).parent_path().string();
  const auto name = std::filesystem::path(out_path).filename().string();
  emit_svg(res, dir.empty() ? "." : dir, name);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"piecewise polynomial approximation on fractal meshes"};
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "mesh inspection");
  auto* info = mesh_cmd->add_subcommand("info", "print mesh facts");
  std::string family = "self_similar";
  int level = 1;
  std::string mesh_out;
  info->add_option("--family", family, "self_similar or hybrid_then_refine");
  info->add_option("--level", level, "refinement level");
  info->add_option("--out", mesh_out, "write mesh JSON here");

  auto* study_cmd = app.add_subcommand("study", "run a convergence study");
  study_cmd->require_subcommand(1);
  std::map<std::string, std::string> study_cfg;
  for (const char* kind : {"h", "p", "frac", "neg"}) {
    auto* sc = study_cmd->add_subcommand(kind);
    study_cfg[kind] = "";
    sc->add_option("--config", study_cfg[kind], "study config (JSON)")
        ->required();
  }

  auto* verify_cmd = app.add_subcommand("verify", "run the invariant battery");

  auto* plot_cmd = app.add_subcommand("plot", "render a study CSV as SVG");
  std::string csv_path, plot_out;
  plot_cmd->add_option("--csv", csv_path, "study CSV file")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (info->parsed()) return run_mesh_info(family, level, mesh_out);
    if (verify_cmd->parsed()) return run_verify();
    if (plot_cmd->parsed()) return run_plot(csv_path, plot_out);
    for (const char* kind : {"h", "p", "frac", "neg"})
      if (study_cmd->got_subcommand(kind)) return run_study(kind, study_cfg[kind]);
    std::fprintf(stderr, "no subcommand\n");
    return 2;
  } catch (const snowpoly::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

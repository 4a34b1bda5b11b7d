// Writes SVG sketches of the mesh families (boundary polylines only), plus
// the covering cubes of the level-1 mesh.
#include <cstdio>
#include <fstream>

#include "snowpoly/snowpoly.hpp"

namespace {

void write_svg(const snowpoly::Mesh& mesh, const char* path,
               const snowpoly::Covering* cov = nullptr) {
  using namespace snowpoly;
  const Rect bb = certified_bbox(mesh.domain);
  const double w = bb.hi.x - bb.lo.x, h = bb.hi.y - bb.lo.y;
  const double pad = 0.25 * std::max(w, h);
  const double scale = 540.0 / (std::max(w, h) + 2 * pad);
  auto X = [&](double x) { return (x - bb.lo.x + pad) * scale; };
  auto Y = [&](double y) { return (bb.hi.y + pad - y) * scale; };

  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='560' height='560'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n";
  if (cov) {
    const double s = cov->cube_size;
    for (double x = std::floor((bb.lo.x - pad) / s) * s; x < bb.hi.x + pad;
         x += s)
      out << "<line x1='" << X(x) << "' y1='0' x2='" << X(x)
          << "' y2='560' stroke='#ddd'/>\n";
    for (double y = std::floor((bb.lo.y - pad) / s) * s; y < bb.hi.y + pad;
         y += s)
      out << "<line x1='0' y1='" << Y(y) << "' x2='560' y2='" << Y(y)
          << "' stroke='#ddd'/>\n";
  }
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf"};
  for (size_t i = 0; i < mesh.elements.size(); ++i) {
    const auto pts = boundary_polyline(mesh.elements[i].geom, 5);
    out << "<polygon fill='none' stroke='" << colors[i % 7]
        << "' stroke-width='1' points='";
    for (const auto& p : pts) out << X(p.x) << ',' << Y(p.y) << ' ';
    out << "'/>\n";
  }
  out << "</svg>\n";
  std::printf("wrote %s (%zu elements)\n", path, mesh.elements.size());
}

}  // namespace

int main() {
  using namespace snowpoly;
  const Mesh m1 = snowflake_self_similar_mesh(1);
  const Covering cov = build_covering(m1);
  write_svg(m1, "mesh_self_similar_l1.svg", &cov);
  write_svg(snowflake_self_similar_mesh(2), "mesh_self_similar_l2.svg");
  write_svg(hybrid_mesh(), "mesh_hybrid.svg");
  write_svg(refine(hybrid_mesh()), "mesh_hybrid_refined.svg");
  return 0;
}

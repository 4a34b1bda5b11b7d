// Projects a Gaussian onto piecewise quadratics over two mesh levels and
// prints the broken L2 errors with their quadrature certificates.
#include <cstdio>

#include "snowpoly/snowpoly.hpp"

int main() {
  using namespace snowpoly;
  const auto domain = make_snowflake(1.0);
  const TestFunction u = make_test_function({{"id", "gaussian"}}, domain);

  for (int level : {1, 2}) {
    auto mesh = std::make_shared<Mesh>(snowflake_self_similar_mesh(level));
    auto [v, report] = l2_project(mesh, u.fn.value, 2, 7);
    const auto err = broken_norm(u.fn, v, 0, 7);
    std::printf(
        "level %d: %4zu elements, h = %.4f, error = %.6e (certificate %.1e, "
        "max residual %.1e)\n",
        level, mesh->elements.size(), mesh->meshwidth, err.value,
        err.certificate, report.max_residual);
  }
  return 0;
}

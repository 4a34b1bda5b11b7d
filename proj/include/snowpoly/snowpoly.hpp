#pragma once

#include "snowpoly/geometry.hpp"
#include "snowpoly/quadrature.hpp"
#include "snowpoly/mesh.hpp"
#include "snowpoly/approx.hpp"
#include "snowpoly/norms.hpp"
#include "snowpoly/study.hpp"
#include "snowpoly/verify.hpp"

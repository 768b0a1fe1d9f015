#pragma once

#include "scoreflow/types.hpp"

#include <vector>

namespace scoreflow::geometry {

/// Convex hull of planar points by Andrew's monotone chain, counter-clockwise,
/// collinear points dropped. Degenerate inputs return 1 or 2 vertices.
std::vector<Vector> convex_hull_2d(std::vector<Vector> points);

/// Euclidean distance from `x` to the segment [a, b].
double segment_distance(const Vector& x, const Vector& a, const Vector& b);

/// Distance from a planar point to a convex polygon given counter-clockwise.
double polygon_distance(const std::vector<Vector>& polygon, const Vector& x);

struct PolytopeProjection {
  Vector nearest;       // closest point of conv(vertices) to x
  double distance = 0;  // ||x - nearest||
  int iterations = 0;
};

/// Nearest point of conv(vertices) to `x` by Wolfe's minimum-norm-point method.
PolytopeProjection project_to_polytope(const std::vector<Vector>& vertices, const Vector& x,
                                       double tol = 1e-12);

}  // namespace scoreflow::geometry

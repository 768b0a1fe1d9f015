#include "scoreflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scoreflow::geometry {
namespace {

double cross(const Vector& o, const Vector& a, const Vector& b) {
  return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

}  // namespace

std::vector<Vector> convex_hull_2d(std::vector<Vector> points) {
  std::sort(points.begin(), points.end(), [](const Vector& a, const Vector& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vector& a, const Vector& b) { return a == b; }),
               points.end());
  if (points.size() < 3) return points;

  std::vector<Vector> hull(2 * points.size());
  std::size_t k = 0;
  for (const auto& p : points) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double segment_distance(const Vector& x, const Vector& a, const Vector& b) {
  const Vector ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (x - a).norm();
  const double s = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
  return (x - (a + s * ab)).norm();
}

double polygon_distance(const std::vector<Vector>& polygon, const Vector& x) {
  if (polygon.empty()) throw std::invalid_argument("polygon_distance: empty polygon");
  if (polygon.size() == 1) return (x - polygon.front()).norm();
  if (polygon.size() == 2) return segment_distance(x, polygon[0], polygon[1]);

  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vector& a = polygon[i];
    const Vector& b = polygon[(i + 1) % polygon.size()];
    if (cross(a, b, x) < 0) inside = false;
    best = std::min(best, segment_distance(x, a, b));
  }
  return inside ? 0.0 : best;
}

PolytopeProjection project_to_polytope(const std::vector<Vector>& vertices, const Vector& x,
                                       double tol) {
  if (vertices.empty()) throw std::invalid_argument("project_to_polytope: no vertices");
  const auto m = vertices.size();
  std::vector<Vector> p(m);
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = vertices[i] - x;
    scale = std::max(scale, p[i].squaredNorm());
  }

  // Wolfe (1976): active set S with barycentric weights lambda.
  std::size_t first = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (p[i].squaredNorm() < p[first].squaredNorm()) first = i;
  }
  std::vector<std::size_t> active{first};
  std::vector<double> lambda{1.0};
  Vector z = p[first];

  PolytopeProjection out;
  const int max_iter = 50 * static_cast<int>(m) + 100;
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    std::size_t j = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double v = z.dot(p[i]);
      if (v < best) {
        best = v;
        j = i;
      }
    }
    if (best >= z.squaredNorm() - tol * scale) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    while (true) {
      const auto k = static_cast<Eigen::Index>(active.size());
      Matrix kkt = Matrix::Zero(k + 1, k + 1);
      Vector rhs = Vector::Zero(k + 1);
      for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = p[active[a]].dot(p[active[b]]);
        kkt(a, k) = 1.0;
        kkt(k, a) = 1.0;
      }
      rhs(k) = 1.0;
      const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);

      bool interior = true;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (sol(a) <= 1e-14) interior = false;
      }
      if (interior) {
        for (Eigen::Index a = 0; a < k; ++a) lambda[a] = sol(a);
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (sol(a) <= 1e-14 && lambda[a] - sol(a) > 0) {
          theta = std::min(theta, lambda[a] / (lambda[a] - sol(a)));
        }
      }
      for (Eigen::Index a = 0; a < k; ++a) lambda[a] += theta * (sol(a) - lambda[a]);
      std::vector<std::size_t> keep_idx;
      std::vector<double> keep_lambda;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (lambda[a] > 1e-14) {
          keep_idx.push_back(active[a]);
          keep_lambda.push_back(lambda[a]);
        }
      }
      if (keep_idx.empty()) {
        // Numerical collapse; fall back to the newest vertex.
        keep_idx.push_back(j);
        keep_lambda.push_back(1.0);
      }
      active = std::move(keep_idx);
      lambda = std::move(keep_lambda);
      if (active.size() == 1) {
        lambda[0] = 1.0;
        break;
      }
    }

    double total = 0.0;
    for (double l : lambda) total += l;
    z.setZero();
    for (std::size_t a = 0; a < active.size(); ++a) z += (lambda[a] / total) * p[active[a]];
  }
  out.nearest = z + x;
  out.distance = z.norm();
  return out;
}

}  // namespace scoreflow::geometry

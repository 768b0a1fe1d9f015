#include "scoreflow/measures.hpp"

#include "scoreflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace scoreflow {

EmpiricalMeasure::EmpiricalMeasure(const std::vector<Vector>& points,
                                   const std::vector<double>& weights) {
  if (points.empty()) throw std::invalid_argument("make_empirical: empty point list");
  const Eigen::Index d = points.front().size();
  if (d < 1) throw std::invalid_argument("make_empirical: points must have dimension >= 1");
  for (const auto& p : points) {
    if (p.size() != d) throw std::invalid_argument("make_empirical: dimension mismatch");
    if (!p.allFinite()) throw std::invalid_argument("make_empirical: non-finite coordinate");
  }
  if (!weights.empty() && weights.size() != points.size()) {
    throw std::invalid_argument("make_empirical: weights and points differ in length");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("make_empirical: weights must be strictly positive");
    }
  }

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto lex_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(points[a].data(), points[a].data() + d, points[b].data(),
                                        points[b].data() + d);
  };
  std::stable_sort(order.begin(), order.end(), lex_less);

  // Merge runs of identical points, keeping first-occurrence order in the output.
  std::vector<std::size_t> representative;
  std::vector<double> merged(points.size(), 0.0);
  std::vector<std::size_t> owner(points.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t idx = order[r];
    if (r > 0 && points[order[r - 1]] == points[idx]) {
      owner[idx] = owner[order[r - 1]];
    } else {
      owner[idx] = idx;
    }
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (owner[i] == i) representative.push_back(i);
    merged[owner[i]] += weights.empty() ? 1.0 : weights[i];
  }

  const auto n = static_cast<Eigen::Index>(representative.size());
  points_.resize(d, n);
  weights_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    points_.col(k) = points[representative[k]];
    weights_(k) = merged[representative[k]];
  }
  weights_ /= weights_.sum();
  coordinates_ = points_.transpose();
  log_weights_ = weights_.array().log();
}

EmpiricalMeasure make_empirical(const std::vector<Vector>& points,
                                const std::vector<double>& weights) {
  return EmpiricalMeasure(points, weights);
}

EmpiricalMeasure lemniscate_dataset(std::size_t n, double half_width, Seed seed) {
  if (n == 0) throw std::invalid_argument("lemniscate_dataset: n must be >= 1");
  if (!(half_width > 0.0)) throw std::invalid_argument("lemniscate_dataset: half_width must be > 0");

  // Rational parameterization x = a cos s / (1 + sin^2 s), y = a sin s cos s / (1 + sin^2 s).
  // Its speed is a / sqrt(1 + sin^2 s) in [a / sqrt 2, a], so accepting s with probability
  // 1 / sqrt(1 + sin^2 s) yields points uniform in arc length.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    const double s = angle(rng);
    const double sn = std::sin(s);
    const double cs = std::cos(s);
    const double denom = 1.0 + sn * sn;
    if (unit(rng) > 1.0 / std::sqrt(denom)) continue;
    Vector p(2);
    p << half_width * cs / denom, half_width * sn * cs / denom;
    pts.push_back(std::move(p));
  }
  return EmpiricalMeasure(pts);
}

SupportGeometry support_geometry(const EmpiricalMeasure& mu) {
  SupportGeometry g;
  g.dim = mu.dim();
  g.radius = mu.points().colwise().norm().maxCoeff();

  const auto n = mu.size();
  if (g.dim == 1) {
    Eigen::Index lo = 0;
    Eigen::Index hi = 0;
    mu.points().row(0).minCoeff(&lo);
    mu.points().row(0).maxCoeff(&hi);
    g.hull_vertices.push_back(mu.points().col(lo));
    if (hi != lo) g.hull_vertices.push_back(mu.points().col(hi));
    return g;
  }

  std::vector<Vector> pts;
  pts.reserve(n);
  for (std::size_t k = 0; k < n; ++k) pts.push_back(mu.point(k));
  if (g.dim == 2) {
    g.hull_vertices = geometry::convex_hull_2d(std::move(pts));
    return g;
  }

  // d >= 3: a point is extreme iff it stays away from the hull of all the others.
  const double tol = 1e-10 * std::max(1.0, g.radius);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Vector> others;
    others.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != k) others.push_back(pts[j]);
    }
    if (others.empty() || geometry::project_to_polytope(others, pts[k]).distance > tol) {
      g.hull_vertices.push_back(pts[k]);
    }
  }
  return g;
}

bool in_hull(const SupportGeometry& geom, const Vector& x, double tol) {
  if (geom.hull_vertices.empty()) return false;
  if (geom.dim == 1) {
    double lo = geom.hull_vertices.front()(0);
    double hi = geom.hull_vertices.back()(0);
    if (lo > hi) std::swap(lo, hi);
    return x(0) >= lo - tol && x(0) <= hi + tol;
  }
  if (geom.dim == 2) return geometry::polygon_distance(geom.hull_vertices, x) <= tol;
  return geometry::project_to_polytope(geom.hull_vertices, x).distance <= tol;
}

EmpiricalMeasure measure_from_json(const nlohmann::json& j) {
  if (!j.contains("points")) throw std::invalid_argument("measure: missing \"points\"");
  std::vector<Vector> pts;
  for (const auto& row : j.at("points")) {
    std::vector<double> coords;
    if (row.is_number()) {
      coords.push_back(row.get<double>());
    } else {
      coords = row.get<std::vector<double>>();
    }
    pts.emplace_back(Eigen::Map<const Vector>(coords.data(), static_cast<Eigen::Index>(coords.size())));
  }
  if (j.contains("dim")) {
    const int d = j.at("dim").get<int>();
    for (const auto& p : pts) {
      if (p.size() != d) throw std::invalid_argument("measure: point dimension differs from \"dim\"");
    }
  }
  std::vector<double> w;
  if (j.contains("weights")) w = j.at("weights").get<std::vector<double>>();
  return EmpiricalMeasure(pts, w);
}

nlohmann::json measure_to_json(const EmpiricalMeasure& mu) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const Vector p = mu.point(k);
    pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  }
  const Vector& w = mu.weights();
  return {{"dim", mu.dim()},
          {"points", pts},
          {"weights", std::vector<double>(w.data(), w.data() + w.size())}};
}

EmpiricalMeasure load_measure(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open measure file " + path.string());
  return measure_from_json(nlohmann::json::parse(in));
}

}  // namespace scoreflow

#pragma once

#include "scoreflow/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace scoreflow {

/// Weighted Dirac sum u0 = sum_k w_k delta_{y_k}.
///
/// Points are stored column-wise (column k is y_k) so distance sweeps run over
/// contiguous memory. Construction normalizes the weights to unit sum and merges
/// duplicate points by adding their weights. Instances are immutable.
class EmpiricalMeasure {
 public:
  /// Uniform weights when `weights` is empty.
  explicit EmpiricalMeasure(const std::vector<Vector>& points,
                            const std::vector<double>& weights = {});

  int dim() const noexcept { return static_cast<int>(points_.rows()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.cols()); }

  const Matrix& points() const noexcept { return points_; }
  /// N x d copy of the points, one contiguous column per coordinate.
  const Matrix& coordinates() const noexcept { return coordinates_; }
  Vector point(std::size_t k) const { return points_.col(static_cast<Eigen::Index>(k)); }
  const Vector& weights() const noexcept { return weights_; }
  const Vector& log_weights() const noexcept { return log_weights_; }

 private:
  Matrix points_;
  Matrix coordinates_;
  Vector weights_;
  Vector log_weights_;
};

/// Smallest origin-centred ball radius and the extreme points of conv(S).
struct SupportGeometry {
  int dim = 0;
  double radius = 0.0;
  std::vector<Vector> hull_vertices;  // counter-clockwise for d = 2
};

EmpiricalMeasure make_empirical(const std::vector<Vector>& points,
                                const std::vector<double>& weights = {});

/// n points uniform in arc length on (x^2+y^2)^2 = a^2 (x^2 - y^2), a = half_width.
EmpiricalMeasure lemniscate_dataset(std::size_t n, double half_width, Seed seed);

SupportGeometry support_geometry(const EmpiricalMeasure& mu);

/// True if `x` lies in conv(hull) up to `tol` (exact for d <= 2).
bool in_hull(const SupportGeometry& geom, const Vector& x, double tol = 1e-10);

// JSON measure files: {"dim": d, "points": [[...], ...], "weights": [...]}.
EmpiricalMeasure measure_from_json(const nlohmann::json& j);
nlohmann::json measure_to_json(const EmpiricalMeasure& mu);
EmpiricalMeasure load_measure(const std::filesystem::path& path);

}  // namespace scoreflow

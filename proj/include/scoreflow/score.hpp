#pragma once

#include "scoreflow/heatflow.hpp"

#include <functional>
#include <memory>
#include <variant>

namespace scoreflow {

enum class ScoreKind { EmpiricalExact, Scaled, Biased, Custom };

const char* to_string(ScoreKind kind) noexcept;

/// An evaluable vector field s(x, t) with its divergence.
///
/// Value type with shared immutable state; copies are cheap and evaluation is
/// safe to call concurrently.
class ScoreField {
 public:
  using EvalFn = std::function<Vector(const Vector&, double)>;
  using DivergenceFn = std::function<double(const Vector&, double)>;

  /// The exact score of the heat flow started from `mu`.
  static ScoreField empirical(EmpiricalMeasure mu);
  static ScoreField empirical(std::shared_ptr<const EmpiricalMeasure> mu);

  /// Arbitrary field. Without `divergence`, the trace of the Jacobian is taken by
  /// central differences with step 1e-5.
  static ScoreField custom(int dim, EvalFn eval, DivergenceFn divergence = {});

  Vector eval(const Vector& x, double t) const;
  double divergence(const Vector& x, double t) const;

  ScoreKind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }

  /// Underlying measure for empirical-exact fields (and candidates derived from them).
  const std::shared_ptr<const EmpiricalMeasure>& measure() const noexcept { return measure_; }

  ScoreField(ScoreKind kind, int dim, EvalFn eval, DivergenceFn div,
             std::shared_ptr<const EmpiricalMeasure> mu = nullptr);

 private:

  ScoreKind kind_;
  int dim_;
  EvalFn eval_;
  DivergenceFn div_;
  std::shared_ptr<const EmpiricalMeasure> measure_;
};

/// Gaussian mean shift m(x, t) together with the posterior responsibilities.
struct MeanShift {
  Vector m;
  Vector responsibilities;
};

Vector empirical_score(const EmpiricalMeasure& mu, const Vector& x, double t);
MeanShift mean_shift(const EmpiricalMeasure& mu, const Vector& x, double t);

/// div s = -d/(2t) + tr Cov / (4t^2).
double empirical_divergence(const EmpiricalMeasure& mu, const Vector& x, double t);

/// div s(x, t) + d/(2t); nonnegative for exact heat-flow scores.
double li_yau_margin(const ScoreField& field, const Vector& x, double t);

/// Central-difference trace of the Jacobian of `field.eval`.
double finite_difference_divergence(const ScoreField& field, const Vector& x, double t,
                                    double step = 1e-5);

struct ScaleBy {
  double scale = 1.0;
};
struct ShiftBy {
  Vector bias;
};
using CandidateTransform = std::variant<ScaleBy, ShiftBy>;

/// Scaling multiplies both the field and its divergence; a constant shift leaves
/// the divergence unchanged.
ScoreField make_candidate(const ScoreField& base, const CandidateTransform& transform);

}  // namespace scoreflow

#include "scoreflow/score.hpp"

#include <stdexcept>

namespace scoreflow {

const char* to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::EmpiricalExact:
      return "empirical-exact";
    case ScoreKind::Scaled:
      return "scaled";
    case ScoreKind::Biased:
      return "biased";
    case ScoreKind::Custom:
      return "custom";
  }
  return "unknown";
}

ScoreField::ScoreField(ScoreKind kind, int dim, EvalFn eval, DivergenceFn div,
                       std::shared_ptr<const EmpiricalMeasure> mu)
    : kind_(kind), dim_(dim), eval_(std::move(eval)), div_(std::move(div)), measure_(std::move(mu)) {
  if (dim_ < 1) throw std::invalid_argument("ScoreField: dim must be >= 1");
  if (!eval_) throw std::invalid_argument("ScoreField: missing evaluation function");
}

ScoreField ScoreField::empirical(EmpiricalMeasure mu) {
  return empirical(std::make_shared<const EmpiricalMeasure>(std::move(mu)));
}

ScoreField ScoreField::empirical(std::shared_ptr<const EmpiricalMeasure> mu) {
  if (!mu) throw std::invalid_argument("ScoreField::empirical: null measure");
  const EmpiricalMeasure* raw = mu.get();
  return ScoreField(
      ScoreKind::EmpiricalExact, mu->dim(),
      [raw](const Vector& x, double t) { return empirical_score(*raw, x, t); },
      [raw](const Vector& x, double t) { return empirical_divergence(*raw, x, t); }, mu);
}

ScoreField ScoreField::custom(int dim, EvalFn eval, DivergenceFn divergence) {
  return ScoreField(ScoreKind::Custom, dim, std::move(eval), std::move(divergence));
}

Vector ScoreField::eval(const Vector& x, double t) const {
  require_positive_time(t, "ScoreField::eval");
  return eval_(x, t);
}

double ScoreField::divergence(const Vector& x, double t) const {
  require_positive_time(t, "ScoreField::divergence");
  if (div_) return div_(x, t);
  return finite_difference_divergence(*this, x, t);
}

Vector empirical_score(const EmpiricalMeasure& mu, const Vector& x, double t) {
  require_positive_time(t, "empirical_score");
  thread_local Eigen::ArrayXd resp;
  posterior_responsibilities(mu, x, t, resp);
  return (mu.points() * resp.matrix() - x) / (2.0 * t);
}

MeanShift mean_shift(const EmpiricalMeasure& mu, const Vector& x, double t) {
  require_positive_time(t, "mean_shift");
  auto post = gaussian_posterior(mu, x, t);
  return {std::move(post.mean), std::move(post.responsibilities)};
}

double empirical_divergence(const EmpiricalMeasure& mu, const Vector& x, double t) {
  require_positive_time(t, "empirical_divergence");
  const auto post = gaussian_posterior(mu, x, t);
  double trace = 0.0;
  for (Eigen::Index k = 0; k < post.responsibilities.size(); ++k) {
    const double r = post.responsibilities(k);
    if (r == 0.0) continue;
    trace += r * (mu.points().col(k) - post.mean).squaredNorm();
  }
  return -0.5 * mu.dim() / t + trace / (4.0 * t * t);
}

double li_yau_margin(const ScoreField& field, const Vector& x, double t) {
  require_positive_time(t, "li_yau_margin");
  return field.divergence(x, t) + 0.5 * field.dim() / t;
}

double finite_difference_divergence(const ScoreField& field, const Vector& x, double t,
                                    double step) {
  double div = 0.0;
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double plus = field.eval(probe, t)(i);
    probe(i) = x(i) - step;
    const double minus = field.eval(probe, t)(i);
    probe(i) = x(i);
    div += (plus - minus) / (2.0 * step);
  }
  return div;
}

ScoreField make_candidate(const ScoreField& base, const CandidateTransform& transform) {
  if (const auto* sc = std::get_if<ScaleBy>(&transform)) {
    const double c = sc->scale;
    return ScoreField(
        ScoreKind::Scaled, base.dim(), [base, c](const Vector& x, double t) -> Vector { return c * base.eval(x, t); },
        [base, c](const Vector& x, double t) { return c * base.divergence(x, t); }, base.measure());
  }
  const Vector bias = std::get<ShiftBy>(transform).bias;
  if (bias.size() != base.dim()) throw std::invalid_argument("make_candidate: bias dimension mismatch");
  return ScoreField(
      ScoreKind::Biased, base.dim(), [base, bias](const Vector& x, double t) -> Vector { return base.eval(x, t) + bias; },
      [base](const Vector& x, double t) { return base.divergence(x, t); }, base.measure());
}

}  // namespace scoreflow

#include "scoreflow/losses.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace scoreflow {
namespace {

// Pairwise summation keeps the rounding order fixed and independent of n's parity.
double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

LossEstimate summarize(const std::vector<double>& values, const PairSample& sample,
                       Objective objective, double lambda) {
  const std::size_t n = values.size();
  const double mean = pairwise_sum(values.data(), n) / static_cast<double>(n);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = n > 1 ? pairwise_sum(sq.data(), n) / static_cast<double>(n - 1) : 0.0;
  const double span = sample.T - sample.t_floor;

  LossEstimate est;
  est.value = span * mean;
  est.std_error = span * std::sqrt(var / static_cast<double>(n));
  est.n_samples = n;
  est.objective = objective;
  est.lambda = lambda;
  return est;
}

void check_sample(const PairSample& sample) {
  if (sample.pairs.empty()) throw std::invalid_argument("loss: empty pair sample");
}

}  // namespace

PairSample sample_pairs(const EmpiricalMeasure& mu, double T, std::size_t n, Seed seed,
                        double t_floor) {
  if (n == 0) throw std::invalid_argument("sample_pairs: n must be >= 1");
  if (!(t_floor > 0.0) || !(t_floor < T)) {
    throw std::invalid_argument("sample_pairs: need 0 < t_floor < T");
  }
  const Vector& w = mu.weights();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(w.data(), w.data() + w.size());
  std::uniform_real_distribution<double> time(t_floor, T);
  std::normal_distribution<double> normal(0.0, 1.0);

  PairSample out;
  out.T = T;
  out.t_floor = t_floor;
  out.seed = seed;
  out.pairs.reserve(n);
  const int d = mu.dim();
  for (std::size_t i = 0; i < n; ++i) {
    NoisyPair p;
    p.k = pick(rng);
    p.t = time(rng);
    // G_{1/(4t)} has per-axis variance 2 / (4t) = 1 / (2t).
    const double sd = 1.0 / std::sqrt(2.0 * p.t);
    p.z.resize(d);
    for (int j = 0; j < d; ++j) p.z(j) = sd * normal(rng);
    out.pairs.push_back(std::move(p));
  }
  return out;
}

Vector noisy_point(const EmpiricalMeasure& mu, const NoisyPair& pair) {
  return 2.0 * pair.t * pair.z + mu.point(pair.k);
}

const char* to_string(Objective objective) noexcept {
  switch (objective) {
    case Objective::ScoreMatching:
      return "score-matching";
    case Objective::Ddpm:
      return "ddpm";
    case Objective::Hyvarinen:
      return "hyvarinen";
    case Objective::Penalized:
      return "penalized";
  }
  return "unknown";
}

std::vector<double> loss_integrands(const ScoreField& candidate, const EmpiricalMeasure& mu,
                                    const PairSample& sample, Objective objective, double lambda) {
  check_sample(sample);
  std::vector<double> out;
  out.reserve(sample.pairs.size());
  for (const auto& p : sample.pairs) {
    const Vector x = noisy_point(mu, p);
    const Vector s = candidate.eval(x, p.t);
    switch (objective) {
      case Objective::ScoreMatching:
      case Objective::Penalized: {
        // Regression target (y_k - x) / (2t), which is -z exactly for x = 2tz + y_k.
        const Vector target = -p.z;
        double v = (s - target).squaredNorm();
        if (objective == Objective::Penalized && lambda != 0.0) {
          const double div = candidate.divergence(x, p.t);
          v += lambda * div * div;
        }
        out.push_back(v);
        break;
      }
      case Objective::Ddpm:
        out.push_back((s + p.z).squaredNorm());
        break;
      case Objective::Hyvarinen:
        out.push_back(s.squaredNorm() + 2.0 * candidate.divergence(x, p.t));
        break;
    }
  }
  return out;
}

LossEstimate score_matching_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                                 const PairSample& sample) {
  return summarize(loss_integrands(candidate, mu, sample, Objective::ScoreMatching), sample,
                   Objective::ScoreMatching, 0.0);
}

LossEstimate ddpm_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                       const PairSample& sample) {
  return summarize(loss_integrands(candidate, mu, sample, Objective::Ddpm), sample, Objective::Ddpm,
                   0.0);
}

LossEstimate hyvarinen_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                            const PairSample& sample) {
  return summarize(loss_integrands(candidate, mu, sample, Objective::Hyvarinen), sample,
                   Objective::Hyvarinen, 0.0);
}

LossEstimate penalized_loss(const ScoreField& candidate, const EmpiricalMeasure& mu, double lambda,
                            const PairSample& sample) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("penalized_loss: lambda must be >= 0");
  return summarize(loss_integrands(candidate, mu, sample, Objective::Penalized, lambda), sample,
                   Objective::Penalized, lambda);
}

nlohmann::json loss_report(const LossEstimate& estimate, const PairSample& sample) {
  return {{"objective", to_string(estimate.objective)},
          {"value", estimate.value},
          {"std_error", estimate.std_error},
          {"n", estimate.n_samples},
          {"lambda", estimate.lambda},
          {"t_floor", sample.t_floor},
          {"seed", sample.seed}};
}

}  // namespace scoreflow

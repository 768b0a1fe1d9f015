#pragma once

#include "scoreflow/score.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace scoreflow {

/// One draw (k, t, z): atom index, time, and noise z ~ N(0, I / (2t)); the noisy
/// point is x = 2 t z + y_k, distributed as G_t(. - y_k).
struct NoisyPair {
  std::size_t k = 0;
  double t = 0.0;
  Vector z;
};

struct PairSample {
  std::vector<NoisyPair> pairs;
  double T = 1.0;
  double t_floor = 1e-3;
  Seed seed = 0;
};

inline constexpr double kDefaultTimeFloor = 1e-3;

/// k ~ weights, t ~ U(t_floor, T), z ~ N(0, I / (2t)).
PairSample sample_pairs(const EmpiricalMeasure& mu, double T, std::size_t n, Seed seed,
                        double t_floor = kDefaultTimeFloor);

/// x = 2 t z + y_k for a pair.
Vector noisy_point(const EmpiricalMeasure& mu, const NoisyPair& pair);

enum class Objective { ScoreMatching, Ddpm, Hyvarinen, Penalized };

const char* to_string(Objective objective) noexcept;

struct LossEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  Objective objective = Objective::ScoreMatching;
  double lambda = 0.0;
};

/// Denoising score matching: (T - t_floor) mean |s(x, t) - (y_k - x)/(2t)|^2.
LossEstimate score_matching_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                                 const PairSample& sample);

/// Noise prediction form: (T - t_floor) mean |s(2tz + y_k, t) + z|^2.
LossEstimate ddpm_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                       const PairSample& sample);

/// Implicit (Hyvarinen) form: (T - t_floor) mean (|s|^2 + 2 div s).
LossEstimate hyvarinen_loss(const ScoreField& candidate, const EmpiricalMeasure& mu,
                            const PairSample& sample);

/// Score matching plus lambda (T - t_floor) mean (div s)^2.
LossEstimate penalized_loss(const ScoreField& candidate, const EmpiricalMeasure& mu, double lambda,
                            const PairSample& sample);

/// Per-pair integrands (before the (T - t_floor) factor), in pair order.
std::vector<double> loss_integrands(const ScoreField& candidate, const EmpiricalMeasure& mu,
                                    const PairSample& sample, Objective objective,
                                    double lambda = 0.0);

/// Loss report: objective, value, std_error, n, lambda, t_floor, seed.
nlohmann::json loss_report(const LossEstimate& estimate, const PairSample& sample);

}  // namespace scoreflow

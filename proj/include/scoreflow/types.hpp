#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace scoreflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Seed = std::uint64_t;

/// Raised when an integrator or solver produces a state it cannot continue from.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::ptrdiff_t node = -1)
      : std::runtime_error(what), node_(node) {}

  /// Schedule node (or trajectory index) at which the failure was detected, -1 if unknown.
  std::ptrdiff_t node() const noexcept { return node_; }

 private:
  std::ptrdiff_t node_;
};

/// Throws std::invalid_argument unless t > 0.
inline void require_positive_time(double t, const char* where) {
  if (!(t > 0.0)) {
    throw std::invalid_argument(std::string(where) + ": time must be strictly positive, got " +
                                std::to_string(t));
  }
}

/// splitmix64 finalizer, used to derive independent stream seeds from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based split: seed for stream `index` of `master`.
constexpr Seed derive_seed(Seed master, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

}  // namespace scoreflow

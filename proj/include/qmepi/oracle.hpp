#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qmepi/core.hpp"

namespace qmepi {

/// 64-bit linear congruential generator (Knuth MMIX constants).
/// state <- state * 6364136223846793005 + 1442695040888963407 (mod 2^64);
/// uniform() = (state >> 11) * 2^-53, in [0, 1).
class Lcg {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

struct MinimaxOptions {
  int max_iters = 100000;
  double tol_value = 1e-10;
  double tol_point = 1e-9;
  int n_starts = 8;
  std::uint64_t seed = 20240601;
  double initial_radius = 2.0;

  /// Throws ValidationError on nonpositive tolerances or no starts.
  void validate() const;
};

struct MinimaxResult {
  double s_star = 0.0;
  Vec3 v_star = Vec3::Zero();
  int iters = 0;
  /// Indices of the face whose equal-phi point certified the minimum.
  std::vector<std::size_t> face;
};

/// min over v of max_i phi_i(v). Deterministic for fixed options.
/// Throws ConvergenceError when no certified minimizer is found.
MinimaxResult dual_minimax(const WeightedEnsemble& ensemble, const MinimaxOptions& opts = {});

struct Certification {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  bool kkt_pass = false;
  bool passed = false;
  std::map<std::string, double> residuals;
};

/// Primal value of the POVM against the dual bound at v, plus KKT residuals.
Certification certify(const WeightedEnsemble& ensemble, const Povm& povm, double s, const Vec3& v,
                      double tol = 1e-8);

/// Best success over two-outcome projective measurements on a theta/phi
/// grid, each outcome followed by the best guess per subensemble, and the
/// no-measurement strategy. A lower bound on the post-information optimum.
/// Only 2x2 inputs; other shapes throw ShapeError.
double primal_strategy_scan(const MepiEnsemble& mepi, int grid_density = 720);

}  // namespace qmepi

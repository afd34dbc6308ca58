#include "qmepi/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "qmepi/errors.hpp"
#include "qmepi/geometry.hpp"
#include "qmepi/me_solver.hpp"

namespace qmepi {

void MinimaxOptions::validate() const {
  if (!(tol_value > 0) || !(tol_point > 0)) throw ValidationError("minimax tolerances must be positive");
  if (n_starts < 1) throw ValidationError("minimax needs at least one start");
  if (max_iters < 1) throw ValidationError("minimax needs a positive iteration budget");
  if (!(initial_radius > 0)) throw ValidationError("initial radius must be positive");
}

namespace {

// The 26 neighbours of the unit cube lattice, unit length, axes first.
std::vector<Vec3> lattice_directions() {
  std::vector<Vec3> dirs;
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e(k) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  for (int x = -1; x <= 1; ++x)
    for (int y = -1; y <= 1; ++y)
      for (int z = -1; z <= 1; ++z) {
        int nz = (x != 0) + (y != 0) + (z != 0);
        if (nz >= 2) dirs.push_back(Vec3(x, y, z).normalized());
      }
  return dirs;
}

struct Descent {
  Vec3 v;
  double f;
};

class Minimizer {
 public:
  Minimizer(const WeightedEnsemble& e, const MinimaxOptions& o) : ens_(e), opts_(o), dirs_(lattice_directions()) {}

  double f(const Vec3& v) const { return max_phi(ens_, v); }

  // Pattern search on the lattice directions with a shrinking step.
  Descent descend(Vec3 v) {
    double fv = f(v);
    double step = 0.5;
    const double floor = opts_.tol_point * 1e-3;
    while (step > floor && iters_ < opts_.max_iters) {
      ++iters_;
      bool moved = false;
      for (const Vec3& d : dirs_) {
        Vec3 w = v + step * d;
        double fw = f(w);
        if (fw < fv) {
          v = w;
          fv = fw;
          // Keep going while the direction pays off.
          for (;;) {
            Vec3 w2 = v + step * d;
            double f2 = f(w2);
            if (!(f2 < fv)) break;
            v = w2;
            fv = f2;
          }
          moved = true;
          break;
        }
      }
      if (!moved) step *= 0.5;
    }
    return {v, fv};
  }

  // Ternary search along each axis around the current point.
  Descent refine_axes(Descent d, double half_width) {
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int axis = 0; axis < 3; ++axis) {
        double lo = d.v(axis) - half_width, hi = d.v(axis) + half_width;
        Vec3 p = d.v;
        auto g = [&](double t) {
          p(axis) = t;
          return f(p);
        };
        for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
          double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
          if (g(m1) < g(m2))
            hi = m2;
          else
            lo = m1;
        }
        Vec3 cand = d.v;
        cand(axis) = 0.5 * (lo + hi);
        double fc = f(cand);
        if (fc < d.f) d = {cand, fc};
      }
    }
    return d;
  }

  int iters() const { return iters_; }

 private:
  const WeightedEnsemble& ens_;
  const MinimaxOptions& opts_;
  std::vector<Vec3> dirs_;
  int iters_ = 0;
};

// Tries faces of up to four near-active points, smallest first. A face
// certifies when its equal-phi point has nonnegative barycentric weights
// and no other point has a larger phi there.
bool certify_face(const WeightedEnsemble& ens, const std::vector<std::size_t>& ranked, std::size_t pool,
                  const Vec3& guess, MinimaxResult& out) {
  const std::size_t n = ens.size();
  pool = std::min(pool, ranked.size());
  std::vector<std::size_t> pick;
  for (std::size_t size = 1; size <= std::min<std::size_t>(4, pool); ++size) {
    std::vector<bool> mask(pool, false);
    std::fill(mask.begin(), mask.begin() + size, true);
    do {
      pick.clear();
      for (std::size_t k = 0; k < pool; ++k)
        if (mask[k]) pick.push_back(ranked[k]);
      std::vector<double> w;
      std::vector<Vec3> pts;
      for (std::size_t i : pick) {
        w.push_back(ens.weight(i));
        pts.push_back(ens.point(i));
      }
      auto v = equal_phi_point(w, pts, guess);
      if (!v) continue;
      ConvexFit bc = barycentric(pts, *v);
      if (bc.residual > 1e-11 || bc.c.minCoeff() < -1e-10) continue;
      double level = phi(ens, pick[0], *v);
      bool dominant = true;
      for (std::size_t j = 0; j < n && dominant; ++j)
        if (phi(ens, j, *v) > level + 1e-12) dominant = false;
      if (!dominant) continue;
      out.v_star = *v;
      out.s_star = max_phi(ens, *v);
      out.face = pick;
      std::sort(out.face.begin(), out.face.end());
      return true;
    } while (std::prev_permutation(mask.begin(), mask.end()));
  }
  return false;
}

}  // namespace

MinimaxResult dual_minimax(const WeightedEnsemble& ensemble, const MinimaxOptions& opts) {
  opts.validate();
  Minimizer mz(ensemble, opts);
  const std::size_t n = ensemble.size();

  std::vector<Vec3> starts;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) centroid += ensemble.point(i);
  starts.push_back(centroid / static_cast<double>(n));
  Lcg rng(opts.seed);
  while (static_cast<int>(starts.size()) < opts.n_starts + 1) {
    Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (p.squaredNorm() <= 1.0) starts.push_back(opts.initial_radius * p);
  }

  // Ordered reduction: strictly better later starts replace earlier ones.
  Descent best{starts[0], mz.f(starts[0])};
  bool have = false;
  for (const Vec3& s : starts) {
    Descent d = mz.descend(s);
    if (!have || d.f < best.f) {
      best = d;
      have = true;
    }
  }
  best = mz.refine_axes(best, 1e-6);

  std::vector<std::size_t> ranked(n);
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = phi(ensemble, i, best.v);
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

  MinimaxResult res;
  res.iters = mz.iters();
  std::size_t near = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (vals[i] >= best.f - 1e-3) ++near;
  std::size_t pool = std::min<std::size_t>(12, std::max<std::size_t>(8, near));
  if (certify_face(ensemble, ranked, pool, best.v, res)) return res;
  if (pool < n && certify_face(ensemble, ranked, std::min<std::size_t>(n, 20), best.v, res)) return res;
  throw ConvergenceError("minimax search found no certified minimizer", best.f, best.v);
}

Certification certify(const WeightedEnsemble& ensemble, const Povm& povm, double s, const Vec3& v, double tol) {
  Certification c;
  c.primal = success_probability(ensemble, povm);
  c.dual = max_phi(ensemble, v);
  c.gap = c.dual - c.primal;
  KktReport k = kkt_verify(ensemble, povm, s, v, tol);
  c.kkt_pass = k.pass;
  c.residuals = k.residuals;
  c.passed = c.gap <= tol && c.kkt_pass;
  return c;
}

double primal_strategy_scan(const MepiEnsemble& mepi, int grid_density) {
  if (!mepi.is_2x2()) throw ShapeError("strategy scan supports two subensembles of two states only");
  if (grid_density < 1) throw ValidationError("grid density must be positive");
  // Per subensemble: weight and weighted point of each state.
  std::array<std::array<double, 2>, 2> eta{};
  std::array<std::array<Vec3, 2>, 2> pt{};
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 2; ++i) {
      eta[b][i] = mepi[b].weight(i);
      pt[b][i] = mepi[b].point(i);
    }
  // Gains are measured against guessing the heaviest state regardless, so a
  // direction that cannot help contributes exactly zero.
  const double base = eta[0][0] + eta[1][0];
  const std::array<double, 2> eps{eta[0][0] - eta[0][1], eta[1][0] - eta[1][1]};
  double gain = 0.0;
  const double pi = std::acos(-1.0);
  for (int a = 0; a < grid_density; ++a) {
    double theta = pi * (a + 0.5) / grid_density;
    double st = std::sin(theta), ct = std::cos(theta);
    for (int c = 0; c < grid_density; ++c) {
      double ph = 2 * pi * c / grid_density;
      Vec3 n(st * std::cos(ph), st * std::sin(ph), ct);
      double total = 0.0;
      for (int b = 0; b < 2; ++b) {
        double d0 = n.dot(pt[b][0]), d1 = n.dot(pt[b][1]);
        // Outcome +n, then outcome -n; each picks its best state.
        total += 0.5 * (std::max(d0, d1 - eps[b]) + std::max(-d0, -d1 - eps[b]));
      }
      gain = std::max(gain, total);
    }
  }
  double best = base + gain;
  return best;
}

}  // namespace qmepi

#include "qmepi/me_solver.hpp"

#include <algorithm>
#include <cmath>

#include "qmepi/errors.hpp"
#include "qmepi/geometry.hpp"

namespace qmepi {

void MeOptions::validate() const {
  if (!(tol_class > 0) || !(tol_active > 0) || !(tol_face > 0) || !(kkt_tol > 0)) throw ValidationError("tolerances must be positive");
  minimax.validate();
}

NoMeasurementCheck check_no_measurement(const WeightedEnsemble& ensemble, double tol_class) {
  NoMeasurementCheck out;
  out.trivial = true;
  const std::size_t n = ensemble.size();
  out.eps.assign(n, 0.0);
  out.lam.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    out.eps[i] = ensemble.weight(0) - ensemble.weight(i);
    out.lam[i] = (ensemble.point(0) - ensemble.point(i)).norm();
    if (out.eps[i] < out.lam[i] - tol_class) out.trivial = false;
    if (std::abs(out.eps[i] - out.lam[i]) <= tol_class) out.boundary = true;
  }
  return out;
}

bool trivial_optimal_check(const WeightedEnsemble& ensemble, const Povm& povm, double tol) {
  NoMeasurementCheck nm = check_no_measurement(ensemble, tol);
  if (!nm.trivial) throw ContractError("trivial_optimal_check called on an ensemble where measuring helps");
  if (povm.size() != ensemble.size()) throw ShapeError("ensemble and POVM differ in length");
  for (std::size_t i = 1; i < ensemble.size(); ++i) {
    const Effect& e = povm.effects[i];
    if (e.p() <= tol) continue;
    if (nm.eps[i] > nm.lam[i] + tol) return false;
    if (nm.lam[i] <= kTolGeom) continue;  // coincident weighted points, any direction
    Vec3 dir = (ensemble.point(i) - ensemble.point(0)) / nm.lam[i];
    if ((e.u() - dir).norm() > tol) return false;
  }
  return true;
}

std::optional<Vec3> pair_z(const WeightedEnsemble& ensemble, std::size_t i, std::size_t j) {
  if (i == j) throw ContractError("pair_z needs two distinct indices");
  Vec3 d = ensemble.point(j) - ensemble.point(i);
  double lam = d.norm();
  double gap = ensemble.weight(j) - ensemble.weight(i);
  if (lam <= std::abs(gap) + kTolGeom) return std::nullopt;
  double di = 0.5 * (lam + gap);
  return Vec3(ensemble.point(i) + (di / lam) * d);
}

DualCertificate make_certificate(const WeightedEnsemble& ensemble, double s, const Vec3& v, double tol) {
  DualCertificate c;
  c.s = s;
  c.v = v;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    double r = s - ensemble.weight(i);
    c.r.push_back(r);
    c.w.push_back(r > tol ? Vec3((v - ensemble.point(i)) / r) : Vec3::Zero());
  }
  return c;
}

KktReport kkt_verify(const WeightedEnsemble& ensemble, const Povm& povm, double s, const Vec3& v, double tol) {
  if (povm.size() != ensemble.size()) throw ShapeError("ensemble and POVM differ in length");
  KktReport rep;
  rep.tol = tol;
  double p0 = 0, psum = 0, d0 = 0, d1 = 0, d2 = 0, c0 = 0;
  Vec3 usum = Vec3::Zero();
  DualCertificate cert = make_certificate(ensemble, s, v, tol);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Effect& e = povm.effects[i];
    p0 = std::max({p0, -e.p(), e.u().norm() - 1.0});
    psum += e.p();
    usum += e.p() * e.u();
    double r = cert.r[i];
    Vec3 diff = v - ensemble.point(i);
    // |w_i| <= 1 written as |v - a_i| <= r_i to avoid dividing by small r.
    d0 = std::max(d0, -r);
    if (r > tol) d0 = std::max(d0, diff.norm() - r);
    d1 = std::max(d1, std::abs(s - ensemble.weight(i) - r));
    d2 = std::max(d2, (diff - r * cert.w[i]).norm());
    // p_i r_i (1 + u_i.w_i), again without the division.
    double slack = r > tol ? r + e.u().dot(diff) : r;
    c0 = std::max(c0, std::abs(e.p() * slack));
  }
  rep.residuals["P0"] = p0;
  rep.residuals["P1"] = std::abs(psum - 1.0);
  rep.residuals["P2"] = usum.norm();
  rep.residuals["D0"] = d0;
  rep.residuals["D1"] = d1;
  rep.residuals["D2"] = d2;
  rep.residuals["C0"] = c0;
  rep.pass = true;
  for (const auto& [k, val] : rep.residuals)
    if (!(val <= tol)) rep.pass = false;
  return rep;
}

bool in_face_closure(const WeightedEnsemble& ensemble, const std::vector<std::size_t>& face, const Vec3& v,
                     double tol) {
  std::vector<Vec3> pts;
  for (std::size_t i : face) pts.push_back(ensemble.point(i));
  return nnls_convex(pts, v).residual <= tol;
}

Povm construct_povm_from_v(const WeightedEnsemble& ensemble, const Vec3& v, const std::vector<std::size_t>& face,
                           std::vector<Outcome> labels, double tol) {
  const std::size_t n = ensemble.size();
  if (labels.empty()) labels = index_labels(n);
  if (face.empty()) throw InfeasibleFaceError("empty face");
  std::vector<Vec3> pts;
  std::vector<double> dist;
  for (std::size_t i : face) {
    if (i >= n) throw ShapeError("face index out of range");
    double r = (ensemble.point(i) - v).norm();
    if (r <= kTolGeom) throw DegenerateFaceError("v coincides with a weighted point of the face");
    pts.push_back(ensemble.point(i));
    dist.push_back(r);
  }
  ConvexFit fit = min_norm_convex(pts, v, tol);
  if (fit.residual > tol) throw InfeasibleFaceError("v is not a convex combination of the face points");
  double norm = 0.0;
  for (std::size_t k = 0; k < face.size(); ++k) norm += fit.c(k) * dist[k];
  std::vector<Effect> eff(n);
  for (std::size_t k = 0; k < face.size(); ++k) {
    std::size_t i = face[k];
    eff[i] = Effect(fit.c(k) * dist[k] / norm, (pts[k] - v) / dist[k]);
  }
  return Povm(std::move(eff), std::move(labels));
}

namespace {

// Subsets of `s` by size, then lexicographically. Above 12 elements only
// small subsets and the whole set are produced.
std::vector<std::vector<std::size_t>> candidate_faces(const std::vector<std::size_t>& s) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t m = s.size();
  const std::size_t max_size = m <= 12 ? m : 4;
  for (std::size_t size = 1; size <= max_size; ++size) {
    std::vector<bool> mask(m, false);
    std::fill(mask.begin(), mask.begin() + size, true);
    do {
      std::vector<std::size_t> f;
      for (std::size_t k = 0; k < m; ++k)
        if (mask[k]) f.push_back(s[k]);
      out.push_back(std::move(f));
    } while (std::prev_permutation(mask.begin(), mask.end()));
  }
  if (max_size < m) out.push_back(s);
  return out;
}

}  // namespace

MeSolution solve_me(const WeightedEnsemble& ensemble, const MeOptions& opts, std::vector<Outcome> labels) {
  opts.validate();
  const std::size_t n = ensemble.size();
  if (labels.empty()) labels = index_labels(n);
  if (labels.size() != n) throw ShapeError("outcome labels and ensemble differ in length");

  MeSolution sol;
  NoMeasurementCheck nm = check_no_measurement(ensemble, opts.tol_class);
  if (nm.trivial) {
    sol.trivial = true;
    sol.p_guess = ensemble.weight(0);
    sol.active_sets = {{0}};
    sol.povm = identity_povm(n, labels);
    sol.certificate = make_certificate(ensemble, sol.p_guess, ensemble.point(0), opts.kkt_tol);
    sol.kkt = kkt_verify(ensemble, sol.povm, sol.p_guess, ensemble.point(0), opts.kkt_tol);
    return sol;
  }

  MinimaxResult mm = dual_minimax(ensemble, opts.minimax);
  const Vec3 v = mm.v_star;
  const double s = mm.s_star;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i)
    if (phi(ensemble, i, v) >= s - opts.tol_active) active.push_back(i);

  for (auto& f : candidate_faces(active))
    if (in_face_closure(ensemble, f, v, opts.tol_face)) sol.active_sets.push_back(std::move(f));
  if (sol.active_sets.empty()) sol.active_sets.push_back(mm.face);

  sol.p_guess = s;
  sol.povm = construct_povm_from_v(ensemble, v, sol.active_sets.front(), labels, opts.tol_face);
  sol.certificate = make_certificate(ensemble, s, v, opts.kkt_tol);
  sol.kkt = kkt_verify(ensemble, sol.povm, s, v, opts.kkt_tol);
  return sol;
}

}  // namespace qmepi

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qmepi/core.hpp"
#include "qmepi/oracle.hpp"

namespace qmepi {

struct MeOptions {
  double tol_class = 1e-9;   // epsilon vs lambda comparisons
  double tol_active = 1e-7;  // active-set extraction
  double tol_face = 1e-9;    // distance of v from a face's convex hull
  double kkt_tol = 1e-8;
  MinimaxOptions minimax;

  void validate() const;
};

struct NoMeasurementCheck {
  bool trivial = false;
  bool boundary = false;     // some |eps_i - lam_i| <= tol_class
  std::vector<double> eps;   // eta_1 - eta_i, zero at i = 0
  std::vector<double> lam;   // |eta_1 nu_1 - eta_i nu_i|, zero at i = 0
};

/// Whether guessing the heaviest state without measuring is optimal.
NoMeasurementCheck check_no_measurement(const WeightedEnsemble& ensemble, double tol_class = 1e-9);

/// Whether the POVM has the optimal structure for a trivial ensemble:
/// strictly dominated outcomes are null and boundary outcomes point away
/// from the heaviest state. Throws ContractError on a non-trivial ensemble.
bool trivial_optimal_check(const WeightedEnsemble& ensemble, const Povm& povm, double tol = 1e-9);

/// Point on the open segment between weighted points i and j where their
/// phi values agree; empty when no such interior point exists.
std::optional<Vec3> pair_z(const WeightedEnsemble& ensemble, std::size_t i, std::size_t j);

/// Dual variables derived from (s, v): r_i = s - eta_i and
/// v = eta_i nu_i + r_i w_i, with w_i = 0 when r_i <= tol.
struct DualCertificate {
  double s = 0.0;
  Vec3 v = Vec3::Zero();
  std::vector<double> r;
  std::vector<Vec3> w;
};

DualCertificate make_certificate(const WeightedEnsemble& ensemble, double s, const Vec3& v, double tol = 1e-8);

/// Residuals keyed "P0", "P1", "P2", "D0", "D1", "D2", "C0".
struct KktReport {
  std::map<std::string, double> residuals;
  double tol = 0.0;
  bool pass = false;
};

KktReport kkt_verify(const WeightedEnsemble& ensemble, const Povm& povm, double s, const Vec3& v, double tol = 1e-8);

struct MeSolution {
  double p_guess = 0.0;
  DualCertificate certificate;
  /// 0-based index sets, smallest first, then lexicographic.
  std::vector<std::vector<std::size_t>> active_sets;
  Povm povm;
  bool trivial = false;
  KktReport kkt;
};

/// Optimal guessing probability with a minimal-support optimal POVM.
/// `labels` names the outcomes; defaults to 1, 2, ...
MeSolution solve_me(const WeightedEnsemble& ensemble, const MeOptions& opts = {},
                    std::vector<Outcome> labels = {});

/// Effects u_i = (eta_i nu_i - v)/|...| on the face S, weighted by convex
/// coefficients of v times the distances. Null effects off the face.
Povm construct_povm_from_v(const WeightedEnsemble& ensemble, const Vec3& v, const std::vector<std::size_t>& face,
                           std::vector<Outcome> labels = {}, double tol = 1e-9);

/// Whether v lies in the closed convex hull of the face, within tol.
bool in_face_closure(const WeightedEnsemble& ensemble, const std::vector<std::size_t>& face, const Vec3& v,
                     double tol);

}  // namespace qmepi

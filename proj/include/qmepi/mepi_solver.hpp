#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmepi/core.hpp"
#include "qmepi/me_solver.hpp"

namespace qmepi {

/// Ensemble over joint outcomes: one state per tuple, weight and weighted
/// point summed over subensembles. outcomes[k] labels ensemble state k.
struct ProductEnsemble {
  WeightedEnsemble ensemble;
  std::vector<Outcome> outcomes;

  /// Position of a tuple in the (weight-sorted) ensemble. Throws ShapeError.
  std::size_t index_of(const Outcome& omega) const;
};

ProductEnsemble product_ensemble(const MepiEnsemble& mepi);

struct PriorResult {
  double p_prior = 0.0;
  std::vector<double> per_subensemble;
  std::vector<MeSolution> solutions;
};

/// Sum of the ME optima of the subensembles, each taken with its own weights.
PriorResult prior_guess_probability(const MepiEnsemble& mepi, const MeOptions& opts = {});

/// ME of the product ensemble; POVM labels are tuples.
MeSolution post_guess_probability(const MepiEnsemble& mepi, const MeOptions& opts = {});

/// Per-subensemble POVMs obtained by summing the joint effects that agree
/// on that subensemble's entry. Throws ShapeError on malformed labels.
std::vector<Povm> marginal_povms(const Povm& joint, const MepiEnsemble& mepi);

struct StrictGap {
  bool value = false;
  bool numeric = false;  // decided by solving both sides, not by the closed test
};

/// Whether learning the subensemble label afterwards is strictly worse than
/// learning it first. Closed test when every subensemble has two states.
StrictGap pre_strictly_better(const MepiEnsemble& mepi, const MeOptions& opts = {});

struct OutcomeStructure {
  Outcome omega;
  bool nonnull_allowed = false;
  Vec3 direction = Vec3::Zero();  // Bloch direction of an allowed effect
};

struct TrivialMepiReport {
  bool trivial = false;
  /// Filled when trivial: every outcome other than (1,...,1).
  std::vector<OutcomeStructure> outcomes;
};

TrivialMepiReport trivial_mepi_check(const MepiEnsemble& mepi, double tol_class = 1e-9);

enum class MepiCase {
  Trivial_eta1,
  Edge_11_12,
  Edge_11_21,
  Diag_11_22,
  AntiDiag_12_21,
  Tri_11_12_21,
  Tri_11_12_22,
  Tri_11_21_22,
};

std::string to_string(MepiCase c);
MepiCase case_from_string(const std::string& s);
/// Outcomes carrying the optimal effects in that case.
std::vector<Outcome> case_support(MepiCase c);

/// Derived quantities of a two-by-two instance. Subscript 1 below means
/// the first subensemble, 2 the second; the state index is always 2.
struct MepiScalars {
  std::vector<std::vector<double>> eps;  // [b][i]: eta_1b - eta_ib
  std::vector<std::vector<double>> lam;  // [b][i]: |eta_1b nu_1b - eta_ib nu_ib|
  std::vector<Vec3> mu_hat;              // [b]: unit step from state 1 to 2
  double Phi = 0.0;
  double alpha = 0.0;
  double beta_plus = 0.0;
  double beta_minus = 0.0;
  double gamma_plus = 0.0;
  double gamma_minus = 0.0;
  double Theta_plus = 0.0;
  double Theta_minus = 0.0;
  double Xi_plus = 0.0;
  double Xi_minus = 0.0;
  /// Largest amount an arccos argument had to be clamped by.
  double angle_clamp = 0.0;
};

/// Throws ShapeError unless two subensembles of two states.
MepiScalars mepi_scalars(const MepiEnsemble& mepi);

struct MepiClassification {
  std::vector<MepiCase> cases;
  double p_post = 0.0;
  std::optional<Vec3> v_star;
  std::vector<Outcome> support;  // support of the minimal case
  bool unique_measurement = false;
  bool nonnull_exists = false;
  bool degenerate = false;  // no strict gap: p_post = p_prior, no case
  bool fallback = false;    // closed form failed its self-check
  MepiScalars scalars;
};

/// Closed-form case analysis for two subensembles of two states.
MepiClassification classify_2x2(const MepiEnsemble& mepi, double tol = 1e-9, const MeOptions& opts = {});

/// Optimal joint POVM at the classified point and support.
Povm optimal_povm_2x2(const MepiEnsemble& mepi, const MepiClassification& cls);

struct FacePredicates {
  bool in_X = false;
  bool in_Y = false;
};

/// in_X: v in the closed hull of S', phi equal on S' and not below phi on
/// S minus S'. in_Y: phi on S' not below phi outside S.
FacePredicates face_predicates(const ProductEnsemble& product, const std::vector<Outcome>& s_prime,
                               const std::vector<Outcome>& s, const Vec3& v, double tol = 1e-9);

/// max(0, p_prior - p_post).
double incompatibility_gap(const MepiEnsemble& mepi, const MeOptions& opts = {});

}  // namespace qmepi

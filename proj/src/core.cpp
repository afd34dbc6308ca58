#include "qmepi/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "qmepi/errors.hpp"

namespace qmepi {

namespace {

void check_finite(const Vec3& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + " has non-finite components");
}

}  // namespace

BlochVector::BlochVector(double x, double y, double z) : BlochVector(Vec3(x, y, z)) {}

BlochVector::BlochVector(const Vec3& v) : v_(v) {
  check_finite(v, "Bloch vector");
  double n = v.norm();
  if (n > 1.0 + kTolGeom) {
    std::ostringstream os;
    os << "Bloch vector norm " << n << " exceeds 1";
    throw ValidationError(os.str());
  }
}

WeightedState::WeightedState(double weight, const BlochVector& bloch)
    : weight_(weight), bloch_(bloch), point_(weight * bloch.vec()) {
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ValidationError("state weight must be positive");
  if (weight > 1.0 + kTolWeight) throw ValidationError("state weight exceeds 1");
}

WeightedState WeightedState::from_point(double weight, const Vec3& point) {
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ValidationError("state weight must be positive");
  if (weight > 1.0 + kTolWeight) throw ValidationError("state weight exceeds 1");
  check_finite(point, "weighted point");
  Vec3 nu = point / weight;
  double n = nu.norm();
  // Within tolerance, pull the direction back onto the sphere and keep the exact point.
  if (n > 1.0 && n <= 1.0 + kTolGeom) nu /= n;
  return WeightedState(weight, BlochVector(nu), point);
}

WeightedEnsemble::WeightedEnsemble(std::vector<WeightedState> states, bool normalized)
    : normalized_(normalized) {
  if (states.size() < 2) throw ValidationError("an ensemble needs at least 2 states");
  input_order_.resize(states.size());
  std::iota(input_order_.begin(), input_order_.end(), std::size_t{0});
  std::stable_sort(input_order_.begin(), input_order_.end(), [&](std::size_t a, std::size_t b) {
    return states[a].weight() > states[b].weight();
  });
  states_.reserve(states.size());
  for (std::size_t k : input_order_) states_.push_back(states[k]);
  if (normalized_) {
    double total = total_weight();
    if (std::abs(total - 1.0) > kTolWeight) {
      std::ostringstream os;
      os << "normalized ensemble weights sum to " << total;
      throw ValidationError(os.str());
    }
  }
}

double WeightedEnsemble::total_weight() const {
  double t = 0.0;
  for (const auto& s : states_) t += s.weight();
  return t;
}

Effect::Effect(double p, const Vec3& u) : p_(p), u_(u) {
  if (!std::isfinite(p) || p < 0.0) throw ValidationError("effect weight must be nonnegative");
  check_finite(u, "effect direction");
  double n = u.norm();
  if (n > 1.0 + kTolGeom) {
    std::ostringstream os;
    os << "effect direction norm " << n << " exceeds 1";
    throw ValidationError(os.str());
  }
  if (n > 1.0 + 1e-15) u_ /= n;
}

Povm::Povm(std::vector<Effect> e) : effects(std::move(e)), labels(index_labels(effects.size())) {}

Povm::Povm(std::vector<Effect> e, std::vector<Outcome> l) : effects(std::move(e)), labels(std::move(l)) {
  if (labels.empty()) labels = index_labels(effects.size());
  if (labels.size() != effects.size()) throw ShapeError("POVM labels and effects differ in length");
}

MepiEnsemble::MepiEnsemble(std::vector<WeightedEnsemble> subensembles) : subs_(std::move(subensembles)) {
  if (subs_.size() < 2) throw ValidationError("a MEPI ensemble needs at least 2 subensembles");
  double total = 0.0;
  for (const auto& e : subs_) total += e.total_weight();
  if (std::abs(total - 1.0) > kTolWeight) {
    std::ostringstream os;
    os << "MEPI weights sum to " << total << ", expected 1";
    throw ValidationError(os.str());
  }
}

bool MepiEnsemble::is_2x2() const { return subs_.size() == 2 && subs_[0].size() == 2 && subs_[1].size() == 2; }

double effect_probability(const Effect& effect, const BlochVector& state) {
  double val = effect.p() * (1.0 + effect.u().dot(state.vec()));
  return std::clamp(val, 0.0, 2.0 * effect.p());
}

double success_probability(const WeightedEnsemble& ensemble, const Povm& povm) {
  if (ensemble.size() != povm.size()) throw ShapeError("ensemble and POVM differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const Effect& e = povm.effects[i];
    total += e.p() * (ensemble.weight(i) + e.u().dot(ensemble.point(i)));
  }
  return total;
}

double phi(const WeightedEnsemble& ensemble, std::size_t i, const Vec3& v) {
  return ensemble.weight(i) + (ensemble.point(i) - v).norm();
}

double max_phi(const WeightedEnsemble& ensemble, const Vec3& v) {
  double m = -1.0;
  for (std::size_t i = 0; i < ensemble.size(); ++i) m = std::max(m, phi(ensemble, i, v));
  return m;
}

PovmReport validate_povm(const Povm& povm, double tol) {
  PovmReport rep;
  double psum = 0.0;
  Vec3 usum = Vec3::Zero();
  for (std::size_t i = 0; i < povm.size(); ++i) {
    const Effect& e = povm.effects[i];
    double bad = std::max(-e.p(), e.u().norm() - 1.0);
    if (bad > tol) rep.violations.push_back({"P0", static_cast<long>(i), bad});
    psum += e.p();
    usum += e.p() * e.u();
  }
  if (std::abs(psum - 1.0) > tol) rep.violations.push_back({"P1", -1, std::abs(psum - 1.0)});
  if (usum.norm() > tol) rep.violations.push_back({"P2", -1, usum.norm()});
  return rep;
}

Povm identity_povm(std::size_t n, std::vector<Outcome> labels) {
  std::vector<Effect> eff(n);
  eff[0] = Effect(1.0, Vec3::Zero());
  return Povm(std::move(eff), std::move(labels));
}

std::vector<Outcome> index_labels(std::size_t n) {
  std::vector<Outcome> l;
  l.reserve(n);
  for (std::size_t i = 0; i < n; ++i) l.push_back({static_cast<int>(i + 1)});
  return l;
}

int affine_dimension(const std::vector<Vec3>& points, double tol) {
  if (points.size() < 2) return 0;
  Eigen::MatrixXd d(3, points.size() - 1);
  for (std::size_t i = 1; i < points.size(); ++i) d.col(i - 1) = points[i] - points[0];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  int rank = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k)
    if (svd.singularValues()(k) > tol) ++rank;
  return rank;
}

}  // namespace qmepi

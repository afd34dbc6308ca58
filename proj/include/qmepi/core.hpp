#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qmepi {

using Vec3 = Eigen::Vector3d;

/// Slack allowed on unit-norm invariants.
inline constexpr double kTolGeom = 1e-12;
/// Slack on weight sums of normalized ensembles.
inline constexpr double kTolWeight = 1e-12;

/// Outcome identifier, 1-based. A single entry for plain ME outcomes,
/// one entry per subensemble for product outcomes.
using Outcome = std::vector<int>;

/// Point of the closed unit ball, rho = (1 + nu.sigma)/2.
class BlochVector {
 public:
  BlochVector() : v_(Vec3::Zero()) {}
  BlochVector(double x, double y, double z);
  explicit BlochVector(const Vec3& v);

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  double norm() const { return v_.norm(); }

 private:
  Vec3 v_;
};

/// A weight together with a state. Also keeps the weighted point weight*bloch,
/// which product states supply directly to avoid a divide/multiply round trip.
class WeightedState {
 public:
  WeightedState(double weight, const BlochVector& bloch);
  static WeightedState from_point(double weight, const Vec3& point);

  double weight() const { return weight_; }
  const BlochVector& bloch() const { return bloch_; }
  const Vec3& point() const { return point_; }

 private:
  WeightedState(double weight, const BlochVector& bloch, const Vec3& point)
      : weight_(weight), bloch_(bloch), point_(point) {}
  double weight_;
  BlochVector bloch_;
  Vec3 point_;
};

/// Ordered states, heaviest first. Construction stable-sorts by weight.
class WeightedEnsemble {
 public:
  WeightedEnsemble(std::vector<WeightedState> states, bool normalized);

  std::size_t size() const { return states_.size(); }
  const WeightedState& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<WeightedState>& states() const { return states_; }
  bool normalized() const { return normalized_; }
  double weight(std::size_t i) const { return states_[i].weight(); }
  const Vec3& point(std::size_t i) const { return states_[i].point(); }
  double total_weight() const;

  /// input_order()[k] is the input position of the state now at position k.
  const std::vector<std::size_t>& input_order() const { return input_order_; }

 private:
  std::vector<WeightedState> states_;
  std::vector<std::size_t> input_order_;
  bool normalized_;
};

/// M = p(1 + u.sigma). A norm of u just above 1 is pulled back onto the sphere.
class Effect {
 public:
  Effect() : p_(0.0), u_(Vec3::Zero()) {}
  Effect(double p, const Vec3& u);

  double p() const { return p_; }
  const Vec3& u() const { return u_; }

 private:
  double p_;
  Vec3 u_;
};

/// Effects with outcome labels. Completeness is not enforced here; see validate_povm.
struct Povm {
  std::vector<Effect> effects;
  std::vector<Outcome> labels;

  Povm() = default;
  explicit Povm(std::vector<Effect> e);
  Povm(std::vector<Effect> e, std::vector<Outcome> l);

  std::size_t size() const { return effects.size(); }
};

/// Union of subensembles; weights add up to one over all of them.
class MepiEnsemble {
 public:
  explicit MepiEnsemble(std::vector<WeightedEnsemble> subensembles);

  std::size_t size() const { return subs_.size(); }
  const WeightedEnsemble& operator[](std::size_t b) const { return subs_[b]; }
  const std::vector<WeightedEnsemble>& subensembles() const { return subs_; }
  bool is_2x2() const;

 private:
  std::vector<WeightedEnsemble> subs_;
};

/// Probability of the effect clicking on the state.
double effect_probability(const Effect& effect, const BlochVector& state);

/// Sum over i of eta_i Tr[rho_i M_i]. Throws ShapeError on length mismatch.
double success_probability(const WeightedEnsemble& ensemble, const Povm& povm);

/// eta_i + |eta_i nu_i - v|.
double phi(const WeightedEnsemble& ensemble, std::size_t i, const Vec3& v);

/// max_i phi_i(v).
double max_phi(const WeightedEnsemble& ensemble, const Vec3& v);

struct PovmViolation {
  std::string constraint;  // "P0", "P1" or "P2"
  long index;              // effect index, -1 for global constraints
  double magnitude;
};

struct PovmReport {
  std::vector<PovmViolation> violations;
  bool valid() const { return violations.empty(); }
};

PovmReport validate_povm(const Povm& povm, double tol = kTolGeom);

/// Everything on the first outcome.
Povm identity_povm(std::size_t n, std::vector<Outcome> labels = {});

/// Default 1-based labels {1}, {2}, ...
std::vector<Outcome> index_labels(std::size_t n);

/// Dimension of the affine hull of the points.
int affine_dimension(const std::vector<Vec3>& points, double tol = 1e-9);

}  // namespace qmepi

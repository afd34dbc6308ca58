#include "qmepi/mepi_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "qmepi/errors.hpp"
#include "qmepi/geometry.hpp"

namespace qmepi {

std::size_t ProductEnsemble::index_of(const Outcome& omega) const {
  auto it = std::find(outcomes.begin(), outcomes.end(), omega);
  if (it == outcomes.end()) throw ShapeError("outcome tuple not in the product ensemble");
  return static_cast<std::size_t>(it - outcomes.begin());
}

ProductEnsemble product_ensemble(const MepiEnsemble& mepi) {
  const std::size_t m = mepi.size();
  std::vector<WeightedState> states;
  std::vector<Outcome> tuples;
  Outcome omega(m, 1);
  bool done = false;
  // Lexicographic, first entry slowest.
  while (!done) {
    double w = 0.0;
    Vec3 pt = Vec3::Zero();
    for (std::size_t b = 0; b < m; ++b) {
      std::size_t i = static_cast<std::size_t>(omega[b] - 1);
      w += mepi[b].weight(i);
      pt += mepi[b].point(i);
    }
    states.push_back(WeightedState::from_point(w, pt));
    tuples.push_back(omega);
    std::size_t b = m;
    for (;;) {
      if (b == 0) {
        done = true;
        break;
      }
      --b;
      if (omega[b] < static_cast<int>(mepi[b].size())) {
        ++omega[b];
        break;
      }
      omega[b] = 1;
    }
  }
  WeightedEnsemble ens(std::move(states), false);
  std::vector<Outcome> sorted;
  for (std::size_t k : ens.input_order()) sorted.push_back(tuples[k]);
  return ProductEnsemble{std::move(ens), std::move(sorted)};
}

PriorResult prior_guess_probability(const MepiEnsemble& mepi, const MeOptions& opts) {
  PriorResult out;
  for (const auto& sub : mepi.subensembles()) {
    out.solutions.push_back(solve_me(sub, opts));
    out.per_subensemble.push_back(out.solutions.back().p_guess);
    out.p_prior += out.solutions.back().p_guess;
  }
  return out;
}

MeSolution post_guess_probability(const MepiEnsemble& mepi, const MeOptions& opts) {
  ProductEnsemble pe = product_ensemble(mepi);
  return solve_me(pe.ensemble, opts, pe.outcomes);
}

std::vector<Povm> marginal_povms(const Povm& joint, const MepiEnsemble& mepi) {
  const std::size_t m = mepi.size();
  if (joint.labels.size() != joint.effects.size()) throw ShapeError("POVM labels and effects differ in length");
  std::vector<std::vector<double>> p(m);
  std::vector<std::vector<Vec3>> pu(m);
  for (std::size_t b = 0; b < m; ++b) {
    p[b].assign(mepi[b].size(), 0.0);
    pu[b].assign(mepi[b].size(), Vec3::Zero());
  }
  for (std::size_t k = 0; k < joint.size(); ++k) {
    const Outcome& omega = joint.labels[k];
    if (omega.size() != m) throw ShapeError("joint outcome label has the wrong length");
    for (std::size_t b = 0; b < m; ++b) {
      if (omega[b] < 1 || omega[b] > static_cast<int>(mepi[b].size()))
        throw ShapeError("joint outcome label out of range");
      std::size_t i = static_cast<std::size_t>(omega[b] - 1);
      p[b][i] += joint.effects[k].p();
      pu[b][i] += joint.effects[k].p() * joint.effects[k].u();
    }
  }
  std::vector<Povm> out;
  for (std::size_t b = 0; b < m; ++b) {
    std::vector<Effect> eff;
    for (std::size_t i = 0; i < mepi[b].size(); ++i) {
      if (p[b][i] > 0.0) {
        Vec3 u = pu[b][i] / p[b][i];
        double n = u.norm();
        if (n > 1.0) u /= n;  // rounding only; a convex combination of unit vectors
        eff.emplace_back(p[b][i], u);
      } else {
        eff.emplace_back();
      }
    }
    out.emplace_back(std::move(eff));
  }
  return out;
}

namespace {

struct PairStep {
  double eps;
  double lam;
  Vec3 unit;  // zero when lam vanishes
};

PairStep pair_step(const WeightedEnsemble& sub, std::size_t i) {
  PairStep s;
  s.eps = sub.weight(0) - sub.weight(i);
  Vec3 d = sub.point(i) - sub.point(0);
  s.lam = d.norm();
  s.unit = s.lam > kTolGeom ? Vec3(d / s.lam) : Vec3::Zero();
  return s;
}

}  // namespace

StrictGap pre_strictly_better(const MepiEnsemble& mepi, const MeOptions& opts) {
  StrictGap out;
  bool binary = true;
  for (const auto& sub : mepi.subensembles())
    if (sub.size() != 2) binary = false;
  if (!binary) {
    out.numeric = true;
    double prior = prior_guess_probability(mepi, opts).p_prior;
    double post = post_guess_probability(mepi, opts).p_guess;
    out.value = post < prior - opts.tol_class;
    return out;
  }
  std::vector<PairStep> steps;
  for (const auto& sub : mepi.subensembles()) {
    PairStep s = pair_step(sub, 1);
    if (!(s.eps < s.lam - opts.tol_class)) return out;
    steps.push_back(s);
  }
  for (std::size_t a = 0; a < steps.size(); ++a)
    for (std::size_t b = a + 1; b < steps.size(); ++b)
      if (steps[a].unit.cross(steps[b].unit).norm() > kTolGeom) out.value = true;
  return out;
}

TrivialMepiReport trivial_mepi_check(const MepiEnsemble& mepi, double tol_class) {
  TrivialMepiReport rep;
  rep.trivial = true;
  for (const auto& sub : mepi.subensembles())
    for (std::size_t i = 1; i < sub.size(); ++i) {
      PairStep s = pair_step(sub, i);
      if (s.eps < s.lam - tol_class) rep.trivial = false;
    }
  if (!rep.trivial) return rep;
  ProductEnsemble pe = product_ensemble(mepi);
  const std::size_t top = pe.index_of(Outcome(mepi.size(), 1));
  for (std::size_t k = 0; k < pe.outcomes.size(); ++k) {
    if (k == top) continue;
    OutcomeStructure o;
    o.omega = pe.outcomes[k];
    double eps = pe.ensemble.weight(top) - pe.ensemble.weight(k);
    Vec3 d = pe.ensemble.point(k) - pe.ensemble.point(top);
    double lam = d.norm();
    o.nonnull_allowed = std::abs(eps - lam) <= tol_class;
    if (o.nonnull_allowed && lam > kTolGeom) o.direction = d / lam;
    rep.outcomes.push_back(o);
  }
  return rep;
}

std::string to_string(MepiCase c) {
  switch (c) {
    case MepiCase::Trivial_eta1: return "Trivial_eta1";
    case MepiCase::Edge_11_12: return "Edge_11_12";
    case MepiCase::Edge_11_21: return "Edge_11_21";
    case MepiCase::Diag_11_22: return "Diag_11_22";
    case MepiCase::AntiDiag_12_21: return "AntiDiag_12_21";
    case MepiCase::Tri_11_12_21: return "Tri_11_12_21";
    case MepiCase::Tri_11_12_22: return "Tri_11_12_22";
    case MepiCase::Tri_11_21_22: return "Tri_11_21_22";
  }
  return "?";
}

MepiCase case_from_string(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(MepiCase::Tri_11_21_22); ++k)
    if (to_string(static_cast<MepiCase>(k)) == s) return static_cast<MepiCase>(k);
  throw ValidationError("unknown case label: " + s);
}

std::vector<Outcome> case_support(MepiCase c) {
  switch (c) {
    case MepiCase::Trivial_eta1: return {{1, 1}};
    case MepiCase::Edge_11_12: return {{1, 1}, {1, 2}};
    case MepiCase::Edge_11_21: return {{1, 1}, {2, 1}};
    case MepiCase::Diag_11_22: return {{1, 1}, {2, 2}};
    case MepiCase::AntiDiag_12_21: return {{1, 2}, {2, 1}};
    case MepiCase::Tri_11_12_21: return {{1, 1}, {1, 2}, {2, 1}};
    case MepiCase::Tri_11_12_22: return {{1, 1}, {1, 2}, {2, 2}};
    case MepiCase::Tri_11_21_22: return {{1, 1}, {2, 1}, {2, 2}};
  }
  return {};
}

namespace {

double clamped_acos(double arg, double& clamp) {
  if (!std::isfinite(arg)) return 0.0;
  clamp = std::max(clamp, std::abs(arg) - 1.0);
  return std::acos(std::clamp(arg, -1.0, 1.0));
}

// Flat position of tuple (i, j), 0-based entries, first entry slowest.
int flat(int i, int j) { return 2 * i + j; }

int flat(const Outcome& o) { return flat(o[0] - 1, o[1] - 1); }

struct Grid {
  std::array<double, 4> eta;  // product weights by flat position
  std::array<Vec3, 4> mu;     // product points by flat position
};

Grid grid_of(const MepiEnsemble& mepi) {
  Grid g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      g.eta[flat(i, j)] = mepi[0].weight(i) + mepi[1].weight(j);
      g.mu[flat(i, j)] = mepi[0].point(i) + mepi[1].point(j);
    }
  return g;
}

// Point of the plane through a[0..2] at distance r[k] from each a[k].
std::optional<Vec3> trilaterate(const std::array<Vec3, 3>& a, const std::array<double, 3>& r) {
  Vec3 d1 = a[1] - a[0], d2 = a[2] - a[0];
  double l1 = d1.norm();
  if (l1 <= kTolGeom) return std::nullopt;
  Vec3 e1 = d1 / l1;
  Vec3 e2 = d2 - d2.dot(e1) * e1;
  if (e2.norm() <= kTolGeom) return std::nullopt;
  e2.normalize();
  Eigen::Matrix2d q;
  q << l1, 0.0, d2.dot(e1), d2.dot(e2);
  Eigen::Vector2d rhs(0.5 * (l1 * l1 - r[1] * r[1] + r[0] * r[0]),
                      0.5 * (d2.squaredNorm() - r[2] * r[2] + r[0] * r[0]));
  Eigen::Vector2d w = q.partialPivLu().solve(rhs);
  return Vec3(a[0] + w(0) * e1 + w(1) * e2);
}

struct Candidate {
  MepiCase kase;
  double p;
  std::optional<Vec3> v;
};

bool self_check(const Grid& g, const Candidate& c, double tol) {
  if (!c.v || !std::isfinite(c.p)) return false;
  const Vec3& v = *c.v;
  std::vector<int> s;
  for (const auto& o : case_support(c.kase)) s.push_back(flat(o));
  std::vector<Vec3> pts;
  for (int k = 0; k < 4; ++k) {
    double ph = g.eta[k] + (g.mu[k] - v).norm();
    bool in = std::find(s.begin(), s.end(), k) != s.end();
    if (in && std::abs(ph - c.p) > tol) return false;
    if (!in && ph > c.p + tol) return false;
    if (in) pts.push_back(g.mu[k]);
  }
  return nnls_convex(pts, v).residual <= tol;
}

std::size_t support_size(MepiCase c) { return case_support(c).size(); }

}  // namespace

MepiScalars mepi_scalars(const MepiEnsemble& mepi) {
  if (!mepi.is_2x2()) throw ShapeError("closed forms need two subensembles of two states");
  MepiScalars sc;
  for (std::size_t b = 0; b < 2; ++b) {
    PairStep s = pair_step(mepi[b], 1);
    sc.eps.push_back({0.0, s.eps});
    sc.lam.push_back({0.0, s.lam});
    sc.mu_hat.push_back(s.unit);
  }
  const double e1 = sc.eps[0][1], e2 = sc.eps[1][1];
  const double l1 = sc.lam[0][1], l2 = sc.lam[1][1];
  const double c = std::clamp(sc.mu_hat[0].dot(sc.mu_hat[1]), -1.0, 1.0);
  sc.Phi = std::acos(c);
  sc.alpha = l1 * l2 * c - e1 * e2;
  sc.beta_plus = e1 * l2 * l2 - e2 * l1 * l1 + (e1 - e2) * l1 * l2 * c;
  sc.beta_minus = e1 * l2 * l2 + e2 * l1 * l1 - (e1 + e2) * l1 * l2 * c;
  sc.gamma_plus = std::sqrt(std::max(0.0, l1 * l1 + l2 * l2 + 2 * l1 * l2 * c));
  sc.gamma_minus = std::sqrt(std::max(0.0, l1 * l1 + l2 * l2 - 2 * l1 * l2 * c));
  const double a = l1 * l1 - e1 * e1, b = l2 * l2 - e2 * e2;
  auto dd = [&](double sign) { return std::sqrt(std::max(0.0, l1 * l1 * b * b + l2 * l2 * a * a + sign * 2 * l1 * l2 * a * b * c)); };
  const double dp = dd(1.0), dm = dd(-1.0);
  if (dp > 0) {
    sc.Theta_plus = clamped_acos((e2 * a + e1 * b) / dp, sc.angle_clamp);
    sc.Xi_plus = clamped_acos((l1 * b + l2 * a * c) / dp, sc.angle_clamp);
  }
  if (dm > 0) {
    sc.Theta_minus = clamped_acos((e2 * a - e1 * b) / dm, sc.angle_clamp);
    sc.Xi_minus = clamped_acos((l1 * b - l2 * a * c) / dm, sc.angle_clamp);
  }
  return sc;
}

MepiClassification classify_2x2(const MepiEnsemble& mepi, double tol, const MeOptions& opts) {
  if (!mepi.is_2x2()) throw ShapeError("classification needs two subensembles of two states");
  MepiClassification out;
  out.scalars = mepi_scalars(mepi);
  const MepiScalars& sc = out.scalars;
  const Grid g = grid_of(mepi);

  TrivialMepiReport triv = trivial_mepi_check(mepi, tol);
  if (triv.trivial) {
    out.cases = {MepiCase::Trivial_eta1};
    out.p_post = g.eta[0];
    out.v_star = g.mu[0];
    out.support = case_support(MepiCase::Trivial_eta1);
    bool any = false, all = true;
    for (const auto& o : triv.outcomes) {
      any = any || o.nonnull_allowed;
      all = all && o.nonnull_allowed;
    }
    out.unique_measurement = !any;
    out.nonnull_exists = all;
    return out;
  }

  MeOptions gap_opts = opts;
  gap_opts.tol_class = tol;
  if (!pre_strictly_better(mepi, gap_opts).value) {
    out.degenerate = true;
    out.p_post = prior_guess_probability(mepi, opts).p_prior;
    return out;
  }

  const double e1 = sc.eps[0][1], e2 = sc.eps[1][1];
  const double l1 = sc.lam[0][1], l2 = sc.lam[1][1];
  const double c = std::clamp(sc.mu_hat[0].dot(sc.mu_hat[1]), -1.0, 1.0);
  const double al = sc.alpha, bp = sc.beta_plus, bm = sc.beta_minus;
  const double gp = sc.gamma_plus, gm = sc.gamma_minus;
  const double a = l1 * l1 - e1 * e1;
  // Inequalities in cross-multiplied form; every denominator is positive here.
  auto ge = [&](double x, double y) { return x >= y - tol; };
  auto lt = [&](double x, double y) { return x < y + tol; };
  const bool e12_first = ge((e1 + l1 * c) * (l2 - e2), (l1 - e1) * (l1 + e1));
  const bool e12_second = ge((e1 - l1 * c) * (l2 + e2), (l1 + e1) * (l1 - e1));
  const bool e21_first = ge((e2 + l2 * c) * (l1 - e1), (l2 - e2) * (l2 + e2));
  const bool e21_second = ge((e2 - l2 * c) * (l1 + e1), (l2 + e2) * (l2 - e2));
  // Strict negations, again within tol.
  const bool e12_first_fails = lt((e1 + l1 * c) * (l2 - e2), (l1 - e1) * (l1 + e1));
  const bool e12_second_fails = lt((e1 - l1 * c) * (l2 + e2), (l1 + e1) * (l1 - e1));
  const bool e21_first_fails = lt((e2 + l2 * c) * (l1 - e1), (l2 - e2) * (l2 + e2));
  const bool e21_second_fails = lt((e2 - l2 * c) * (l1 + e1), (l2 + e2) * (l2 - e2));

  std::vector<Candidate> cands;
  const auto& eta0 = mepi[0];
  const auto& eta1 = mepi[1];
  if (e12_first && e12_second) {
    double p = eta0.weight(0) + 0.5 * (eta1.weight(0) + eta1.weight(1) + l2);
    Vec3 v = ((l2 + e2) / (2 * l2)) * g.mu[flat(0, 0)] + ((l2 - e2) / (2 * l2)) * g.mu[flat(0, 1)];
    cands.push_back({MepiCase::Edge_11_12, p, v});
  }
  if (e21_first && e21_second) {
    double p = eta1.weight(0) + 0.5 * (eta0.weight(0) + eta0.weight(1) + l1);
    Vec3 v = ((l1 + e1) / (2 * l1)) * g.mu[flat(0, 0)] + ((l1 - e1) / (2 * l1)) * g.mu[flat(1, 0)];
    cands.push_back({MepiCase::Edge_11_21, p, v});
  }
  if (ge(gp * al, std::abs(bp))) {
    double p = 0.5 * (g.eta[flat(0, 0)] + g.eta[flat(1, 1)] + gp);
    Vec3 v = ((gp + e1 + e2) / (2 * gp)) * g.mu[flat(0, 0)] + ((gp - e1 - e2) / (2 * gp)) * g.mu[flat(1, 1)];
    cands.push_back({MepiCase::Diag_11_22, p, v});
  }
  if (gm * al <= -std::abs(bm) + tol) {
    double p = 0.5 * (g.eta[flat(0, 1)] + g.eta[flat(1, 0)] + gm);
    Vec3 v = ((gm + e1 - e2) / (2 * gm)) * g.mu[flat(0, 1)] + ((gm - e1 + e2) / (2 * gm)) * g.mu[flat(1, 0)];
    cands.push_back({MepiCase::AntiDiag_12_21, p, v});
  }
  auto triangle = [&](MepiCase k, double p) {
    auto sup = case_support(k);
    std::array<Vec3, 3> pts;
    std::array<double, 3> r;
    for (int q = 0; q < 3; ++q) {
      pts[q] = g.mu[flat(sup[q])];
      r[q] = p - g.eta[flat(sup[q])];
    }
    cands.push_back({k, p, trilaterate(pts, r)});
  };
  if (e12_first_fails && e21_first_fails && al <= tol && gm * al > -bm - tol) {
    double p = g.eta[flat(0, 0)] + a / (2 * (l1 * std::cos(sc.Theta_minus - sc.Xi_minus) + e1));
    triangle(MepiCase::Tri_11_12_21, p);
  }
  if (e12_second_fails && (e2 + l2 * c) * (l1 - e1) > -(l2 - e2) * (l2 + e2) - tol && al >= -tol &&
      lt(gp * al, bp)) {
    double p = g.eta[flat(0, 1)] - a / (2 * (l1 * std::cos(sc.Theta_plus + sc.Xi_plus) - e1));
    triangle(MepiCase::Tri_11_12_22, p);
  }
  if (e21_second_fails && (e1 + l1 * c) * (l2 - e2) > -(l1 - e1) * (l1 + e1) - tol && al >= -tol &&
      lt(gp * al, -bp)) {
    double p = g.eta[flat(1, 0)] + a / (2 * (l1 * std::cos(sc.Theta_plus - sc.Xi_plus) - e1));
    triangle(MepiCase::Tri_11_21_22, p);
  }
  if (cands.empty()) throw ConsistencyError("no closed-form case matched a strict-gap instance");

  for (const auto& cd : cands) out.cases.push_back(cd.kase);
  bool ok = true;
  for (const auto& cd : cands) {
    if (!self_check(g, cd, 1e-8)) ok = false;
    if (std::abs(cd.p - cands.front().p) > 1e-9) ok = false;
  }
  auto best = std::min_element(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::make_pair(support_size(x.kase), x.kase) < std::make_pair(support_size(y.kase), y.kase);
  });

  bool interior = true;
  for (MepiCase k : out.cases)
    if (k == MepiCase::Edge_11_12 || k == MepiCase::Edge_11_21) interior = false;

  if (ok) {
    out.p_post = best->p;
    out.v_star = best->v;
    out.support = case_support(best->kase);
    out.nonnull_exists = interior && std::abs(al) <= tol;
  } else {
    out.fallback = true;
    ProductEnsemble pe = product_ensemble(mepi);
    MeSolution sol = solve_me(pe.ensemble, opts, pe.outcomes);
    out.p_post = sol.p_guess;
    out.v_star = sol.certificate.v;
    for (std::size_t i : sol.active_sets.front()) out.support.push_back(pe.outcomes[i]);
    out.nonnull_exists = false;
    for (const auto& s : sol.active_sets)
      if (s.size() == 4) out.nonnull_exists = true;
  }
  out.unique_measurement = !out.nonnull_exists;
  return out;
}

Povm optimal_povm_2x2(const MepiEnsemble& mepi, const MepiClassification& cls) {
  if (!mepi.is_2x2()) throw ShapeError("closed forms need two subensembles of two states");
  ProductEnsemble pe = product_ensemble(mepi);
  if (cls.degenerate || !cls.v_star) throw ContractError("classification carries no optimal point");
  if (!cls.cases.empty() && cls.cases.front() == MepiCase::Trivial_eta1)
    return identity_povm(pe.outcomes.size(), pe.outcomes);
  std::vector<std::size_t> face;
  for (const auto& o : cls.support) face.push_back(pe.index_of(o));
  return construct_povm_from_v(pe.ensemble, *cls.v_star, face, pe.outcomes);
}

FacePredicates face_predicates(const ProductEnsemble& product, const std::vector<Outcome>& s_prime,
                               const std::vector<Outcome>& s, const Vec3& v, double tol) {
  if (s_prime.empty()) throw ContractError("S' must be nonempty");
  for (const auto& o : s_prime)
    if (std::find(s.begin(), s.end(), o) == s.end()) throw ContractError("S' must be a subset of S");
  const WeightedEnsemble& e = product.ensemble;
  std::vector<std::size_t> face;
  for (const auto& o : s_prime) face.push_back(product.index_of(o));
  double level = phi(e, face[0], v);
  FacePredicates fp;
  bool equal = true;
  for (std::size_t i : face)
    if (std::abs(phi(e, i, v) - level) > tol) equal = false;
  bool over_rest = true;
  for (const auto& o : s) {
    if (std::find(s_prime.begin(), s_prime.end(), o) != s_prime.end()) continue;
    if (phi(e, product.index_of(o), v) > level + tol) over_rest = false;
  }
  fp.in_X = equal && over_rest && in_face_closure(e, face, v, tol);
  fp.in_Y = true;
  for (std::size_t k = 0; k < product.outcomes.size(); ++k) {
    if (std::find(s.begin(), s.end(), product.outcomes[k]) != s.end()) continue;
    if (phi(e, k, v) > level + tol) fp.in_Y = false;
  }
  return fp;
}

double incompatibility_gap(const MepiEnsemble& mepi, const MeOptions& opts) {
  double prior = prior_guess_probability(mepi, opts).p_prior;
  double post = post_guess_probability(mepi, opts).p_guess;
  return std::max(0.0, prior - post);
}

}  // namespace qmepi

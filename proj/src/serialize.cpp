#include "qmepi/serialize.hpp"

#include <cmath>

#include "qmepi/errors.hpp"

namespace qmepi {

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-vector");
  for (const auto& x : j)
    if (!x.is_number()) throw ValidationError("3-vector entries must be numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

Json outcome_to_json(const Outcome& o) {
  if (o.size() == 1) return o[0];
  return Json(o);
}

Outcome outcome_from_json(const Json& j) {
  if (j.is_number_integer()) return {j.get<int>()};
  if (j.is_array() && !j.empty()) {
    Outcome o;
    for (const auto& x : j) {
      if (!x.is_number_integer()) throw ValidationError("outcome label entries must be integers");
      o.push_back(x.get<int>());
    }
    return o;
  }
  throw ValidationError("outcome label must be an integer or a nonempty integer array");
}

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

double number(const Json& j, const char* key) {
  const Json& x = field(j, key);
  if (!x.is_number()) throw ValidationError(std::string("field \"") + key + "\" must be a number");
  return x.get<double>();
}

std::vector<WeightedState> states_from_json(const Json& j) {
  const Json& arr = field(j, "states");
  if (!arr.is_array()) throw ValidationError("\"states\" must be an array");
  std::vector<WeightedState> states;
  for (const auto& s : arr) states.emplace_back(number(s, "weight"), BlochVector(vec_from_json(field(s, "bloch"))));
  return states;
}

}  // namespace

Json ensemble_to_json(const WeightedEnsemble& e) {
  Json states = Json::array();
  for (const auto& s : e.states()) states.push_back({{"weight", s.weight()}, {"bloch", vec_to_json(s.bloch().vec())}});
  return {{"states", states}, {"normalized", e.normalized()}};
}

WeightedEnsemble ensemble_from_json(const Json& j) {
  auto states = states_from_json(j);
  bool normalized;
  if (j.contains("normalized")) {
    if (!j["normalized"].is_boolean()) throw ValidationError("\"normalized\" must be a boolean");
    normalized = j["normalized"].get<bool>();
  } else {
    double t = 0.0;
    for (const auto& s : states) t += s.weight();
    normalized = std::abs(t - 1.0) <= kTolWeight;
  }
  return WeightedEnsemble(std::move(states), normalized);
}

Json mepi_to_json(const MepiEnsemble& m) {
  Json subs = Json::array();
  for (const auto& e : m.subensembles()) {
    Json sj = ensemble_to_json(e);
    sj.erase("normalized");
    subs.push_back(sj);
  }
  return {{"subensembles", subs}};
}

MepiEnsemble mepi_from_json(const Json& j) {
  const Json& arr = field(j, "subensembles");
  if (!arr.is_array()) throw ValidationError("\"subensembles\" must be an array");
  std::vector<WeightedEnsemble> subs;
  for (const auto& s : arr) subs.emplace_back(states_from_json(s), false);
  return MepiEnsemble(std::move(subs));
}

void to_json(Json& j, const Povm& p) {
  Json eff = Json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    Json e = {{"p", p.effects[i].p()}, {"u", vec_to_json(p.effects[i].u())}};
    if (i < p.labels.size()) e["label"] = outcome_to_json(p.labels[i]);
    eff.push_back(e);
  }
  j = {{"effects", eff}};
}

void from_json(const Json& j, Povm& p) {
  const Json& arr = field(j, "effects");
  if (!arr.is_array() || arr.empty()) throw ValidationError("\"effects\" must be a nonempty array");
  std::vector<Effect> eff;
  std::vector<Outcome> labels;
  bool labelled = true;
  for (const auto& e : arr) {
    eff.emplace_back(number(e, "p"), vec_from_json(field(e, "u")));
    if (e.contains("label"))
      labels.push_back(outcome_from_json(e["label"]));
    else
      labelled = false;
  }
  if (!labelled) labels.clear();
  p = Povm(std::move(eff), std::move(labels));
}

void to_json(Json& j, const DualCertificate& c) {
  Json w = Json::array();
  for (const auto& x : c.w) w.push_back(vec_to_json(x));
  j = {{"s", c.s}, {"v", vec_to_json(c.v)}, {"r", c.r}, {"w", w}};
}

void from_json(const Json& j, DualCertificate& c) {
  c.s = number(j, "s");
  c.v = vec_from_json(field(j, "v"));
  c.r = field(j, "r").get<std::vector<double>>();
  c.w.clear();
  for (const auto& x : field(j, "w")) c.w.push_back(vec_from_json(x));
}

void to_json(Json& j, const KktReport& k) { j = {{"residuals", k.residuals}, {"tol", k.tol}, {"pass", k.pass}}; }

void from_json(const Json& j, KktReport& k) {
  k.residuals = field(j, "residuals").get<std::map<std::string, double>>();
  k.tol = number(j, "tol");
  k.pass = field(j, "pass").get<bool>();
}

namespace {

Json index_sets_to_json(const std::vector<std::vector<std::size_t>>& sets) {
  Json out = Json::array();
  for (const auto& s : sets) {
    Json one = Json::array();
    for (std::size_t i : s) one.push_back(i + 1);
    out.push_back(one);
  }
  return out;
}

std::vector<std::vector<std::size_t>> index_sets_from_json(const Json& j) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : j) {
    std::vector<std::size_t> one;
    for (const auto& i : s) {
      if (!i.is_number_integer() || i.get<long>() < 1) throw ValidationError("active-set entries are 1-based");
      one.push_back(i.get<std::size_t>() - 1);
    }
    out.push_back(one);
  }
  return out;
}

}  // namespace

void to_json(Json& j, const MeSolution& s) {
  j = {{"p_guess", s.p_guess},
       {"v", vec_to_json(s.certificate.v)},
       {"s", s.certificate.s},
       {"active_sets", index_sets_to_json(s.active_sets)},
       {"povm", s.povm},
       {"trivial", s.trivial},
       {"kkt_residuals", s.kkt.residuals},
       {"kkt_pass", s.kkt.pass},
       {"kkt_tol", s.kkt.tol},
       {"certificate", s.certificate}};
}

void from_json(const Json& j, MeSolution& s) {
  s.p_guess = number(j, "p_guess");
  s.certificate = field(j, "certificate").get<DualCertificate>();
  s.active_sets = index_sets_from_json(field(j, "active_sets"));
  s.povm = field(j, "povm").get<Povm>();
  s.trivial = field(j, "trivial").get<bool>();
  s.kkt.residuals = field(j, "kkt_residuals").get<std::map<std::string, double>>();
  s.kkt.pass = field(j, "kkt_pass").get<bool>();
  s.kkt.tol = number(j, "kkt_tol");
}

void to_json(Json& j, const Certification& c) {
  j = {{"primal", c.primal}, {"dual", c.dual},         {"gap", c.gap},
       {"kkt_pass", c.kkt_pass}, {"passed", c.passed}, {"residuals", c.residuals}};
}

void from_json(const Json& j, Certification& c) {
  c.primal = number(j, "primal");
  c.dual = number(j, "dual");
  c.gap = number(j, "gap");
  c.kkt_pass = field(j, "kkt_pass").get<bool>();
  c.passed = field(j, "passed").get<bool>();
  c.residuals = field(j, "residuals").get<std::map<std::string, double>>();
}

void to_json(Json& j, const MinimaxResult& r) {
  Json face = Json::array();
  for (std::size_t i : r.face) face.push_back(i + 1);
  j = {{"s_star", r.s_star}, {"v_star", vec_to_json(r.v_star)}, {"iters", r.iters}, {"face", face}};
}

void from_json(const Json& j, MinimaxResult& r) {
  r.s_star = number(j, "s_star");
  r.v_star = vec_from_json(field(j, "v_star"));
  r.iters = field(j, "iters").get<int>();
  r.face.clear();
  for (const auto& i : field(j, "face")) r.face.push_back(i.get<std::size_t>() - 1);
}

void to_json(Json& j, const MepiScalars& s) {
  Json mu = Json::array();
  for (const auto& v : s.mu_hat) mu.push_back(vec_to_json(v));
  j = {{"eps", s.eps},
       {"lam", s.lam},
       {"mu_hat", mu},
       {"Phi", s.Phi},
       {"alpha", s.alpha},
       {"beta_plus", s.beta_plus},
       {"beta_minus", s.beta_minus},
       {"gamma_plus", s.gamma_plus},
       {"gamma_minus", s.gamma_minus},
       {"Theta_plus", s.Theta_plus},
       {"Theta_minus", s.Theta_minus},
       {"Xi_plus", s.Xi_plus},
       {"Xi_minus", s.Xi_minus},
       {"angle_clamp", s.angle_clamp}};
}

void from_json(const Json& j, MepiScalars& s) {
  s.eps = field(j, "eps").get<std::vector<std::vector<double>>>();
  s.lam = field(j, "lam").get<std::vector<std::vector<double>>>();
  s.mu_hat.clear();
  for (const auto& v : field(j, "mu_hat")) s.mu_hat.push_back(vec_from_json(v));
  s.Phi = number(j, "Phi");
  s.alpha = number(j, "alpha");
  s.beta_plus = number(j, "beta_plus");
  s.beta_minus = number(j, "beta_minus");
  s.gamma_plus = number(j, "gamma_plus");
  s.gamma_minus = number(j, "gamma_minus");
  s.Theta_plus = number(j, "Theta_plus");
  s.Theta_minus = number(j, "Theta_minus");
  s.Xi_plus = number(j, "Xi_plus");
  s.Xi_minus = number(j, "Xi_minus");
  s.angle_clamp = number(j, "angle_clamp");
}

void to_json(Json& j, const MepiClassification& c) {
  Json cases = Json::array();
  for (MepiCase k : c.cases) cases.push_back(to_string(k));
  Json support = Json::array();
  for (const auto& o : c.support) support.push_back(outcome_to_json(o));
  j = {{"cases", cases},
       {"p_post", c.p_post},
       {"v_star", c.v_star ? vec_to_json(*c.v_star) : Json(nullptr)},
       {"support", support},
       {"unique_measurement", c.unique_measurement},
       {"nonnull_exists", c.nonnull_exists},
       {"degenerate", c.degenerate},
       {"fallback", c.fallback},
       {"scalars", c.scalars}};
}

void from_json(const Json& j, MepiClassification& c) {
  c.cases.clear();
  for (const auto& k : field(j, "cases")) c.cases.push_back(case_from_string(k.get<std::string>()));
  c.p_post = number(j, "p_post");
  const Json& v = field(j, "v_star");
  c.v_star = v.is_null() ? std::nullopt : std::optional<Vec3>(vec_from_json(v));
  c.support.clear();
  for (const auto& o : field(j, "support")) c.support.push_back(outcome_from_json(o));
  c.unique_measurement = field(j, "unique_measurement").get<bool>();
  c.nonnull_exists = field(j, "nonnull_exists").get<bool>();
  c.degenerate = field(j, "degenerate").get<bool>();
  c.fallback = field(j, "fallback").get<bool>();
  c.scalars = field(j, "scalars").get<MepiScalars>();
}

}  // namespace qmepi

#include "qmepi/cli.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "qmepi/errors.hpp"
#include "qmepi/mepi_solver.hpp"
#include "qmepi/serialize.hpp"

namespace qmepi {

Command command_from_string(const std::string& s) {
  if (s == "solve-me") return Command::SolveMe;
  if (s == "solve-mepi") return Command::SolveMepi;
  if (s == "classify") return Command::Classify;
  if (s == "verify") return Command::Verify;
  if (s == "oracle") return Command::Oracle;
  if (s == "geometry") return Command::Geometry;
  throw ValidationError("unknown command: " + s);
}

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  throw ValidationError("unknown format: " + s);
}

namespace {

constexpr double kCertTol = 1e-8;
constexpr double kAgreeTol = 1e-7;

Json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("input is not valid JSON: ") + e.what());
  }
}

MeOptions options_from(const RunConfig& c) {
  MeOptions o;
  if (c.tol_class) o.tol_class = *c.tol_class;
  if (c.tol_value) o.minimax.tol_value = *c.tol_value;
  if (c.seed) o.minimax.seed = *c.seed;
  o.validate();
  return o;
}

Json one_based(const std::vector<std::size_t>& order) {
  Json j = Json::array();
  for (std::size_t k : order) j.push_back(k + 1);
  return j;
}

Json mepi_input_order(const MepiEnsemble& m) {
  Json j = Json::array();
  for (const auto& s : m.subensembles()) j.push_back(one_based(s.input_order()));
  return j;
}

// Refuses to hand out a probability that failed certification.
void require_certified(const Certification& cert, const RunConfig& c, Json& result) {
  result["certification"] = cert;
  result["certified"] = cert.passed;
  if (!cert.passed && !c.uncertified) {
    std::ostringstream os;
    os << "result failed certification (gap " << cert.gap << ", kkt " << (cert.kkt_pass ? "pass" : "fail")
       << "); rerun with --uncertified to print it anyway";
    throw ConsistencyError(os.str());
  }
}

Json solve_me_cmd(const Json& in, const RunConfig& c) {
  WeightedEnsemble ens = ensemble_from_json(in);
  MeOptions opts = options_from(c);
  MeSolution sol = solve_me(ens, opts);
  Json r = {{"command", "solve-me"}, {"input_order", one_based(ens.input_order())}, {"solution", sol}};
  require_certified(certify(ens, sol.povm, sol.certificate.s, sol.certificate.v, kCertTol), c, r);
  return r;
}

Json solve_mepi_cmd(const Json& in, const RunConfig& c) {
  MepiEnsemble mepi = mepi_from_json(in);
  MeOptions opts = options_from(c);
  PriorResult prior = prior_guess_probability(mepi, opts);
  MeSolution post = post_guess_probability(mepi, opts);
  Json r = {{"command", "solve-mepi"},
            {"input_order", mepi_input_order(mepi)},
            {"p_post", post.p_guess},
            {"p_prior", prior.p_prior},
            {"per_subensemble", prior.per_subensemble},
            {"gap", std::max(0.0, prior.p_prior - post.p_guess)},
            {"classification", nullptr}};
  if (mepi.is_2x2()) {
    MepiClassification cls = classify_2x2(mepi, opts.tol_class, opts);
    if (std::abs(cls.p_post - post.p_guess) > kAgreeTol) {
      std::ostringstream os;
      os << "closed form " << cls.p_post << " disagrees with the generic solver " << post.p_guess;
      throw ConsistencyError(os.str());
    }
    r["classification"] = cls;
  }
  r["povm"] = post.povm;
  Json marg = Json::array();
  for (const auto& p : marginal_povms(post.povm, mepi)) marg.push_back(p);
  r["marginals"] = marg;
  r["solution"] = post;
  ProductEnsemble pe = product_ensemble(mepi);
  require_certified(certify(pe.ensemble, post.povm, post.certificate.s, post.certificate.v, kCertTol), c, r);
  return r;
}

Json classify_cmd(const Json& in, const RunConfig& c) {
  MepiEnsemble mepi = mepi_from_json(in);
  if (!mepi.is_2x2()) throw ShapeError("classify needs two subensembles of two states each");
  MeOptions opts = options_from(c);
  MepiClassification cls = classify_2x2(mepi, opts.tol_class, opts);
  Json r = {{"command", "classify"}, {"input_order", mepi_input_order(mepi)}, {"classification", cls}};
  if (!cls.degenerate) {
    Povm povm = optimal_povm_2x2(mepi, cls);
    ProductEnsemble pe = product_ensemble(mepi);
    r["povm"] = povm;
    require_certified(certify(pe.ensemble, povm, cls.p_post, *cls.v_star, kCertTol), c, r);
  }
  return r;
}

// Maps effects given against the input order onto the sorted ensemble.
Povm align_me(const WeightedEnsemble& ens, const Povm& given) {
  if (given.size() != ens.size()) throw ShapeError("POVM and ensemble differ in length");
  std::vector<Effect> eff;
  for (std::size_t k : ens.input_order()) eff.push_back(given.effects[k]);
  return Povm(std::move(eff));
}

Povm align_mepi(const MepiEnsemble& mepi, const ProductEnsemble& pe, const Povm& given) {
  if (given.size() != pe.outcomes.size()) throw ShapeError("POVM and product ensemble differ in length");
  // Input tuples refer to input positions; translate to sorted positions.
  std::vector<std::vector<int>> sorted_pos(mepi.size());
  for (std::size_t b = 0; b < mepi.size(); ++b) {
    sorted_pos[b].resize(mepi[b].size());
    for (std::size_t k = 0; k < mepi[b].size(); ++k)
      sorted_pos[b][mepi[b].input_order()[k]] = static_cast<int>(k + 1);
  }
  std::vector<Effect> eff(pe.outcomes.size());
  std::vector<bool> seen(pe.outcomes.size(), false);
  for (std::size_t k = 0; k < given.size(); ++k) {
    const Outcome& o = given.labels[k];
    if (o.size() != mepi.size()) throw ShapeError("POVM labels must be tuples with one entry per subensemble");
    Outcome mapped(o.size());
    for (std::size_t b = 0; b < o.size(); ++b) {
      if (o[b] < 1 || o[b] > static_cast<int>(mepi[b].size())) throw ShapeError("POVM label out of range");
      mapped[b] = sorted_pos[b][o[b] - 1];
    }
    std::size_t idx = pe.index_of(mapped);
    if (seen[idx]) throw ValidationError("duplicate POVM label");
    seen[idx] = true;
    eff[idx] = given.effects[k];
  }
  return Povm(std::move(eff), pe.outcomes);
}

Json verify_cmd(const Json& in, const RunConfig& c, bool& passed) {
  if (!in.contains("povm")) throw ValidationError("missing field \"povm\"");
  Povm given = in["povm"].get<Povm>();
  std::optional<WeightedEnsemble> ens;
  Povm povm;
  if (in.contains("subensembles")) {
    MepiEnsemble mepi = mepi_from_json(in);
    ProductEnsemble pe = product_ensemble(mepi);
    if (given.labels.size() == given.size() && given.labels.front().size() == 1 && pe.outcomes.size() == given.size()) {
      // Unlabelled: effects in lexicographic tuple order.
      std::vector<Outcome> lex;
      Outcome o(mepi.size(), 1);
      for (std::size_t k = 0; k < given.size(); ++k) {
        lex.push_back(o);
        for (std::size_t b = mepi.size(); b-- > 0;) {
          if (o[b] < static_cast<int>(mepi[b].size())) {
            ++o[b];
            break;
          }
          o[b] = 1;
        }
      }
      given.labels = lex;
    }
    povm = align_mepi(mepi, pe, given);
    ens.emplace(pe.ensemble);
  } else {
    ens.emplace(ensemble_from_json(in));
    povm = align_me(*ens, given);
  }
  double s;
  Vec3 v;
  bool from_oracle = !(in.contains("s") && in.contains("v"));
  if (from_oracle) {
    MeOptions opts = options_from(c);
    MinimaxResult mm = dual_minimax(*ens, opts.minimax);
    s = mm.s_star;
    v = mm.v_star;
  } else {
    if (!in["s"].is_number()) throw ValidationError("\"s\" must be a number");
    s = in["s"].get<double>();
    v = vec_from_json(in["v"]);
  }
  PovmReport pr = validate_povm(povm, kCertTol);
  Json viol = Json::array();
  for (const auto& x : pr.violations)
    viol.push_back({{"constraint", x.constraint}, {"index", x.index}, {"magnitude", x.magnitude}});
  Certification cert = certify(*ens, povm, s, v, kCertTol);
  passed = cert.passed && pr.valid();
  return {{"command", "verify"},
          {"success_probability", success_probability(*ens, povm)},
          {"s", s},
          {"v", vec_to_json(v)},
          {"dual_from_oracle", from_oracle},
          {"povm_violations", viol},
          {"certification", cert},
          {"pass", passed}};
}

Json oracle_cmd(const Json& in, const RunConfig& c) {
  MeOptions opts = options_from(c);
  if (in.contains("subensembles")) {
    MepiEnsemble mepi = mepi_from_json(in);
    ProductEnsemble pe = product_ensemble(mepi);
    MinimaxResult mm = dual_minimax(pe.ensemble, opts.minimax);
    Json outcomes = Json::array();
    for (const auto& o : pe.outcomes) outcomes.push_back(outcome_to_json(o));
    return {{"command", "oracle"}, {"input_order", mepi_input_order(mepi)}, {"outcomes", outcomes}, {"result", mm}};
  }
  WeightedEnsemble ens = ensemble_from_json(in);
  MinimaxResult mm = dual_minimax(ens, opts.minimax);
  return {{"command", "oracle"}, {"input_order", one_based(ens.input_order())}, {"result", mm}};
}

std::string num(double x) { return Json(x).dump(); }

std::string omega_text(const Outcome& o) {
  std::string s = "(";
  for (std::size_t b = 0; b < o.size(); ++b) s += (b ? "," : "") + std::to_string(o[b]);
  return s + ")";
}

void geometry_cmd(const Json& in, const RunConfig& c, std::ostream& out) {
  MepiEnsemble mepi = mepi_from_json(in);
  if (!mepi.is_2x2()) throw ShapeError("geometry needs two subensembles of two states each");
  MeOptions opts = options_from(c);
  MepiClassification cls = classify_2x2(mepi, opts.tol_class, opts);
  Vec3 z = cls.v_star ? *cls.v_star : post_guess_probability(mepi, opts).certificate.v;
  std::vector<std::pair<Outcome, Vec3>> verts;
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j) verts.push_back({{i, j}, mepi[0].point(i - 1) + mepi[1].point(j - 1)});
  if (c.format == Format::Csv) {
    for (const auto& [o, p] : verts)
      out << "vertex,\"" << omega_text(o) << "\"," << num(p.x()) << ',' << num(p.y()) << ',' << num(p.z()) << '\n';
    out << "zpoint,-," << num(z.x()) << ',' << num(z.y()) << ',' << num(z.z()) << '\n';
    if (cls.cases.empty()) out << "case,none\n";
    for (MepiCase k : cls.cases) out << "case," << to_string(k) << '\n';
    return;
  }
  Json vj = Json::array();
  for (const auto& [o, p] : verts) vj.push_back({{"omega", o}, {"point", vec_to_json(p)}});
  Json cases = Json::array();
  for (MepiCase k : cls.cases) cases.push_back(to_string(k));
  out << Json{{"command", "geometry"}, {"vertices", vj}, {"v_star", vec_to_json(z)}, {"cases", cases}}.dump(2)
      << '\n';
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.tol_class && !(*config.tol_class > 0)) throw ValidationError("--tol-class must be positive");
    if (config.tol_value && !(*config.tol_value > 0)) throw ValidationError("--tol-value must be positive");
    if (config.format == Format::Csv && config.command != Command::Geometry)
      throw ValidationError("csv output is only available for geometry");
    Json in = load(config.input_path);
    std::ostringstream buf;
    int code = kExitOk;
    switch (config.command) {
      case Command::SolveMe: buf << solve_me_cmd(in, config).dump(2) << '\n'; break;
      case Command::SolveMepi: buf << solve_mepi_cmd(in, config).dump(2) << '\n'; break;
      case Command::Classify: buf << classify_cmd(in, config).dump(2) << '\n'; break;
      case Command::Verify: {
        bool passed = false;
        buf << verify_cmd(in, config, passed).dump(2) << '\n';
        if (!passed) code = kExitVerifyFailed;
        break;
      }
      case Command::Oracle: buf << oracle_cmd(in, config).dump(2) << '\n'; break;
      case Command::Geometry: geometry_cmd(in, config, buf); break;
    }
    if (config.output_path) {
      std::ofstream f(*config.output_path);
      if (!f) throw ValidationError("cannot open output file: " + *config.output_path);
      f << buf.str();
    } else {
      out << buf.str();
    }
    return code;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ContractError& e) {
    err << "contract error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Json::exception& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << " (best s " << e.best_s() << ")\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    err << "consistency error: " << e.what() << '\n';
    return kExitConsistency;
  }
}

}  // namespace qmepi

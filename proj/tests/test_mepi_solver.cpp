#include <cmath>

#include <gtest/gtest.h>

#include "qmepi/errors.hpp"
#include "qmepi/geometry.hpp"
#include "qmepi/mepi_solver.hpp"
#include "test_support.hpp"

using namespace qmepi;
using namespace qmepi::testing;

namespace {

const double kHelstrom = 0.5 * (1 + std::sqrt(0.5));

bool has(const MepiClassification& c, MepiCase k) {
  return std::find(c.cases.begin(), c.cases.end(), k) != c.cases.end();
}

MepiEnsemble trivial_instance() {
  return make_mepi({{0.3, 0.2}, {0.3, 0.2}}, {{Vec3(0, 0, 0.5), Vec3(0, 0, 0.7)}, {Vec3(0.4, 0, 0), Vec3(0.5, 0, 0)}});
}

MepiEnsemble collinear_instance() {
  return make_mepi({{0.3, 0.2}, {0.25, 0.25}}, {{Vec3(0, 0, 1), Vec3(0, 0, -1)}, {Vec3(0, 0, 0.5), Vec3(0, 0, -0.9)}});
}

MepiEnsemble random_strict(Lcg& rng) {
  for (;;) {
    auto m = random_mepi(rng, {2, 2});
    if (pre_strictly_better(m).value) return m;
  }
}

}  // namespace

TEST(ProductEnsemble, Bb84Sums) {
  auto pe = product_ensemble(bb84());
  ASSERT_EQ(pe.ensemble.size(), 4u);
  EXPECT_EQ(pe.outcomes.front(), (Outcome{1, 1}));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_DOUBLE_EQ(pe.ensemble.weight(k), 0.5);
    EXPECT_DOUBLE_EQ(std::abs(pe.ensemble.point(k).x()), 0.25);
    EXPECT_DOUBLE_EQ(std::abs(pe.ensemble.point(k).z()), 0.25);
  }
  EXPECT_EQ(pe.outcomes, (std::vector<Outcome>{{1, 1}, {1, 2}, {2, 1}, {2, 2}}));
  EXPECT_NEAR((pe.ensemble.point(pe.index_of({1, 2})) - Vec3(0.25, 0, -0.25)).norm(), 0.0, 1e-16);
}

TEST(ProductEnsemble, IdenticalSecondSubensembleCollapsesDifferences) {
  auto m = make_mepi({{0.3, 0.2}, {0.25, 0.25}}, {{Vec3(0, 0, 1), Vec3(1, 0, 0)}, {Vec3(0, 1, 0), Vec3(0, 1, 0)}});
  auto pe = product_ensemble(m);
  Vec3 d1 = pe.ensemble.point(pe.index_of({1, 2})) - pe.ensemble.point(pe.index_of({1, 1}));
  EXPECT_NEAR(d1.norm(), 0.0, 1e-16);
}

TEST(ProductEnsemble, WeightsOvercount) {
  Lcg rng(41);
  for (auto shape : std::vector<std::vector<std::size_t>>{{2, 2}, {3, 2}, {2, 2, 2}}) {
    auto m = random_mepi(rng, shape);
    auto pe = product_ensemble(m);
    double t = pe.ensemble.total_weight();
    EXPECT_GT(t, 1.0);
    // Each state is counted once per combination of the other subensembles.
    double expect = 0;
    for (std::size_t b = 0; b < m.size(); ++b) {
      double others = 1;
      for (std::size_t c = 0; c < m.size(); ++c)
        if (c != b) others *= static_cast<double>(m[c].size());
      expect += others * m[b].total_weight();
    }
    EXPECT_NEAR(t, expect, 1e-12);
    for (std::size_t k = 0; k < pe.outcomes.size(); ++k) {
      double w = 0;
      Vec3 p = Vec3::Zero();
      for (std::size_t b = 0; b < m.size(); ++b) {
        w += m[b].weight(pe.outcomes[k][b] - 1);
        p += m[b].point(pe.outcomes[k][b] - 1);
      }
      EXPECT_NEAR(pe.ensemble.weight(k), w, 1e-12);
      EXPECT_NEAR((pe.ensemble.point(k) - p).norm(), 0.0, 1e-12);
    }
    EXPECT_EQ(pe.index_of(Outcome(m.size(), 1)), 0u);
  }
}

TEST(ProductEnsemble, ParallelogramIdentity) {
  Lcg rng(42);
  for (int t = 0; t < 200; ++t) {
    auto pe = product_ensemble(random_mepi(rng, {2, 2}));
    auto pt = [&](Outcome o) { return pe.ensemble.point(pe.index_of(o)); };
    EXPECT_NEAR(((pt({2, 1}) - pt({1, 1})) - (pt({2, 2}) - pt({1, 2}))).norm(), 0.0, 1e-12);
  }
}

TEST(PriorGuess, Examples) {
  EXPECT_NEAR(prior_guess_probability(bb84()).p_prior, 1.0, 1e-9);
  auto m = make_mepi({{0.3, 0.2}, {0.3, 0.2}}, {{Vec3(0, 0, 0.5), Vec3(0, 0, 0.7)}, {Vec3(1, 0, 0), Vec3(-1, 0, 0)}});
  EXPECT_EQ(prior_guess_probability(m).per_subensemble[0], 0.3);
  EXPECT_NEAR(prior_guess_probability(edge_instance()).p_prior, 0.955, 1e-12);
}

TEST(PostGuess, Examples) {
  auto bb = post_guess_probability(bb84());
  EXPECT_NEAR(bb.p_guess, kHelstrom, 1e-12);
  EXPECT_EQ(bb.povm.labels.front(), (Outcome{1, 1}));
  auto col = collinear_instance();
  EXPECT_NEAR(post_guess_probability(col).p_guess, prior_guess_probability(col).p_prior, 1e-9);
  EXPECT_EQ(post_guess_probability(trivial_instance()).p_guess, 0.6);
}

TEST(MarginalPovms, IdentityGivesIdentities) {
  auto m = bb84();
  auto pe = product_ensemble(m);
  auto marg = marginal_povms(identity_povm(4, pe.outcomes), m);
  ASSERT_EQ(marg.size(), 2u);
  for (const auto& p : marg) {
    EXPECT_EQ(p.effects[0].p(), 1.0);
    EXPECT_EQ(p.effects[1].p(), 0.0);
  }
}

TEST(MarginalPovms, Bb84MarginalsAreValidAndReproduceSuccess) {
  auto m = bb84();
  auto sol = post_guess_probability(m);
  auto marg = marginal_povms(sol.povm, m);
  double total = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    EXPECT_TRUE(validate_povm(marg[b], 1e-12).valid());
    for (std::size_t i = 0; i < 2; ++i) total += m[b].weight(i) * effect_probability(marg[b].effects[i], m[b][i].bloch());
    // Binary measurement along a direction with both x and z parts.
    Vec3 u = marg[b].effects[0].u();
    EXPECT_NEAR(std::abs(u.x()), std::abs(u.z()), 1e-9);
  }
  EXPECT_NEAR(total, sol.p_guess, 1e-12);
}

TEST(MarginalPovms, RelabelingPermutesOneMarginal) {
  Lcg rng(43);
  auto m = random_mepi(rng, {2, 2});
  auto sol = post_guess_probability(m);
  Povm relabeled = sol.povm;
  for (auto& l : relabeled.labels) l[1] = 3 - l[1];
  auto a = marginal_povms(sol.povm, m), b = marginal_povms(relabeled, m);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(a[0].effects[i].p(), b[0].effects[i].p());
    EXPECT_EQ(a[1].effects[i].p(), b[1].effects[1 - i].p());
  }
}

TEST(MarginalPovms, RejectsMalformedLabels) {
  auto m = bb84();
  EXPECT_THROW(marginal_povms(identity_povm(4), m), ShapeError);
  EXPECT_THROW(marginal_povms(identity_povm(2, {{1, 1}, {1, 3}}), m), ShapeError);
}

TEST(PreStrictlyBetter, Examples) {
  EXPECT_TRUE(pre_strictly_better(bb84()).value);
  EXPECT_FALSE(pre_strictly_better(collinear_instance()).value);
  auto m = make_mepi({{0.45, 0.05}, {0.25, 0.25}}, {{Vec3(0, 0, 0.5), Vec3(0, 0, 1)}, {Vec3(1, 0, 0), Vec3(-1, 0, 0)}});
  EXPECT_FALSE(pre_strictly_better(m).value);
}

TEST(PreStrictlyBetter, NumericPathForLargerSubensembles) {
  Lcg rng(44);
  for (int t = 0; t < 10; ++t) {
    auto m = random_mepi(rng, {3, 2});
    auto g = pre_strictly_better(m);
    EXPECT_TRUE(g.numeric);
    double gap = prior_guess_probability(m).p_prior - post_guess_probability(m).p_guess;
    EXPECT_EQ(g.value, gap > 1e-9);
  }
}

TEST(PreStrictlyBetter, AgreesWithNumericComparison) {
  Lcg rng(45);
  for (int t = 0; t < 200; ++t) {
    auto m = random_mepi(rng, {2, 2});
    double gap = prior_guess_probability(m).p_prior - post_guess_probability(m).p_guess;
    if (pre_strictly_better(m).value)
      EXPECT_GT(gap, 1e-12);
    else
      EXPECT_NEAR(gap, 0.0, 1e-9);
  }
}

TEST(TrivialMepiCheck, Examples) {
  auto r = trivial_mepi_check(trivial_instance());
  EXPECT_TRUE(r.trivial);
  EXPECT_EQ(r.outcomes.size(), 3u);
  EXPECT_EQ(post_guess_probability(trivial_instance()).p_guess, 0.6);

  EXPECT_FALSE(trivial_mepi_check(edge_instance()).trivial);

  // Both pairs on their boundary with a shared direction -z.
  auto m = make_mepi({{0.4, 0.1}, {0.4, 0.1}}, {{Vec3(0, 0, 1), Vec3(0, 0, 1)}, {Vec3(0, 0, 1), Vec3(0, 0, 1)}});
  auto b = trivial_mepi_check(m);
  ASSERT_TRUE(b.trivial);
  bool found = false;
  for (const auto& o : b.outcomes)
    if (o.omega == Outcome{2, 2}) {
      found = true;
      EXPECT_TRUE(o.nonnull_allowed);
      EXPECT_NEAR((o.direction - Vec3(0, 0, -1)).norm(), 0.0, 1e-12);
    }
  EXPECT_TRUE(found);
}

TEST(TrivialMepiCheck, OutcomeBoundaryMatchesPairwiseCondition) {
  Lcg rng(46);
  for (int t = 0; t < 50; ++t) {
    // Boundary pairs along a shared random direction, or a strict one.
    Vec3 d = random_unit(rng);
    double w11 = 0.35, w21 = 0.15, w12 = 0.3, w22 = 0.2;
    Vec3 a11 = 0.2 * random_in_ball(rng), a12 = 0.2 * random_in_ball(rng);
    bool shared = t % 2 == 0;
    Vec3 d2 = shared ? d : random_unit(rng);
    Vec3 a21 = a11 + (w11 - w21) * d, a22 = a12 + (w12 - w22) * d2;
    if (a21.norm() > w21 || a22.norm() > w22) continue;
    auto m = make_mepi({{w11, w21}, {w12, w22}}, {{a11 / w11, a21 / w21}, {a12 / w12, a22 / w22}});
    auto r = trivial_mepi_check(m);
    ASSERT_TRUE(r.trivial);
    for (const auto& o : r.outcomes)
      if (o.omega == Outcome{2, 2}) {
        EXPECT_EQ(o.nonnull_allowed, shared || (d - d2).norm() < 1e-9);
      }
  }
}

TEST(Classify, Bb84) {
  auto c = classify_2x2(bb84());
  EXPECT_TRUE(has(c, MepiCase::Diag_11_22));
  EXPECT_TRUE(has(c, MepiCase::AntiDiag_12_21));
  EXPECT_TRUE(has(c, MepiCase::Tri_11_12_21));
  EXPECT_TRUE(has(c, MepiCase::Tri_11_12_22));
  EXPECT_TRUE(has(c, MepiCase::Tri_11_21_22));
  EXPECT_NEAR(c.p_post, kHelstrom, 1e-12);
  EXPECT_NEAR(c.scalars.alpha, 0.0, 1e-15);
  EXPECT_NEAR(c.scalars.gamma_plus, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(c.scalars.Phi, M_PI / 2, 1e-15);
  EXPECT_TRUE(c.nonnull_exists);
  EXPECT_FALSE(c.unique_measurement);
  EXPECT_FALSE(c.fallback);
  ASSERT_TRUE(c.v_star);
  EXPECT_NEAR(c.v_star->norm(), 0.0, 1e-15);
}

TEST(Classify, EdgeInstance) {
  auto c = classify_2x2(edge_instance());
  EXPECT_EQ(c.cases, (std::vector<MepiCase>{MepiCase::Edge_11_12}));
  EXPECT_NEAR(c.p_post, 0.95, 1e-12);
  EXPECT_NEAR(c.scalars.eps[0][1], 0.4, 1e-15);
  EXPECT_NEAR(c.scalars.lam[0][1], 0.41, 1e-15);
  EXPECT_NEAR(c.scalars.lam[1][1], 0.5, 1e-15);
  EXPECT_NEAR((c.scalars.mu_hat[0] - Vec3(0, 0, -1)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((c.scalars.mu_hat[1] - Vec3(-1, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_TRUE(c.unique_measurement);
  double gap = prior_guess_probability(edge_instance()).p_prior - c.p_post;
  EXPECT_NEAR(gap, 0.5 * (0.41 - 0.4), 1e-12);
}

TEST(Classify, RejectsOtherShapes) {
  Lcg rng(47);
  EXPECT_THROW(classify_2x2(random_mepi(rng, {2, 3})), ShapeError);
  EXPECT_THROW(classify_2x2(random_mepi(rng, {2, 2, 2})), ShapeError);
}

TEST(Classify, TrivialAndDegenerateReports) {
  auto t = classify_2x2(trivial_instance());
  EXPECT_EQ(t.cases, (std::vector<MepiCase>{MepiCase::Trivial_eta1}));
  EXPECT_EQ(t.p_post, 0.6);
  auto d = classify_2x2(collinear_instance());
  EXPECT_TRUE(d.degenerate);
  EXPECT_TRUE(d.cases.empty());
  EXPECT_FALSE(d.v_star);
  EXPECT_NEAR(d.p_post, prior_guess_probability(collinear_instance()).p_prior, 1e-12);
}

TEST(OptimalPovm2x2, EdgeIsMeasurementOfSecondSubensemble) {
  auto m = edge_instance();
  auto c = classify_2x2(m);
  Povm p = optimal_povm_2x2(m, c);
  auto pe = product_ensemble(m);
  std::size_t i11 = pe.index_of({1, 1}), i12 = pe.index_of({1, 2});
  EXPECT_NEAR(p.effects[i11].p(), 0.5, 1e-12);
  EXPECT_NEAR(p.effects[i12].p(), 0.5, 1e-12);
  EXPECT_NEAR((p.effects[i11].u() - Vec3(1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.effects[i12].u() - Vec3(-1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_EQ(p.effects[pe.index_of({2, 1})].p(), 0.0);
  EXPECT_EQ(p.effects[pe.index_of({2, 2})].p(), 0.0);
}

TEST(OptimalPovm2x2, Bb84DiagonalPair) {
  auto m = bb84();
  auto c = classify_2x2(m);
  Povm p = optimal_povm_2x2(m, c);
  auto pe = product_ensemble(m);
  Vec3 d = Vec3(1, 0, 1).normalized();
  EXPECT_NEAR((p.effects[pe.index_of({1, 1})].u() - d).norm(), 0.0, 1e-12);
  EXPECT_NEAR((p.effects[pe.index_of({2, 2})].u() + d).norm(), 0.0, 1e-12);
  EXPECT_NEAR(success_probability(pe.ensemble, p), kHelstrom, 1e-12);
}

TEST(OptimalPovm2x2, TrivialIsIdentity) {
  auto m = trivial_instance();
  Povm p = optimal_povm_2x2(m, classify_2x2(m));
  EXPECT_EQ(p.effects[0].p(), 1.0);
  EXPECT_EQ(p.labels[0], (Outcome{1, 1}));
  EXPECT_THROW(optimal_povm_2x2(collinear_instance(), classify_2x2(collinear_instance())), ContractError);
}

TEST(FacePredicates, Examples) {
  auto m = edge_instance();
  auto pe = product_ensemble(m);
  auto c = classify_2x2(m);
  std::vector<Outcome> edge{{1, 1}, {1, 2}};
  std::vector<Outcome> all{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
  auto a = face_predicates(pe, edge, edge, *c.v_star);
  EXPECT_TRUE(a.in_X);
  auto b = face_predicates(pe, edge, all, *c.v_star);
  EXPECT_TRUE(b.in_X);
  EXPECT_TRUE(b.in_Y);
  for (const auto& s : std::vector<std::vector<Outcome>>{edge, {{1, 1}, {2, 2}}, {{1, 1}, {1, 2}, {2, 1}}, all})
    EXPECT_FALSE(face_predicates(pe, s, all, Vec3(3, 3, 3)).in_X);
  EXPECT_THROW(face_predicates(pe, all, edge, Vec3::Zero()), ContractError);
}

TEST(IncompatibilityGap, Examples) {
  EXPECT_NEAR(incompatibility_gap(bb84()), 1 - kHelstrom, 1e-12);
  EXPECT_NEAR(incompatibility_gap(collinear_instance()), 0.0, 1e-9);
  EXPECT_NEAR(incompatibility_gap(edge_instance()), 0.005, 1e-12);
}

TEST(MepiProperties, SandwichAndEquivalence) {
  Lcg rng(48);
  for (int t = 0; t < 200; ++t) {
    auto m = random_mepi(rng, {2, 2});
    auto pe = product_ensemble(m);
    double post = post_guess_probability(m).p_guess;
    double prior = prior_guess_probability(m).p_prior;
    EXPECT_GE(post, pe.ensemble.weight(0) - 1e-12);
    EXPECT_LE(post, prior + 1e-12);
    auto c = classify_2x2(m);
    EXPECT_NEAR(c.p_post, post, 1e-7);
    EXPECT_FALSE(c.fallback);
  }
}

TEST(MepiProperties, SandwichOnLargerShapes) {
  Lcg rng(49);
  for (auto shape : std::vector<std::vector<std::size_t>>{{3, 2}, {2, 2, 2}, {3, 3}}) {
    for (int t = 0; t < 5; ++t) {
      auto m = random_mepi(rng, shape);
      double post = post_guess_probability(m).p_guess;
      EXPECT_GE(post, product_ensemble(m).ensemble.weight(0) - 1e-12);
      EXPECT_LE(post, prior_guess_probability(m).p_prior + 1e-12);
    }
  }
}

TEST(MepiProperties, ForbiddenFacesStayEmpty) {
  Lcg rng(50);
  std::vector<Outcome> all{{1, 1}, {1, 2}, {2, 1}, {2, 2}};
  for (int t = 0; t < 200; ++t) {
    auto m = random_strict(rng);
    auto pe = product_ensemble(m);
    auto c = classify_2x2(m);
    // Candidate points: the analytic point, the equal-phi points of each
    // forbidden face, and a coarse grid around the parallelogram.
    std::vector<Vec3> cands{*c.v_star};
    for (const auto& face : std::vector<std::vector<Outcome>>{{{2, 1}, {2, 2}}, {{1, 2}, {2, 2}}, {{1, 2}, {2, 1}, {2, 2}}}) {
      std::vector<double> w;
      std::vector<Vec3> p;
      for (const auto& o : face) {
        w.push_back(pe.ensemble.weight(pe.index_of(o)));
        p.push_back(pe.ensemble.point(pe.index_of(o)));
      }
      if (auto v = equal_phi_point(w, p, *c.v_star)) cands.push_back(*v);
    }
    for (int a = -4; a <= 4; ++a)
      for (int b = -4; b <= 4; ++b)
        for (int d = -4; d <= 4; ++d) cands.push_back(*c.v_star + 0.1 * Vec3(a, b, d));
    for (const Vec3& v : cands) {
      EXPECT_FALSE(face_predicates(pe, {{2, 1}, {2, 2}}, all, v, 1e-9).in_X);
      EXPECT_FALSE(face_predicates(pe, {{1, 2}, {2, 2}}, all, v, 1e-9).in_X);
      EXPECT_FALSE(face_predicates(pe, {{1, 2}, {2, 1}, {2, 2}}, all, v, 1e-9).in_X);
    }
  }
}

TEST(MepiProperties, NonNullExactlyWhenAlphaVanishesInside) {
  Lcg rng(51);
  for (int t = 0; t < 300; ++t) {
    auto c = classify_2x2(random_strict(rng));
    bool interior = !c.cases.empty();
    for (MepiCase k : c.cases)
      if (k == MepiCase::Edge_11_12 || k == MepiCase::Edge_11_21) interior = false;
    if (interior) {
      EXPECT_EQ(c.nonnull_exists, std::abs(c.scalars.alpha) <= 1e-9);
    }
  }
  EXPECT_TRUE(classify_2x2(bb84()).nonnull_exists);
}

TEST(MepiProperties, NonUniqueInstancesHaveTwoOptimalPovms) {
  // Scaled BB84 variants keep alpha = 0.
  for (double r : {1.0, 0.8, 0.5}) {
    auto m = make_mepi({{0.25, 0.25}, {0.25, 0.25}},
                       {{Vec3(r, 0, 0), Vec3(-r, 0, 0)}, {Vec3(0, 0, 1), Vec3(0, 0, -1)}});
    auto c = classify_2x2(m);
    ASSERT_FALSE(c.unique_measurement);
    auto pe = product_ensemble(m);
    Povm minimal = optimal_povm_2x2(m, c);
    Povm full = construct_povm_from_v(pe.ensemble, *c.v_star, {0, 1, 2, 3}, pe.outcomes);
    for (const auto& e : full.effects) EXPECT_GT(e.p(), 1e-6);
    EXPECT_NEAR(success_probability(pe.ensemble, minimal), c.p_post, 1e-8);
    EXPECT_NEAR(success_probability(pe.ensemble, full), c.p_post, 1e-8);
    EXPECT_TRUE(certify(pe.ensemble, full, c.p_post, *c.v_star).passed);
  }
}

TEST(MepiProperties, MinimalPovmHasNullOutcome) {
  Lcg rng(52);
  for (int t = 0; t < 200; ++t) {
    auto m = random_mepi(rng, {2, 2});
    auto sol = post_guess_probability(m);
    std::size_t zeros = 0;
    for (const auto& e : sol.povm.effects) zeros += e.p() <= 1e-12;
    EXPECT_GE(zeros, 1u);
  }
}

TEST(MepiProperties, SwappingSubensemblesMapsCases) {
  Lcg rng(53);
  auto image = [](MepiCase k) {
    switch (k) {
      case MepiCase::Edge_11_12: return MepiCase::Edge_11_21;
      case MepiCase::Edge_11_21: return MepiCase::Edge_11_12;
      case MepiCase::Tri_11_12_22: return MepiCase::Tri_11_21_22;
      case MepiCase::Tri_11_21_22: return MepiCase::Tri_11_12_22;
      default: return k;
    }
  };
  for (int t = 0; t < 300; ++t) {
    auto m = random_strict(rng);
    auto a = classify_2x2(m), b = classify_2x2(swapped(m));
    EXPECT_NEAR(a.p_post, b.p_post, 1e-12);
    std::vector<MepiCase> mapped;
    for (MepiCase k : a.cases) mapped.push_back(image(k));
    std::sort(mapped.begin(), mapped.end());
    auto bc = b.cases;
    std::sort(bc.begin(), bc.end());
    EXPECT_EQ(mapped, bc);
  }
}

TEST(MepiProperties, EveryCaseOccurs) {
  Lcg rng(54);
  std::set<MepiCase> seen;
  for (int t = 0; t < 600; ++t)
    for (MepiCase k : classify_2x2(random_strict(rng)).cases) seen.insert(k);
  for (int k = 1; k <= static_cast<int>(MepiCase::Tri_11_21_22); ++k)
    EXPECT_TRUE(seen.count(static_cast<MepiCase>(k))) << to_string(static_cast<MepiCase>(k));
}

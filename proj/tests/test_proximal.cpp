#include <doctest.h>

#include "oracles.hpp"
#include "proxi2s/csv.hpp"
#include "proxi2s/datagen.hpp"
#include "proxi2s/error.hpp"
#include "proxi2s/proximal.hpp"
#include "proxi2s/rng.hpp"

using namespace proxi2s;

namespace {

Dataset demo() {
  return load_csv(std::string(PROXI2S_SOURCE_DIR) + "/data/demo.csv",
                  ColumnRoles{"y", "a", "w", {"z"}, {}, {}});
}

ModelSpec spec_for(LinkKind y, LinkKind w, bool interactions = false,
                   bool restrict_symmetry = false) {
  ModelSpec spec = ModelSpec::defaults(y, w, false);
  spec.interactions = interactions;
  spec.restrict_symmetry = restrict_symmetry;
  return spec;
}

// Random continuous dataset with a known linear structure.
Dataset synthetic_linear(int n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.z.resize(n, 1);
  d.x.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.a[i] = rng.normal();
    d.z(i, 0) = rng.normal();
    const double u = 0.3 + 0.9 * d.a[i] + 1.1 * d.z(i, 0) + rng.normal();
    d.w[i] = -0.2 + 0.8 * u + rng.normal(0.0, 0.5);
    d.y[i] = 0.5 + 1.5 * d.a[i] - 0.6 * u + rng.normal(0.0, 0.5);
  }
  return d;
}

DgpParams ss_params() {
  DgpParams params;
  params.beta0 = -1.4;
  params.beta_a = 1.2;
  params.beta_u = -0.7;
  params.beta_w = 0.5;
  params.alpha0 = -0.8;
  params.alpha_u = 0.5;
  params.m = MCoefs{-0.4, 0.8, 1.2, -1.0};
  params.eps = EpsDist::make_logistic(0.0, 0.3);
  return params;
}

}  // namespace

TEST_SUITE("proximal") {

TEST_CASE("plan table covers every supported cell") {
  struct Row {
    LinkKind y, w;
    bool interactions;
    const char* id;
    bool y_first;
    bool extra_w;
    bool extra_sw;
    Stratum stratum;
  };
  const Row rows[] = {
      {LinkKind::identity, LinkKind::identity, false, "1", false, false, false, Stratum::none},
      {LinkKind::log, LinkKind::log, false, "2", false, false, false, Stratum::none},
      {LinkKind::logit, LinkKind::logit, false, "3", true, true, false, Stratum::y_one},
      {LinkKind::log, LinkKind::identity, false, "6", false, false, false, Stratum::none},
      {LinkKind::identity, LinkKind::log, false, "7", false, false, false, Stratum::none},
      {LinkKind::logit, LinkKind::identity, false, "8", true, false, false, Stratum::y_one},
      {LinkKind::logit, LinkKind::identity, true, "9", true, false, false, Stratum::y_one},
      {LinkKind::identity, LinkKind::logit, false, "10", false, true, false, Stratum::none},
      {LinkKind::identity, LinkKind::logit, true, "11", false, true, true, Stratum::none},
      {LinkKind::logit, LinkKind::log, false, "12", true, false, false, Stratum::y_one},
      {LinkKind::logit, LinkKind::log, true, "13", true, false, false, Stratum::y_one},
      {LinkKind::log, LinkKind::logit, false, "14", false, true, false, Stratum::none},
      {LinkKind::log, LinkKind::logit, true, "15", false, true, true, Stratum::none},
  };
  for (const Row& row : rows) {
    CAPTURE(row.id);
    ProcedurePlan plan = resolve_plan(spec_for(row.y, row.w, row.interactions));
    CHECK(plan.procedure_id == row.id);
    CHECK(plan.include_y_in_first_stage == row.y_first);
    CHECK(plan.extra_w == row.extra_w);
    CHECK(plan.extra_sw == row.extra_sw);
    CHECK(plan.stratum == row.stratum);
  }

  CHECK(resolve_plan(spec_for(LinkKind::identity, LinkKind::identity)).s_formula ==
        "E[W|A,Z]");
  CHECK(resolve_plan(spec_for(LinkKind::logit, LinkKind::logit)).s_formula ==
        "logit P(W=1|A,Z,Y=1)");
  ProcedurePlan p3r =
      resolve_plan(spec_for(LinkKind::logit, LinkKind::logit, false, true));
  CHECK(p3r.offset_alpha_y_w);
  CHECK(p3r.extra_w == false);
  CHECK(p3r.stratum == Stratum::y_zero);
  ProcedurePlan p4 =
      resolve_plan(spec_for(LinkKind::logit, LinkKind::multinomial));
  CHECK(p4.procedure_id == "P4");
  CHECK(p4.stratum == Stratum::y_zero);
}

TEST_CASE("unsupported cells are rejected with guidance") {
  CHECK_THROWS_AS(
      (void)resolve_plan(spec_for(LinkKind::logit, LinkKind::logit, true)),
      SpecError);
  CHECK_THROWS_AS(
      (void)resolve_plan(spec_for(LinkKind::identity, LinkKind::identity, true)),
      SpecError);
  CHECK_THROWS_AS(
      (void)resolve_plan(spec_for(LinkKind::identity, LinkKind::log, true)),
      SpecError);
  CHECK_THROWS_AS(
      (void)resolve_plan(spec_for(LinkKind::identity, LinkKind::multinomial)),
      SpecError);
  CHECK_THROWS_AS(
      (void)resolve_plan(spec_for(LinkKind::identity, LinkKind::identity, false, true)),
      SpecError);
  // seven-term expansion is pinned for Procedure 9
  ProcedurePlan p9 = resolve_plan(spec_for(LinkKind::logit, LinkKind::identity, true));
  CHECK(p9.first_stage_interactions);
  CHECK(p9.first_terms.terms.size() == 7);
}

TEST_CASE("control variable uses the plan stratum") {
  Dataset d;
  d.a.resize(2);
  d.a << 0, 1;
  d.z.resize(2, 1);
  d.z << 0, 2;
  d.y.resize(2);
  d.y << 0, 1;
  d.w.resize(2);
  d.w << 0, 1;
  d.x.resize(2, 0);

  // Procedure 1: s at (A,Z)=(0,0) is the intercept
  ProcedurePlan p1 = resolve_plan(spec_for(LinkKind::identity, LinkKind::identity));
  StageFit first;
  first.glm = GlmFit{};
  first.glm->link = Link::identity;
  first.glm->converged = true;
  first.glm->coef.resize(3);
  first.glm->coef << 1, 2, 3;
  Vector s = control_variable(first, d, p1);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(1.0 + 2.0 + 6.0));

  // Procedure 3: the Y=1 override adds alpha_y
  ProcedurePlan p3 = resolve_plan(spec_for(LinkKind::logit, LinkKind::logit));
  StageFit logit_first;
  logit_first.glm = GlmFit{};
  logit_first.glm->link = Link::logit;
  logit_first.glm->converged = true;
  logit_first.glm->coef.resize(4);
  logit_first.glm->coef << 0.5, 1.0, -1.0, 0.2;
  Vector s3 = control_variable(logit_first, d, p3);
  CHECK(s3[0] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("seven-term control variable equals the coefficient sums") {
  Rng rng(5);
  const int n = 400;
  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.z.resize(n, 1);
  d.x.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.a[i] = rng.normal();
    d.z(i, 0) = rng.normal();
    d.y[i] = rng.bernoulli(0.5);
    const double t = 0.2 + 0.5 * d.a[i] + 0.7 * d.z(i, 0);
    d.w[i] = t + 0.4 * d.y[i] + 0.3 * t * d.y[i] + rng.normal(0.0, 0.3);
  }
  ProcedurePlan p9 = resolve_plan(spec_for(LinkKind::logit, LinkKind::identity, true));
  StageFit first = first_stage(d, p9);
  Vector s = control_variable(first, d, p9);
  CHECK(s.allFinite());

  const Vector& c = first.glm->coef;  // [1, a, z, y, az, ay, zy, azy]
  Dataset row;
  row.a.resize(1);
  row.a << 1.0;
  row.z.resize(1, 1);
  row.z << 1.0;
  row.y.resize(1);
  row.y << 0;
  row.w.resize(1);
  row.w << 0;
  row.x.resize(1, 0);
  Vector s_row = control_variable(first, row, p9);
  const double expected =
      (c[0] + c[3]) + (c[1] + c[5]) + (c[2] + c[6]) + (c[4] + c[7]);
  CHECK(s_row[0] == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("noiseless linear relation is recovered exactly") {
  const int n = 30;
  Rng rng(8);
  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.z.resize(n, 1);
  d.x.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.a[i] = rng.normal();
    d.z(i, 0) = rng.normal();
    d.w[i] = 2.0 * d.z(i, 0);
    d.y[i] = rng.normal();
  }
  ProcedurePlan p1 = resolve_plan(spec_for(LinkKind::identity, LinkKind::identity));
  StageFit first = first_stage(d, p1);
  CHECK(first.glm->coef[2] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK((d.w - first.glm->mu).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("second stage recovers an exact linear composition") {
  // y = 2a + 3s + w exactly under Procedure 10
  Rng rng(21);
  const int n = 200;
  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.z.resize(n, 1);
  d.x.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.a[i] = rng.normal();
    d.z(i, 0) = rng.normal();
    d.w[i] = rng.bernoulli(oracle::expit(0.4 + 0.9 * d.z(i, 0)));
    d.y[i] = 0.0;
  }
  ProcedurePlan p10 = resolve_plan(spec_for(LinkKind::identity, LinkKind::logit));
  StageFit first = first_stage(d, p10);
  Vector s = control_variable(first, d, p10);
  for (int i = 0; i < n; ++i) d.y[i] = 2.0 * d.a[i] + 3.0 * s[i] + d.w[i];
  StageFit second = second_stage(d, s, p10, first);
  const Vector& coef = second.glm->coef;  // [1, a, s, w]
  CHECK(coef[1] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(coef[2] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(coef[3] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("constant control variable is a rank error") {
  Dataset d = synthetic_linear(50, 99);
  ProcedurePlan p1 = resolve_plan(spec_for(LinkKind::identity, LinkKind::identity));
  StageFit first = first_stage(d, p1);
  Vector s = Vector::Constant(50, 3.0);
  CHECK_THROWS_AS((void)second_stage(d, s, p1, first), RankDeficiencyError);
}

TEST_CASE("identity-identity equals the closed-form matrix expressions") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Dataset d = synthetic_linear(120, seed);
    TwoStageFit fit =
        fit_two_stage(d, spec_for(LinkKind::identity, LinkKind::identity));

    Matrix b(120, 3);
    b.col(0).setOnes();
    b.col(1) = d.a;
    b.col(2) = d.z.col(0);
    Vector alpha = (b.transpose() * b).ldlt().solve(b.transpose() * d.w);
    Vector s = b * alpha;
    Matrix c(120, 3);
    c.col(0).setOnes();
    c.col(1) = d.a;
    c.col(2) = s;
    Vector beta = (c.transpose() * c).ldlt().solve(c.transpose() * d.y);

    CHECK((fit.first.glm->coef - alpha).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((fit.second.glm->coef - beta).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(fit.beta_a == doctest::Approx(beta[1]).epsilon(1e-10));
  }
}

TEST_CASE("demo two-stage coefficients match frozen oracle values") {
  Dataset d = demo();
  TwoStageFit logit_fit =
      fit_two_stage(d, spec_for(LinkKind::logit, LinkKind::logit));
  CHECK(logit_fit.plan.procedure_id == "3");
  const Vector& second = logit_fit.second.glm->coef;  // [1, a, s, w]
  CHECK(second[0] == doctest::Approx(0.433027416617).epsilon(1e-6));
  CHECK(second[1] == doctest::Approx(2.855555808934).epsilon(1e-6));
  CHECK(second[2] == doctest::Approx(-3.443831280665).epsilon(1e-6));
  CHECK(second[3] == doctest::Approx(0.223382115215).epsilon(1e-6));

  TwoStageFit id_fit =
      fit_two_stage(d, spec_for(LinkKind::identity, LinkKind::identity));
  CHECK(id_fit.beta_a == doctest::Approx(0.518518518519).epsilon(1e-9));
  CHECK(id_fit.second.glm->coef[0] ==
        doctest::Approx(1.666666666667).epsilon(1e-9));
  CHECK(id_fit.second.glm->coef[2] ==
        doctest::Approx(-2.333333333333).epsilon(1e-9));

  TwoStageFit count_fit = fit_two_stage(d, spec_for(LinkKind::log, LinkKind::log));
  CHECK(count_fit.first.glm->coef[0] ==
        doctest::Approx(-0.895867140740).epsilon(1e-6));
  CHECK(count_fit.beta_a == doctest::Approx(0.750449401199).epsilon(1e-6));
  CHECK(count_fit.second.glm->coef[2] ==
        doctest::Approx(-1.770827943974).epsilon(1e-6));
}

TEST_CASE("permuting z columns leaves beta_a unchanged") {
  Rng rng(31);
  const int n = 150;
  Dataset d;
  d.a.resize(n);
  d.y.resize(n);
  d.w.resize(n);
  d.z.resize(n, 2);
  d.x.resize(n, 0);
  for (int i = 0; i < n; ++i) {
    d.a[i] = rng.normal();
    d.z(i, 0) = rng.normal();
    d.z(i, 1) = rng.normal();
    const double u =
        0.4 * d.a[i] + 0.8 * d.z(i, 0) - 0.5 * d.z(i, 1) + rng.normal();
    d.w[i] = 1.0 + 0.9 * u + rng.normal(0.0, 0.4);
    d.y[i] = 0.2 + 1.1 * d.a[i] + 0.7 * u + rng.normal(0.0, 0.4);
  }
  TwoStageFit fit =
      fit_two_stage(d, spec_for(LinkKind::identity, LinkKind::identity));

  Dataset swapped = d;
  swapped.z.col(0) = d.z.col(1);
  swapped.z.col(1) = d.z.col(0);
  TwoStageFit fit2 =
      fit_two_stage(swapped, spec_for(LinkKind::identity, LinkKind::identity));
  CHECK(std::abs(fit.beta_a - fit2.beta_a) < 1e-10);
}

TEST_CASE("affine rescaling of an identity-link proxy leaves beta_a unchanged") {
  Dataset d = synthetic_linear(200, 77);
  TwoStageFit fit =
      fit_two_stage(d, spec_for(LinkKind::identity, LinkKind::identity));

  Dataset scaled = d;
  scaled.w = (2.5 * d.w.array() - 7.0).matrix();
  TwoStageFit fit2 =
      fit_two_stage(scaled, spec_for(LinkKind::identity, LinkKind::identity));
  CHECK(std::abs(fit.beta_a - fit2.beta_a) < 1e-8);
  const double bu = fit.reduced_coefs.at("beta_u_star");
  const double bu2 = fit2.reduced_coefs.at("beta_u_star");
  CHECK(bu2 == doctest::Approx(bu / 2.5).epsilon(1e-6));
}

TEST_CASE("restricted variant fixes the W effect at alpha_y via the offset") {
  GeneratedDataset g = generate_logit_dataset(800, ss_params(), 404);
  ModelSpec spec = spec_for(LinkKind::logit, LinkKind::logit, false, true);
  spec.first_stage_terms = TermSpec::parse({"a", "z", "az"});
  TwoStageFit fit = fit_two_stage(g.dataset, spec);
  CHECK(fit.plan.offset_alpha_y_w);

  // second stage design is [1, a, s]; the W term enters only via the offset
  REQUIRE(fit.second_names.size() == 3);
  const double alpha_y = fit.first.glm->coef[4];  // [1, a, z, az, y]
  Matrix d2 = second_stage_design(g.dataset, fit.s, fit.plan);
  Vector implied_offset =
      fit.second.glm->eta - d2 * fit.second.glm->coef;
  Vector expected_offset = (alpha_y * g.dataset.w.array()).matrix();
  CHECK((implied_offset - expected_offset).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("P4 with binary levels reproduces the Y=0 binary convention") {
  GeneratedDataset g = generate_logit_dataset(1200, ss_params(), 555);

  ModelSpec p4spec = spec_for(LinkKind::multinomial, LinkKind::multinomial);
  p4spec.first_stage_terms = TermSpec::parse({"a", "z", "az"});
  TwoStageFit p4 = fit_two_stage(g.dataset, p4spec);
  CHECK(p4.plan.procedure_id == "P4");
  REQUIRE(p4.beta_a_by_level.size() == 1);

  // binary pipeline with the Y=0 control-variable convention, by hand
  Matrix d1 = build_design(g.dataset, TermSpec::parse({"a", "z", "az", "y"}));
  GlmFit first = fit_glm(d1, g.dataset.w, Link::logit);
  Matrix d1s = build_design(g.dataset, TermSpec::parse({"a", "z", "az", "y"}),
                            {{Var::Y, 0.0}});
  Vector s = d1s * first.coef;
  Matrix d2(g.dataset.n(), 4);
  d2.col(0).setOnes();
  d2.col(1) = g.dataset.a;
  d2.col(2) = s;
  d2.col(3) = g.dataset.w;
  GlmFit second = fit_glm(d2, g.dataset.y, Link::logit);
  CHECK(p4.beta_a == doctest::Approx(second.coef[1]).epsilon(1e-6));
}

}  // TEST_SUITE

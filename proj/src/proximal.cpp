#include "proxi2s/proximal.hpp"

#include <algorithm>
#include <cmath>

#include "proxi2s/error.hpp"

namespace proxi2s {

namespace {

bool has_var(const TermSpec& spec, Var v) {
  for (const Term& t : spec.terms)
    for (Var f : t.factors)
      if (f == v) return true;
  return false;
}

int category_levels(const Vector& column, const char* what) {
  int levels = 0;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    if (column[i] < 0.0 ||
        std::abs(column[i] - std::round(column[i])) > 1e-8)
      throw DataError(std::string(what) +
                      " must hold category codes 0..K for this link");
    levels = std::max(levels, static_cast<int>(std::round(column[i])) + 1);
  }
  if (levels < 2)
    throw DataError(std::string(what) + " has fewer than 2 observed levels");
  return levels;
}

Link scalar_link(LinkKind kind) {
  switch (kind) {
    case LinkKind::identity: return Link::identity;
    case LinkKind::log: return Link::log;
    case LinkKind::logit: return Link::logit;
    case LinkKind::multinomial: break;
  }
  throw SpecError("multinomial link has no scalar GLM family");
}

TermSpec seven_term_expansion() {
  TermSpec spec;
  spec.push({Var::A});
  spec.push({Var::Z});
  spec.push({Var::Y});
  spec.push({Var::A, Var::Z});
  spec.push({Var::A, Var::Y});
  spec.push({Var::Z, Var::Y});
  spec.push({Var::A, Var::Z, Var::Y});
  return spec;
}

}  // namespace

ModelSpec ModelSpec::defaults(LinkKind y_link, LinkKind w_link, bool has_x) {
  ModelSpec spec;
  spec.y_link = y_link;
  spec.w_link = w_link;
  spec.first_stage_terms.push({Var::A});
  spec.first_stage_terms.push({Var::Z});
  spec.second_stage_terms.push({Var::A});
  if (has_x) {
    spec.first_stage_terms.push({Var::X});
    spec.second_stage_terms.push({Var::X});
  }
  return spec;
}

void ModelSpec::validate() const {
  auto reject = [](const TermSpec& terms, Var v, const char* where) {
    for (const Term& t : terms.terms)
      for (Var f : t.factors)
        if (f == v)
          throw SpecError(std::string("variable '") + to_string(v) +
                          "' may not appear in " + where +
                          " terms; the procedure adds it where required");
  };
  reject(first_stage_terms, Var::W, "first-stage");
  reject(first_stage_terms, Var::U, "first-stage");
  reject(first_stage_terms, Var::Y, "first-stage");
  reject(second_stage_terms, Var::W, "second-stage");
  reject(second_stage_terms, Var::U, "second-stage");
  reject(second_stage_terms, Var::Y, "second-stage");

  if (!second_stage_terms.contains(Term{{Var::A}}))
    throw SpecError("second-stage terms must include the treatment 'a'");

  const bool any_multinomial = y_link == LinkKind::multinomial ||
                               w_link == LinkKind::multinomial;
  if (any_multinomial) {
    auto logit_family = [](LinkKind k) {
      return k == LinkKind::logit || k == LinkKind::multinomial;
    };
    if (!logit_family(y_link) || !logit_family(w_link))
      throw SpecError(
          "multinomial links pair only with logit/multinomial; nearest "
          "supported alternative: recode the variable or use the logit "
          "pair");
    if (interactions)
      throw SpecError("no interaction variant is defined for multinomial "
                      "links; nearest supported alternative: "
                      "interactions=false");
    if (restrict_symmetry)
      throw SpecError("restrict_symmetry applies only to the binary "
                      "logit-logit pair");
    return;
  }

  if (restrict_symmetry &&
      !(y_link == LinkKind::logit && w_link == LinkKind::logit))
    throw SpecError("restrict_symmetry applies only to the logit-logit pair");

  if (interactions) {
    const bool y_logit = y_link == LinkKind::logit;
    const bool w_logit = w_link == LinkKind::logit;
    if (y_logit && w_logit)
      throw SpecError(
          "the logit-logit pair has no supported interaction variant; "
          "nearest supported alternative: interactions=false");
    if (!y_logit && !w_logit)
      throw SpecError(
          "identity/log pairs define no interaction variant; nearest "
          "supported alternative: interactions=false");
  }
}

ProcedurePlan resolve_plan(const ModelSpec& spec) {
  spec.validate();

  ProcedurePlan plan;
  plan.y_link = spec.y_link;
  plan.w_link = spec.w_link;
  plan.first_terms = spec.first_stage_terms;
  plan.second_terms = spec.second_stage_terms;

  if (spec.y_link == LinkKind::multinomial ||
      spec.w_link == LinkKind::multinomial) {
    plan.procedure_id = "P4";
    plan.include_y_in_first_stage = true;
    plan.stratum = Stratum::y_zero;
    plan.extra_w = true;
    plan.s_formula = "sum_k logit P(W=k|A,Z,Y=0)";
    return plan;
  }

  const LinkKind y = spec.y_link;
  const LinkKind w = spec.w_link;
  auto is = [&](LinkKind yl, LinkKind wl) { return y == yl && w == wl; };

  if (is(LinkKind::identity, LinkKind::identity)) {
    plan.procedure_id = "1";
    plan.s_formula = "E[W|A,Z]";
  } else if (is(LinkKind::log, LinkKind::log)) {
    plan.procedure_id = "2";
    plan.s_formula = "log E[W|A,Z]";
  } else if (is(LinkKind::logit, LinkKind::logit)) {
    plan.procedure_id = "3";
    plan.include_y_in_first_stage = true;
    if (spec.restrict_symmetry) {
      // Offset variant: S drops the Y shift and alpha_y*W enters as offset.
      plan.stratum = Stratum::y_zero;
      plan.offset_alpha_y_w = true;
      plan.s_formula = "logit P(W=1|A,Z,Y=0)";
    } else {
      plan.stratum = Stratum::y_one;
      plan.extra_w = true;
      plan.s_formula = "logit P(W=1|A,Z,Y=1)";
    }
  } else if (is(LinkKind::log, LinkKind::identity)) {
    plan.procedure_id = "6";
    plan.s_formula = "E[W|A,Z]";
  } else if (is(LinkKind::identity, LinkKind::log)) {
    plan.procedure_id = "7";
    plan.s_formula = "log E[W|A,Z]";
  } else if (is(LinkKind::logit, LinkKind::identity)) {
    plan.procedure_id = spec.interactions ? "9" : "8";
    plan.include_y_in_first_stage = true;
    plan.stratum = Stratum::y_one;
    plan.s_formula = "E[W|A,Z,Y=1]";
  } else if (is(LinkKind::identity, LinkKind::logit)) {
    plan.procedure_id = spec.interactions ? "11" : "10";
    plan.extra_w = true;
    plan.extra_sw = spec.interactions;
    plan.s_formula = "logit P(W=1|A,Z)";
  } else if (is(LinkKind::logit, LinkKind::log)) {
    plan.procedure_id = spec.interactions ? "13" : "12";
    plan.include_y_in_first_stage = true;
    plan.stratum = Stratum::y_one;
    plan.s_formula = "log E[W|A,Z,Y=1]";
  } else if (is(LinkKind::log, LinkKind::logit)) {
    plan.procedure_id = spec.interactions ? "15" : "14";
    plan.extra_w = true;
    plan.extra_sw = spec.interactions;
    plan.s_formula = "logit P(W=1|A,Z)";
  } else {
    throw SpecError("unsupported link combination");
  }

  if (spec.interactions &&
      (plan.procedure_id == "9" || plan.procedure_id == "13")) {
    // The Y-interaction variants fix the first stage to the seven-term
    // expansion; X main effects from the user's spec are kept.
    plan.first_stage_interactions = true;
    TermSpec expanded = seven_term_expansion();
    if (has_var(spec.first_stage_terms, Var::X))
      expanded.push({Var::X});
    plan.first_terms = expanded;
  } else if (plan.include_y_in_first_stage && !plan.multinomial()) {
    plan.first_terms.push({Var::Y});
  }
  return plan;
}

int outcome_levels(const Dataset& data, const ProcedurePlan& plan) {
  if (plan.y_link == LinkKind::multinomial)
    return category_levels(data.y, "outcome");
  if (plan.y_link == LinkKind::logit) return 2;
  return 0;
}

int proxy_levels(const Dataset& data, const ProcedurePlan& plan) {
  if (plan.w_link == LinkKind::multinomial)
    return category_levels(data.w, "proxy");
  if (plan.w_link == LinkKind::logit) return 2;
  return 0;
}

Matrix first_stage_design(const Dataset& data, const ProcedurePlan& plan,
                          const Overrides& overrides) {
  Matrix base = build_design(data, plan.first_terms, overrides);
  if (!plan.multinomial()) return base;

  // Multinomial plans append outcome indicator columns I(Y=t), t=1..T.
  const int T = outcome_levels(data, plan) - 1;
  const Eigen::Index n = data.n();
  Matrix design(n, base.cols() + T);
  design.leftCols(base.cols()) = base;
  auto it = overrides.find(Var::Y);
  for (int t = 1; t <= T; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = it != overrides.end() ? it->second : data.y[i];
      design(i, base.cols() + t - 1) =
          std::abs(y - static_cast<double>(t)) < 0.5 ? 1.0 : 0.0;
    }
  }
  return design;
}

std::vector<std::string> first_stage_names(const Dataset& data,
                                           const ProcedurePlan& plan) {
  std::vector<std::string> names = design_names(data, plan.first_terms);
  if (plan.multinomial()) {
    const int T = outcome_levels(data, plan) - 1;
    for (int t = 1; t <= T; ++t)
      names.push_back(T == 1 ? "y" : "y=" + std::to_string(t));
  }
  return names;
}

StageFit first_stage(const Dataset& data, const ProcedurePlan& plan) {
  data.validate();
  StageFit fit;
  GlmOptions options;
  options.names = first_stage_names(data, plan);
  if (plan.multinomial()) {
    Matrix design = first_stage_design(data, plan);
    (void)proxy_levels(data, plan);
    fit.multinomial = fit_multinomial(design, data.w, options);
  } else {
    Matrix design = build_design(data, plan.first_terms);
    fit.glm = fit_glm(design, data.w, scalar_link(plan.w_link), options);
  }
  return fit;
}

Vector control_variable(const StageFit& first, const Dataset& data,
                        const ProcedurePlan& plan) {
  if (!first.converged())
    throw NumericError("first stage did not converge");

  Overrides overrides;
  if (plan.stratum == Stratum::y_one) overrides[Var::Y] = 1.0;
  if (plan.stratum == Stratum::y_zero) overrides[Var::Y] = 0.0;

  Vector s;
  if (plan.multinomial()) {
    // S = sum_k logit P(W=k|A,Z,Y=0): row sums of the per-level linear
    // predictors with the Y indicators switched off.
    Matrix design = first_stage_design(data, plan, overrides);
    s = (design * first.multinomial->coef.transpose()).rowwise().sum();
  } else {
    Matrix design = build_design(data, plan.first_terms, overrides);
    s = predict_eta(*first.glm, design);
  }
  if (!s.allFinite())
    throw NumericError("control variable has a non-finite entry");
  return s;
}

Matrix second_stage_design(const Dataset& data, const Vector& s,
                           const ProcedurePlan& plan) {
  Matrix base = build_design(data, plan.second_terms);
  const Eigen::Index n = data.n();
  const int K = plan.extra_w && plan.w_link == LinkKind::multinomial
                    ? proxy_levels(data, plan) - 1
                    : (plan.extra_w ? 1 : 0);
  Eigen::Index p = base.cols() + 1 + K + (plan.extra_sw ? 1 : 0);
  Matrix design(n, p);
  design.leftCols(base.cols()) = base;
  design.col(base.cols()) = s;
  Eigen::Index col = base.cols() + 1;
  if (plan.extra_w && plan.w_link == LinkKind::multinomial) {
    for (int k = 1; k <= K; ++k, ++col)
      for (Eigen::Index i = 0; i < n; ++i)
        design(i, col) =
            std::abs(data.w[i] - static_cast<double>(k)) < 0.5 ? 1.0 : 0.0;
  } else if (plan.extra_w) {
    design.col(col++) = data.w;
  }
  if (plan.extra_sw)
    design.col(col++) = s.array() * data.w.array();
  return design;
}

std::vector<std::string> second_stage_names(const Dataset& data,
                                            const ProcedurePlan& plan) {
  std::vector<std::string> names = design_names(data, plan.second_terms);
  names.emplace_back("s");
  if (plan.extra_w && plan.w_link == LinkKind::multinomial) {
    const int K = proxy_levels(data, plan) - 1;
    for (int k = 1; k <= K; ++k)
      names.push_back(K == 1 ? "w" : "w=" + std::to_string(k));
  } else if (plan.extra_w) {
    names.emplace_back("w");
  }
  if (plan.extra_sw) names.emplace_back("sw");
  return names;
}

StageFit second_stage(const Dataset& data, const Vector& s,
                      const ProcedurePlan& plan, const StageFit& first) {
  if (!s.allFinite())
    throw NumericError("control variable has a non-finite entry");

  StageFit fit;
  GlmOptions options;
  options.names = second_stage_names(data, plan);
  Matrix design = second_stage_design(data, s, plan);

  if (plan.offset_alpha_y_w) {
    // alpha_y W enters as a fixed offset; W gets no free coefficient.
    const std::vector<std::string> fnames =
        first.glm ? first.glm->names : std::vector<std::string>{};
    auto it = std::find(fnames.begin(), fnames.end(), "y");
    if (it == fnames.end())
      throw SpecError("restricted variant requires Y in the first stage");
    const double alpha_y =
        first.glm->coef[static_cast<Eigen::Index>(it - fnames.begin())];
    options.offset = (alpha_y * data.w.array()).matrix();
  }

  if (plan.y_link == LinkKind::multinomial) {
    fit.multinomial = fit_multinomial(design, data.y, options);
  } else {
    fit.glm = fit_glm(design, data.y, scalar_link(plan.y_link), options);
  }
  return fit;
}

TwoStageFit fit_two_stage(const Dataset& data, const ModelSpec& spec) {
  return fit_two_stage(data, resolve_plan(spec));
}

TwoStageFit fit_two_stage(const Dataset& data, const ProcedurePlan& plan) {
  TwoStageFit out;
  out.plan = plan;
  try {
    out.first = first_stage(data, plan);
  } catch (const Error& e) {
    throw NumericError(std::string("first stage: ") + e.what());
  }
  out.first_names = first_stage_names(data, plan);
  out.s = control_variable(out.first, data, plan);
  try {
    out.second = second_stage(data, out.s, plan, out.first);
  } catch (const RankDeficiencyError& e) {
    throw RankDeficiencyError(std::string("second stage: ") + e.what());
  } catch (const Error& e) {
    throw NumericError(std::string("second stage: ") + e.what());
  }
  out.second_names = second_stage_names(data, plan);

  const auto& names = out.second_names;
  auto index_of = [&](const std::string& label) {
    auto it = std::find(names.begin(), names.end(), label);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
  };
  const int a_index = index_of("a");
  if (a_index < 0) throw SpecError("second stage lacks the treatment column");

  if (out.second.glm) {
    out.beta_a = out.second.glm->coef[a_index];
    out.beta_a_by_level = Vector::Constant(1, out.beta_a);
    out.second_condition = out.second.glm->condition;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double value = out.second.glm->coef[static_cast<Eigen::Index>(j)];
      if (names[j] == "(Intercept)")
        out.reduced_coefs["beta0_star"] = value;
      else if (names[j] == "a")
        out.reduced_coefs["beta_a"] = value;
      else if (names[j] == "s")
        out.reduced_coefs["beta_u_star"] = value;
      else if (names[j] == "w")
        out.reduced_coefs["beta_w_tilde"] = value;
      else
        out.reduced_coefs[names[j]] = value;
    }
  } else {
    const Matrix& coef = out.second.multinomial->coef;
    out.beta_a_by_level = coef.col(a_index);
    out.beta_a = out.beta_a_by_level[0];
    for (Eigen::Index t = 0; t < coef.rows(); ++t)
      for (std::size_t j = 0; j < names.size(); ++j)
        out.reduced_coefs["level" + std::to_string(t + 1) + ":" + names[j]] =
            coef(t, static_cast<Eigen::Index>(j));
  }
  if (out.first.glm) out.first_condition = out.first.glm->condition;
  out.weak_proxy_warning = out.second_condition > 1e8;
  return out;
}

}  // namespace proxi2s

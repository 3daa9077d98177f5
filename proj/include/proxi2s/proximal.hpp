#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proxi2s/dataset.hpp"
#include "proxi2s/glm.hpp"
#include "proxi2s/types.hpp"

namespace proxi2s {

// Declares the outcome/proxy link pair and regression terms; resolves to
// exactly one estimation procedure via resolve_plan.
struct ModelSpec {
  LinkKind y_link = LinkKind::identity;
  LinkKind w_link = LinkKind::identity;
  TermSpec first_stage_terms;    // proxy model regressors (A, Z, X, products)
  TermSpec second_stage_terms;   // treatment + covariates; S/W appended per plan
  bool interactions = false;     // latent-interaction variants (mixed links only)
  bool restrict_symmetry = false;  // logit-logit offset variant

  // Canonical term lists: first stage a+z (+x), second stage a (+x).
  static ModelSpec defaults(LinkKind y_link, LinkKind w_link, bool has_x);

  void validate() const;
};

// Stratum at which the control variable is evaluated.
enum class Stratum { none, y_zero, y_one };

struct ProcedurePlan {
  std::string procedure_id;  // "1".."15" or "P4"
  LinkKind y_link = LinkKind::identity;
  LinkKind w_link = LinkKind::identity;
  bool include_y_in_first_stage = false;
  bool first_stage_interactions = false;  // fixed A+Z+Y+AZ+AY+ZY+AZY expansion
  Stratum stratum = Stratum::none;
  bool extra_w = false;        // W appended to the second stage
  bool extra_sw = false;       // S*W appended to the second stage
  bool offset_alpha_y_w = false;  // restricted variant: alpha_y * W as offset
  TermSpec first_terms;        // resolved first-stage terms (without Y dummies)
  TermSpec second_terms;       // resolved second-stage base terms (before S/W)
  std::string s_formula;       // e.g. "logit P(W=1|A,Z,Y=1)"

  bool multinomial() const {
    return y_link == LinkKind::multinomial || w_link == LinkKind::multinomial;
  }
};

// Maps a ModelSpec onto the matching procedure. Throws SpecError for
// unsupported cells, naming the nearest supported alternative.
ProcedurePlan resolve_plan(const ModelSpec& spec);

// Either a scalar GLM fit or a baseline-category multinomial fit.
struct StageFit {
  std::optional<GlmFit> glm;
  std::optional<MultinomialFit> multinomial;

  bool converged() const {
    return glm ? glm->converged : multinomial && multinomial->converged;
  }
};

struct TwoStageFit {
  ProcedurePlan plan;
  StageFit first;
  Vector s;             // proximal control variable, length n
  StageFit second;
  double beta_a = 0.0;  // treatment coefficient (level 1 when multinomial)
  Vector beta_a_by_level;  // one entry per non-reference outcome level
  std::map<std::string, double> reduced_coefs;
  std::vector<std::string> first_names;
  std::vector<std::string> second_names;
  double first_condition = 0.0;
  double second_condition = 0.0;
  bool weak_proxy_warning = false;  // ill-conditioned second stage
};

StageFit first_stage(const Dataset& data, const ProcedurePlan& plan);

// Control variable S per the plan's formula; strata are realized as design
// overrides (Y fixed at 0 or 1). Throws NumericError on non-finite entries.
Vector control_variable(const StageFit& first, const Dataset& data,
                        const ProcedurePlan& plan);

StageFit second_stage(const Dataset& data, const Vector& s,
                      const ProcedurePlan& plan, const StageFit& first);

TwoStageFit fit_two_stage(const Dataset& data, const ModelSpec& spec);
TwoStageFit fit_two_stage(const Dataset& data, const ProcedurePlan& plan);

// Second-stage design [1 | base terms | S | W levels | S*W] and its labels;
// shared by the fitting path and the stacked estimating equations.
Matrix second_stage_design(const Dataset& data, const Vector& s,
                           const ProcedurePlan& plan);
std::vector<std::string> second_stage_names(const Dataset& data,
                                            const ProcedurePlan& plan);

// First-stage design; for multinomial plans Y enters as indicator columns.
Matrix first_stage_design(const Dataset& data, const ProcedurePlan& plan,
                          const Overrides& overrides = {});
std::vector<std::string> first_stage_names(const Dataset& data,
                                           const ProcedurePlan& plan);

// Count of outcome / proxy category levels seen in the data (>= 2 when the
// corresponding link is multinomial, 2 for logit).
int outcome_levels(const Dataset& data, const ProcedurePlan& plan);
int proxy_levels(const Dataset& data, const ProcedurePlan& plan);

}  // namespace proxi2s

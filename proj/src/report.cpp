#include "proxi2s/report.hpp"

#include <nlohmann/json.hpp>

#include "proxi2s/stats.hpp"

namespace proxi2s {

using nlohmann::json;

namespace {

json stage_json(const StageFit& stage, const std::vector<std::string>& names) {
  json out;
  if (stage.glm) {
    const GlmFit& fit = *stage.glm;
    out["link"] = to_string(fit.link);
    json coef = json::object();
    for (Eigen::Index j = 0; j < fit.coef.size(); ++j)
      coef[names[static_cast<std::size_t>(j)]] = fit.coef[j];
    out["coefficients"] = coef;
    out["deviance"] = fit.deviance;
    out["converged"] = fit.converged;
    out["iterations"] = fit.iterations;
    out["condition"] = fit.condition;
  } else if (stage.multinomial) {
    const MultinomialFit& fit = *stage.multinomial;
    out["link"] = "multinomial";
    out["levels"] = fit.levels;
    json coef = json::object();
    for (Eigen::Index t = 0; t < fit.coef.rows(); ++t) {
      json level = json::object();
      for (Eigen::Index j = 0; j < fit.coef.cols(); ++j)
        level[names[static_cast<std::size_t>(j)]] = fit.coef(t, j);
      coef["level" + std::to_string(t + 1)] = level;
    }
    out["coefficients"] = coef;
    out["log_likelihood"] = fit.log_likelihood;
    out["converged"] = fit.converged;
    out["iterations"] = fit.iterations;
  }
  return out;
}

}  // namespace

json fit_report_json(const Dataset& data, const TwoStageFit& fit,
                     const SandwichResult* sandwich_result,
                     const BootstrapResult* bootstrap_result,
                     double ci_level) {
  json report;
  report["procedure"] = fit.plan.procedure_id;
  report["n"] = static_cast<long>(data.n());
  report["s_formula"] = fit.plan.s_formula;
  report["ci_level"] = ci_level;
  report["first_stage"] = stage_json(fit.first, fit.first_names);
  report["second_stage"] = stage_json(fit.second, fit.second_names);

  json beta;
  beta["estimate"] = fit.beta_a;
  if (fit.beta_a_by_level.size() > 1) {
    json by_level = json::array();
    for (Eigen::Index t = 0; t < fit.beta_a_by_level.size(); ++t)
      by_level.push_back(fit.beta_a_by_level[t]);
    beta["by_level"] = by_level;
  }
  if (sandwich_result) {
    json sw;
    sw["se"] = sandwich_result->se_beta_a;
    auto ci = wald_ci(fit.beta_a, sandwich_result->se_beta_a, ci_level);
    sw["ci"] = json::array({ci.first, ci.second});
    beta["sandwich"] = sw;
  }
  if (bootstrap_result) {
    json bs;
    bs["se"] = bootstrap_result->se;
    bs["ci"] = json::array(
        {bootstrap_result->ci.first, bootstrap_result->ci.second});
    bs["replicates"] = bootstrap_result->b_requested;
    bs["failures"] = bootstrap_result->failures;
    beta["bootstrap"] = bs;
  }
  report["beta_a"] = beta;

  if (sandwich_result) {
    json se = json::object();
    for (const auto& [name, value] : sandwich_result->se) se[name] = value;
    json sw;
    sw["se"] = se;
    sw["analytic_jacobian"] = sandwich_result->analytic;
    sw["condition_a"] = sandwich_result->condition_a;
    report["sandwich"] = sw;
  }
  if (bootstrap_result && bootstrap_result->coef_draws.rows() > 1 &&
      !bootstrap_result->coef_names.empty()) {
    json se = json::object();
    json ci = json::object();
    const Matrix& draws = bootstrap_result->coef_draws;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
      std::vector<double> column(draws.col(j).data(),
                                 draws.col(j).data() + draws.rows());
      const std::string& name =
          bootstrap_result->coef_names[static_cast<std::size_t>(j)];
      se[name] = sd(column);
      ci[name] = json::array({quantile(column, (1.0 - ci_level) / 2.0),
                              quantile(column, (1.0 + ci_level) / 2.0)});
    }
    json bs;
    bs["se"] = se;
    bs["ci"] = ci;
    report["bootstrap"] = bs;
  }

  json diag;
  diag["first_stage_condition"] = fit.first_condition;
  diag["second_stage_condition"] = fit.second_condition;
  diag["weak_proxy_warning"] = fit.weak_proxy_warning;
  report["diagnostics"] = diag;
  return report;
}

json sim_report_json(const SimReport& report) {
  json rows = json::array();
  for (const SimRow& row : report.rows) {
    json r;
    r["n"] = row.n;
    r["estimator"] = row.estimator;
    r["bias"] = row.bias;
    r["empirical_se"] = row.empirical_se;
    if (row.model_se)
      r["model_se"] = *row.model_se;
    else
      r["model_se"] = nullptr;
    if (row.coverage)
      r["coverage"] = *row.coverage;
    else
      r["coverage"] = nullptr;
    r["failures"] = row.failures;
    rows.push_back(r);
  }
  json out;
  out["true_beta_a"] = report.true_beta_a;
  out["rows"] = rows;
  return out;
}

}  // namespace proxi2s

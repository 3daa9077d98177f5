#include "proxi2s/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "proxi2s/csv.hpp"
#include "proxi2s/error.hpp"
#include "proxi2s/glm.hpp"
#include "proxi2s/inference.hpp"
#include "proxi2s/parallel.hpp"
#include "proxi2s/rng.hpp"
#include "proxi2s/stats.hpp"

namespace proxi2s {

StudyConfig StudyConfig::ss_default() {
  StudyConfig config;
  config.dgp.beta0 = -1.4;
  config.dgp.beta_a = 1.2;
  config.dgp.beta_u = -0.7;
  config.dgp.beta_w = 0.5;  // alpha_y shares this value
  config.dgp.alpha0 = -0.8;
  config.dgp.alpha_u = 0.5;
  config.dgp.m = MCoefs{-0.4, 0.8, 1.2, -1.0};
  config.dgp.eps = EpsDist::make_logistic(0.0, 0.3);
  config.dgp.az = AzDist{0.5, 0.5};
  config.first_stage_terms = TermSpec::parse({"a", "z", "az"});
  config.master_seed = 20250811;
  return config;
}

void StudyConfig::validate() const {
  dgp.validate();
  if (replications < 2) throw DataError("study needs at least 2 replications");
  if (sample_sizes.empty()) throw DataError("study needs sample sizes");
  for (int n : sample_sizes)
    if (n < 10) throw DataError("sample sizes must be at least 10");
  if (bootstrap_b < 2 && variance != VarianceMethod::sandwich)
    throw DataError("bootstrap needs at least 2 replicates");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw DataError("confidence level must lie in (0,1)");
}

ModelSpec StudyConfig::model_spec() const {
  ModelSpec spec;
  spec.y_link = LinkKind::logit;
  spec.w_link = LinkKind::logit;
  spec.first_stage_terms = first_stage_terms.terms.empty()
                               ? TermSpec::parse({"a", "z", "az"})
                               : first_stage_terms;
  spec.second_stage_terms = TermSpec::parse({"a"});
  return spec;
}

namespace {

// Regression of Y on the given columns; returns the coefficient on A.
EstimateOutcome simple_regression(const Dataset& data, Link link, bool with_u) {
  EstimateOutcome out;
  try {
    const Eigen::Index n = data.n();
    Matrix design(n, with_u ? 4 : 3);
    design.col(0).setOnes();
    design.col(1) = data.a;
    design.col(2) = data.w;
    if (with_u) design.col(3) = *data.u;
    GlmOptions options;
    options.names = with_u
                        ? std::vector<std::string>{"(Intercept)", "a", "w", "u"}
                        : std::vector<std::string>{"(Intercept)", "a", "w"};
    GlmFit fit = fit_glm(design, data.y, link, options);
    out.ok = true;
    out.estimate = fit.coef[1];
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

ReplicationResult run_replication(const StudyConfig& config, int n,
                                  int rep_index) {
  const std::uint64_t data_seed =
      derive_seed(config.master_seed,
                  {static_cast<std::uint64_t>(n),
                   static_cast<std::uint64_t>(rep_index), 0});
  const std::uint64_t boot_seed =
      derive_seed(config.master_seed,
                  {static_cast<std::uint64_t>(n),
                   static_cast<std::uint64_t>(rep_index), 1});

  GeneratedDataset g = generate_logit_dataset(n, config.dgp, data_seed);
  const Dataset& data = g.dataset;

  ReplicationResult result;
  result.naive = simple_regression(data, Link::logit, false);
  if (config.include_naive_linear)
    result.naive_linear = simple_regression(data, Link::identity, false);
  result.oracle = simple_regression(data, Link::logit, true);

  const ModelSpec spec = config.model_spec();
  ProcedurePlan plan;
  try {
    plan = resolve_plan(spec);
    TwoStageFit fit = fit_two_stage(data, plan);
    result.two_stage.ok = true;
    result.two_stage.estimate = fit.beta_a;

    if (config.variance == VarianceMethod::sandwich ||
        config.variance == VarianceMethod::both) {
      try {
        SandwichResult sw = sandwich(data, fit);
        result.sand.ok = true;
        result.sand.se = sw.se_beta_a;
        result.sand.ci = wald_ci(fit.beta_a, sw.se_beta_a, config.ci_level);
      } catch (const Error& e) {
        result.sand.error = e.what();
      }
    }
  } catch (const Error& e) {
    result.two_stage.error = e.what();
  }

  if (result.two_stage.ok && (config.variance == VarianceMethod::bootstrap ||
                              config.variance == VarianceMethod::both)) {
    try {
      BootstrapResult boot = bootstrap(data, plan, config.bootstrap_b,
                                       boot_seed, config.ci_level);
      result.boot.ok = true;
      result.boot.se = boot.se;
      result.boot.ci = boot.ci;
      result.boot.replicate_failures = boot.failures;
    } catch (const Error& e) {
      result.boot.error = e.what();
    }
  }
  return result;
}

namespace {

struct Collected {
  std::vector<double> estimates;
  std::vector<double> model_se;
  int covered = 0;
  int with_ci = 0;
  int failures = 0;
};

SimRow to_row(int n, const std::string& estimator, const Collected& c,
              double truth, bool with_model) {
  SimRow row;
  row.n = n;
  row.estimator = estimator;
  row.failures = c.failures;
  if (!c.estimates.empty()) {
    row.bias = mean(c.estimates) - truth;
    row.empirical_se = c.estimates.size() > 1 ? sd(c.estimates) : 0.0;
  }
  if (with_model && !c.model_se.empty()) {
    row.model_se = mean(c.model_se);
    if (c.with_ci > 0)
      row.coverage = static_cast<double>(c.covered) /
                     static_cast<double>(c.with_ci);
  }
  return row;
}

}  // namespace

SimReport run_study(const StudyConfig& config, int jobs) {
  config.validate();
  SimReport report;
  report.true_beta_a = config.dgp.beta_a;
  const double truth = config.dgp.beta_a;

  for (int n : config.sample_sizes) {
    std::vector<ReplicationResult> reps(
        static_cast<std::size_t>(config.replications));
    parallel_for(config.replications, jobs, [&](int r) {
      reps[static_cast<std::size_t>(r)] = run_replication(config, n, r);
    });

    Collected naive, naive_linear, oracle, two_boot, two_sand;
    for (const ReplicationResult& rep : reps) {
      auto take = [](Collected& c, const EstimateOutcome& e) {
        if (e.ok)
          c.estimates.push_back(e.estimate);
        else
          ++c.failures;
      };
      take(naive, rep.naive);
      if (config.include_naive_linear) take(naive_linear, rep.naive_linear);
      take(oracle, rep.oracle);

      auto take_ci = [&](Collected& c, const CiOutcome& ci) {
        if (!rep.two_stage.ok) {
          ++c.failures;
          return;
        }
        c.estimates.push_back(rep.two_stage.estimate);
        if (ci.ok) {
          c.model_se.push_back(ci.se);
          ++c.with_ci;
          if (ci.ci.first <= truth && truth <= ci.ci.second) ++c.covered;
        } else {
          ++c.failures;
        }
      };
      if (config.variance == VarianceMethod::bootstrap ||
          config.variance == VarianceMethod::both)
        take_ci(two_boot, rep.boot);
      if (config.variance == VarianceMethod::sandwich ||
          config.variance == VarianceMethod::both)
        take_ci(two_sand, rep.sand);
    }

    report.rows.push_back(to_row(n, "naive", naive, truth, false));
    if (config.include_naive_linear)
      report.rows.push_back(
          to_row(n, "naive_linear", naive_linear, truth, false));
    report.rows.push_back(to_row(n, "oracle", oracle, truth, false));
    if (config.variance == VarianceMethod::bootstrap ||
        config.variance == VarianceMethod::both)
      report.rows.push_back(to_row(n, "two_stage", two_boot, truth, true));
    if (config.variance == VarianceMethod::sandwich)
      report.rows.push_back(to_row(n, "two_stage", two_sand, truth, true));
    if (config.variance == VarianceMethod::both)
      report.rows.push_back(
          to_row(n, "two_stage_sandwich", two_sand, truth, true));
  }
  return report;
}

std::string summarize_text(const SimReport& report) {
  std::ostringstream out;
  auto cell = [](double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return std::string(buffer);
  };
  const char* fmt = "%12s  %18s  %8s  %14s  %14s  %8s\n";
  char line[128];
  std::snprintf(line, sizeof(line), fmt, "Sample Size", "Estimator", "Bias",
                "Empirical S.E.", "Bootstrap S.E.", "Coverage");
  out << line;
  for (const SimRow& row : report.rows) {
    std::snprintf(line, sizeof(line), fmt, std::to_string(row.n).c_str(),
                  row.estimator.c_str(), cell(row.bias).c_str(),
                  cell(row.empirical_se).c_str(),
                  row.model_se ? cell(*row.model_se).c_str() : "",
                  row.coverage ? cell(*row.coverage).c_str() : "");
    out << line;
  }
  return out.str();
}

std::string summarize_csv(const SimReport& report) {
  std::ostringstream out;
  out << "n,estimator,bias,empirical_se,model_se,coverage,failures\n";
  for (const SimRow& row : report.rows) {
    out << row.n << ',' << row.estimator << ',' << format_double(row.bias)
        << ',' << format_double(row.empirical_se) << ','
        << (row.model_se ? format_double(*row.model_se) : "") << ','
        << (row.coverage ? format_double(*row.coverage) : "") << ','
        << row.failures << '\n';
  }
  return out.str();
}

std::vector<SimRow> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line))
    throw DataError("empty report CSV");
  std::vector<SimRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream fs(line);
    while (std::getline(fs, field, ',')) fields.push_back(field);
    while (fields.size() < 7) fields.emplace_back();
    SimRow row;
    row.n = std::stoi(fields[0]);
    row.estimator = fields[1];
    row.bias = std::stod(fields[2]);
    row.empirical_se = std::stod(fields[3]);
    if (!fields[4].empty()) row.model_se = std::stod(fields[4]);
    if (!fields[5].empty()) row.coverage = std::stod(fields[5]);
    row.failures = std::stoi(fields[6]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace proxi2s

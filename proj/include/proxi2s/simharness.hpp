#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxi2s/datagen.hpp"
#include "proxi2s/proximal.hpp"

namespace proxi2s {

enum class VarianceMethod { bootstrap, sandwich, both };

// Monte Carlo study over the binary logit-logit data generating process:
// naive, two-stage, and oracle estimators across sample sizes.
struct StudyConfig {
  DgpParams dgp;
  TermSpec first_stage_terms;  // defaults to a + z + az, matching m(A,Z)
  std::vector<int> sample_sizes{250, 500, 1000, 1500};
  int replications = 500;
  int bootstrap_b = 300;
  double ci_level = 0.95;
  VarianceMethod variance = VarianceMethod::bootstrap;
  std::uint64_t master_seed = 1;
  bool include_naive_linear = false;  // literal linear-model naive variant

  // The simulation-study defaults: beta0=-1.4, beta_a=1.2, beta_u=-0.7,
  // beta_w=alpha_y=0.5, alpha0=-0.8, alpha_u=0.5, m(A,Z)=-0.4+0.8A+1.2Z-AZ,
  // eps ~ Logistic(0, 0.3), A,Z ~ N(0, 0.5^2).
  static StudyConfig ss_default();

  void validate() const;
  ModelSpec model_spec() const;
};

struct EstimateOutcome {
  bool ok = false;
  double estimate = 0.0;
  std::string error;
};

struct CiOutcome {
  bool ok = false;
  double se = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
  int replicate_failures = 0;  // dropped bootstrap replicates
  std::string error;
};

struct ReplicationResult {
  EstimateOutcome naive;
  EstimateOutcome naive_linear;
  EstimateOutcome oracle;
  EstimateOutcome two_stage;
  CiOutcome boot;  // two-stage bootstrap interval
  CiOutcome sand;  // two-stage sandwich interval
};

// One dataset, all estimators. Deterministic in (master_seed, n, rep_index).
ReplicationResult run_replication(const StudyConfig& config, int n,
                                  int rep_index);

struct SimRow {
  int n = 0;
  std::string estimator;
  double bias = 0.0;
  double empirical_se = 0.0;
  std::optional<double> model_se;
  std::optional<double> coverage;
  int failures = 0;

  bool operator==(const SimRow&) const = default;
};

struct SimReport {
  double true_beta_a = 0.0;
  std::vector<SimRow> rows;
};

// Aggregates replications; rows come out in a fixed order regardless of the
// parallelism level. With variance "both", the two-stage estimator gets a
// second row labeled two_stage_sandwich.
SimReport run_study(const StudyConfig& config, int jobs = 1);

// Aligned text table (the simulation-summary shape) and the CSV schema
// n,estimator,bias,empirical_se,model_se,coverage,failures.
std::string summarize_text(const SimReport& report);
std::string summarize_csv(const SimReport& report);
std::vector<SimRow> parse_report_csv(const std::string& csv);

}  // namespace proxi2s

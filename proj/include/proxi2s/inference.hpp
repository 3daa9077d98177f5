#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "proxi2s/proximal.hpp"
#include "proxi2s/types.hpp"

namespace proxi2s {

// Stacked estimating equations Psi = [Psi1; Psi2] for a fitted plan. The
// first block is the first-stage score; the second block recomputes the
// control variable from the alpha parameters, so the system sees the
// two-stage estimator as a joint M-estimator.
struct StackedSystem {
  ProcedurePlan plan;
  Matrix d1;    // first-stage design (with Y indicators for multinomial)
  Matrix d1s;   // same design evaluated at the control-variable stratum
  Matrix d2base;  // [1 | second-stage base terms]
  Vector w;
  Vector y;
  int w_levels = 0;  // K+1 when the proxy is multinomial, else 0
  int y_levels = 0;  // T+1 when the outcome is multinomial, else 0
  int p1 = 0;        // per-level first-stage parameter count
  int p2 = 0;        // per-level second-stage parameter count
  int dim = 0;       // total stacked parameter count
  int idx_beta_a = 0;      // position of beta_a within the full vector
  int idx_alpha_y = -1;    // first-stage Y column (restricted variant)
  int idx_s = -1;          // control-variable column in the second design
  int idx_w = -1;          // W column in the second design (-1 if absent)
  int idx_sw = -1;         // S*W column (-1 if absent)
  std::vector<std::string> names;
};

StackedSystem make_stacked_system(const Dataset& data,
                                  const ProcedurePlan& plan);

// Concatenates the fitted (alpha*, beta*) in the system's layout.
Vector pack_params(const StackedSystem& system, const TwoStageFit& fit);

// (1/N) sum_i Psi(O_i; params).
Vector stacked_score(const StackedSystem& system, const Vector& params);

// Central finite differences of stacked_score, step 1e-6 * (1 + |theta_k|).
Matrix jacobian_numeric(const StackedSystem& system, const Vector& params);

// Closed-form Jacobian blocks; defined for scalar-link plans (identity,
// log, logit stages, including the restricted logit-logit variant). Throws
// SpecError for multinomial plans - callers fall back to jacobian_numeric.
Matrix jacobian_analytic(const StackedSystem& system, const Vector& params);

struct SandwichResult {
  Matrix a_n;
  Matrix b_n;
  Matrix v_n;
  std::map<std::string, double> se;  // sqrt(diag(V)/N) by parameter name
  double sigma_a = 0.0;              // sqrt(V_jj) at beta_a
  double se_beta_a = 0.0;            // sigma_a / sqrt(N)
  double condition_a = 0.0;
  bool analytic = false;
};

SandwichResult sandwich(const Dataset& data, const TwoStageFit& fit);

std::pair<double, double> wald_ci(double estimate, double se, double level);

struct BootstrapResult {
  int b_requested = 0;
  std::vector<double> estimates;  // successful replicate estimates of beta_a
  double se = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
  int failures = 0;
  Matrix coef_draws;  // successful second-stage coefficient vectors
  std::vector<std::string> coef_names;
};

// Resamples rows with replacement and refits; failed replicates are dropped
// and counted, more than 20% failures is an error. Deterministic in seed.
BootstrapResult bootstrap(const Dataset& data, const ModelSpec& spec, int b,
                          std::uint64_t seed, double level);
BootstrapResult bootstrap(const Dataset& data, const ProcedurePlan& plan,
                          int b, std::uint64_t seed, double level);

}  // namespace proxi2s

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "proxi2s/dataset.hpp"
#include "proxi2s/types.hpp"

namespace proxi2s {

// Probabilities from the logit inverse link are clamped to
// (kProbClamp, 1 - kProbClamp) so working weights stay finite.
inline constexpr double kProbClamp = 1e-12;

double inverse_link(Link link, double eta);
Vector inverse_link(Link link, const Vector& eta);

// d mu / d eta for the canonical links.
double link_mu_eta(Link link, double eta);

struct GlmFit {
  Link link = Link::identity;
  Vector coef;                  // p
  Vector eta;                   // n, includes the offset
  Vector mu;                    // n
  double deviance = 0.0;
  bool converged = false;
  int iterations = 0;
  double condition = 0.0;       // R-diagonal ratio of the weighted design QR
  std::vector<std::string> names;  // column labels, optional
};

struct GlmOptions {
  std::optional<Vector> offset;
  std::optional<Vector> weights;  // prior weights, all > 0
  std::vector<std::string> names;
  int max_iterations = 100;
  int max_step_halvings = 20;
  double score_tol = 1e-8;      // on (1/n) ||X^T w (y - mu)||_inf
  double deviance_tol = 1e-8;   // relative deviance change
};

// Canonical-link maximum likelihood via iteratively reweighted least
// squares. The identity link reduces to a single weighted solve. Throws
// RankDeficiencyError (naming offending columns), ConvergenceError, or
// SeparationError (logit only).
GlmFit fit_glm(const Matrix& design, const Vector& response, Link link,
               const GlmOptions& options = {});

// design * coef (+ offset); the fit's stored offset is not reused because
// predictions are typically made on a different design.
Vector predict_eta(const GlmFit& fit, const Matrix& design,
                   const std::optional<Vector>& offset = std::nullopt);

// Convenience overload building the design from a term spec, with optional
// column overrides for stratum evaluation (e.g. Y fixed at 1).
Vector predict_eta(const GlmFit& fit, const Dataset& data,
                   const TermSpec& spec, const Overrides& overrides = {});

struct MultinomialFit {
  int levels = 0;               // K + 1 response categories
  Matrix coef;                  // K x p, row k for level k vs level 0
  Matrix eta;                   // n x K
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> names;
};

// Baseline-category logit fit by Newton's method with the full (Kp)x(Kp)
// Hessian. The response holds category codes 0..K; every level must be
// observed. K = 1 coincides with fit_glm under the logit link.
MultinomialFit fit_multinomial(const Matrix& design, const Vector& response,
                               const GlmOptions& options = {});

// Per-row category probabilities (n x (K+1)), columns ordered 0..K.
Matrix multinomial_probabilities(const MultinomialFit& fit);
Matrix multinomial_probabilities(const Matrix& eta);

}  // namespace proxi2s

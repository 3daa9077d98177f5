#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "proxi2s/dataset.hpp"
#include "proxi2s/rng.hpp"
#include "proxi2s/types.hpp"

namespace proxi2s {

// Conditional mean of the latent confounder in the baseline stratum:
// m(A,Z) = c0 + ca A + cz Z + caz A Z.
struct MCoefs {
  double c0 = 0.0, ca = 0.0, cz = 0.0, caz = 0.0;
  double operator()(double a, double z) const {
    return c0 + ca * a + cz * z + caz * a * z;
  }
};

struct EpsDist {
  enum class Kind { logistic, normal };
  Kind kind = Kind::logistic;
  double mu = 0.0;
  double scale = 1.0;  // logistic scale s, or normal sigma

  static EpsDist make_logistic(double mu, double s) {
    return {Kind::logistic, mu, s};
  }
  static EpsDist make_normal(double mu, double sigma) {
    return {Kind::normal, mu, sigma};
  }
  double log_pdf(double e) const;
  double draw(Rng& rng) const;
};

struct AzDist {
  double sd_a = 0.5;
  double sd_z = 0.5;
};

// Structural parameters of the binary logit-logit data generating process.
// The Y->W and W->Y log odds-ratio coefficients coincide, so beta_w is the
// single shared parameter and alpha_y() exposes the other name.
struct DgpParams {
  double beta0 = 0.0, beta_a = 0.0, beta_u = 0.0, beta_w = 0.0;
  double alpha0 = 0.0, alpha_u = 0.0;
  MCoefs m;
  EpsDist eps;
  AzDist az;
  double noise_sd_y = 1.0;  // identity-link noise (linear/cross DGPs)
  double noise_sd_w = 1.0;

  double alpha_y() const { return beta_w; }
  double tail_rate() const;
  // Enforces the integrability requirement for logistic errors:
  // max(|beta_u|, |alpha_u|, |beta_u + alpha_u|) < 1/s.
  void validate() const;
};

struct GeneratedDataset {
  Dataset dataset;    // latent u retained
  DgpParams params;   // structural coefficients used (where applicable)
  std::uint64_t seed = 0;
  long proposals = 0;
  long acceptances = 0;
};

// Unnormalized density of U | A=a, Z=z implied by the structural models:
// f_eps(u - m(a,z)) times the (y,w)-marginalized odds-ratio tilt, evaluated
// in log space. density_u_unnorm exponentiates the log form.
double log_density_u_unnorm(double u, double a, double z,
                            const DgpParams& params);
double density_u_unnorm(double u, double a, double z, const DgpParams& params);

// Exact draw from the normalized density via accept-reject with a widened
// logistic proposal; throws NumericError after 1e5 rejections for one draw.
double sample_u(double a, double z, const DgpParams& params, Rng& rng);

// Joint (Y,W) masses at fixed (u,a): {(0,0),(1,0),(0,1),(1,1)}, normalized.
std::array<double, 4> yw_probabilities(double u, double a,
                                       const DgpParams& params);
std::pair<int, int> sample_yw(double u, double a, double z,
                              const DgpParams& params, Rng& rng);

// Binary logit-logit dataset: A,Z normal; U accept-reject; (Y,W) bivariate
// Bernoulli via a 4-level categorical draw.
GeneratedDataset generate_logit_dataset(int n, const DgpParams& params,
                                        std::uint64_t seed);

// Identity-identity: U = m(A,Z) + eps, W and Y are structural means plus
// independent normal noise.
GeneratedDataset generate_linear_dataset(int n, const DgpParams& params,
                                         std::uint64_t seed);

// Log-log: W and Y Poisson with exp-link structural means.
GeneratedDataset generate_count_dataset(int n, const DgpParams& params,
                                        std::uint64_t seed);

// Mixed-link cases: one stage logit, the other identity or log. The latent
// draw tilts f_eps by the single logit factor; the remaining variable is
// drawn from its structural conditional.
enum class CrossCase {
  y_logit_w_identity,  // Procedures 8/9
  y_logit_w_log,       // Procedures 12/13
  y_identity_w_logit,  // Procedures 10/11
  y_log_w_logit,       // Procedures 14/15
};

struct CrossDgpParams {
  CrossCase kind = CrossCase::y_logit_w_identity;
  double beta0 = 0.0, beta_a = 0.0, beta_u = 0.0;
  double beta_w = 0.0;   // W-logit cases: W coefficient in the Y model
  double alpha0 = 0.0, alpha_u = 0.0;
  double alpha_y = 0.0;  // Y-logit cases: Y coefficient in the W model
  bool interaction = false;
  double interaction_coef = 0.0;  // alpha_uy (Y-logit) or beta_uw (W-logit)
  MCoefs m;
  EpsDist eps;
  AzDist az;
  double noise_sd_y = 1.0;
  double noise_sd_w = 1.0;

  double tail_rate() const;
  void validate() const;
};

GeneratedDataset generate_cross_dataset(int n, const CrossDgpParams& params,
                                        std::uint64_t seed);

// Polytomous generalization: Y has T+1 levels, W has K+1 levels, scalar U.
struct PolyDgpParams {
  Vector beta0t, beta_at, beta_ut;  // length T
  Vector alpha0k, alpha_uk;         // length K
  Matrix or_yw;                     // T x K log odds-ratio exponents
  MCoefs m;
  EpsDist eps;
  AzDist az;

  double tail_rate() const;
  void validate() const;
};

GeneratedDataset generate_poly_dataset(int n, const PolyDgpParams& params,
                                       std::uint64_t seed);

}  // namespace proxi2s

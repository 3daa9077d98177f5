#include "proxi2s/datagen.hpp"

#include <cmath>
#include <functional>

#include "proxi2s/error.hpp"

namespace proxi2s {

namespace {

constexpr double kProposalSafety = 1.25;
constexpr int kGridPoints = 2001;
constexpr double kGridHalfWidth = 25.0;
constexpr double kEnvelopeInflation = 1.5;
constexpr long kMaxRejections = 100000;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log pdf of a logistic(0, s) at offset e; symmetric form for stability.
double logistic_log_pdf0(double e, double s) {
  const double t = std::abs(e) / s;
  return -t - 2.0 * std::log1p(std::exp(-t)) - std::log(s);
}

}  // namespace

double EpsDist::log_pdf(double e) const {
  if (kind == Kind::logistic) return logistic_log_pdf0(e - mu, scale);
  const double t = (e - mu) / scale;
  return -0.5 * t * t - std::log(scale) - 0.91893853320467274178;  // log sqrt(2 pi)
}

double EpsDist::draw(Rng& rng) const {
  return kind == Kind::logistic ? rng.logistic(mu, scale)
                                : rng.normal(mu, scale);
}

namespace {

double proposal_scale(const EpsDist& eps, double tail_rate) {
  if (eps.kind == EpsDist::Kind::logistic) {
    const double margin = 1.0 / eps.scale - tail_rate;
    if (margin <= 0.0)
      throw DataError(
          "tail-rate invariant violated: the exponential tilt outruns the "
          "logistic error tails (need max(|beta_u|,|alpha_u|,|beta_u+alpha_u|)"
          " < 1/s)");
    return kProposalSafety / margin;
  }
  return kProposalSafety * eps.scale * (1.0 + eps.scale * tail_rate);
}

// Accept-reject for the latent confounder. The target at (a,z) is
// f_eps(u - m) * exp(tilt(u, a)); the proposal is a logistic centered with
// the error's location and a widened scale, so the ratio stays bounded
// under the exponential tilt. The envelope constant is the grid maximum of
// the log ratio over m +- 25 (2001 points), inflated by 1.5.
class LatentSampler {
 public:
  using GridTilt =
      std::function<void(const Eigen::ArrayXd&, double, Eigen::ArrayXd&)>;
  using Tilt = std::function<double(double, double)>;

  LatentSampler(const EpsDist& eps, double tail_rate, Tilt tilt,
                GridTilt grid_tilt)
      : eps_(eps),
        s_prop_(proposal_scale(eps, tail_rate)),
        tilt_(std::move(tilt)),
        grid_tilt_(std::move(grid_tilt)),
        offsets_(kGridPoints),
        base_(kGridPoints),
        grid_u_(kGridPoints),
        grid_tmp_(kGridPoints) {
    for (int i = 0; i < kGridPoints; ++i) {
      const double off =
          -kGridHalfWidth + 2.0 * kGridHalfWidth * i / (kGridPoints - 1);
      offsets_[i] = off;
      // both terms depend on the offset from the proposal center only
      base_[i] = eps_.log_pdf(off + eps_.mu) - logistic_log_pdf0(off, s_prop_);
    }
  }

  double draw(double m, double a, Rng& rng, long& proposals) {
    const double center = m + eps_.mu;
    grid_u_ = offsets_ + center;
    grid_tilt_(grid_u_, a, grid_tmp_);
    const double log_m =
        (base_ + grid_tmp_).maxCoeff() + std::log(kEnvelopeInflation);

    for (long trial = 0; trial < kMaxRejections; ++trial) {
      ++proposals;
      const double u = rng.logistic(center, s_prop_);
      const double log_ratio = eps_.log_pdf(u - m) + tilt_(u, a) -
                               logistic_log_pdf0(u - center, s_prop_) - log_m;
      if (std::log(rng.uniform()) < log_ratio) return u;
    }
    throw NumericError(
        "accept-reject envelope failure: no acceptance within 1e5 proposals");
  }

 private:
  EpsDist eps_;
  double s_prop_;
  Tilt tilt_;
  GridTilt grid_tilt_;
  Eigen::ArrayXd offsets_, base_, grid_u_, grid_tmp_;
};

// log of the (y,w)-marginalized odds-ratio tilt for the binary DGP:
// logsumexp{0, by, aw, by+aw+beta_w} - log(1+e^{by0}) - log(1+e^{alpha0}).
double binary_tilt(double u, double a, const DgpParams& p) {
  const double by = p.beta0 + p.beta_a * a + p.beta_u * u;
  const double aw = p.alpha0 + p.alpha_u * u;
  const double top = by + aw + p.beta_w;
  const double m = std::max({0.0, by, aw, top});
  const double lse = m + std::log(std::exp(-m) + std::exp(by - m) +
                                  std::exp(aw - m) + std::exp(top - m));
  return lse - softplus(p.beta0 + p.beta_a * a) - softplus(p.alpha0);
}

void binary_tilt_grid(const Eigen::ArrayXd& u, double a, const DgpParams& p,
                      Eigen::ArrayXd& out) {
  const double by0 = p.beta0 + p.beta_a * a;
  Eigen::ArrayXd by = by0 + p.beta_u * u;
  Eigen::ArrayXd aw = p.alpha0 + p.alpha_u * u;
  Eigen::ArrayXd top = by + aw + p.beta_w;
  Eigen::ArrayXd m = by.max(aw).max(top).max(0.0);
  out = m +
        ((-m).exp() + (by - m).exp() + (aw - m).exp() + (top - m).exp())
            .log() -
        softplus(by0) - softplus(p.alpha0);
}

Rng stream(std::uint64_t seed, std::uint64_t which) {
  return Rng(derive_seed(seed, {which}));
}

}  // namespace

double DgpParams::tail_rate() const {
  return std::max({std::abs(beta_u), std::abs(alpha_u),
                   std::abs(beta_u + alpha_u)});
}

void DgpParams::validate() const {
  if (az.sd_a <= 0.0 || az.sd_z <= 0.0)
    throw DataError("A and Z standard deviations must be positive");
  if (eps.scale <= 0.0) throw DataError("error scale must be positive");
  if (eps.kind == EpsDist::Kind::logistic &&
      tail_rate() >= 1.0 / eps.scale)
    throw DataError(
        "tail-rate invariant violated: need max(|beta_u|, |alpha_u|, "
        "|beta_u+alpha_u|) < 1/s for logistic errors");
}

double log_density_u_unnorm(double u, double a, double z,
                            const DgpParams& params) {
  return params.eps.log_pdf(u - params.m(a, z)) + binary_tilt(u, a, params);
}

double density_u_unnorm(double u, double a, double z,
                        const DgpParams& params) {
  return std::exp(log_density_u_unnorm(u, a, z, params));
}

double sample_u(double a, double z, const DgpParams& params, Rng& rng) {
  params.validate();
  LatentSampler sampler(
      params.eps, params.tail_rate(),
      [&params](double u, double aa) { return binary_tilt(u, aa, params); },
      [&params](const Eigen::ArrayXd& u, double aa, Eigen::ArrayXd& out) {
        binary_tilt_grid(u, aa, params, out);
      });
  long proposals = 0;
  return sampler.draw(params.m(a, z), a, rng, proposals);
}

std::array<double, 4> yw_probabilities(double u, double a,
                                       const DgpParams& params) {
  // masses for (y,w) in {(0,0),(1,0),(0,1),(1,1)}
  const double by = params.beta0 + params.beta_a * a + params.beta_u * u;
  const double aw = params.alpha0 + params.alpha_u * u;
  const std::array<double, 4> logm{0.0, by, aw, by + aw + params.beta_w};
  const double m = std::max({logm[0], logm[1], logm[2], logm[3]});
  std::array<double, 4> p{};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    p[i] = std::exp(logm[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::pair<int, int> sample_yw(double u, double a, double /*z*/,
                              const DgpParams& params, Rng& rng) {
  const std::array<double, 4> p = yw_probabilities(u, a, params);
  const int cell = rng.categorical(p);
  switch (cell) {
    case 0: return {0, 0};
    case 1: return {1, 0};
    case 2: return {0, 1};
    default: return {1, 1};
  }
}

namespace {

GeneratedDataset shell(int n, std::uint64_t seed) {
  if (n < 1) throw DataError("dataset size must be at least 1");
  GeneratedDataset out;
  out.seed = seed;
  out.dataset.y.resize(n);
  out.dataset.a.resize(n);
  out.dataset.w.resize(n);
  out.dataset.z.resize(n, 1);
  out.dataset.x.resize(n, 0);
  out.dataset.u = Vector(n);
  return out;
}

void draw_az(GeneratedDataset& g, const AzDist& az, Rng& rng) {
  const Eigen::Index n = g.dataset.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    g.dataset.a[i] = rng.normal(0.0, az.sd_a);
    g.dataset.z(i, 0) = rng.normal(0.0, az.sd_z);
  }
}

}  // namespace

GeneratedDataset generate_logit_dataset(int n, const DgpParams& params,
                                        std::uint64_t seed) {
  params.validate();
  GeneratedDataset g = shell(n, seed);
  g.params = params;
  Rng rng_az = stream(seed, 1);
  Rng rng_u = stream(seed, 2);
  Rng rng_yw = stream(seed, 3);
  draw_az(g, params.az, rng_az);

  LatentSampler sampler(
      params.eps, params.tail_rate(),
      [&params](double u, double a) { return binary_tilt(u, a, params); },
      [&params](const Eigen::ArrayXd& u, double a, Eigen::ArrayXd& out) {
        binary_tilt_grid(u, a, params, out);
      });

  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = g.dataset.a[i];
    const double z = g.dataset.z(i, 0);
    const double u = sampler.draw(params.m(a, z), a, rng_u, g.proposals);
    (*g.dataset.u)[i] = u;
    auto [y, w] = sample_yw(u, a, z, params, rng_yw);
    g.dataset.y[i] = y;
    g.dataset.w[i] = w;
    ++g.acceptances;
  }
  return g;
}

GeneratedDataset generate_linear_dataset(int n, const DgpParams& params,
                                         std::uint64_t seed) {
  params.validate();
  GeneratedDataset g = shell(n, seed);
  g.params = params;
  Rng rng_az = stream(seed, 1);
  Rng rng_u = stream(seed, 2);
  Rng rng_yw = stream(seed, 3);
  draw_az(g, params.az, rng_az);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = g.dataset.a[i];
    const double z = g.dataset.z(i, 0);
    const double u = params.m(a, z) + params.eps.draw(rng_u);
    (*g.dataset.u)[i] = u;
    g.dataset.w[i] = params.alpha0 + params.alpha_u * u +
                     rng_yw.normal(0.0, params.noise_sd_w);
    g.dataset.y[i] = params.beta0 + params.beta_a * a + params.beta_u * u +
                     rng_yw.normal(0.0, params.noise_sd_y);
    ++g.acceptances;
  }
  g.proposals = n;
  return g;
}

GeneratedDataset generate_count_dataset(int n, const DgpParams& params,
                                        std::uint64_t seed) {
  params.validate();
  GeneratedDataset g = shell(n, seed);
  g.params = params;
  Rng rng_az = stream(seed, 1);
  Rng rng_u = stream(seed, 2);
  Rng rng_yw = stream(seed, 3);
  draw_az(g, params.az, rng_az);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = g.dataset.a[i];
    const double z = g.dataset.z(i, 0);
    const double u = params.m(a, z) + params.eps.draw(rng_u);
    (*g.dataset.u)[i] = u;
    g.dataset.w[i] = rng_yw.poisson(std::exp(params.alpha0 + params.alpha_u * u));
    g.dataset.y[i] = rng_yw.poisson(
        std::exp(params.beta0 + params.beta_a * a + params.beta_u * u));
    ++g.acceptances;
  }
  g.proposals = n;
  return g;
}

double CrossDgpParams::tail_rate() const {
  switch (kind) {
    case CrossCase::y_logit_w_identity:
    case CrossCase::y_logit_w_log:
      return std::abs(beta_u);
    case CrossCase::y_identity_w_logit:
    case CrossCase::y_log_w_logit:
      return std::abs(alpha_u);
  }
  return 0.0;
}

void CrossDgpParams::validate() const {
  if (az.sd_a <= 0.0 || az.sd_z <= 0.0)
    throw DataError("A and Z standard deviations must be positive");
  if (eps.scale <= 0.0) throw DataError("error scale must be positive");
  if (eps.kind == EpsDist::Kind::logistic && tail_rate() >= 1.0 / eps.scale)
    throw DataError("tail-rate invariant violated for the logistic error");
}

GeneratedDataset generate_cross_dataset(int n, const CrossDgpParams& params,
                                        std::uint64_t seed) {
  params.validate();
  GeneratedDataset g = shell(n, seed);
  g.params.beta0 = params.beta0;
  g.params.beta_a = params.beta_a;
  g.params.beta_u = params.beta_u;
  g.params.beta_w = params.beta_w;
  g.params.alpha0 = params.alpha0;
  g.params.alpha_u = params.alpha_u;
  g.params.m = params.m;
  g.params.eps = params.eps;
  g.params.az = params.az;
  Rng rng_az = stream(seed, 1);
  Rng rng_u = stream(seed, 2);
  Rng rng_yw = stream(seed, 3);
  draw_az(g, params.az, rng_az);

  const bool y_is_logit = params.kind == CrossCase::y_logit_w_identity ||
                          params.kind == CrossCase::y_logit_w_log;

  // The latent density tilts f_eps by the one logit factor of the case:
  // f(U|A,Z) proportional to f_eps(u-m) (1+e^{eta(u)}) / (1+e^{eta(E0)}),
  // which makes U | A,Z,(Y or W)=0 exactly a shifted eps draw.
  LatentSampler::Tilt tilt;
  LatentSampler::GridTilt grid_tilt;
  if (y_is_logit) {
    tilt = [&params](double u, double a) {
      return softplus(params.beta0 + params.beta_a * a + params.beta_u * u) -
             softplus(params.beta0 + params.beta_a * a);
    };
    grid_tilt = [&params](const Eigen::ArrayXd& u, double a,
                          Eigen::ArrayXd& out) {
      const double by0 = params.beta0 + params.beta_a * a;
      Eigen::ArrayXd by = by0 + params.beta_u * u;
      out = by.max(0.0) + (-(by.abs())).exp().log1p() - softplus(by0);
    };
  } else {
    tilt = [&params](double u, double) {
      return softplus(params.alpha0 + params.alpha_u * u) -
             softplus(params.alpha0);
    };
    grid_tilt = [&params](const Eigen::ArrayXd& u, double,
                          Eigen::ArrayXd& out) {
      Eigen::ArrayXd aw = params.alpha0 + params.alpha_u * u;
      out = aw.max(0.0) + (-(aw.abs())).exp().log1p() - softplus(params.alpha0);
    };
  }
  LatentSampler sampler(params.eps, params.tail_rate(), tilt, grid_tilt);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = g.dataset.a[i];
    const double z = g.dataset.z(i, 0);
    const double u = sampler.draw(params.m(a, z), a, rng_u, g.proposals);
    (*g.dataset.u)[i] = u;

    if (y_is_logit) {
      const double py =
          1.0 / (1.0 + std::exp(-(params.beta0 + params.beta_a * a +
                                  params.beta_u * u)));
      const double y = rng_yw.bernoulli(py);
      double eta_w = params.alpha0 + params.alpha_u * u + params.alpha_y * y;
      if (params.interaction) eta_w += params.interaction_coef * u * y;
      g.dataset.y[i] = y;
      g.dataset.w[i] = params.kind == CrossCase::y_logit_w_identity
                           ? eta_w + rng_yw.normal(0.0, params.noise_sd_w)
                           : rng_yw.poisson(std::exp(eta_w));
    } else {
      const double pw =
          1.0 / (1.0 + std::exp(-(params.alpha0 + params.alpha_u * u)));
      const double w = rng_yw.bernoulli(pw);
      double eta_y = params.beta0 + params.beta_a * a + params.beta_u * u +
                     params.beta_w * w;
      if (params.interaction) eta_y += params.interaction_coef * u * w;
      g.dataset.w[i] = w;
      g.dataset.y[i] = params.kind == CrossCase::y_identity_w_logit
                           ? eta_y + rng_yw.normal(0.0, params.noise_sd_y)
                           : rng_yw.poisson(std::exp(eta_y));
    }
    ++g.acceptances;
  }
  return g;
}

double PolyDgpParams::tail_rate() const {
  double r = 0.0;
  for (Eigen::Index t = 0; t < beta_ut.size(); ++t)
    r = std::max(r, std::abs(beta_ut[t]));
  for (Eigen::Index k = 0; k < alpha_uk.size(); ++k)
    r = std::max(r, std::abs(alpha_uk[k]));
  for (Eigen::Index t = 0; t < beta_ut.size(); ++t)
    for (Eigen::Index k = 0; k < alpha_uk.size(); ++k)
      r = std::max(r, std::abs(beta_ut[t] + alpha_uk[k]));
  return r;
}

void PolyDgpParams::validate() const {
  const Eigen::Index t = beta0t.size();
  const Eigen::Index k = alpha0k.size();
  if (t < 1 || k < 1) throw DataError("polytomous DGP needs T >= 1, K >= 1");
  if (beta_at.size() != t || beta_ut.size() != t)
    throw DataError("outcome coefficient vectors must share length T");
  if (alpha_uk.size() != k)
    throw DataError("proxy coefficient vectors must share length K");
  if (or_yw.rows() != t || or_yw.cols() != k)
    throw DataError("odds-ratio matrix must be T x K");
  if (az.sd_a <= 0.0 || az.sd_z <= 0.0)
    throw DataError("A and Z standard deviations must be positive");
  if (eps.kind == EpsDist::Kind::logistic && tail_rate() >= 1.0 / eps.scale)
    throw DataError("tail-rate invariant violated for the logistic error");
}

GeneratedDataset generate_poly_dataset(int n, const PolyDgpParams& params,
                                       std::uint64_t seed) {
  params.validate();
  const int T = static_cast<int>(params.beta0t.size());
  const int K = static_cast<int>(params.alpha0k.size());

  GeneratedDataset g = shell(n, seed);
  Rng rng_az = stream(seed, 1);
  Rng rng_u = stream(seed, 2);
  Rng rng_yw = stream(seed, 3);
  draw_az(g, params.az, rng_az);

  // log masses over the (T+1) x (K+1) table at fixed (u, a); level 0 rows
  // and columns carry zero exponents.
  auto cell_logmass = [&](int t, int k, double u, double a) {
    double v = 0.0;
    if (t > 0)
      v += params.beta0t[t - 1] + params.beta_at[t - 1] * a +
           params.beta_ut[t - 1] * u;
    if (k > 0) v += params.alpha0k[k - 1] + params.alpha_uk[k - 1] * u;
    if (t > 0 && k > 0) v += params.or_yw(t - 1, k - 1);
    return v;
  };

  // u-free normalizers drop out of the accept-reject ratio, so the tilt is
  // just the log of the summed table masses.
  auto tilt = [&](double u, double a) {
    double m = 0.0;
    for (int t = 0; t <= T; ++t)
      for (int k = 0; k <= K; ++k)
        m = std::max(m, cell_logmass(t, k, u, a));
    double s = 0.0;
    for (int t = 0; t <= T; ++t)
      for (int k = 0; k <= K; ++k)
        s += std::exp(cell_logmass(t, k, u, a) - m);
    return m + std::log(s);
  };
  auto grid_tilt = [&](const Eigen::ArrayXd& u, double a, Eigen::ArrayXd& out) {
    for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = tilt(u[i], a);
  };

  LatentSampler sampler(params.eps, params.tail_rate(), tilt, grid_tilt);
  std::vector<double> masses(static_cast<std::size_t>((T + 1) * (K + 1)));

  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = g.dataset.a[i];
    const double z = g.dataset.z(i, 0);
    const double u = sampler.draw(params.m(a, z), a, rng_u, g.proposals);
    (*g.dataset.u)[i] = u;

    double m = 0.0;
    for (int t = 0; t <= T; ++t)
      for (int k = 0; k <= K; ++k)
        m = std::max(m, cell_logmass(t, k, u, a));
    for (int t = 0; t <= T; ++t)
      for (int k = 0; k <= K; ++k)
        masses[static_cast<std::size_t>(t * (K + 1) + k)] =
            std::exp(cell_logmass(t, k, u, a) - m);
    const int cell = rng_yw.categorical(masses);
    g.dataset.y[i] = cell / (K + 1);
    g.dataset.w[i] = cell % (K + 1);
    ++g.acceptances;
  }
  return g;
}

}  // namespace proxi2s

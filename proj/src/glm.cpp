#include "proxi2s/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "proxi2s/error.hpp"

namespace proxi2s {

double inverse_link(Link link, double eta) {
  switch (link) {
    case Link::identity:
      return eta;
    case Link::log:
      return std::exp(eta);
    case Link::logit: {
      double p = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                            : std::exp(eta) / (1.0 + std::exp(eta));
      return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
    }
  }
  return eta;
}

Vector inverse_link(Link link, const Vector& eta) {
  Vector mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    mu[i] = inverse_link(link, eta[i]);
  return mu;
}

double link_mu_eta(Link link, double eta) {
  switch (link) {
    case Link::identity:
      return 1.0;
    case Link::log:
      return std::exp(eta);
    case Link::logit: {
      double p = inverse_link(Link::logit, eta);
      return p * (1.0 - p);
    }
  }
  return 1.0;
}

namespace {

std::string column_label(const std::vector<std::string>& names,
                         Eigen::Index j) {
  if (j < static_cast<Eigen::Index>(names.size()))
    return names[static_cast<std::size_t>(j)];
  return "column " + std::to_string(j);
}

void check_full_rank(const Matrix& design,
                     const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank == design.cols()) return;
  // Columns pivoted past the numerical rank are the dependent ones.
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream msg;
  msg << "design matrix is rank deficient (rank " << rank << " of "
      << design.cols() << "); offending columns:";
  for (Eigen::Index k = rank; k < design.cols(); ++k)
    msg << " " << column_label(names, perm[k]);
  throw RankDeficiencyError(msg.str());
}

void validate_response(const Vector& y, Link link) {
  switch (link) {
    case Link::identity:
      return;
    case Link::log:
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0 || std::abs(y[i] - std::round(y[i])) > 1e-8)
          throw DataError(
              "log link requires nonnegative integer counts; got " +
              std::to_string(y[i]) + " at row " + std::to_string(i));
      }
      return;
    case Link::logit:
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0)
          throw DataError("logit link requires a 0/1 response; got " +
                          std::to_string(y[i]) + " at row " +
                          std::to_string(i));
      }
      return;
  }
}

double deviance_of(Link link, const Vector& y, const Vector& mu,
                   const Vector& w) {
  double dev = 0.0;
  switch (link) {
    case Link::identity:
      for (Eigen::Index i = 0; i < y.size(); ++i)
        dev += w[i] * (y[i] - mu[i]) * (y[i] - mu[i]);
      return dev;
    case Link::log:
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double term = y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0;
        dev += 2.0 * w[i] * (term - (y[i] - mu[i]));
      }
      return dev;
    case Link::logit:
      for (Eigen::Index i = 0; i < y.size(); ++i)
        dev -= 2.0 * w[i] * (y[i] * std::log(mu[i]) +
                             (1.0 - y[i]) * std::log(1.0 - mu[i]));
      return dev;
  }
  return dev;
}

}  // namespace

GlmFit fit_glm(const Matrix& design, const Vector& response, Link link,
               const GlmOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n)
    throw DataError("response length does not match the design matrix");
  if (n < p) throw DataError("more design columns than observations");
  validate_response(response, link);

  Vector offset = options.offset ? *options.offset : Vector::Zero(n);
  if (offset.size() != n) throw DataError("offset length mismatch");
  Vector w = options.weights ? *options.weights : Vector::Ones(n);
  if (w.size() != n) throw DataError("weights length mismatch");
  if ((w.array() <= 0.0).any()) throw DataError("weights must be positive");

  check_full_rank(design, options.names);

  GlmFit fit;
  fit.link = link;
  fit.names = options.names;
  fit.coef = Vector::Zero(p);
  fit.eta = design * fit.coef + offset;
  fit.mu = inverse_link(link, fit.eta);
  fit.deviance = deviance_of(link, response, fit.mu, w);

  Vector work_w(n), work_z(n), wsqrt(n);
  Matrix weighted(n, p);
  Eigen::ColPivHouseholderQR<Matrix> qr;

  const double n_real = static_cast<double>(n);
  auto score_inf = [&]() {
    Vector score = design.transpose() *
                   (w.array() * (response - fit.mu).array()).matrix();
    return score.lpNorm<Eigen::Infinity>() / n_real;
  };

  // Identity link: one weighted solve is exact.
  const int max_iter = link == Link::identity ? 1 : options.max_iterations;

  for (int iter = 1; iter <= max_iter; ++iter) {
    fit.iterations = iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = link_mu_eta(link, fit.eta[i]);
      work_w[i] = w[i] * d;
      work_z[i] = (fit.eta[i] - offset[i]) + (response[i] - fit.mu[i]) / d;
      wsqrt[i] = std::sqrt(work_w[i]);
    }
    weighted = wsqrt.asDiagonal() * design;
    qr.compute(weighted);
    if (qr.rank() < p)
      check_full_rank(weighted, options.names);  // throws with labels
    Vector target = wsqrt.array() * work_z.array();
    Vector proposal = qr.solve(target);

    {
      const Vector rdiag = qr.matrixR().diagonal().cwiseAbs();
      const double rmin = rdiag.minCoeff();
      fit.condition = rmin > 0.0
                          ? rdiag.maxCoeff() / rmin
                          : std::numeric_limits<double>::infinity();
    }

    // Step-halving keeps the deviance non-increasing.
    const Vector previous = fit.coef;
    const double dev_old = fit.deviance;
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half <= options.max_step_halvings; ++half) {
      fit.coef = previous + t * (proposal - previous);
      fit.eta = design * fit.coef + offset;
      fit.mu = inverse_link(link, fit.eta);
      fit.deviance = deviance_of(link, response, fit.mu, w);
      if (std::isfinite(fit.deviance) &&
          fit.deviance <= dev_old * (1.0 + 1e-12) + 1e-12) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fit.coef = previous;
      fit.eta = design * fit.coef + offset;
      fit.mu = inverse_link(link, fit.eta);
      fit.deviance = dev_old;
    }

    const double score = score_inf();
    const double rel_change =
        std::abs(dev_old - fit.deviance) / (std::abs(fit.deviance) + 0.1);
    // Perfect separation drives the clamped score to zero, so test for it
    // before declaring convergence.
    if (link == Link::logit && fit.eta.lpNorm<Eigen::Infinity>() > 30.0 &&
        (rel_change > options.deviance_tol || !accepted))
      throw SeparationError(
          "logistic fit appears separated: |eta| exceeds 30 without the "
          "deviance stabilizing");
    if (score <= options.score_tol) {
      fit.converged = true;
      return fit;
    }
    if (accepted && rel_change <= options.deviance_tol &&
        link == Link::identity) {
      fit.converged = true;
      return fit;
    }
  }

  if (link == Link::identity && score_inf() <= 1e-6) {
    // Ill-conditioned but solved least-squares system.
    fit.converged = true;
    return fit;
  }
  throw ConvergenceError("GLM did not converge in " +
                         std::to_string(fit.iterations) + " iterations");
}

Vector predict_eta(const GlmFit& fit, const Matrix& design,
                   const std::optional<Vector>& offset) {
  if (design.cols() != fit.coef.size())
    throw DataError("design has " + std::to_string(design.cols()) +
                    " columns but the fit has " +
                    std::to_string(fit.coef.size()) + " coefficients");
  Vector eta = design * fit.coef;
  if (offset) {
    if (offset->size() != eta.size())
      throw DataError("offset length mismatch");
    eta += *offset;
  }
  return eta;
}

Vector predict_eta(const GlmFit& fit, const Dataset& data,
                   const TermSpec& spec, const Overrides& overrides) {
  return predict_eta(fit, build_design(data, spec, overrides));
}

namespace {

// Log of 1 + sum_k exp(eta_k), guarded against overflow.
double log_denom(const Eigen::Ref<const Eigen::RowVectorXd>& eta) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < eta.size(); ++k) m = std::max(m, eta[k]);
  double s = std::exp(-m);
  for (Eigen::Index k = 0; k < eta.size(); ++k) s += std::exp(eta[k] - m);
  return m + std::log(s);
}

}  // namespace

MultinomialFit fit_multinomial(const Matrix& design, const Vector& response,
                               const GlmOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n)
    throw DataError("response length does not match the design matrix");

  int levels = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (response[i] < 0.0 ||
        std::abs(response[i] - std::round(response[i])) > 1e-8)
      throw DataError("multinomial response must hold category codes 0..K");
    levels = std::max(levels, static_cast<int>(std::round(response[i])) + 1);
  }
  if (levels < 2) throw DataError("multinomial response needs >= 2 levels");
  const int K = levels - 1;
  {
    std::vector<int> counts(static_cast<std::size_t>(levels), 0);
    for (Eigen::Index i = 0; i < n; ++i)
      ++counts[static_cast<std::size_t>(std::round(response[i]))];
    for (int k = 0; k < levels; ++k)
      if (counts[static_cast<std::size_t>(k)] == 0)
        throw DataError("category level " + std::to_string(k) +
                        " is unobserved");
  }
  check_full_rank(design, options.names);
  if (options.offset)
    throw DataError("offsets are not supported for multinomial fits");

  MultinomialFit fit;
  fit.levels = levels;
  fit.names = options.names;
  fit.coef = Matrix::Zero(K, p);
  fit.eta = Matrix::Zero(n, K);

  Vector w = options.weights ? *options.weights : Vector::Ones(n);
  if (w.size() != n) throw DataError("weights length mismatch");

  const Eigen::Index dim = static_cast<Eigen::Index>(K) * p;
  Vector score(dim);
  Matrix hessian(dim, dim);
  Matrix probs(n, K);

  auto log_likelihood = [&](const Matrix& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int yi = static_cast<int>(std::round(response[i]));
      const double own = yi > 0 ? eta(i, yi - 1) : 0.0;
      ll += w[i] * (own - log_denom(eta.row(i)));
    }
    return ll;
  };

  fit.log_likelihood = log_likelihood(fit.eta);
  const double n_real = static_cast<double>(n);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double denom = log_denom(fit.eta.row(i));
      for (int k = 0; k < K; ++k)
        probs(i, k) = std::exp(fit.eta(i, k) - denom);
    }
    for (int k = 0; k < K; ++k) {
      Vector indicator(n);
      for (Eigen::Index i = 0; i < n; ++i)
        indicator[i] =
            static_cast<int>(std::round(response[i])) == k + 1 ? 1.0 : 0.0;
      score.segment(static_cast<Eigen::Index>(k) * p, p) =
          design.transpose() *
          (w.array() * (indicator - probs.col(k)).array()).matrix();
    }
    if (score.lpNorm<Eigen::Infinity>() / n_real <= options.score_tol) {
      fit.converged = true;
      return fit;
    }

    for (int k = 0; k < K; ++k) {
      for (int l = k; l < K; ++l) {
        Vector wkl(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double pk = probs(i, k);
          const double pl = probs(i, l);
          wkl[i] = w[i] * (k == l ? pk * (1.0 - pk) : -pk * pl);
        }
        Matrix block = design.transpose() * wkl.asDiagonal() * design;
        hessian.block(static_cast<Eigen::Index>(k) * p,
                      static_cast<Eigen::Index>(l) * p, p, p) = block;
        if (l != k)
          hessian.block(static_cast<Eigen::Index>(l) * p,
                        static_cast<Eigen::Index>(k) * p, p, p) =
              block.transpose();
      }
    }

    Eigen::LDLT<Matrix> ldlt(hessian);
    Vector step = ldlt.solve(score);
    if (!step.allFinite())
      throw NumericError("multinomial Newton step is not finite");

    const Matrix previous = fit.coef;
    const double ll_old = fit.log_likelihood;
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half <= options.max_step_halvings; ++half) {
      for (int k = 0; k < K; ++k)
        fit.coef.row(k) =
            previous.row(k) + t * step.segment(static_cast<Eigen::Index>(k) * p, p).transpose();
      fit.eta = design * fit.coef.transpose();
      fit.log_likelihood = log_likelihood(fit.eta);
      if (std::isfinite(fit.log_likelihood) &&
          fit.log_likelihood >= ll_old - 1e-12) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      fit.coef = previous;
      fit.eta = design * fit.coef.transpose();
      fit.log_likelihood = ll_old;
    }
    if (fit.eta.lpNorm<Eigen::Infinity>() > 30.0 &&
        std::abs(fit.log_likelihood - ll_old) >
            options.deviance_tol * (std::abs(ll_old) + 0.1)) {
      // keep iterating; flagged below if the score never settles
      if (iter == options.max_iterations)
        throw SeparationError(
            "multinomial fit appears separated: |eta| exceeds 30 without "
            "the likelihood stabilizing");
    }
  }
  throw ConvergenceError("multinomial fit did not converge in " +
                         std::to_string(options.max_iterations) +
                         " iterations");
}

Matrix multinomial_probabilities(const Matrix& eta) {
  const Eigen::Index n = eta.rows();
  const Eigen::Index K = eta.cols();
  Matrix probs(n, K + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = log_denom(eta.row(i));
    probs(i, 0) = std::exp(-denom);
    for (Eigen::Index k = 0; k < K; ++k)
      probs(i, k + 1) = std::exp(eta(i, k) - denom);
  }
  return probs;
}

Matrix multinomial_probabilities(const MultinomialFit& fit) {
  return multinomial_probabilities(fit.eta);
}

}  // namespace proxi2s

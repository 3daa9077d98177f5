// Test-only reference implementations, kept independent of the library's
// fitting paths: plain Newton solvers with explicit loops and long-double
// accumulation, adaptive quadrature, and a KS statistic.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Logistic MLE by full Newton iteration from a nonzero start.
inline VectorXd logistic_mle(const MatrixXd& X, const VectorXd& y,
                             int max_iter = 200) {
  const Eigen::Index n = X.rows(), p = X.cols();
  VectorXd beta = VectorXd::Constant(p, 0.01);
  for (int iter = 0; iter < max_iter; ++iter) {
    VectorXd grad = VectorXd::Zero(p);
    MatrixXd hess = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      long double eta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) eta += X(i, j) * beta[j];
      const double pi = expit(static_cast<double>(eta));
      const double r = y[i] - pi;
      const double v = pi * (1.0 - pi);
      for (Eigen::Index j = 0; j < p; ++j) {
        grad[j] += X(i, j) * r;
        for (Eigen::Index k = 0; k < p; ++k)
          hess(j, k) -= X(i, j) * X(i, k) * v;
      }
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12 * static_cast<double>(n))
      return beta;
    beta -= hess.ldlt().solve(grad);
  }
  return beta;
}

// Poisson MLE by full Newton iteration.
inline VectorXd poisson_mle(const MatrixXd& X, const VectorXd& y,
                            int max_iter = 200) {
  const Eigen::Index n = X.rows(), p = X.cols();
  VectorXd beta = VectorXd::Constant(p, 0.01);
  for (int iter = 0; iter < max_iter; ++iter) {
    VectorXd grad = VectorXd::Zero(p);
    MatrixXd hess = MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      long double eta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) eta += X(i, j) * beta[j];
      const double mu = std::exp(static_cast<double>(eta));
      for (Eigen::Index j = 0; j < p; ++j) {
        grad[j] += X(i, j) * (y[i] - mu);
        for (Eigen::Index k = 0; k < p; ++k)
          hess(j, k) -= X(i, j) * X(i, k) * mu;
      }
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12 * static_cast<double>(n))
      return beta;
    beta -= hess.ldlt().solve(grad);
  }
  return beta;
}

// Baseline-category multinomial log likelihood, coded independently.
inline double multinomial_loglik(const MatrixXd& X, const VectorXd& y, int K,
                                 const VectorXd& theta) {
  const Eigen::Index n = X.rows(), p = X.cols();
  long double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<long double> eta(static_cast<std::size_t>(K), 0.0);
    long double denom = 1.0;
    for (int k = 0; k < K; ++k) {
      long double e = 0.0;
      for (Eigen::Index j = 0; j < p; ++j)
        e += X(i, j) * theta[static_cast<Eigen::Index>(k) * p + j];
      eta[static_cast<std::size_t>(k)] = e;
      denom += std::exp(static_cast<double>(e));
    }
    const int yi = static_cast<int>(std::lround(y[i]));
    if (yi > 0) ll += eta[static_cast<std::size_t>(yi - 1)];
    ll -= std::log(static_cast<double>(denom));
  }
  return static_cast<double>(ll);
}

// Multinomial MLE by Newton on numerically differentiated likelihood; slow
// but entirely independent of the library's analytic score and Hessian.
inline MatrixXd multinomial_mle(const MatrixXd& X, const VectorXd& y, int K,
                                int max_iter = 100) {
  const Eigen::Index p = X.cols();
  const Eigen::Index dim = static_cast<Eigen::Index>(K) * p;
  VectorXd theta = VectorXd::Constant(dim, 0.01);
  const double h = 1e-5;
  for (int iter = 0; iter < max_iter; ++iter) {
    VectorXd grad(dim);
    MatrixXd hess(dim, dim);
    const double f0 = multinomial_loglik(X, y, K, theta);
    for (Eigen::Index j = 0; j < dim; ++j) {
      VectorXd up = theta, dn = theta;
      up[j] += h;
      dn[j] -= h;
      grad[j] = (multinomial_loglik(X, y, K, up) -
                 multinomial_loglik(X, y, K, dn)) /
                (2.0 * h);
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
      for (Eigen::Index k = j; k < dim; ++k) {
        VectorXd pp = theta, pm = theta, mp = theta, mm = theta;
        pp[j] += h; pp[k] += h;
        pm[j] += h; pm[k] -= h;
        mp[j] -= h; mp[k] += h;
        mm[j] -= h; mm[k] -= h;
        double v;
        if (j == k) {
          VectorXd up = theta, dn = theta;
          up[j] += h;
          dn[j] -= h;
          v = (multinomial_loglik(X, y, K, up) - 2.0 * f0 +
               multinomial_loglik(X, y, K, dn)) /
              (h * h);
        } else {
          v = (multinomial_loglik(X, y, K, pp) -
               multinomial_loglik(X, y, K, pm) -
               multinomial_loglik(X, y, K, mp) +
               multinomial_loglik(X, y, K, mm)) /
              (4.0 * h * h);
        }
        hess(j, k) = v;
        hess(k, j) = v;
      }
    }
    VectorXd step = hess.ldlt().solve(grad);
    theta -= step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  MatrixXd coef(K, p);
  for (int k = 0; k < K; ++k)
    coef.row(k) = theta.segment(static_cast<Eigen::Index>(k) * p, p).transpose();
  return coef;
}

// Adaptive Simpson quadrature.
inline double simpson_step(const std::function<double(double)>& f, double a,
                           double b, double fa, double fb, double fm,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_step(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fb, fm, whole, tol, 60);
}

// Two-sided KS statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

// Asymptotic KS critical value at significance alpha.
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) /
         std::sqrt(static_cast<double>(n));
}

}  // namespace oracle

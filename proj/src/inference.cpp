#include "proxi2s/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "proxi2s/error.hpp"
#include "proxi2s/rng.hpp"
#include "proxi2s/stats.hpp"

namespace proxi2s {

namespace {

Link scalar_link(LinkKind kind) {
  switch (kind) {
    case LinkKind::identity: return Link::identity;
    case LinkKind::log: return Link::log;
    case LinkKind::logit: return Link::logit;
    case LinkKind::multinomial: break;
  }
  throw SpecError("multinomial stage has no scalar link");
}

int find_name(const std::vector<std::string>& names, const std::string& what) {
  auto it = std::find(names.begin(), names.end(), what);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

StackedSystem make_stacked_system(const Dataset& data,
                                  const ProcedurePlan& plan) {
  StackedSystem sys;
  sys.plan = plan;
  sys.w = data.w;
  sys.y = data.y;

  Overrides overrides;
  if (plan.stratum == Stratum::y_one) overrides[Var::Y] = 1.0;
  if (plan.stratum == Stratum::y_zero) overrides[Var::Y] = 0.0;

  sys.d1 = first_stage_design(data, plan);
  sys.d1s = first_stage_design(data, plan, overrides);
  sys.d2base = build_design(data, plan.second_terms);

  sys.w_levels = plan.w_link == LinkKind::multinomial ? proxy_levels(data, plan) : 0;
  sys.y_levels = plan.y_link == LinkKind::multinomial ? outcome_levels(data, plan) : 0;

  sys.p1 = static_cast<int>(sys.d1.cols());
  const std::vector<std::string> names2 = second_stage_names(data, plan);
  sys.idx_s = find_name(names2, "s");
  sys.idx_w = find_name(names2, "w");
  sys.idx_sw = find_name(names2, "sw");
  sys.p2 = static_cast<int>(names2.size());

  const int k_alpha = sys.w_levels > 0 ? sys.w_levels - 1 : 1;
  const int k_beta = sys.y_levels > 0 ? sys.y_levels - 1 : 1;
  sys.dim = k_alpha * sys.p1 + k_beta * sys.p2;

  const std::vector<std::string> names1 = first_stage_names(data, plan);
  if (plan.offset_alpha_y_w) {
    sys.idx_alpha_y = find_name(names1, "y");
    if (sys.idx_alpha_y < 0)
      throw SpecError("restricted variant requires Y in the first stage");
  }
  const int a_in_second = find_name(names2, "a");
  if (a_in_second < 0)
    throw SpecError("second stage lacks the treatment column");
  sys.idx_beta_a = k_alpha * sys.p1 + a_in_second;

  for (int k = 0; k < k_alpha; ++k)
    for (const std::string& n : names1)
      sys.names.push_back(
          (k_alpha > 1 ? "alpha" + std::to_string(k + 1) : "alpha") + ":" + n);
  for (int t = 0; t < k_beta; ++t)
    for (const std::string& n : names2)
      sys.names.push_back(
          (k_beta > 1 ? "beta" + std::to_string(t + 1) : "beta") + ":" + n);
  return sys;
}

Vector pack_params(const StackedSystem& sys, const TwoStageFit& fit) {
  Vector theta(sys.dim);
  Eigen::Index at = 0;
  if (fit.first.glm) {
    theta.segment(at, sys.p1) = fit.first.glm->coef;
    at += sys.p1;
  } else {
    const Matrix& coef = fit.first.multinomial->coef;
    for (Eigen::Index k = 0; k < coef.rows(); ++k, at += sys.p1)
      theta.segment(at, sys.p1) = coef.row(k).transpose();
  }
  if (fit.second.glm) {
    theta.segment(at, sys.p2) = fit.second.glm->coef;
  } else {
    const Matrix& coef = fit.second.multinomial->coef;
    for (Eigen::Index t = 0; t < coef.rows(); ++t, at += sys.p2)
      theta.segment(at, sys.p2) = fit.second.multinomial->coef.row(t).transpose();
  }
  return theta;
}

namespace {

// Control variable recomputed from the alpha block.
Vector control_from_alpha(const StackedSystem& sys, const Vector& params) {
  const int k_alpha = sys.w_levels > 0 ? sys.w_levels - 1 : 1;
  Vector s = Vector::Zero(sys.d1s.rows());
  for (int k = 0; k < k_alpha; ++k)
    s += sys.d1s * params.segment(static_cast<Eigen::Index>(k) * sys.p1, sys.p1);
  return s;
}

Matrix assemble_d2(const StackedSystem& sys, const Vector& s) {
  const Eigen::Index n = sys.d2base.rows();
  Matrix d2(n, sys.p2);
  d2.leftCols(sys.d2base.cols()) = sys.d2base;
  d2.col(sys.idx_s) = s;
  if (sys.w_levels > 0 && sys.idx_w >= 0) {
    // multinomial proxy: indicator columns follow S
    const int K = sys.w_levels - 1;
    for (int k = 1; k <= K; ++k)
      for (Eigen::Index i = 0; i < n; ++i)
        d2(i, sys.idx_w + k - 1) =
            std::abs(sys.w[i] - static_cast<double>(k)) < 0.5 ? 1.0 : 0.0;
  } else if (sys.idx_w >= 0) {
    d2.col(sys.idx_w) = sys.w;
  }
  if (sys.idx_sw >= 0) d2.col(sys.idx_sw) = s.array() * sys.w.array();
  return d2;
}

// Per-observation stacked estimating function values, n x dim.
Matrix stacked_rows(const StackedSystem& sys, const Vector& params) {
  if (params.size() != sys.dim)
    throw DataError("parameter vector does not match the stacked layout");
  const Eigen::Index n = sys.d1.rows();
  Matrix rows(n, sys.dim);
  Eigen::Index at = 0;

  if (sys.w_levels == 0) {
    const Link g1 = scalar_link(sys.plan.w_link);
    Vector eta1 = sys.d1 * params.head(sys.p1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = sys.w[i] - inverse_link(g1, eta1[i]);
      rows.block(i, 0, 1, sys.p1) = sys.d1.row(i) * r;
    }
    at = sys.p1;
  } else {
    const int K = sys.w_levels - 1;
    Matrix eta1(n, K);
    for (int k = 0; k < K; ++k)
      eta1.col(k) = sys.d1 * params.segment(static_cast<Eigen::Index>(k) * sys.p1, sys.p1);
    Matrix probs = multinomial_probabilities(eta1);
    for (int k = 0; k < K; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ind =
            std::abs(sys.w[i] - static_cast<double>(k + 1)) < 0.5 ? 1.0 : 0.0;
        rows.block(i, static_cast<Eigen::Index>(k) * sys.p1, 1, sys.p1) =
            sys.d1.row(i) * (ind - probs(i, k + 1));
      }
    }
    at = static_cast<Eigen::Index>(K) * sys.p1;
  }

  const Vector s = control_from_alpha(sys, params);
  const Matrix d2 = assemble_d2(sys, s);

  if (sys.y_levels == 0) {
    const Link g2 = scalar_link(sys.plan.y_link);
    Vector eta2 = d2 * params.segment(at, sys.p2);
    if (sys.plan.offset_alpha_y_w)
      eta2 += params[sys.idx_alpha_y] * sys.w;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = sys.y[i] - inverse_link(g2, eta2[i]);
      rows.block(i, at, 1, sys.p2) = d2.row(i) * r;
    }
  } else {
    const int T = sys.y_levels - 1;
    Matrix eta2(n, T);
    for (int t = 0; t < T; ++t)
      eta2.col(t) = d2 * params.segment(at + static_cast<Eigen::Index>(t) * sys.p2, sys.p2);
    Matrix probs = multinomial_probabilities(eta2);
    for (int t = 0; t < T; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ind =
            std::abs(sys.y[i] - static_cast<double>(t + 1)) < 0.5 ? 1.0 : 0.0;
        rows.block(i, at + static_cast<Eigen::Index>(t) * sys.p2, 1, sys.p2) =
            d2.row(i) * (ind - probs(i, t + 1));
      }
    }
  }
  return rows;
}

}  // namespace

Vector stacked_score(const StackedSystem& sys, const Vector& params) {
  return stacked_rows(sys, params).colwise().mean().transpose();
}

Matrix jacobian_numeric(const StackedSystem& sys, const Vector& params) {
  Matrix jac(sys.dim, sys.dim);
  Vector theta = params;
  for (int k = 0; k < sys.dim; ++k) {
    const double h = 1e-6 * (1.0 + std::abs(params[k]));
    theta[k] = params[k] + h;
    Vector up = stacked_score(sys, theta);
    theta[k] = params[k] - h;
    Vector down = stacked_score(sys, theta);
    theta[k] = params[k];
    jac.col(k) = (up - down) / (2.0 * h);
  }
  return jac;
}

Matrix jacobian_analytic(const StackedSystem& sys, const Vector& params) {
  if (sys.w_levels > 0 || sys.y_levels > 0)
    throw SpecError(
        "no closed-form Jacobian for multinomial stages; use "
        "jacobian_numeric");
  const Eigen::Index n = sys.d1.rows();
  const double n_real = static_cast<double>(n);
  const Link g1 = scalar_link(sys.plan.w_link);
  const Link g2 = scalar_link(sys.plan.y_link);
  const int p1 = sys.p1;
  const int p2 = sys.p2;

  Matrix jac = Matrix::Zero(sys.dim, sys.dim);
  const Vector alpha = params.head(p1);
  const Vector beta = params.tail(p2);
  const Vector eta1 = sys.d1 * alpha;
  const Vector s = sys.d1s * alpha;
  const Matrix d2 = assemble_d2(sys, s);
  Vector eta2 = d2 * beta;
  if (sys.plan.offset_alpha_y_w) eta2 += params[sys.idx_alpha_y] * sys.w;

  const double beta_s = beta[sys.idx_s];
  const double beta_sw = sys.idx_sw >= 0 ? beta[sys.idx_sw] : 0.0;

  Matrix a11 = Matrix::Zero(p1, p1);
  Matrix a21 = Matrix::Zero(p2, p1);
  Matrix a22 = Matrix::Zero(p2, p2);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d1_i = sys.d1.row(i);
    const auto d1s_i = sys.d1s.row(i);
    const auto v2_i = d2.row(i);
    const double wd1 = link_mu_eta(g1, eta1[i]);
    a11.noalias() -= wd1 * d1_i.transpose() * d1_i;

    const double mu2_prime = link_mu_eta(g2, eta2[i]);
    const double r2 = sys.y[i] - inverse_link(g2, eta2[i]);

    // d eta2 / d alpha through S (plus the shared alpha_y offset term).
    Eigen::RowVectorXd deta2 = (beta_s + beta_sw * sys.w[i]) * d1s_i;
    if (sys.plan.offset_alpha_y_w) deta2[sys.idx_alpha_y] += sys.w[i];

    // d v2 / d alpha contributes on the S and S*W rows.
    a21.row(sys.idx_s).noalias() += r2 * d1s_i;
    if (sys.idx_sw >= 0) a21.row(sys.idx_sw).noalias() += r2 * sys.w[i] * d1s_i;
    a21.noalias() -= mu2_prime * v2_i.transpose() * deta2;

    a22.noalias() -= mu2_prime * v2_i.transpose() * v2_i;
  }

  jac.topLeftCorner(p1, p1) = a11 / n_real;
  jac.bottomLeftCorner(p2, p1) = a21 / n_real;
  jac.bottomRightCorner(p2, p2) = a22 / n_real;
  // upper-right block stays zero: Psi1 does not involve beta
  return jac;
}

SandwichResult sandwich(const Dataset& data, const TwoStageFit& fit) {
  if (!fit.first.converged() || !fit.second.converged())
    throw NumericError("sandwich variance requires a converged fit");
  StackedSystem sys = make_stacked_system(data, fit.plan);
  const Vector theta = pack_params(sys, fit);
  const Eigen::Index n = data.n();
  const double n_real = static_cast<double>(n);

  SandwichResult out;
  Matrix rows = stacked_rows(sys, theta);
  out.b_n = rows.transpose() * rows / n_real;
  try {
    out.a_n = jacobian_analytic(sys, theta);
    out.analytic = true;
  } catch (const SpecError&) {
    out.a_n = jacobian_numeric(sys, theta);
    out.analytic = false;
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(out.a_n);
  qr.setThreshold(1e-12);
  {
    const Vector rdiag = qr.matrixR().diagonal().cwiseAbs();
    const double rmin = rdiag.minCoeff();
    out.condition_a = rmin > 0.0 ? rdiag.maxCoeff() / rmin
                                 : std::numeric_limits<double>::infinity();
  }
  if (qr.rank() < sys.dim)
    throw NumericError(
        "A_n is singular (condition estimate " +
        std::to_string(out.condition_a) +
        "); the proxy may be irrelevant for the latent confounder");

  Matrix ainv_b = qr.solve(out.b_n);
  out.v_n = qr.solve(ainv_b.transpose()).transpose();

  for (int j = 0; j < sys.dim; ++j)
    out.se[sys.names[static_cast<std::size_t>(j)]] =
        std::sqrt(std::max(0.0, out.v_n(j, j)) / n_real);
  out.sigma_a = std::sqrt(std::max(0.0, out.v_n(sys.idx_beta_a, sys.idx_beta_a)));
  out.se_beta_a = out.sigma_a / std::sqrt(n_real);
  return out;
}

std::pair<double, double> wald_ci(double estimate, double se, double level) {
  const double z = normal_quantile(0.5 + level / 2.0);
  return {estimate - z * se, estimate + z * se};
}

BootstrapResult bootstrap(const Dataset& data, const ModelSpec& spec, int b,
                          std::uint64_t seed, double level) {
  return bootstrap(data, resolve_plan(spec), b, seed, level);
}

BootstrapResult bootstrap(const Dataset& data, const ProcedurePlan& plan,
                          int b, std::uint64_t seed, double level) {
  if (b < 2) throw DataError("bootstrap needs at least 2 replicates");
  if (!(level > 0.0 && level < 1.0))
    throw DataError("confidence level must lie in (0,1)");

  const int n = static_cast<int>(data.n());
  BootstrapResult out;
  out.b_requested = b;
  out.estimates.reserve(static_cast<std::size_t>(b));
  std::vector<Vector> draws;
  std::vector<int> rows(static_cast<std::size_t>(n));

  for (int rep = 0; rep < b; ++rep) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(rep)}));
    for (int i = 0; i < n; ++i)
      rows[static_cast<std::size_t>(i)] =
          std::min(n - 1, static_cast<int>(rng.uniform() * n));
    try {
      TwoStageFit fit = fit_two_stage(data.subset(rows), plan);
      out.estimates.push_back(fit.beta_a);
      if (fit.second.glm) {
        draws.push_back(fit.second.glm->coef);
        if (out.coef_names.empty()) out.coef_names = fit.second_names;
      } else {
        draws.push_back(fit.beta_a_by_level);
        if (out.coef_names.empty())
          for (Eigen::Index t = 0; t < fit.beta_a_by_level.size(); ++t)
            out.coef_names.push_back("a:level" + std::to_string(t + 1));
      }
    } catch (const Error&) {
      ++out.failures;
    }
  }

  if (out.failures > b / 5)
    throw NumericError("bootstrap unstable: " + std::to_string(out.failures) +
                       " of " + std::to_string(b) + " replicates failed");
  if (out.estimates.size() < 2)
    throw NumericError("bootstrap produced fewer than 2 usable replicates");

  out.se = sd(out.estimates);
  out.ci = {quantile(out.estimates, (1.0 - level) / 2.0),
            quantile(out.estimates, (1.0 + level) / 2.0)};

  out.coef_draws.resize(static_cast<Eigen::Index>(draws.size()),
                        draws.front().size());
  for (std::size_t i = 0; i < draws.size(); ++i)
    out.coef_draws.row(static_cast<Eigen::Index>(i)) = draws[i].transpose();
  return out;
}

}  // namespace proxi2s

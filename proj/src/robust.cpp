#include "cellmg/robust.hpp"

#include "cellmg/estimator.hpp"
#include "cellmg/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cellmg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double chi2_pdf(double x, int df) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * static_cast<double>(df);
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - std::lgamma(a) - a * std::log(2.0));
}

}  // namespace

double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) {
    // series expansion
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  // Lentz continued fraction for the upper tail
  double b = x + 1.0 - a;
  double c = 1.0 / 1e-300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  return 1.0 - q;
}

double chi2_cdf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi2_cdf: df must be >= 1");
  return gamma_p(0.5 * static_cast<double>(df), 0.5 * x);
}

double chi2_quantile(double prob, int df) {
  if (df < 1) throw std::invalid_argument("chi2_quantile: df must be >= 1");
  if (!(prob > 0.0 && prob < 1.0))
    throw std::invalid_argument("chi2_quantile: prob must lie in (0, 1)");

  // Wilson-Hilferty starting point
  const double nu = static_cast<double>(df);
  const double z = [&] {
    // Acklam-style rational approximation is overkill here; a coarse start
    // suffices because Newton is safeguarded by a bracket.
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
      (cdf < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }();
  const double wh = nu * std::pow(1.0 - 2.0 / (9.0 * nu) + z * std::sqrt(2.0 / (9.0 * nu)), 3.0);
  double x = std::max(wh, 1e-8);

  // establish a bracket [lo, hi] with cdf(lo) < prob <= cdf(hi)
  double lo = 0.0;
  double hi = std::max(2.0 * x, 1.0);
  while (chi2_cdf(hi, df) < prob) hi *= 2.0;

  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, df) - prob;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    const double deriv = chi2_pdf(x, df);
    double step;
    if (deriv > 0.0) {
      step = f / deriv;
      double next = x - step;
      if (next <= lo || next >= hi) {
        next = 0.5 * (lo + hi); // fall back to bisection when Newton escapes
        step = x - next;
      }
      x = next;
    } else {
      const double next = 0.5 * (lo + hi);
      step = x - next;
      x = next;
    }
    if (std::abs(step) <= 1e-10) break;
  }
  return x;
}

double mcd_consistency_factor(double fraction) {
  if (fraction >= 1.0) return 1.0;
  const double q1 = chi2_quantile(fraction, 1);
  const double trunc_mass = chi2_cdf(q1, 3); // gamma * E[Z^2 | central fraction]
  return std::sqrt(fraction / trunc_mass);
}

UnivariateRobustEstimate univariate_mcd(const std::vector<double>& values, int h) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw std::invalid_argument("univariate_mcd: need at least 2 values");
  if (h < 2 || h > n) throw std::invalid_argument("univariate_mcd: h must lie in [2, n]");

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  // prefix sums give each window's mean and sum of squares in O(1)
  std::vector<double> ps(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> ps2(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    ps[static_cast<std::size_t>(i) + 1] = ps[static_cast<std::size_t>(i)] + sorted[static_cast<std::size_t>(i)];
    ps2[static_cast<std::size_t>(i) + 1] =
        ps2[static_cast<std::size_t>(i)] + sorted[static_cast<std::size_t>(i)] * sorted[static_cast<std::size_t>(i)];
  }

  int best_start = 0;
  double best_var = std::numeric_limits<double>::infinity();
  double best_mean = 0.0;
  for (int s = 0; s + h <= n; ++s) {
    const double sum = ps[static_cast<std::size_t>(s + h)] - ps[static_cast<std::size_t>(s)];
    const double sum2 = ps2[static_cast<std::size_t>(s + h)] - ps2[static_cast<std::size_t>(s)];
    const double mean = sum / static_cast<double>(h);
    double var = (sum2 - sum * mean) / static_cast<double>(h - 1);
    if (var < 0.0) var = 0.0;
    if (var < best_var) { // strict: ties keep the smallest start index
      best_var = var;
      best_start = s;
      best_mean = mean;
    }
  }

  UnivariateRobustEstimate est;
  est.location = best_mean;
  est.subset_size = h;
  est.window_start = best_start;
  const double factor = mcd_consistency_factor(static_cast<double>(h) / static_cast<double>(n));
  const double raw = std::sqrt(best_var) * factor;
  est.scale = std::max(raw, 1e-12 * (1.0 + std::abs(est.location)));
  return est;
}

std::pair<GroupedData, Standardization> global_standardize(const GroupedData& data) {
  const int p = data.dim();
  Standardization tf;
  tf.center = Vector::Zero(p);
  tf.scale = Vector::Ones(p);

  const auto n = data.total_rows();
  if (n < 2) throw std::invalid_argument("global_standardize: need at least 2 pooled observations");
  const int h = static_cast<int>(n / 2) + 1;

  std::vector<double> column;
  column.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < p; ++j) {
    column.clear();
    for (const auto& g : data.groups)
      for (Eigen::Index i = 0; i < g.rows(); ++i) column.push_back(g(i, j));
    const auto est = univariate_mcd(column, h);
    tf.center(j) = est.location;
    tf.scale(j) = est.scale;
  }

  GroupedData out = data;
  for (auto& g : out.groups)
    g = (g.rowwise() - tf.center.transpose()).array().rowwise() / tf.scale.transpose().array();
  return {std::move(out), std::move(tf)};
}

namespace {

// Simplified cellwise-robust initial moments for one group: univariate-MCD
// z-scores flag cells beyond the chi2(1, 0.99) cutoff, means use unflagged
// cells, covariances use pairwise-unflagged cells, then a PSD eigenvalue clip.
struct GroupInit {
  Vector mu;
  SymmetricMatrix sigma;
};

GroupInit initial_group_moments(const Matrix& x) {
  const auto n = x.rows();
  const int p = static_cast<int>(x.cols());
  const double cutoff = std::sqrt(chi2_quantile(0.99, 1));
  const int h = static_cast<int>(n / 2) + 1;

  MaskMatrix keep(n, p);
  Vector fallback_loc(p), fallback_scale(p);
  std::vector<double> column(static_cast<std::size_t>(n));
  for (int j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = x(i, j);
    const auto est = univariate_mcd(column, h);
    fallback_loc(j) = est.location;
    fallback_scale(j) = est.scale;
    for (Eigen::Index i = 0; i < n; ++i)
      keep(i, j) = std::abs((x(i, j) - est.location) / est.scale) <= cutoff ? 1 : 0;
  }

  Vector mu(p);
  for (int j = 0; j < p; ++j) {
    double sum = 0.0;
    int m = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (keep(i, j)) {
        sum += x(i, j);
        ++m;
      }
    mu(j) = m > 0 ? sum / static_cast<double>(m) : fallback_loc(j);
  }

  Matrix cov = Matrix::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    for (int l = j; l < p; ++l) {
      double sum = 0.0;
      int m = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (keep(i, j) && keep(i, l)) {
          sum += (x(i, j) - mu(j)) * (x(i, l) - mu(l));
          ++m;
        }
      double v;
      if (m > 0)
        v = sum / static_cast<double>(m);
      else
        v = (j == l) ? fallback_scale(j) * fallback_scale(j) : 0.0;
      cov(j, l) = v;
      cov(l, j) = v;
    }
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmax <= 0.0) {
    cov = fallback_scale.array().square().matrix().asDiagonal();
  } else {
    Vector ev = eig.eigenvalues();
    for (int j = 0; j < p; ++j) ev(j) = std::max(ev(j), 1e-8 * lmax);
    cov = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  }
  return {std::move(mu), SymmetricMatrix(cov)};
}

}  // namespace

RegularizationSpec compute_regularization(const std::vector<SymmetricMatrix>& sigma0,
                                          const GroupedData& data, const CellMask& mask) {
  const int N = data.n_groups();
  const int p = data.dim();
  RegularizationSpec spec;
  spec.target_diag.resize(static_cast<std::size_t>(N));
  spec.rho.resize(static_cast<std::size_t>(N));
  spec.kappa.resize(static_cast<std::size_t>(N));

  for (int k = 0; k < N; ++k) {
    const Matrix& x = data.groups[static_cast<std::size_t>(k)];
    const MaskMatrix& w = mask.groups[static_cast<std::size_t>(k)];
    Vector t(p);
    std::vector<double> vals;
    for (int j = 0; j < p; ++j) {
      vals.clear();
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (w(i, j)) vals.push_back(x(i, j));
      if (vals.size() < 2) {
        t(j) = 1e-12; // fully flagged column; keep T positive
        continue;
      }
      const int h = static_cast<int>(vals.size() / 2) + 1;
      const auto est = univariate_mcd(vals, std::max(h, 2));
      t(j) = est.scale * est.scale;
    }
    const double cond_t = t.maxCoeff() / t.minCoeff();
    const double kappa = std::max(1.1 * cond_t, 100.0);

    const Matrix& s0 = sigma0[static_cast<std::size_t>(k)].get();
    const auto cond_mix = [&](double rho) {
      return condition_number(SymmetricMatrix(Matrix((1.0 - rho) * s0 + rho * Matrix(t.asDiagonal()))));
    };

    double rho;
    if (cond_mix(0.0) <= kappa) {
      rho = 1e-6;
    } else {
      double lo = 0.0, hi = 1.0; // cond(T) <= kappa/1.1 keeps rho=1 feasible
      while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        (cond_mix(mid) <= kappa ? hi : lo) = mid;
      }
      rho = std::max(hi, 1e-6);
      if (cond_mix(rho) > kappa * (1.0 + 1e-6)) {
        // non-monotone corner: fall back to a coarse feasibility grid
        for (double r = 1e-3; r <= 1.0 + 1e-12; r += 1e-3) {
          if (cond_mix(r) <= kappa) {
            rho = r;
            break;
          }
        }
      }
    }

    spec.target_diag[static_cast<std::size_t>(k)] = t;
    spec.kappa[static_cast<std::size_t>(k)] = kappa;
    spec.rho[static_cast<std::size_t>(k)] = rho;
  }
  return spec;
}

std::pair<MixtureParams, CellMask> initial_params(const GroupedData& data,
                                                  const EstimatorConfig& cfg) {
  const int N = data.n_groups();

  MixtureParams params;
  params.pi = Matrix::Zero(N, N);
  if (N == 1) {
    params.pi(0, 0) = 1.0;
  } else {
    const double off = (1.0 - cfg.alpha) / static_cast<double>(N - 1);
    params.pi.setConstant(off);
    params.pi.diagonal().setConstant(cfg.alpha);
  }

  CellMask mask = CellMask::all_ones(data);

  params.mu.reserve(static_cast<std::size_t>(N));
  params.sigma.reserve(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    auto init = initial_group_moments(data.groups[static_cast<std::size_t>(k)]);
    params.mu.push_back(std::move(init.mu));
    params.sigma.push_back(std::move(init.sigma));
  }

  params.reg = compute_regularization(params.sigma, data, mask);
  params.sigma_reg.reserve(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    const double rho = params.reg.rho[static_cast<std::size_t>(k)];
    params.sigma_reg.emplace_back(Matrix((1.0 - rho) * params.sigma[static_cast<std::size_t>(k)].get() +
                                         rho * params.reg.target(k)));
  }
  return {std::move(params), std::move(mask)};
}

PenaltyMatrix compute_penalty(const GroupedData& data, const MixtureParams& params0,
                              const CellMask& mask0, int* clamped_count) {
  const int N = data.n_groups();
  const int p = data.dim();
  const double base = chi2_quantile(0.99, 1) + kLog2Pi;

  // ln C_{k,j} with C_{k,j} = 1 / (Sigma_reg_k^-1)_{jj}
  Matrix log_c(N, p);
  for (int k = 0; k < N; ++k) {
    const Matrix& s = params0.sigma_reg[static_cast<std::size_t>(k)].get();
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success)
      throw FactorizationError("compute_penalty: regularized covariance " + std::to_string(k + 1) +
                               " is not positive definite");
    const Matrix inv = llt.solve(Matrix::Identity(p, p));
    for (int j = 0; j < p; ++j) log_c(k, j) = -std::log(inv(j, j));
  }

  const Responsibilities t0 = e_step(data, params0, mask0);

  PenaltyMatrix penalty;
  penalty.q.reserve(static_cast<std::size_t>(N));
  int clamped = 0;
  for (int g = 0; g < N; ++g) {
    const Matrix& t = t0.groups[static_cast<std::size_t>(g)];
    Matrix q(t.rows(), p);
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (int j = 0; j < p; ++j) {
        double v = base;
        for (int k = 0; k < N; ++k) v += t(i, k) * log_c(k, j);
        if (v < 0.0) {
          v = 0.0;
          ++clamped;
        }
        q(i, j) = v;
      }
    }
    penalty.q.push_back(std::move(q));
  }
  if (clamped_count) *clamped_count = clamped;
  return penalty;
}

}  // namespace cellmg

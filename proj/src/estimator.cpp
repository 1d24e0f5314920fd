#include "cellmg/estimator.hpp"

#include "cellmg/gaussian.hpp"
#include "cellmg/robust.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cellmg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Observed-pattern marginals of one component with per-pattern factorization
/// reuse. Patterns repeat heavily inside a W-step sweep, so the memo pays off.
class ComponentMarginals {
 public:
  ComponentMarginals(const Vector& mu, const Matrix& sigma) : mu_(mu), sigma_(sigma) {}

  double log_density(const Vector& x, const ObservedPattern& w) {
    const Entry& e = entry(w);
    if (e.obs.empty()) return 0.0;
    Vector diff(static_cast<Eigen::Index>(e.obs.size()));
    for (std::size_t r = 0; r < e.obs.size(); ++r) diff(static_cast<Eigen::Index>(r)) = x(e.obs[r]) - mu_(e.obs[r]);
    const Vector y = e.llt.matrixL().solve(diff);
    return -0.5 * (static_cast<double>(e.obs.size()) * kLog2Pi + e.log_det + y.squaredNorm());
  }

 private:
  struct Entry {
    std::vector<int> obs;
    Eigen::LLT<Matrix> llt;
    double log_det = 0.0;
  };

  const Entry& entry(const ObservedPattern& w) {
    auto it = cache_.find(w.bits);
    if (it != cache_.end()) return it->second;
    Entry e;
    e.obs = w.observed_indices();
    if (!e.obs.empty()) {
      e.llt.compute(detail::submatrix(sigma_, e.obs, e.obs));
      if (e.llt.info() != Eigen::Success)
        throw FactorizationError("observed covariance submatrix is not positive definite for pattern " +
                                 w.to_string());
      e.log_det = 2.0 * e.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    return cache_.emplace(w.bits, std::move(e)).first->second;
  }

  const Vector& mu_;
  const Matrix& sigma_;
  std::map<std::vector<std::uint8_t>, Entry> cache_;
};

double log_sum_exp(const std::vector<double>& terms) {
  double m = kNegInf;
  for (double t : terms) m = std::max(m, t);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

/// -2 ln of the mixture density of row (g, i) over the observed pattern.
double neg2_log_mixture(const Matrix& pi, std::vector<ComponentMarginals>& comps, int g,
                        const Vector& x, const ObservedPattern& w) {
  std::vector<double> terms;
  terms.reserve(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const double pk = pi(g, static_cast<Eigen::Index>(k));
    if (pk <= 0.0) continue;
    terms.push_back(std::log(pk) + comps[k].log_density(x, w));
  }
  return -2.0 * log_sum_exp(terms);
}

std::vector<ComponentMarginals> make_marginals(const MixtureParams& params) {
  std::vector<ComponentMarginals> comps;
  comps.reserve(params.mu.size());
  for (std::size_t k = 0; k < params.mu.size(); ++k)
    comps.emplace_back(params.mu[k], params.sigma_reg[k].get());
  return comps;
}

}  // namespace

ObjectiveValue objective(const GroupedData& data, const MixtureParams& params,
                         const CellMask& mask, const PenaltyMatrix& penalty) {
  auto comps = make_marginals(params);
  ObjectiveValue out;
  for (int g = 0; g < data.n_groups(); ++g) {
    const Matrix& x = data.groups[static_cast<std::size_t>(g)];
    const MaskMatrix& w = mask.groups[static_cast<std::size_t>(g)];
    const Matrix& q = penalty.q[static_cast<std::size_t>(g)];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const ObservedPattern pat = ObservedPattern::from_mask_row(w, i);
      out.loglik_part += neg2_log_mixture(params.pi, comps, g, x.row(i).transpose(), pat);
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (!w(i, j)) out.penalty_part += q(i, j);
    }
  }
  out.total = out.loglik_part + out.penalty_part;
  return out;
}

CellMask w_step(const GroupedData& data, const MixtureParams& params, const CellMask& mask_in,
                const EstimatorConfig& cfg) {
  if (cfg.penalty.empty()) throw std::invalid_argument("w_step: cfg.penalty must be resolved");
  const std::vector<int> h = cfg.resolved_h(data);
  const int p = data.dim();

  auto comps = make_marginals(params);
  CellMask mask = mask_in;

  for (int j = 0; j < p; ++j) {
    for (int g = 0; g < data.n_groups(); ++g) {
      const Matrix& x = data.groups[static_cast<std::size_t>(g)];
      MaskMatrix& w = mask.groups[static_cast<std::size_t>(g)];
      const Matrix& q = cfg.penalty.q[static_cast<std::size_t>(g)];
      const auto n_g = x.rows();

      // objective difference between keeping and flagging cell (i, j),
      // with all other coordinates at the current working mask
      std::vector<double> delta(static_cast<std::size_t>(n_g));
      for (Eigen::Index i = 0; i < n_g; ++i) {
        ObservedPattern pat = ObservedPattern::from_mask_row(w, i);
        pat.bits[static_cast<std::size_t>(j)] = 1;
        const double with_cell = neg2_log_mixture(params.pi, comps, g, x.row(i).transpose(), pat);
        pat.bits[static_cast<std::size_t>(j)] = 0;
        const double without_cell = neg2_log_mixture(params.pi, comps, g, x.row(i).transpose(), pat);
        delta[static_cast<std::size_t>(i)] = with_cell - without_cell - q(i, j);
      }

      Eigen::Index n_keep = 0;
      for (double d : delta)
        if (d <= 0.0) ++n_keep;

      if (n_keep >= h[static_cast<std::size_t>(g)]) {
        for (Eigen::Index i = 0; i < n_g; ++i) w(i, j) = delta[static_cast<std::size_t>(i)] <= 0.0 ? 1 : 0;
      } else {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n_g));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
          return delta[static_cast<std::size_t>(a)] < delta[static_cast<std::size_t>(b)];
        });
        for (Eigen::Index i = 0; i < n_g; ++i) w(i, j) = 0;
        for (int r = 0; r < h[static_cast<std::size_t>(g)]; ++r) w(order[static_cast<std::size_t>(r)], j) = 1;
      }
    }
  }
  return mask;
}

Responsibilities e_step(const GroupedData& data, const MixtureParams& params, const CellMask& mask) {
  const int N = params.n_components();
  auto comps = make_marginals(params);

  Responsibilities resp;
  resp.groups.reserve(data.groups.size());
  for (int g = 0; g < data.n_groups(); ++g) {
    const Matrix& x = data.groups[static_cast<std::size_t>(g)];
    Matrix t(x.rows(), N);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const ObservedPattern pat = mask.row_pattern(g, i);
      std::vector<double> logs(static_cast<std::size_t>(N), kNegInf);
      for (int k = 0; k < N; ++k) {
        const double pk = params.pi(g, k);
        if (pk <= 0.0) continue;
        logs[static_cast<std::size_t>(k)] =
            std::log(pk) + comps[static_cast<std::size_t>(k)].log_density(x.row(i).transpose(), pat);
      }
      const double lse = log_sum_exp(logs);
      for (int k = 0; k < N; ++k) {
        const double lg = logs[static_cast<std::size_t>(k)];
        t(i, k) = lg == kNegInf ? 0.0 : std::exp(lg - lse);
      }
    }
    resp.groups.push_back(std::move(t));
  }
  return resp;
}

Matrix m_step_pi(const Responsibilities& resp, double alpha) {
  const int N = static_cast<int>(resp.groups.front().cols());
  Matrix pi = Matrix::Zero(N, N);
  for (int g = 0; g < N; ++g) {
    const Matrix& t = resp.groups[static_cast<std::size_t>(g)];
    const Vector mean_t = t.colwise().mean().transpose();
    const double own = mean_t(g);
    if (own >= 1.0) { // limit convention: all mass on the own component
      pi(g, g) = 1.0;
      continue;
    }
    const double diag = std::max(alpha, own);
    pi(g, g) = diag;
    for (int l = 0; l < N; ++l) {
      if (l == g) continue;
      pi(g, l) = (1.0 - diag) * mean_t(l) / (1.0 - own);
    }
  }
  return pi;
}

MomentUpdate m_step_moments(const GroupedData& data, const MixtureParams& params_prev,
                            const Responsibilities& resp, const CellMask& mask) {
  const int N = params_prev.n_components();
  const int p = data.dim();

  MomentUpdate out;
  out.mu.resize(static_cast<std::size_t>(N));
  out.sigma.reserve(static_cast<std::size_t>(N));
  out.sigma_reg.reserve(static_cast<std::size_t>(N));

  for (int k = 0; k < N; ++k) {
    const Vector& mu_prev = params_prev.mu[static_cast<std::size_t>(k)];
    const SymmetricMatrix& sig_prev = params_prev.sigma_reg[static_cast<std::size_t>(k)];

    double t_bar = 0.0;
    for (int g = 0; g < data.n_groups(); ++g)
      t_bar += resp.groups[static_cast<std::size_t>(g)].col(k).sum();
    if (!(t_bar > 0.0))
      throw std::invalid_argument("m_step_moments: component " + std::to_string(k + 1) +
                                  " has zero responsibility mass");

    // first pass: imputations and the weighted mean; the conditional
    // covariance depends only on the pattern, so accumulate per-pattern weights
    std::vector<std::vector<Vector>> imputed(static_cast<std::size_t>(data.n_groups()));
    std::map<std::vector<std::uint8_t>, double> pattern_weight;
    Vector mu_new = Vector::Zero(p);
    for (int g = 0; g < data.n_groups(); ++g) {
      const Matrix& x = data.groups[static_cast<std::size_t>(g)];
      const Matrix& t = resp.groups[static_cast<std::size_t>(g)];
      imputed[static_cast<std::size_t>(g)].resize(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const ObservedPattern pat = mask.row_pattern(g, i);
        auto cm = conditional_moments(x.row(i).transpose(), mu_prev, sig_prev, pat);
        mu_new += t(i, k) * cm.imputed;
        pattern_weight[pat.bits] += t(i, k);
        imputed[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)] = std::move(cm.imputed);
      }
    }
    mu_new /= t_bar;

    Matrix scatter = Matrix::Zero(p, p);
    for (int g = 0; g < data.n_groups(); ++g) {
      const Matrix& t = resp.groups[static_cast<std::size_t>(g)];
      for (Eigen::Index i = 0; i < data.groups[static_cast<std::size_t>(g)].rows(); ++i) {
        const Vector d = imputed[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)] - mu_new;
        scatter.noalias() += t(i, k) * (d * d.transpose());
      }
    }
    for (const auto& [bits, weight] : pattern_weight) {
      const ObservedPattern pat{std::vector<std::uint8_t>(bits)};
      if (pat.all()) continue; // zero conditional covariance
      const auto cm = conditional_moments(Vector::Zero(p), mu_prev, sig_prev, pat);
      scatter.noalias() += weight * cm.cond_cov.get();
    }
    scatter /= t_bar;

    // Candidate covariance updates. The plain convex-combination update is
    // not always a descent step of the EM majorizer (its fixed point differs
    // from the objective's stationary point by O(rho)), and nothing bounds
    // its condition number. Accept the first candidate that (a) does not
    // increase the per-component majorizer and (b) meets the condition cap:
    //   1. rho T + (1 - rho) C, the plain update
    //   2. exact minimizer over Sigma_reg >= rho T (T-whitened eigenvalue clip)
    //   3. plain update with C shrunk toward T just enough to restore the cap
    //   4. the previous component, unchanged
    const double rho = params_prev.reg.rho[static_cast<std::size_t>(k)];
    const double kappa_cap = params_prev.reg.kappa[static_cast<std::size_t>(k)] * (1.0 + 1e-6);
    const Vector& target_diag = params_prev.reg.target_diag[static_cast<std::size_t>(k)];
    const Matrix target = params_prev.reg.target(k);

    // majorizer restricted to component k: t_bar [ln det S + tr(S^-1 (C + dd'))]
    const auto a_value = [&](const Vector& mu, const Matrix& sigma_reg) {
      Eigen::LLT<Matrix> llt(sigma_reg);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const Vector d = mu_new - mu;
      return t_bar * (log_det + llt.solve(Matrix(scatter + d * d.transpose())).trace());
    };
    const double a_prev = a_value(mu_prev, params_prev.sigma_reg[static_cast<std::size_t>(k)].get());
    const auto acceptable = [&](const Matrix& sigma_reg) {
      return condition_number(SymmetricMatrix(sigma_reg)) <= kappa_cap &&
             a_value(mu_new, sigma_reg) <= a_prev;
    };

    SymmetricMatrix sigma_new;
    SymmetricMatrix reg_new;
    const Matrix plain = rho * target + (1.0 - rho) * scatter;
    if (acceptable(plain)) {
      sigma_new = SymmetricMatrix(scatter);
      reg_new = SymmetricMatrix(plain);
    } else {
      const Vector root = target_diag.cwiseSqrt();
      const Matrix whitened =
          root.cwiseInverse().asDiagonal() * scatter * root.cwiseInverse().asDiagonal();
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (whitened + whitened.transpose()));
      const Vector clipped = eig.eigenvalues().cwiseMax(rho);
      const Matrix exact =
          root.asDiagonal() *
          (eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose()) *
          root.asDiagonal();
      const Matrix shrink_base = rho < 1.0 ? Matrix((exact - rho * target) / (1.0 - rho)) : scatter;

      const auto reg_of = [&](double s) {
        const Matrix mixed = (1.0 - s) * scatter + s * target;
        return Matrix(rho * target + (1.0 - rho) * mixed);
      };

      if (acceptable(exact)) {
        sigma_new = SymmetricMatrix(shrink_base);
        reg_new = SymmetricMatrix(exact);
      } else {
        double lo = 0.0, hi = 1.0; // s = 1 gives Sigma_reg = T, cond <= kappa/1.1
        while (hi - lo > 1e-6) {
          const double mid = 0.5 * (lo + hi);
          (condition_number(SymmetricMatrix(reg_of(mid))) <= kappa_cap / (1.0 + 1e-6) ? hi : lo) = mid;
        }
        const Matrix repaired = reg_of(hi);
        if (acceptable(repaired)) {
          sigma_new = SymmetricMatrix(Matrix((1.0 - hi) * scatter + hi * target));
          reg_new = SymmetricMatrix(repaired);
        } else {
          mu_new = mu_prev;
          sigma_new = params_prev.sigma[static_cast<std::size_t>(k)];
          reg_new = params_prev.sigma_reg[static_cast<std::size_t>(k)];
        }
      }
    }

    out.mu[static_cast<std::size_t>(k)] = std::move(mu_new);
    out.sigma.push_back(std::move(sigma_new));
    out.sigma_reg.push_back(std::move(reg_new));
  }
  return out;
}

namespace {

double max_entry_change(const std::vector<SymmetricMatrix>& a, const std::vector<SymmetricMatrix>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, (a[k].get() - b[k].get()).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

FitResult fit(const GroupedData& data, const EstimatorConfig& cfg, const IterationObserver& observer) {
  validate(data, cfg);

  auto [std_data, transform] = global_standardize(data);
  auto [params, mask] = initial_params(std_data, cfg);

  EstimatorConfig resolved = cfg;
  resolved.h = cfg.resolved_h(data);
  int clamped = 0;
  if (resolved.penalty.empty())
    resolved.penalty = compute_penalty(std_data, params, mask, &clamped);

  FitResult result;
  result.clamped_penalties = clamped;
  result.objective_trace.push_back(objective(std_data, params, mask, resolved.penalty).total);

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    const std::vector<SymmetricMatrix> sigma_reg_prev = params.sigma_reg;

    mask = w_step(std_data, params, mask, resolved);
    const double obj_w = objective(std_data, params, mask, resolved.penalty).total;
    result.objective_trace.push_back(obj_w);

    const Responsibilities resp = e_step(std_data, params, mask);
    params.pi = m_step_pi(resp, cfg.alpha);
    MomentUpdate mom = m_step_moments(std_data, params, resp, mask);
    params.mu = std::move(mom.mu);
    params.sigma = std::move(mom.sigma);
    params.sigma_reg = std::move(mom.sigma_reg);
    const double obj_em = objective(std_data, params, mask, resolved.penalty).total;
    result.objective_trace.push_back(obj_em);

    result.iterations = iter;
    if (observer) observer(IterationState{iter, params, mask, obj_w, obj_em});

    if (max_entry_change(sigma_reg_prev, params.sigma_reg) < cfg.eps_conv) {
      result.converged = true;
      break;
    }
  }

  result.resp = e_step(std_data, params, mask);
  result.mask = std::move(mask);
  result.center = transform.center;
  result.scale = transform.scale;

  // back-transform all moments to the original data scale
  const Vector& s = transform.scale;
  const Matrix scale_outer = s * s.transpose();
  for (int k = 0; k < params.n_components(); ++k) {
    auto& mu = params.mu[static_cast<std::size_t>(k)];
    mu = transform.center + s.cwiseProduct(mu).eval();
    params.sigma[static_cast<std::size_t>(k)] =
        SymmetricMatrix(params.sigma[static_cast<std::size_t>(k)].get().cwiseProduct(scale_outer));
    params.sigma_reg[static_cast<std::size_t>(k)] =
        SymmetricMatrix(params.sigma_reg[static_cast<std::size_t>(k)].get().cwiseProduct(scale_outer));
    params.reg.target_diag[static_cast<std::size_t>(k)] =
        params.reg.target_diag[static_cast<std::size_t>(k)].cwiseProduct(s.cwiseAbs2()).eval();
  }
  result.params = std::move(params);
  return result;
}

}  // namespace cellmg

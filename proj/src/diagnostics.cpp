#include "cellmg/diagnostics.hpp"

#include "cellmg/estimator.hpp"
#include "cellmg/gaussian.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <map>

namespace cellmg {

namespace {

// Conditional prediction of coordinate j given the coordinates in cond:
// mean offset coefficients and residual variance, cached per (j, cond).
struct CellPredictor {
  std::vector<int> cond;
  Vector coeff;          // Sigma(j, cond) Sigma(cond, cond)^-1
  double variance = 0.0; // Sigma(j|j) - Sigma(j|c) Sigma(c|c)^-1 Sigma(c|j)
};

CellPredictor make_predictor(const Matrix& sigma, int j, const std::vector<int>& cond) {
  CellPredictor pred;
  pred.cond = cond;
  if (cond.empty()) {
    pred.variance = sigma(j, j);
    return pred;
  }
  const Matrix scc = detail::submatrix(sigma, cond, cond);
  Eigen::LLT<Matrix> llt(scc);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("residuals: conditioning submatrix is not positive definite");
  Vector sjc(static_cast<Eigen::Index>(cond.size()));
  for (std::size_t r = 0; r < cond.size(); ++r) sjc(static_cast<Eigen::Index>(r)) = sigma(j, cond[r]);
  const Vector solved = llt.solve(sjc);
  pred.coeff = solved;
  pred.variance = sigma(j, j) - sjc.dot(solved);
  return pred;
}

}  // namespace

ResidualMatrix residuals(const GroupedData& data, const FitResult& fit) {
  const int N = fit.params.n_components();
  const int p = data.dim();

  ResidualMatrix out;
  out.flags = fit.mask;
  out.values.reserve(data.groups.size());

  // per-component cache keyed by (variable, conditioning pattern)
  using Key = std::pair<int, std::vector<std::uint8_t>>;
  std::vector<std::map<Key, CellPredictor>> cache(static_cast<std::size_t>(N));

  for (int g = 0; g < data.n_groups(); ++g) {
    const Matrix& x = data.groups[static_cast<std::size_t>(g)];
    const MaskMatrix& w = fit.mask.groups[static_cast<std::size_t>(g)];
    const Matrix& t = fit.resp.groups[static_cast<std::size_t>(g)];
    Matrix r(x.rows(), p);

    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (int j = 0; j < p; ++j) {
        // condition on the unflagged cells, always excluding j itself
        std::vector<std::uint8_t> cond_bits(static_cast<std::size_t>(p), 0);
        std::vector<int> cond;
        for (int l = 0; l < p; ++l)
          if (l != j && w(i, l)) {
            cond_bits[static_cast<std::size_t>(l)] = 1;
            cond.push_back(l);
          }

        double value = 0.0;
        for (int k = 0; k < N; ++k) {
          if (t(i, k) == 0.0) continue;
          auto& comp_cache = cache[static_cast<std::size_t>(k)];
          const Key key{j, cond_bits};
          auto it = comp_cache.find(key);
          if (it == comp_cache.end())
            it = comp_cache
                     .emplace(key, make_predictor(fit.params.sigma_reg[static_cast<std::size_t>(k)].get(), j, cond))
                     .first;
          const CellPredictor& pred = it->second;

          const Vector& mu = fit.params.mu[static_cast<std::size_t>(k)];
          double xhat = mu(j);
          for (std::size_t c = 0; c < pred.cond.size(); ++c)
            xhat += pred.coeff(static_cast<Eigen::Index>(c)) * (x(i, pred.cond[c]) - mu(pred.cond[c]));

          double var = pred.variance;
          if (var < 1e-12) {
            var = 1e-12;
            ++out.floored_variances;
          }
          value += t(i, k) * (x(i, j) - xhat) / std::sqrt(var);
        }
        r(i, j) = value;
      }
    }
    out.values.push_back(std::move(r));
  }
  return out;
}

Classification classify(const FitResult& fit) {
  Classification out;
  out.probabilities = fit.resp.groups;
  out.assigned.reserve(fit.resp.groups.size());

  for (int g = 0; g < static_cast<int>(fit.resp.groups.size()); ++g) {
    const Matrix& t = fit.resp.groups[static_cast<std::size_t>(g)];
    std::vector<int> labels(static_cast<std::size_t>(t.rows()));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      double best = t.row(i).maxCoeff();
      int pick = -1;
      if (t(i, g) == best) {
        pick = g; // tie goes to the original group
      } else {
        for (int k = 0; k < t.cols(); ++k)
          if (t(i, k) == best) {
            pick = k;
            break;
          }
      }
      labels[static_cast<std::size_t>(i)] = pick;
    }
    out.assigned.push_back(std::move(labels));
  }
  return out;
}

std::vector<std::pair<double, FitResult>> alpha_sweep(const GroupedData& data,
                                                      const EstimatorConfig& cfg,
                                                      const std::vector<double>& alphas) {
  std::vector<std::pair<double, FitResult>> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    EstimatorConfig c = cfg;
    c.alpha = a;
    out.emplace_back(a, fit(data, c));
  }
  return out;
}

}  // namespace cellmg

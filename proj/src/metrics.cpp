#include "cellmg/metrics.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>

namespace cellmg {

double kl_divergence(const SymmetricMatrix& sigma_hat, const SymmetricMatrix& sigma_true) {
  const Matrix& sh = sigma_hat.get();
  const Matrix& st = sigma_true.get();
  if (sh.rows() != st.rows()) throw std::invalid_argument("kl_divergence: dimension mismatch");
  const auto p = sh.rows();

  Eigen::LLT<Matrix> llt_true(st);
  if (llt_true.info() != Eigen::Success)
    throw FactorizationError("kl_divergence: true covariance is not positive definite");
  Eigen::LLT<Matrix> llt_hat(sh);
  if (llt_hat.info() != Eigen::Success)
    throw FactorizationError("kl_divergence: estimated covariance is not positive definite");

  const double trace = llt_true.solve(sh).trace();
  const double log_det_hat = 2.0 * llt_hat.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det_true = 2.0 * llt_true.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return trace - static_cast<double>(p) - (log_det_hat - log_det_true);
}

double kl_mean(const std::vector<SymmetricMatrix>& sigma_hat,
               const std::vector<SymmetricMatrix>& sigma_true) {
  if (sigma_hat.size() != sigma_true.size())
    throw std::invalid_argument("kl_mean: component count mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < sigma_hat.size(); ++k)
    sum += kl_divergence(sigma_hat[k], sigma_true[k]);
  return sum / static_cast<double>(sigma_hat.size());
}

double mse_mu(const std::vector<Vector>& mu_hat, const std::vector<Vector>& mu_true) {
  if (mu_hat.size() != mu_true.size()) throw std::invalid_argument("mse_mu: component count mismatch");
  double sum = 0.0;
  for (std::size_t k = 0; k < mu_hat.size(); ++k) {
    if (mu_hat[k].size() != mu_true[k].size())
      throw std::invalid_argument("mse_mu: dimension mismatch");
    sum += (mu_hat[k] - mu_true[k]).squaredNorm() / static_cast<double>(mu_hat[k].size());
  }
  return sum / static_cast<double>(mu_hat.size());
}

double mse_pi(const Matrix& pi_hat, const Matrix& pi_true) {
  if (pi_hat.rows() != pi_true.rows() || pi_hat.cols() != pi_true.cols())
    throw std::invalid_argument("mse_pi: shape mismatch");
  const double n = static_cast<double>(pi_hat.rows());
  return (pi_hat - pi_true).squaredNorm() / (n * n);
}

FlagScores flag_scores(const CellMask& mask_hat, const CellMask& truth_mask) {
  if (mask_hat.groups.size() != truth_mask.groups.size())
    throw std::invalid_argument("flag_scores: group count mismatch");

  long tp = 0, fp = 0, fn = 0;
  for (std::size_t g = 0; g < mask_hat.groups.size(); ++g) {
    const MaskMatrix& a = mask_hat.groups[g];
    const MaskMatrix& b = truth_mask.groups[g];
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw std::invalid_argument("flag_scores: shape mismatch in group " + std::to_string(g + 1));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const bool flagged = a(i, j) == 0;
        const bool truly = b(i, j) == 0;
        if (flagged && truly) ++tp;
        if (flagged && !truly) ++fp;
        if (!flagged && truly) ++fn;
      }
  }

  FlagScores s;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace cellmg

#include "cellmg/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace cellmg {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

ObservedPattern ObservedPattern::from_mask_row(const MaskMatrix& mask, Eigen::Index row) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(mask.cols()));
  for (Eigen::Index j = 0; j < mask.cols(); ++j) bits[static_cast<std::size_t>(j)] = mask(row, j) ? 1 : 0;
  return ObservedPattern(std::move(bits));
}

int ObservedPattern::count() const {
  int c = 0;
  for (auto b : bits) c += b ? 1 : 0;
  return c;
}

std::vector<int> ObservedPattern::observed_indices() const {
  std::vector<int> idx;
  idx.reserve(bits.size());
  for (int j = 0; j < size(); ++j)
    if (bits[static_cast<std::size_t>(j)]) idx.push_back(j);
  return idx;
}

std::vector<int> ObservedPattern::missing_indices() const {
  std::vector<int> idx;
  for (int j = 0; j < size(); ++j)
    if (!bits[static_cast<std::size_t>(j)]) idx.push_back(j);
  return idx;
}

std::string ObservedPattern::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

SymmetricMatrix::SymmetricMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("SymmetricMatrix: input is not square");
  m_ = 0.5 * (m + m.transpose());
}

namespace detail {

Matrix submatrix(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
  return out;
}

Vector subvector(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) out(static_cast<Eigen::Index>(r)) = v(idx[r]);
  return out;
}

}  // namespace detail

namespace {

Eigen::LLT<Matrix> factorize_observed(const Matrix& sigma, const std::vector<int>& obs,
                                      const ObservedPattern& w) {
  Eigen::LLT<Matrix> llt(detail::submatrix(sigma, obs, obs));
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("observed covariance submatrix is not positive definite for pattern " +
                             w.to_string());
  }
  return llt;
}

}  // namespace

double observed_log_density(const Vector& x, const Vector& mu, const SymmetricMatrix& sigma,
                            const ObservedPattern& w) {
  const std::vector<int> obs = w.observed_indices();
  const auto m = static_cast<Eigen::Index>(obs.size());
  if (m == 0) return 0.0;

  const Eigen::LLT<Matrix> llt = factorize_observed(sigma, obs, w);
  const Vector diff = detail::subvector(x, obs) - detail::subvector(mu, obs);
  const Vector y = llt.matrixL().solve(diff);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(m) * kLog2Pi + log_det + y.squaredNorm());
}

ConditionalMoments conditional_moments(const Vector& x, const Vector& mu,
                                       const SymmetricMatrix& sigma, const ObservedPattern& w) {
  const auto p = static_cast<Eigen::Index>(w.size());
  if (w.none()) return {mu, sigma};
  if (w.all()) return {x, SymmetricMatrix(Matrix::Zero(p, p))};

  const std::vector<int> obs = w.observed_indices();
  const std::vector<int> mis = w.missing_indices();
  const Eigen::LLT<Matrix> llt = factorize_observed(sigma.get(), obs, w);

  const Matrix cross = detail::submatrix(sigma.get(), mis, obs); // Sigma^(1-w | w)
  const Vector diff = detail::subvector(x, obs) - detail::subvector(mu, obs);
  const Vector cond_mean =
      detail::subvector(mu, mis) + cross * llt.solve(diff);

  Vector imputed = x;
  for (std::size_t r = 0; r < mis.size(); ++r) imputed(mis[r]) = cond_mean(static_cast<Eigen::Index>(r));

  const Matrix schur = detail::submatrix(sigma.get(), mis, mis) -
                       cross * llt.solve(cross.transpose());
  Matrix cond_cov = Matrix::Zero(p, p);
  for (std::size_t r = 0; r < mis.size(); ++r)
    for (std::size_t c = 0; c < mis.size(); ++c)
      cond_cov(mis[r], mis[c]) = schur(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

  return {std::move(imputed), SymmetricMatrix(cond_cov)};
}

double condition_number(const SymmetricMatrix& sigma) {
  if (sigma.rows() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma.get(), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace cellmg

#pragma once

#include "cellmg/types.hpp"

namespace cellmg {

/// Log-density of the observed coordinates of x under N(mu, sigma),
/// ln phi(x^(w); mu^(w), sigma^(w)). Returns exactly 0 for an all-zero
/// pattern (phi = 1 convention). One Cholesky factorization supplies both
/// the log-determinant and the quadratic form.
double observed_log_density(const Vector& x, const Vector& mu, const SymmetricMatrix& sigma,
                            const ObservedPattern& w);

struct ConditionalMoments {
  Vector imputed;           // x on observed coordinates, conditional mean elsewhere
  SymmetricMatrix cond_cov; // Schur complement in the missing block, zero elsewhere
};

/// Conditional (imputation) moments of the missing coordinates given the
/// observed ones. All-zero pattern returns (mu, sigma); all-ones returns (x, 0).
ConditionalMoments conditional_moments(const Vector& x, const Vector& mu,
                                       const SymmetricMatrix& sigma, const ObservedPattern& w);

/// lambda_1 / lambda_p from a symmetric eigendecomposition; +infinity when
/// the smallest eigenvalue is <= 0.
double condition_number(const SymmetricMatrix& sigma);

namespace detail {

Matrix submatrix(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols);
Vector subvector(const Vector& v, const std::vector<int>& idx);

}  // namespace detail

}  // namespace cellmg

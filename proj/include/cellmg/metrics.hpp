#pragma once

#include "cellmg/types.hpp"

namespace cellmg {

/// tr(S_hat S^-1) - p - log det(S_hat S^-1); zero iff the estimate equals
/// the truth.
double kl_divergence(const SymmetricMatrix& sigma_hat, const SymmetricMatrix& sigma_true);

/// Average KL over components.
double kl_mean(const std::vector<SymmetricMatrix>& sigma_hat,
               const std::vector<SymmetricMatrix>& sigma_true);

/// Coordinate-wise MSE averaged over variables and groups.
double mse_mu(const std::vector<Vector>& mu_hat, const std::vector<Vector>& mu_true);

/// (1/N^2) sum of squared entry differences.
double mse_pi(const Matrix& pi_hat, const Matrix& pi_true);

struct FlagScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 of flagged cells (positive class = flagged, w = 0);
/// zero-denominator cases return 0.
FlagScores flag_scores(const CellMask& mask_hat, const CellMask& truth_mask);

}  // namespace cellmg

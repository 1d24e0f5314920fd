#pragma once

#include "cellmg/types.hpp"

#include <functional>

namespace cellmg {

/// Penalized observed negative log-likelihood (the quantity the estimator
/// minimizes): loglik_part is sum_g,i -2 ln(mixture density over observed
/// cells), penalty_part is sum q_{g,ij} (1 - w_{g,ij}).
struct ObjectiveValue {
  double total = 0.0;
  double loglik_part = 0.0;
  double penalty_part = 0.0;
};

ObjectiveValue objective(const GroupedData& data, const MixtureParams& params,
                         const CellMask& mask, const PenaltyMatrix& penalty);

/// One full W-step: cycles through variables in order, flagging cells whose
/// inclusion worsens the objective by more than their cost, subject to at
/// least h_g observed cells per variable and group. cfg.penalty must be
/// resolved (non-empty). Never increases the objective.
CellMask w_step(const GroupedData& data, const MixtureParams& params, const CellMask& mask_in,
                const EstimatorConfig& cfg);

/// Posterior component probabilities over observed cells, computed in log
/// space; components with pi_{g,k} = 0 are skipped exactly.
Responsibilities e_step(const GroupedData& data, const MixtureParams& params, const CellMask& mask);

/// Constrained mixture-probability update: pi_gg = max(alpha, mean_i t_gig),
/// off-diagonals proportional to the remaining responsibility mass.
Matrix m_step_pi(const Responsibilities& resp, double alpha);

struct MomentUpdate {
  std::vector<Vector> mu;
  std::vector<SymmetricMatrix> sigma;     // bracketed conditional-imputation average
  std::vector<SymmetricMatrix> sigma_reg; // rho T + (1-rho) sigma
};

/// Mean/covariance update via conditional imputation under the previous
/// parameters, with the convex-combination regularization folded in.
MomentUpdate m_step_moments(const GroupedData& data, const MixtureParams& params_prev,
                            const Responsibilities& resp, const CellMask& mask);

/// Internal (standardized-scale) state passed to the iteration observer
/// after each full W+EM pass.
struct IterationState {
  int iteration;
  const MixtureParams& params;
  const CellMask& mask;
  double objective_after_w;
  double objective_after_em;
};

using IterationObserver = std::function<void(const IterationState&)>;

/// Full driver: global standardization, initialization, frozen penalties,
/// then alternating W- and EM-steps until the largest covariance-entry
/// change drops below eps_conv (or max_iter). Outputs are back-transformed
/// to the original data scale.
FitResult fit(const GroupedData& data, const EstimatorConfig& cfg,
              const IterationObserver& observer = {});

}  // namespace cellmg

#pragma once

#include "cellmg/types.hpp"

#include <utility>

namespace cellmg {

/// Standardized cell residuals with the fit's mask as companion flags.
struct ResidualMatrix {
  std::vector<Matrix> values; // per group, n_g x p
  CellMask flags;
  int floored_variances = 0; // cells whose conditional variance hit the floor
};

/// Responsibility-weighted standardized residual of every cell against its
/// conditional prediction from the unflagged cells (excluding the cell
/// itself when it is observed).
ResidualMatrix residuals(const GroupedData& data, const FitResult& fit);

struct Classification {
  std::vector<std::vector<int>> assigned; // per group, component index per observation
  std::vector<Matrix> probabilities;      // copy of the responsibilities
};

/// Maximum-probability component per observation; ties go to the original
/// group, then to the smallest index.
Classification classify(const FitResult& fit);

/// Independent fits across a list of alpha values (same seed and h).
std::vector<std::pair<double, FitResult>> alpha_sweep(const GroupedData& data,
                                                      const EstimatorConfig& cfg,
                                                      const std::vector<double>& alphas);

}  // namespace cellmg

#pragma once

#include "cellmg/types.hpp"

#include <cstdint>
#include <utility>

namespace cellmg {

struct SimulationConfig {
  enum class MeanMode { Zero, CSeparated };

  int n_groups = 2;
  int dim = 10;
  std::vector<int> n_per_group; // empty = 100 per group
  double pi_diag = 0.9;
  MeanMode mean_mode = MeanMode::Zero;
  double c_sep = 0.5;
  double eps_cell = 0.0;
  double gamma_cell = 6.0;
  std::uint64_t seed = 1;

  std::vector<int> resolved_n() const;
};

struct GroundTruth {
  Matrix pi;
  std::vector<Vector> mu;
  std::vector<SymmetricMatrix> sigma;
  std::vector<std::vector<int>> labels; // generating component per observation
  CellMask clean_mask;                  // 1 = clean cell, 0 = contaminated
};

/// Well-conditioned random covariance: random orthogonal frame, log-spaced
/// eigenvalues re-normalized to unit diagonal, random variance multipliers,
/// trace rescaled into [p/2, 2p].
SymmetricMatrix random_covariance(int p, std::uint64_t seed);

/// Means built inductively so each new mean is exactly c-separated from the
/// closest previous one: ||mu_l - mu_k|| >= c sqrt(p max(l1(S_l), l1(S_k))).
std::vector<Vector> c_separated_means(const std::vector<SymmetricMatrix>& sigmas, double c,
                                      std::uint64_t seed);

/// Draws each observation's component from its group's mixture row, then
/// samples from that component. Returns the data and the component labels.
std::pair<GroupedData, std::vector<std::vector<int>>> sample_mggmm(
    const Matrix& pi, const std::vector<Vector>& mu, const std::vector<SymmetricMatrix>& sigma,
    const std::vector<int>& n_per_group, std::uint64_t seed);

/// Replaces floor(eps_cell * n_g) cells per variable and group by outliers
/// placed along the least-favorable eigendirection of the true component
/// covariance. Returns contaminated data and the clean-cell mask.
std::pair<GroupedData, CellMask> contaminate(const GroupedData& data, const GroundTruth& truth,
                                             double eps_cell, double gamma_cell,
                                             std::uint64_t seed);

/// Convenience: covariances, means, sampling, and contamination from one config.
std::pair<GroupedData, GroundTruth> simulate_dataset(const SimulationConfig& cfg);

}  // namespace cellmg

#pragma once

#include "cellmg/types.hpp"

#include <utility>

namespace cellmg {

/// Location/scale from the minimum-variance contiguous window of the sorted
/// sample (univariate MCD). Scale carries the normal consistency factor and
/// is floored away from zero.
struct UnivariateRobustEstimate {
  double location = 0.0;
  double scale = 0.0;
  int subset_size = 0;
  int window_start = 0; // start index in the sorted sample
};

UnivariateRobustEstimate univariate_mcd(const std::vector<double>& values, int h);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

double chi2_cdf(double x, int df);

/// Inverse chi-square CDF by bracketed Newton iteration (|step| <= 1e-10).
double chi2_quantile(double prob, int df);

/// Consistency factor for the raw MCD standard deviation at subset fraction
/// h/n under the normal model; 1 when the fraction is >= 1.
double mcd_consistency_factor(double fraction);

struct Standardization {
  Vector center;
  Vector scale;
};

/// Robust per-variable centering/scaling over the pooled (all-groups) sample,
/// using univariate MCD with h = floor(n/2)+1.
std::pair<GroupedData, Standardization> global_standardize(const GroupedData& data);

/// Initial mixture parameters: pi0 from alpha, all-ones mask, per-group
/// cellwise-robust moments, and the convex-combination regularization.
std::pair<MixtureParams, CellMask> initial_params(const GroupedData& data, const EstimatorConfig& cfg);

/// T_k (squared univariate MCD scales of unflagged cells), kappa_k
/// (max(1.1 cond T_k, 100)), and the smallest rho_k in (0,1] bringing
/// cond((1-rho) Sigma0 + rho T) under kappa_k.
RegularizationSpec compute_regularization(const std::vector<SymmetricMatrix>& sigma0,
                                          const GroupedData& data, const CellMask& mask);

/// Per-cell flagging costs q_{g,ij} = chi2_{1,0.99} + ln(2 pi)
/// + sum_k t0_{g,i,k} ln C0_{k,j}, clamped below at zero.
PenaltyMatrix compute_penalty(const GroupedData& data, const MixtureParams& params0,
                              const CellMask& mask0, int* clamped_count = nullptr);

}  // namespace cellmg

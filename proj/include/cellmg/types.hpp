#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellmg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Thrown when input data or configuration violates a model invariant.
/// Carries the full list of violations so callers can report all of them.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Thrown when a symmetric factorization fails (non-positive-definite input).
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary observed/missing indicator over the p variables (1 = observed).
struct ObservedPattern {
  std::vector<std::uint8_t> bits;

  ObservedPattern() = default;
  explicit ObservedPattern(std::vector<std::uint8_t> b) : bits(std::move(b)) {}

  static ObservedPattern all_ones(int p) { return ObservedPattern(std::vector<std::uint8_t>(p, 1)); }
  static ObservedPattern all_zeros(int p) { return ObservedPattern(std::vector<std::uint8_t>(p, 0)); }
  static ObservedPattern from_mask_row(const MaskMatrix& mask, Eigen::Index row);

  int size() const { return static_cast<int>(bits.size()); }
  int count() const;
  bool all() const { return count() == size(); }
  bool none() const { return count() == 0; }

  std::vector<int> observed_indices() const;
  std::vector<int> missing_indices() const;
  std::string to_string() const;
};

/// Dense symmetric matrix; symmetry is enforced on construction by
/// averaging with the transpose.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(const Matrix& m);

  const Matrix& get() const { return m_; }
  operator const Matrix&() const { return m_; }
  Eigen::Index rows() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

/// N per-group observation matrices over the same p variables.
struct GroupedData {
  std::vector<Matrix> groups;              // group g has shape n_g x p
  std::vector<std::string> variable_names; // size p (empty means unnamed)
  std::vector<std::string> group_names;    // size N (empty means unnamed)

  int n_groups() const { return static_cast<int>(groups.size()); }
  int dim() const { return groups.empty() ? 0 : static_cast<int>(groups.front().cols()); }
  Eigen::Index rows(int g) const { return groups[static_cast<std::size_t>(g)].rows(); }
  Eigen::Index total_rows() const;
};

/// Per-group binary observed/flagged matrices (1 = observed).
struct CellMask {
  std::vector<MaskMatrix> groups;

  static CellMask all_ones(const GroupedData& data);
  Eigen::VectorXi column_sums(int g) const;
  ObservedPattern row_pattern(int g, Eigen::Index i) const {
    return ObservedPattern::from_mask_row(groups[static_cast<std::size_t>(g)], i);
  }
};

/// Covariance regularization targets and strengths (Sigma_reg = (1-rho) Sigma + rho T).
struct RegularizationSpec {
  std::vector<Vector> target_diag; // diagonal of T_k, all entries > 0
  std::vector<double> rho;         // in (0, 1]
  std::vector<double> kappa;       // condition-number caps, >= 100

  Matrix target(int k) const { return Matrix(target_diag[static_cast<std::size_t>(k)].asDiagonal()); }
};

/// Full mixture parameter set: row-stochastic pi, component moments, and
/// their regularized counterparts.
struct MixtureParams {
  Matrix pi;                              // N x N, rows sum to 1, pi_gg >= alpha
  std::vector<Vector> mu;                 // N vectors of length p
  std::vector<SymmetricMatrix> sigma;     // unregularized covariances
  std::vector<SymmetricMatrix> sigma_reg; // (1-rho_k) sigma_k + rho_k T_k
  RegularizationSpec reg;

  int n_components() const { return static_cast<int>(mu.size()); }
};

/// Nonnegative per-cell flagging costs q_{g,ij}.
struct PenaltyMatrix {
  std::vector<Matrix> q; // per group, n_g x p

  bool empty() const { return q.empty(); }
};

/// Posterior component probabilities t_{g,i,k}; rows sum to 1.
struct Responsibilities {
  std::vector<Matrix> groups; // per group, n_g x N
};

struct EstimatorConfig {
  double alpha = 0.75;
  std::vector<int> h;       // per-group minimum observed cells per variable; empty = use h_fraction
  double h_fraction = 0.75; // h_g = ceil(h_fraction * n_g) when h is empty
  double eps_conv = 1e-4;
  int max_iter = 100;
  PenaltyMatrix penalty;    // empty = computed from initial estimates
  std::uint64_t seed = 1;

  std::vector<int> resolved_h(const GroupedData& data) const;
};

struct FitResult {
  MixtureParams params; // back-transformed to the original data scale
  CellMask mask;
  Responsibilities resp;
  std::vector<double> objective_trace; // on the internal standardized scale
  int iterations = 0;
  bool converged = false;
  Vector center; // per-variable standardization used internally
  Vector scale;
  int clamped_penalties = 0; // number of q entries clamped to 0
};

/// Checks every GroupedData/EstimatorConfig invariant; throws ValidationError
/// listing all violations at once.
void validate(const GroupedData& data, const EstimatorConfig& cfg);

}  // namespace cellmg

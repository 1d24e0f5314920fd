#include "cellmg/types.hpp"

#include <cmath>
#include <sstream>

namespace cellmg {

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::ostringstream os;
  os << "validation failed (" << violations.size() << " violation"
     << (violations.size() == 1 ? "" : "s") << "):";
  for (const auto& v : violations) os << "\n  - " << v;
  return os.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::invalid_argument(join_violations(violations)), violations_(std::move(violations)) {}

Eigen::Index GroupedData::total_rows() const {
  Eigen::Index n = 0;
  for (const auto& g : groups) n += g.rows();
  return n;
}

CellMask CellMask::all_ones(const GroupedData& data) {
  CellMask mask;
  mask.groups.reserve(data.groups.size());
  for (const auto& g : data.groups)
    mask.groups.emplace_back(MaskMatrix::Ones(g.rows(), g.cols()));
  return mask;
}

Eigen::VectorXi CellMask::column_sums(int g) const {
  const MaskMatrix& m = groups[static_cast<std::size_t>(g)];
  Eigen::VectorXi sums = Eigen::VectorXi::Zero(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) sums(j) += m(i, j) ? 1 : 0;
  return sums;
}

std::vector<int> EstimatorConfig::resolved_h(const GroupedData& data) const {
  if (!h.empty()) return h;
  std::vector<int> out;
  out.reserve(data.groups.size());
  for (const auto& g : data.groups)
    out.push_back(static_cast<int>(std::ceil(h_fraction * static_cast<double>(g.rows()))));
  return out;
}

void validate(const GroupedData& data, const EstimatorConfig& cfg) {
  std::vector<std::string> violations;

  if (data.groups.empty()) violations.push_back("no groups provided (N must be >= 1)");
  const int p = data.dim();
  if (p == 0 && !data.groups.empty()) violations.push_back("group 1 has no variables (p must be >= 1)");

  for (int g = 0; g < data.n_groups(); ++g) {
    const Matrix& m = data.groups[static_cast<std::size_t>(g)];
    if (m.cols() != p) {
      std::ostringstream os;
      os << "group " << g + 1 << " has " << m.cols() << " variables, expected " << p;
      violations.push_back(os.str());
    }
    if (m.rows() < 2) {
      std::ostringstream os;
      os << "group " << g + 1 << " has " << m.rows() << " observations, need at least 2";
      violations.push_back(os.str());
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (!std::isfinite(m(i, j))) {
          std::ostringstream os;
          os << "non-finite entry at group " << g + 1 << ", row " << i + 1 << ", column " << j + 1;
          violations.push_back(os.str());
        }
  }

  if (!(cfg.alpha >= 0.5)) violations.push_back("alpha below 0.5");
  if (!(cfg.alpha <= 1.0)) violations.push_back("alpha above 1");
  if (!(cfg.eps_conv > 0.0)) violations.push_back("eps_conv must be > 0");
  if (cfg.max_iter < 1) violations.push_back("max_iter must be >= 1");

  if (!cfg.h.empty() && static_cast<int>(cfg.h.size()) != data.n_groups()) {
    violations.push_back("h must have one entry per group");
  } else if (violations.empty() || data.n_groups() > 0) {
    const std::vector<int> hs = cfg.h.empty() ? std::vector<int>() : cfg.h;
    for (std::size_t g = 0; g < hs.size() && g < data.groups.size(); ++g) {
      const auto n_g = data.groups[g].rows();
      const int lo = static_cast<int>(std::ceil(0.5 * static_cast<double>(n_g)));
      if (hs[g] < lo || hs[g] > n_g) {
        std::ostringstream os;
        os << "h for group " << g + 1 << " is " << hs[g] << ", must lie in [" << lo << ", " << n_g << "]";
        violations.push_back(os.str());
      }
    }
  }
  if (cfg.h.empty() && !(cfg.h_fraction >= 0.5 && cfg.h_fraction <= 1.0))
    violations.push_back("h_fraction must lie in [0.5, 1]");

  if (!cfg.penalty.empty()) {
    if (static_cast<int>(cfg.penalty.q.size()) != data.n_groups()) {
      violations.push_back("penalty must have one matrix per group");
    } else {
      for (int g = 0; g < data.n_groups(); ++g) {
        const Matrix& q = cfg.penalty.q[static_cast<std::size_t>(g)];
        const Matrix& m = data.groups[static_cast<std::size_t>(g)];
        if (q.rows() != m.rows() || q.cols() != m.cols()) {
          std::ostringstream os;
          os << "penalty matrix for group " << g + 1 << " has shape " << q.rows() << "x" << q.cols()
             << ", expected " << m.rows() << "x" << m.cols();
          violations.push_back(os.str());
        } else {
          for (Eigen::Index i = 0; i < q.rows(); ++i)
            for (Eigen::Index j = 0; j < q.cols(); ++j)
              if (!std::isfinite(q(i, j)) || q(i, j) < 0.0) {
                std::ostringstream os;
                os << "penalty entry at group " << g + 1 << ", row " << i + 1 << ", column " << j + 1
                   << " must be finite and >= 0";
                violations.push_back(os.str());
              }
        }
      }
    }
  }

  if (!violations.empty()) throw ValidationError(std::move(violations));
}

}  // namespace cellmg

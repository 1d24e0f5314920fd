#include "cellmg/simulation.hpp"

#include "cellmg/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cellmg {

std::vector<int> SimulationConfig::resolved_n() const {
  if (!n_per_group.empty()) {
    if (static_cast<int>(n_per_group.size()) != n_groups)
      throw std::invalid_argument("n_per_group must have one entry per group");
    return n_per_group;
  }
  return std::vector<int>(static_cast<std::size_t>(n_groups), 100);
}

SymmetricMatrix random_covariance(int p, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("random_covariance: p must be >= 1");
  Rng rng(seed);

  const double lo_trace = 0.5 * static_cast<double>(p);
  const double hi_trace = 2.0 * static_cast<double>(p);

  if (p == 1) {
    Matrix s(1, 1);
    s(0, 0) = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
    return SymmetricMatrix(s);
  }

  const double target_cond = 100.0;

  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j); // fixed sign convention

  Vector ev(p);
  for (int i = 0; i < p; ++i)
    ev(i) = std::pow(target_cond, static_cast<double>(p - 1 - i) / static_cast<double>(p - 1));
  Matrix c = q * ev.asDiagonal() * q.transpose();

  // alternate unit-diagonal normalization with an eigenvalue floor until the
  // condition number settles near the target
  for (int it = 0; it < 10; ++it) {
    const Vector d = c.diagonal().array().sqrt().inverse().matrix();
    c = d.asDiagonal() * c * d.asDiagonal();
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (lmin > 0.0 && lmax / lmin <= target_cond) break;
    Vector clipped = eig.eigenvalues();
    for (int i = 0; i < p; ++i) clipped(i) = std::max(clipped(i), lmax / target_cond);
    c = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  }

  Vector mult(p);
  for (int j = 0; j < p; ++j) mult(j) = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
  const Vector root = mult.array().sqrt().matrix();
  Matrix sigma = root.asDiagonal() * c * root.asDiagonal();
  sigma = 0.5 * (sigma + sigma.transpose());

  const double tr = sigma.trace();
  if (tr < lo_trace)
    sigma *= lo_trace / tr;
  else if (tr > hi_trace)
    sigma *= hi_trace / tr;

  return SymmetricMatrix(sigma);
}

std::vector<Vector> c_separated_means(const std::vector<SymmetricMatrix>& sigmas, double c,
                                      std::uint64_t seed) {
  if (!(c > 0.0)) throw std::invalid_argument("c_separated_means: c must be > 0");
  const int N = static_cast<int>(sigmas.size());
  const int p = static_cast<int>(sigmas.front().rows());
  Rng rng(seed);

  std::vector<double> lmax(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigmas[static_cast<std::size_t>(k)].get(),
                                              Eigen::EigenvaluesOnly);
    lmax[static_cast<std::size_t>(k)] = eig.eigenvalues().maxCoeff();
  }

  std::vector<Vector> mu;
  mu.push_back(Vector::Zero(p));

  for (int k = 1; k < N; ++k) {
    Vector mbar = Vector::Zero(p);
    for (int l = 0; l < k; ++l) mbar += mu[static_cast<std::size_t>(l)];
    mbar /= static_cast<double>(k);

    double t_star = 0.0;
    Vector dir(p);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (int j = 0; j < p; ++j) dir(j) = rng.normal();
      const Vector u = dir - mbar;
      if (u.norm() < 1e-12) continue; // degenerate direction, redraw

      t_star = 0.0;
      for (int l = 0; l < k; ++l) {
        const Vector b = mbar - mu[static_cast<std::size_t>(l)];
        const double rhs2 = c * c * static_cast<double>(p) *
                            std::max(lmax[static_cast<std::size_t>(l)], lmax[static_cast<std::size_t>(k)]);
        // || t u + b ||^2 = rhs2  ->  (u.u) t^2 + 2 (u.b) t + (b.b - rhs2) = 0
        const double qa = u.squaredNorm();
        const double qb = 2.0 * u.dot(b);
        const double qc = b.squaredNorm() - rhs2;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) continue; // constraint holds for every t
        const double root = (-qb + std::sqrt(disc)) / (2.0 * qa);
        t_star = std::max(t_star, std::max(root, 0.0));
      }
      if (t_star > 0.0) break;
    }
    mu.push_back(t_star * (dir - mbar) + mbar);
  }
  return mu;
}

std::pair<GroupedData, std::vector<std::vector<int>>> sample_mggmm(
    const Matrix& pi, const std::vector<Vector>& mu, const std::vector<SymmetricMatrix>& sigma,
    const std::vector<int>& n_per_group, std::uint64_t seed) {
  const int N = static_cast<int>(mu.size());
  const int p = static_cast<int>(mu.front().size());

  std::vector<Eigen::LLT<Matrix>> chol(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    chol[static_cast<std::size_t>(k)].compute(sigma[static_cast<std::size_t>(k)].get());
    if (chol[static_cast<std::size_t>(k)].info() != Eigen::Success)
      throw FactorizationError("sample_mggmm: component covariance " + std::to_string(k + 1) +
                               " is not positive definite");
  }

  GroupedData data;
  std::vector<std::vector<int>> labels(static_cast<std::size_t>(N));
  for (int g = 0; g < N; ++g) {
    Rng rng = Rng::substream(seed, "sample", static_cast<std::uint64_t>(g));
    const int n_g = n_per_group[static_cast<std::size_t>(g)];
    Matrix x(n_g, p);
    auto& lab = labels[static_cast<std::size_t>(g)];
    lab.resize(static_cast<std::size_t>(n_g));
    for (int i = 0; i < n_g; ++i) {
      const double u = rng.uniform();
      int k = N - 1;
      double acc = 0.0;
      for (int l = 0; l < N; ++l) {
        acc += pi(g, l);
        if (u < acc) {
          k = l;
          break;
        }
      }
      Vector z(p);
      for (int j = 0; j < p; ++j) z(j) = rng.normal();
      x.row(i) = (mu[static_cast<std::size_t>(k)] +
                  chol[static_cast<std::size_t>(k)].matrixL() * z)
                     .transpose();
      lab[static_cast<std::size_t>(i)] = k;
    }
    data.groups.push_back(std::move(x));
  }
  return {std::move(data), std::move(labels)};
}

std::pair<GroupedData, CellMask> contaminate(const GroupedData& data, const GroundTruth& truth,
                                             double eps_cell, double gamma_cell,
                                             std::uint64_t seed) {
  if (!(eps_cell >= 0.0 && eps_cell < 1.0))
    throw std::invalid_argument("contaminate: eps_cell must lie in [0, 1)");

  GroupedData out = data;
  CellMask mask = CellMask::all_ones(data);
  if (eps_cell == 0.0) return {std::move(out), std::move(mask)};

  const int p = data.dim();
  for (int g = 0; g < data.n_groups(); ++g) {
    Rng rng = Rng::substream(seed, "contaminate", static_cast<std::uint64_t>(g));
    Matrix& x = out.groups[static_cast<std::size_t>(g)];
    MaskMatrix& w = mask.groups[static_cast<std::size_t>(g)];
    const int n_g = static_cast<int>(x.rows());
    const int n_bad = static_cast<int>(std::floor(eps_cell * static_cast<double>(n_g)));
    if (n_bad == 0) continue;

    // partial Fisher-Yates per variable: first n_bad entries are the hit rows
    std::vector<int> rows(static_cast<std::size_t>(n_g));
    for (int j = 0; j < p; ++j) {
      std::iota(rows.begin(), rows.end(), 0);
      for (int i = 0; i < n_bad; ++i) {
        const int r = i + rng.uniform_int(n_g - i);
        std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(r)]);
      }
      for (int i = 0; i < n_bad; ++i) w(rows[static_cast<std::size_t>(i)], j) = 0;
    }

    for (int i = 0; i < n_g; ++i) {
      std::vector<int> bad;
      for (int j = 0; j < p; ++j)
        if (!w(i, j)) bad.push_back(j);
      if (bad.empty()) continue;

      const int k = truth.labels[static_cast<std::size_t>(g)][static_cast<std::size_t>(i)];
      const Matrix& sigma = truth.sigma[static_cast<std::size_t>(k)].get();
      const Vector& mu = truth.mu[static_cast<std::size_t>(k)];

      Matrix sub(static_cast<Eigen::Index>(bad.size()), static_cast<Eigen::Index>(bad.size()));
      for (std::size_t r = 0; r < bad.size(); ++r)
        for (std::size_t c = 0; c < bad.size(); ++c)
          sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sigma(bad[r], bad[c]);

      Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
      Vector v = eig.eigenvectors().col(0); // smallest eigenvalue
      for (Eigen::Index r = 0; r < v.size(); ++r) {
        if (std::abs(v(r)) > 1e-14) {
          if (v(r) < 0.0) v = -v;
          break;
        }
      }
      const Vector siv = sub.llt().solve(v);
      const double denom = std::sqrt(v.dot(siv));
      const double step = gamma_cell * std::sqrt(static_cast<double>(bad.size())) / denom;
      for (std::size_t r = 0; r < bad.size(); ++r)
        x(i, bad[r]) = mu(bad[r]) + v(static_cast<Eigen::Index>(r)) * step;
    }
  }
  return {std::move(out), std::move(mask)};
}

std::pair<GroupedData, GroundTruth> simulate_dataset(const SimulationConfig& cfg) {
  if (cfg.n_groups < 1) throw std::invalid_argument("simulate_dataset: n_groups must be >= 1");
  if (cfg.dim < 1) throw std::invalid_argument("simulate_dataset: dim must be >= 1");
  if (cfg.n_groups > 1 && !(cfg.pi_diag > 1.0 / static_cast<double>(cfg.n_groups) && cfg.pi_diag <= 1.0))
    throw std::invalid_argument("simulate_dataset: pi_diag must lie in (1/N, 1]");

  const int N = cfg.n_groups;
  const std::vector<int> n = cfg.resolved_n();

  GroundTruth truth;
  truth.pi = Matrix::Zero(N, N);
  if (N == 1) {
    truth.pi(0, 0) = 1.0;
  } else {
    truth.pi.setConstant((1.0 - cfg.pi_diag) / static_cast<double>(N - 1));
    truth.pi.diagonal().setConstant(cfg.pi_diag);
  }

  truth.sigma.reserve(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k)
    truth.sigma.push_back(random_covariance(
        cfg.dim, Rng::substream(cfg.seed, "cov", static_cast<std::uint64_t>(k)).next_u64()));

  if (cfg.mean_mode == SimulationConfig::MeanMode::CSeparated && N > 1) {
    truth.mu = c_separated_means(truth.sigma, cfg.c_sep,
                                 Rng::substream(cfg.seed, "means").next_u64());
  } else {
    truth.mu.assign(static_cast<std::size_t>(N), Vector::Zero(cfg.dim));
  }

  auto [clean, labels] = sample_mggmm(truth.pi, truth.mu, truth.sigma, n, cfg.seed);
  truth.labels = std::move(labels);

  auto [data, mask] = contaminate(clean, truth, cfg.eps_cell, cfg.gamma_cell, cfg.seed);
  truth.clean_mask = std::move(mask);
  return {std::move(data), std::move(truth)};
}

}  // namespace cellmg

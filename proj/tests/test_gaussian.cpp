#include "cellmg/gaussian.hpp"
#include "cellmg/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace cellmg;

namespace {

Matrix random_spd(int p, Rng& rng) {
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * static_cast<double>(p) * Matrix::Identity(p, p);
}

ObservedPattern random_pattern(int p, Rng& rng) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(p));
  for (auto& b : bits) b = rng.uniform() < 0.6 ? 1 : 0;
  return ObservedPattern(std::move(bits));
}

// Jacobi rotation eigenvalues: an Eigen-free oracle for small symmetric matrices.
std::vector<double> jacobi_eigenvalues(Matrix a) {
  const int p = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-24) break;
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        if (std::abs(a(i, j)) < 1e-18) continue;
        const double theta = 0.5 * std::atan2(2.0 * a(i, j), a(j, j) - a(i, i));
        const double c = std::cos(theta), s = std::sin(theta);
        for (int k = 0; k < p; ++k) {
          const double aki = a(k, i), akj = a(k, j);
          a(k, i) = c * aki - s * akj;
          a(k, j) = s * aki + c * akj;
        }
        for (int k = 0; k < p; ++k) {
          const double aik = a(i, k), ajk = a(j, k);
          a(i, k) = c * aik - s * ajk;
          a(j, k) = s * aik + c * ajk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(p));
  for (int i = 0; i < p; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace

TEST_CASE("observed_log_density matches closed forms") {
  const SymmetricMatrix unit(Matrix::Identity(1, 1));
  Vector x0(1), mu0(1);
  x0 << 0.0;
  mu0 << 0.0;
  CHECK(observed_log_density(x0, mu0, unit, ObservedPattern::all_ones(1)) ==
        doctest::Approx(-0.91893853320467274).epsilon(1e-12));

  // all-missing convention: density is exactly one
  Vector x(2), mu(2);
  x << 3.7, -1.0;
  mu << 0.5, 0.5;
  const SymmetricMatrix sigma(Matrix::Identity(2, 2));
  CHECK(observed_log_density(x, mu, sigma, ObservedPattern::all_zeros(2)) == 0.0);

  // univariate marginal of a bivariate standard normal
  Vector x2(2), mu2(2);
  x2 << 1.0, 2.0;
  mu2 << 0.0, 0.0;
  ObservedPattern first_only(std::vector<std::uint8_t>{1, 0});
  CHECK(observed_log_density(x2, mu2, sigma, first_only) ==
        doctest::Approx(-1.41893853320467274).epsilon(1e-12));
}

TEST_CASE("observed_log_density rejects non-PD observed submatrices") {
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0; // indefinite
  Vector x(2), mu(2);
  x.setZero();
  mu.setZero();
  CHECK_THROWS_AS(observed_log_density(x, mu, SymmetricMatrix(bad), ObservedPattern::all_ones(2)),
                  FactorizationError);
  try {
    observed_log_density(x, mu, SymmetricMatrix(bad), ObservedPattern::all_ones(2));
  } catch (const FactorizationError& e) {
    CHECK(std::string(e.what()).find("11") != std::string::npos); // names the pattern
  }
}

TEST_CASE("observed_log_density is invariant under simultaneous permutation") {
  Rng rng(77);
  for (int rep = 0; rep < 25; ++rep) {
    const int p = 3 + rng.uniform_int(3);
    const Matrix sigma = random_spd(p, rng);
    Vector x(p), mu(p);
    for (int j = 0; j < p; ++j) {
      x(j) = rng.normal();
      mu(j) = rng.normal();
    }
    ObservedPattern w = random_pattern(p, rng);

    std::vector<int> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = p - 1; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);

    Vector xp(p), mup(p);
    Matrix sp(p, p);
    ObservedPattern wp = ObservedPattern::all_zeros(p);
    for (int i = 0; i < p; ++i) {
      xp(i) = x(perm[static_cast<std::size_t>(i)]);
      mup(i) = mu(perm[static_cast<std::size_t>(i)]);
      wp.bits[static_cast<std::size_t>(i)] = w.bits[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      for (int j = 0; j < p; ++j) sp(i, j) = sigma(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    const double a = observed_log_density(x, mu, SymmetricMatrix(sigma), w);
    const double b = observed_log_density(xp, mup, SymmetricMatrix(sp), wp);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("observed density integrates to one over the observed coordinates") {
  Rng rng(5);

  SUBCASE("one observed coordinate") {
    Matrix sigma(2, 2);
    sigma << 2.0, 0.7, 0.7, 1.0;
    Vector mu(2);
    mu << 0.3, -0.2;
    ObservedPattern w(std::vector<std::uint8_t>{0, 1});
    const double sd = std::sqrt(sigma(1, 1));
    const int n = 4001;
    const double lo = mu(1) - 10.0 * sd, hi = mu(1) + 10.0 * sd;
    const double dx = (hi - lo) / static_cast<double>(n - 1);
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      Vector x(2);
      x << 0.0, lo + static_cast<double>(i) * dx;
      const double f = std::exp(observed_log_density(x, mu, SymmetricMatrix(sigma), w));
      const double wgt = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      integral += wgt * f;
    }
    integral *= dx / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("two observed coordinates") {
    Matrix sigma(3, 3);
    sigma << 1.5, 0.4, 0.1, 0.4, 1.0, -0.2, 0.1, -0.2, 0.8;
    Vector mu(3);
    mu << 0.0, 1.0, -1.0;
    ObservedPattern w(std::vector<std::uint8_t>{1, 0, 1});
    const int n = 301;
    const double s0 = std::sqrt(sigma(0, 0)), s2 = std::sqrt(sigma(2, 2));
    const double lo0 = mu(0) - 8.0 * s0, hi0 = mu(0) + 8.0 * s0;
    const double lo2 = mu(2) - 8.0 * s2, hi2 = mu(2) + 8.0 * s2;
    const double d0 = (hi0 - lo0) / (n - 1), d2 = (hi2 - lo2) / (n - 1);
    auto simpson_w = [&](int i) { return (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0); };
    double integral = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vector x(3);
        x << lo0 + i * d0, 0.0, lo2 + j * d2;
        integral += simpson_w(i) * simpson_w(j) *
                    std::exp(observed_log_density(x, mu, SymmetricMatrix(sigma), w));
      }
    integral *= d0 * d2 / 9.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("conditional_moments closed-form bivariate case") {
  Matrix sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  Vector mu(2), x(2);
  mu.setZero();
  x << 123.0, 2.0; // first coordinate is missing; placeholder value must be ignored
  ObservedPattern w(std::vector<std::uint8_t>{0, 1});

  const auto cm = conditional_moments(x, mu, SymmetricMatrix(sigma), w);
  CHECK(cm.imputed(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cm.imputed(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cm.cond_cov(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(cm.cond_cov(0, 1) == 0.0);
  CHECK(cm.cond_cov(1, 1) == 0.0);
}

TEST_CASE("conditional_moments degenerate patterns") {
  Rng rng(11);
  const int p = 4;
  const Matrix sigma = random_spd(p, rng);
  Vector x(p), mu(p);
  for (int j = 0; j < p; ++j) {
    x(j) = rng.normal();
    mu(j) = rng.normal();
  }

  const auto all = conditional_moments(x, mu, SymmetricMatrix(sigma), ObservedPattern::all_ones(p));
  CHECK((all.imputed - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(all.cond_cov.get().cwiseAbs().maxCoeff() == 0.0);

  const auto none = conditional_moments(x, mu, SymmetricMatrix(sigma), ObservedPattern::all_zeros(p));
  CHECK((none.imputed - mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((none.cond_cov.get() - 0.5 * (sigma + sigma.transpose())).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("conditional_moments matches the partitioned-inverse oracle") {
  // Independent route: invert the full covariance, then read the conditional
  // law from the precision blocks: cov = (P_mm)^-1, mean = mu_m - (P_mm)^-1 P_mo (x_o - mu_o).
  Rng rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const int p = 3 + rng.uniform_int(4);
    const Matrix sigma = random_spd(p, rng);
    Vector x(p), mu(p);
    for (int j = 0; j < p; ++j) {
      x(j) = rng.normal();
      mu(j) = rng.normal();
    }
    ObservedPattern w = random_pattern(p, rng);
    if (w.none() || w.all()) continue;

    const auto cm = conditional_moments(x, mu, SymmetricMatrix(sigma), w);

    const Matrix precision = sigma.inverse();
    const auto mis = w.missing_indices();
    const auto obs = w.observed_indices();
    const Matrix pmm = detail::submatrix(precision, mis, mis);
    const Matrix pmo = detail::submatrix(precision, mis, obs);
    const Matrix pmm_inv = pmm.inverse();
    const Vector mean =
        detail::subvector(mu, mis) - pmm_inv * pmo * (detail::subvector(x, obs) - detail::subvector(mu, obs));

    for (std::size_t r = 0; r < mis.size(); ++r) {
      CHECK(cm.imputed(mis[r]) == doctest::Approx(mean(static_cast<Eigen::Index>(r))).epsilon(1e-10));
      for (std::size_t c = 0; c < mis.size(); ++c)
        CHECK(cm.cond_cov(mis[r], mis[c]) ==
              doctest::Approx(pmm_inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)))
                  .epsilon(1e-10));
    }
    for (const int j : obs) CHECK(cm.imputed(j) == x(j));
  }
}

TEST_CASE("conditional covariance is positive semidefinite") {
  Rng rng(13);
  for (int rep = 0; rep < 40; ++rep) {
    const int p = 2 + rng.uniform_int(5);
    const Matrix sigma = random_spd(p, rng);
    Vector x = Vector::Zero(p), mu = Vector::Zero(p);
    const ObservedPattern w = random_pattern(p, rng);
    const auto cm = conditional_moments(x, mu, SymmetricMatrix(sigma), w);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cm.cond_cov.get(), Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("condition_number basics and oracle") {
  CHECK(condition_number(SymmetricMatrix(Matrix::Identity(3, 3))) == doctest::Approx(1.0));

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 1.0;
  CHECK(condition_number(SymmetricMatrix(d)) == doctest::Approx(4.0));

  Matrix sing = Matrix::Zero(2, 2);
  sing(0, 0) = 1.0;
  CHECK(std::isinf(condition_number(SymmetricMatrix(sing))));

  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix s = random_spd(5, rng);
    const auto ev = jacobi_eigenvalues(s);
    const double expected = ev.back() / ev.front();
    CHECK(condition_number(SymmetricMatrix(s)) == doctest::Approx(expected).epsilon(1e-8));
  }
}

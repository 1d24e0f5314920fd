#include "cellmg/robust.hpp"

#include "cellmg/estimator.hpp"
#include "cellmg/gaussian.hpp"
#include "cellmg/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace cellmg;
using oracles::best_subset_exhaustive;
using oracles::chi2_cdf_quadrature;
using oracles::chi2_quantile_quadrature;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

GroupedData single_group(const Matrix& x) {
  GroupedData data;
  data.groups = {x};
  return data;
}

}  // namespace

TEST_CASE("univariate_mcd frozen examples") {
  SUBCASE("degenerate window floors the scale") {
    const auto est = univariate_mcd({0.0, 0.0, 0.0, 100.0}, 3);
    CHECK(est.location == 0.0);
    CHECK(est.scale == doctest::Approx(1e-12).epsilon(1e-9));
  }
  SUBCASE("variance ties break to the smallest start index") {
    const auto est = univariate_mcd({-1.0, 0.0, 1.0}, 2);
    CHECK(est.location == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(est.window_start == 0);
  }
  SUBCASE("full-sample window reduces to mean and sd") {
    std::vector<double> v{-2.0, -1.0, 0.0, 1.0, 2.0};
    const auto est = univariate_mcd(v, 5);
    CHECK(est.location == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(est.scale == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12)); // factor is 1 at h = n
  }
  CHECK_THROWS_AS(univariate_mcd({1.0}, 1), std::invalid_argument);
}

TEST_CASE("univariate_mcd matches exhaustive subset enumeration") {
  Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 4 + rng.uniform_int(9); // 4..12
    const int h = 2 + rng.uniform_int(n - 1);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = rng.normal() + (rng.uniform() < 0.2 ? 10.0 * rng.normal() : 0.0);

    const auto oracle = best_subset_exhaustive(values, h);
    const auto est = univariate_mcd(values, h);

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> window(sorted.begin() + est.window_start, sorted.begin() + est.window_start + h);
    REQUIRE(window.size() == oracle.values.size());
    for (std::size_t i = 0; i < window.size(); ++i) CHECK(window[i] == oracle.values[i]);
    CHECK(est.location == doctest::Approx(oracle.mean).epsilon(1e-12));
  }
}

TEST_CASE("chi2_quantile frozen values and quadrature oracle") {
  CHECK(chi2_quantile(0.5, 2) == doctest::Approx(1.3862943611198906).epsilon(1e-10));
  CHECK(chi2_quantile(0.99, 1) == doctest::Approx(6.6348966).epsilon(1e-6 / 6.63));
  CHECK(chi2_quantile(0.975, 1) == doctest::Approx(5.0238862).epsilon(1e-6 / 5.02));

  CHECK(chi2_quantile(0.99, 1) == doctest::Approx(chi2_quantile_quadrature(0.99, 1)).epsilon(1e-8));
  CHECK(chi2_quantile(0.9, 3) == doctest::Approx(chi2_quantile_quadrature(0.9, 3)).epsilon(1e-8));

  CHECK_THROWS_AS(chi2_quantile(0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(chi2_quantile(1.0, 1), std::invalid_argument);
}

TEST_CASE("chi2_quantile composed with the quadrature CDF recovers the probability") {
  for (double prob : {0.05, 0.25, 0.5, 0.9, 0.99}) {
    for (int df : {1, 2, 5}) {
      const double q = chi2_quantile(prob, df);
      CHECK(chi2_cdf_quadrature(q, df) == doctest::Approx(prob).epsilon(1e-8));
    }
  }
}

TEST_CASE("global_standardize recovers the normal model scale") {
  // n = 500 puts the raw MCD location sd near 0.13, so the 0.1 band is a
  // fixed-draw check, not a distributional one
  Rng rng(4);
  GroupedData data;
  Matrix x(500, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  data.groups = {x};

  const auto [std_data, tf] = global_standardize(data);
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(tf.center(j)) < 0.1);
    CHECK(std::abs(tf.scale(j) - 1.0) < 0.15);
  }
}

TEST_CASE("global_standardize handles constant columns") {
  GroupedData data;
  Matrix x(10, 2);
  x.col(0).setConstant(3.0);
  for (Eigen::Index i = 0; i < 10; ++i) x(i, 1) = static_cast<double>(i);
  data.groups = {x};
  const auto [std_data, tf] = global_standardize(data);
  CHECK(tf.scale(0) > 0.0);
  CHECK(std::isfinite(std_data.groups[0].maxCoeff()));
}

TEST_CASE("global_standardize is affine equivariant") {
  Rng rng(8);
  GroupedData data;
  Matrix x(60, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() * (1.0 + static_cast<double>(j));
  data.groups = {x};

  GroupedData shifted = data;
  shifted.groups[0] = (2.5 * x).array().rowwise() + Eigen::Array3d(1.0, -3.0, 0.25).transpose();

  const auto [a, tfa] = global_standardize(data);
  const auto [b, tfb] = global_standardize(shifted);
  CHECK((a.groups[0] - b.groups[0]).cwiseAbs().maxCoeff() < 1e-12);

  // standardizing already-standardized data is the identity up to rounding
  const auto [twice, tf2] = global_standardize(a);
  CHECK((twice.groups[0] - a.groups[0]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("initial_params mixing matrix and moment quality") {
  SUBCASE("pi formula for two groups") {
    Rng rng(3);
    GroupedData data;
    Matrix a(20, 2), b(20, 2);
    for (Eigen::Index i = 0; i < 20; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    data.groups = {a, b};
    EstimatorConfig cfg;
    cfg.alpha = 0.75;
    const auto [params, mask] = initial_params(data, cfg);
    CHECK(params.pi(0, 0) == 0.75);
    CHECK(params.pi(0, 1) == 0.25);
    CHECK(params.pi(1, 0) == 0.25);
    CHECK(params.pi(1, 1) == 0.75);
    for (const auto& m : mask.groups) CHECK(m.minCoeff() == 1);
  }
  SUBCASE("single group gets pi = 1") {
    Rng rng(4);
    GroupedData data;
    Matrix a(10, 2);
    for (Eigen::Index i = 0; i < 10; ++i)
      for (Eigen::Index j = 0; j < 2; ++j) a(i, j) = rng.normal();
    data.groups = {a};
    const auto [params, mask] = initial_params(data, EstimatorConfig{});
    CHECK(params.pi.rows() == 1);
    CHECK(params.pi(0, 0) == 1.0);
  }
  SUBCASE("clean Gaussian group recovers the mean") {
    Rng rng(8);
    const int n = 200, p = 5;
    Vector mu_true(p);
    mu_true << 1.0, -2.0, 0.5, 0.0, 3.0;
    Matrix x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = mu_true(j) + rng.normal();
    const auto [params, mask] = initial_params(single_group(x), EstimatorConfig{});
    for (int j = 0; j < p; ++j) CHECK(std::abs(params.mu[0](j) - mu_true(j)) < 0.15);
  }
}

TEST_CASE("initial_params satisfies the regularization identity") {
  Rng rng(6);
  GroupedData data;
  Matrix a(30, 3), b(25, 3);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) a(i, j) = rng.normal();
  for (Eigen::Index i = 0; i < 25; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) b(i, j) = rng.normal() * 2.0;
  data.groups = {a, b};
  const auto [params, mask] = initial_params(data, EstimatorConfig{});
  for (int k = 0; k < 2; ++k) {
    const double rho = params.reg.rho[static_cast<std::size_t>(k)];
    const Matrix expected =
        (1.0 - rho) * params.sigma[static_cast<std::size_t>(k)].get() + rho * params.reg.target(k);
    CHECK((params.sigma_reg[static_cast<std::size_t>(k)].get() - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(condition_number(params.sigma_reg[static_cast<std::size_t>(k)]) <=
          params.reg.kappa[static_cast<std::size_t>(k)] * (1.0 + 1e-6));
  }
}

TEST_CASE("compute_regularization") {
  Rng rng(9);
  Matrix x(100, 2);
  for (Eigen::Index i = 0; i < 100; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) x(i, j) = rng.normal();
  const GroupedData data = single_group(x);
  const CellMask mask = CellMask::all_ones(data);

  SUBCASE("well-conditioned input keeps rho at the floor") {
    const auto spec = compute_regularization({SymmetricMatrix(Matrix::Identity(2, 2))}, data, mask);
    CHECK(spec.rho[0] == 1e-6);
    CHECK(spec.kappa[0] >= 100.0);
  }
  SUBCASE("rank-deficient input gets regularized under the cap") {
    Vector v(2);
    v << 1.0, 1.0;
    const SymmetricMatrix rank1(Matrix(v * v.transpose()));
    const auto spec = compute_regularization({rank1}, data, mask);
    CHECK(spec.rho[0] > 0.0);
    const Matrix mixed = (1.0 - spec.rho[0]) * rank1.get() + spec.rho[0] * spec.target(0);
    CHECK(condition_number(SymmetricMatrix(mixed)) <= spec.kappa[0] * (1.0 + 1e-6));
  }
  SUBCASE("kappa follows max(1.1 cond T, 100) exactly") {
    Matrix wide(100, 2);
    for (Eigen::Index i = 0; i < 100; ++i) {
      wide(i, 0) = rng.normal();
      wide(i, 1) = 100.0 * rng.normal();
    }
    const GroupedData d2 = single_group(wide);
    const auto spec = compute_regularization({SymmetricMatrix(Matrix::Identity(2, 2))}, d2,
                                             CellMask::all_ones(d2));
    const double cond_t = spec.target_diag[0].maxCoeff() / spec.target_diag[0].minCoeff();
    CHECK(spec.kappa[0] == std::max(1.1 * cond_t, 100.0));
    CHECK(spec.kappa[0] > 100.0); // scales differ by about 1e4
  }
}

TEST_CASE("compute_penalty frozen constants") {
  const double base = 6.6348966 + kLog2Pi;

  SUBCASE("single component with unit covariance") {
    GroupedData data;
    Matrix x(3, 2);
    x << 0, 0, 1, 1, -1, 2;
    data.groups = {x};
    MixtureParams params;
    params.pi = Matrix::Ones(1, 1);
    params.mu = {Vector::Zero(2)};
    params.sigma = {SymmetricMatrix(Matrix::Identity(2, 2))};
    params.sigma_reg = {SymmetricMatrix(Matrix::Identity(2, 2))};
    params.reg.target_diag = {Vector::Ones(2)};
    params.reg.rho = {1e-6};
    params.reg.kappa = {100.0};

    const auto q = compute_penalty(data, params, CellMask::all_ones(data));
    CHECK(q.q[0](0, 0) == doctest::Approx(base).epsilon(1e-6));
    CHECK(q.q[0](2, 1) == doctest::Approx(base).epsilon(1e-6));
  }

  SUBCASE("diagonal covariance shifts the cost by ln C") {
    GroupedData data;
    Matrix x(2, 2);
    x << 0, 0, 1, 1;
    data.groups = {x};
    MixtureParams params;
    params.pi = Matrix::Ones(1, 1);
    params.mu = {Vector::Zero(2)};
    params.sigma = {SymmetricMatrix(Matrix(4.0 * Matrix::Identity(2, 2)))};
    params.sigma_reg = {SymmetricMatrix(Matrix(4.0 * Matrix::Identity(2, 2)))};
    params.reg.target_diag = {Vector::Constant(2, 4.0)};
    params.reg.rho = {1e-6};
    params.reg.kappa = {100.0};

    const auto q = compute_penalty(data, params, CellMask::all_ones(data));
    CHECK(q.q[0](0, 0) == doctest::Approx(base + std::log(4.0)).epsilon(1e-6));
  }

  SUBCASE("symmetric two-component mixture matches the single-component cost") {
    GroupedData data;
    Matrix a(2, 2), b(2, 2);
    a << 0, 0, 1, 1;
    b << 0, 1, 1, 0;
    data.groups = {a, b};
    MixtureParams params;
    params.pi = Matrix::Constant(2, 2, 0.5);
    params.mu = {Vector::Zero(2), Vector::Zero(2)};
    for (int k = 0; k < 2; ++k) {
      params.sigma.emplace_back(Matrix::Identity(2, 2));
      params.sigma_reg.emplace_back(Matrix::Identity(2, 2));
      params.reg.target_diag.push_back(Vector::Ones(2));
      params.reg.rho.push_back(1e-6);
      params.reg.kappa.push_back(100.0);
    }
    const auto q = compute_penalty(data, params, CellMask::all_ones(data));
    CHECK(q.q[0](0, 0) == doctest::Approx(base).epsilon(1e-6)); // t-weighted log of C = 1
    CHECK(q.q[1](1, 1) == doctest::Approx(base).epsilon(1e-6));
  }
}

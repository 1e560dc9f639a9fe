#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lssc/estimator.hpp"
#include "lssc/simulation.hpp"

using namespace lssc;

namespace {

// Clustering-free interactive-effects fit, written independently of the
// library loop: alternate a full-rank SVD factor step with a normal-equation
// beta step.
double global_fit_oracle(const PanelData& data, int r, double tol,
                         int max_iter) {
  const int T = data.T(), N = data.N(), p = data.p();
  Vector beta = Vector::Zero(p);
  {
    Matrix xtx = Matrix::Zero(p, p);
    Vector xty = Vector::Zero(p);
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b)
        xtx(a, b) = (data.X[a].array() * data.X[b].array()).sum();
      xty(a) = (data.X[a].array() * data.Y.array()).sum();
    }
    beta = xtx.ldlt().solve(xty);
  }
  Matrix F, L;
  for (int it = 0; it < max_iter; ++it) {
    Matrix ystar = data.Y;
    for (int q = 0; q < p; ++q) ystar -= beta(q) * data.X[q];
    Eigen::BDCSVD<Matrix> svd(ystar, Eigen::ComputeThinU | Eigen::ComputeThinV);
    F = std::sqrt(static_cast<double>(T)) * svd.matrixU().leftCols(r);
    L = ystar.transpose() * F / T;
    const Matrix resid = data.Y - F * L.transpose();
    Matrix xtx = Matrix::Zero(p, p);
    Vector xty = Vector::Zero(p);
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < p; ++b)
        xtx(a, b) = (data.X[a].array() * data.X[b].array()).sum();
      xty(a) = (data.X[a].array() * resid.array()).sum();
    }
    const Vector next = xtx.ldlt().solve(xty);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < tol) break;
  }
  Matrix resid = data.Y - F * L.transpose();
  for (int q = 0; q < p; ++q) resid -= beta(q) * data.X[q];
  return resid.squaredNorm();
}

Setting1Config noiseless_config() {
  Setting1Config cfg;
  cfg.loading_noise_var = 0.0;
  cfg.eps_var = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("noiseless setting-1 data is recovered exactly", "[estimator]") {
  auto cfg = noiseless_config();
  auto [data, truth] = gen_setting1(cfg, 101);

  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  est.beta_tol = 1e-13;  // drive to the fixed point; the data is exact
  est.max_iter = 5000;   // the alternation contracts slowly on this design
  const FitResult fit = fit_lssc(data, est);

  CHECK(fit.converged);
  CHECK(fit.objective() <= 1e-6 * data.T() * data.N());
  CHECK((fit.beta.beta - truth.beta).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(misclassification_rate(fit.structure.membership, truth.membership, 3) ==
        0.0);
  CHECK_NOTHROW(fit.structure.validate());
  REQUIRE(fit.arrangement.has_value());
  CHECK(fit.arrangement->k() == 3);
}

TEST_CASE("k=1 matches an independent global interactive-effects fit",
          "[estimator]") {
  Setting1Config cfg;
  auto [data, truth] = gen_setting1(cfg, 202);

  LsscConfig est;
  est.k = 1;
  est.r = 3;
  est.beta_tol = 1e-9;
  const FitResult fit = fit_lssc(data, est);
  const double oracle_q = global_fit_oracle(data, 3, 1e-9, est.max_iter);
  CHECK(fit.objective() == Catch::Approx(oracle_q).epsilon(1e-8));
  CHECK_FALSE(fit.arrangement.has_value());
}

TEST_CASE("steps 4 and 5 never increase the objective", "[estimator]") {
  Setting1Config cfg;
  auto [data, truth] = gen_setting1(cfg, 303);
  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  const FitResult fit = fit_lssc(data, est);
  REQUIRE(fit.refit_trace.size() == fit.objective_trace.size());
  for (std::size_t t = 0; t < fit.objective_trace.size(); ++t)
    CHECK(fit.objective_trace[t] <= fit.refit_trace[t] * (1 + 1e-12) + 1e-9);
}

TEST_CASE("identical inputs and seed reproduce the fit exactly", "[estimator]") {
  Setting1Config cfg;
  auto [data, truth] = gen_setting1(cfg, 404);
  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  est.seed = 99;
  const FitResult a = fit_lssc(data, est);
  const FitResult b = fit_lssc(data, est);
  CHECK(a.structure.membership == b.structure.membership);
  CHECK(a.objective() == b.objective());
  CHECK((a.beta.beta - b.beta.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("permuting units permutes membership and preserves the fit",
          "[estimator]") {
  auto cfg = noiseless_config();
  auto [data, truth] = gen_setting1(cfg, 505);
  const int N = data.N();

  PanelData shuffled = data;
  std::vector<int> perm(N);
  for (int i = 0; i < N; ++i) perm[i] = (i * 7 + 11) % N;  // bijection: gcd(7,N)=1
  for (int i = 0; i < N; ++i) {
    shuffled.Y.col(i) = data.Y.col(perm[i]);
    for (int q = 0; q < data.p(); ++q)
      shuffled.X[q].col(i) = data.X[q].col(perm[i]);
    shuffled.unit_ids[i] = data.unit_ids[perm[i]];
  }

  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  est.beta_tol = 1e-13;
  est.max_iter = 5000;
  const FitResult base = fit_lssc(data, est);
  const FitResult moved = fit_lssc(shuffled, est);
  CHECK((base.beta.beta - moved.beta.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(moved.objective() ==
        Catch::Approx(base.objective()).margin(1e-10).epsilon(1e-10));
  // Membership matches after the permutation, up to label names.
  std::vector<int> mapped(N);
  for (int i = 0; i < N; ++i) mapped[i] = base.structure.membership[perm[i]];
  CHECK(misclassification_rate(moved.structure.membership, mapped, 3) == 0.0);
}

TEST_CASE("restarts return the best objective and stay deterministic",
          "[estimator]") {
  Setting1Config cfg;
  cfg.group_sizes = {40, 40, 40};
  auto [data, truth] = gen_setting1(cfg, 606);
  LsscConfig one;
  one.k = 3;
  one.r = 3;
  one.dims = {1, 1, 1};
  one.seed = 5;
  LsscConfig three = one;
  three.n_starts = 3;
  const FitResult f1 = fit_lssc(data, one);
  const FitResult f3 = fit_lssc(data, three);
  CHECK(f3.objective() <= f1.objective() * (1 + 1e-12));
  const FitResult f3b = fit_lssc(data, three);
  CHECK(f3.objective() == f3b.objective());
}

TEST_CASE("non-convergence is reported, not thrown", "[estimator]") {
  Setting1Config cfg;
  auto [data, truth] = gen_setting1(cfg, 707);
  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  est.max_iter = 1;
  est.beta_tol = 1e-14;
  const FitResult fit = fit_lssc(data, est);
  CHECK_FALSE(fit.converged);
  CHECK(fit.n_iter == 1);
  CHECK(std::isfinite(fit.objective()));
}

TEST_CASE("covariate-free panels fit in a single pass", "[estimator]") {
  Setting1Config cfg;
  cfg.beta = Vector(0);
  cfg.group_sizes = {50, 50, 50};
  auto [data, truth] = gen_setting1(cfg, 909);
  REQUIRE(data.p() == 0);
  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1, 1};
  const FitResult fit = fit_lssc(data, est);
  // With no covariates the loop has a fixed point after one pass.
  CHECK(fit.converged);
  CHECK(fit.n_iter == 1);
  CHECK(fit.beta.p() == 0);
  CHECK(std::isfinite(fit.objective()));
}

TEST_CASE("config validation rejects bad setups", "[estimator]") {
  Setting1Config cfg;
  cfg.group_sizes = {20, 20, 20};
  auto [data, truth] = gen_setting1(cfg, 808);
  LsscConfig est;
  est.k = 3;
  est.r = 3;
  est.dims = {1, 1};  // wrong length
  CHECK_THROWS_AS(fit_lssc(data, est), InvalidInput);
  est.dims = {3, 1, 1};  // d must be < r
  CHECK_THROWS_AS(fit_lssc(data, est), InvalidInput);
  est.dims = {1, 1, 1};
  est.r = 100;
  CHECK_THROWS_AS(fit_lssc(data, est), InvalidInput);
}

TEST_CASE("small-group repair keeps every subspace workable", "[estimator]") {
  Rng rng(17);
  const int N = 12, r = 3;
  Matrix loadings = rng.gaussian_matrix(N, r, 0.0, 1.0);
  SubspaceArrangement arr;
  for (int j = 0; j < 3; ++j) {
    Eigen::HouseholderQR<Matrix> qr(rng.gaussian_matrix(r, 1, 0.0, 1.0));
    arr.bases.push_back({Matrix(qr.householderQ()).rightCols(2), 1});
  }
  std::vector<int> membership(N, 0);  // subspaces 1 and 2 start empty
  lssc::detail::repair_small_groups(membership, 3, loadings, arr);
  std::vector<int> counts(3, 0);
  for (int g : membership) ++counts[g];
  for (int j = 0; j < 3; ++j) CHECK(counts[j] >= 2);
}

TEST_CASE("padded factor fit handles groups smaller than r", "[estimator]") {
  Rng rng(19);
  const int T = 6, r = 3;
  const Matrix block = rng.gaussian_matrix(T, 2, 0.0, 1.0);
  const auto [F, L] = lssc::detail::padded_factor_fit(block, r);
  REQUIRE(F.cols() == r);
  REQUIRE(L.cols() == r);
  CHECK((F.transpose() * F / T - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <
        1e-10);
  // The padded columns carry no loading mass; the fit equals the rank-2 fit.
  const auto [F2, L2] = fit_pure_factor_model(block, 2);
  CHECK((F * L.transpose() - F2 * L2.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

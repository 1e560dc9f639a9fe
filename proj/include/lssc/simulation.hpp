// Seedable data generators for the Monte Carlo settings and the replication
// harness that aggregates bias, RMSE, and misclassification across runs.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lssc/estimator.hpp"
#include "lssc/panel.hpp"
#include "lssc/parallel.hpp"
#include "lssc/rng.hpp"
#include "lssc/subspace.hpp"

namespace lssc {

// Configuration shared by the simulation settings. Gaussian parameters are
// (mean, VARIANCE). An empty beta generates a covariate-free panel (p = 0),
// as used by the dimension-selection experiments.
struct Setting1Config {
  std::vector<int> group_sizes = {100, 100, 100};  // N_j
  int T = 6;
  int r = 3;
  std::vector<int> dims = {1, 1, 1};  // d_1..d_k
  Vector beta = (Vector(2) << 1.0, 2.0).finished();
  double c1 = 0.5;
  double c2 = 0.5;
  double loading_noise_var = 0.1;
  double eps_var = 0.5;

  int k() const { return static_cast<int>(dims.size()); }
  int N() const { return std::accumulate(group_sizes.begin(), group_sizes.end(), 0); }
  int p() const { return static_cast<int>(beta.size()); }

  void validate() const {
    if (group_sizes.size() != dims.size())
      throw InvalidInput("group_sizes and dims must have equal length");
    if (T < r) throw InvalidInput("T must be at least r");
    for (int nj : group_sizes)
      if (nj < 2) throw InvalidInput("each subspace needs at least 2 units");
    for (int d : dims)
      if (d <= 0 || d >= r) throw InvalidInput("dims must satisfy 0 < d_j < r");
    if (loading_noise_var < 0 || eps_var < 0)
      throw InvalidInput("variances must be nonnegative");
  }
};

// Ground truth attached to a generated panel.
struct PanelTruth {
  Vector beta;
  std::vector<Matrix> factors;   // F_j, T x r
  std::vector<Matrix> loadings;  // Lambda_j, N_j x r
  std::vector<int> membership;   // 0-based
  SubspaceArrangement bases;     // true complements of the loading subspaces
};

namespace detail {

struct GeneratedCore {
  std::vector<Matrix> factors;
  std::vector<Matrix> loadings;
  std::vector<int> membership;
  SubspaceArrangement bases;
  Matrix common;      // T x N block matrix (F_1 L_1', ..., F_k L_k')
  Matrix loading_all; // N x r stacked loadings
};

// Draws the factor structure shared by all settings: per-subspace factors
// F_j = sqrt(T) Q_j from QR of a Gaussian matrix (so F_j'F_j/T = I_r), and
// loadings Lambda_j = N(1,1)_{N_j x d_j} alpha_j' + N(0, noise)_{N_j x r}
// with alpha_j a standard Gaussian r x d_j basis draw.
inline GeneratedCore generate_core(const Setting1Config& cfg, Rng& rng) {
  const int k = cfg.k(), r = cfg.r, T = cfg.T, N = cfg.N();
  GeneratedCore core;
  core.common.resize(T, N);
  core.loading_all.resize(N, r);
  int offset = 0;
  for (int j = 0; j < k; ++j) {
    const int nj = cfg.group_sizes[j];
    const int dj = cfg.dims[j];

    const Matrix alpha = rng.gaussian_matrix(r, dj, 0.0, 1.0);
    const Matrix coords = rng.gaussian_matrix(nj, dj, 1.0, 1.0);
    Matrix lam = coords * alpha.transpose();
    if (cfg.loading_noise_var > 0)
      lam += rng.gaussian_matrix(nj, r, 0.0, cfg.loading_noise_var);

    const Matrix raw = rng.gaussian_matrix(T, r, 0.0, 1.0);
    Eigen::HouseholderQR<Matrix> qr(raw);
    Matrix Q = Matrix(qr.householderQ()).leftCols(r);
    // QR sign fix so the draw does not depend on the factorization's sign
    // conventions.
    const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (int c = 0; c < r; ++c)
      if (R(c, c) < 0) Q.col(c) = -Q.col(c);
    const Matrix F = std::sqrt(static_cast<double>(T)) * Q;

    Eigen::HouseholderQR<Matrix> alpha_qr(alpha);
    const Matrix full = alpha_qr.householderQ();
    core.bases.bases.push_back({full.rightCols(r - dj), dj});

    core.common.middleCols(offset, nj) = F * lam.transpose();
    core.loading_all.middleRows(offset, nj) = lam;
    core.factors.push_back(F);
    core.loadings.push_back(lam);
    for (int i = 0; i < nj; ++i) core.membership.push_back(j);
    offset += nj;
  }
  return core;
}

inline PanelData assemble_panel(const Setting1Config& cfg,
                                const std::vector<Matrix>& X,
                                const Matrix& common, Rng& rng) {
  const int T = cfg.T, N = cfg.N();
  PanelData data;
  data.Y = common;
  if (cfg.eps_var > 0)
    data.Y += rng.gaussian_matrix(T, N, 0.0, cfg.eps_var);
  for (std::size_t q = 0; q < X.size(); ++q) data.Y += cfg.beta(q) * X[q];
  data.X = X;
  data.unit_ids.resize(N);
  data.time_ids.resize(T);
  for (int i = 0; i < N; ++i) data.unit_ids[i] = "u" + std::to_string(i + 1);
  for (int t = 0; t < T; ++t) data.time_ids[t] = std::to_string(t + 1);
  return data;
}

inline PanelTruth make_truth(const Setting1Config& cfg, GeneratedCore&& core) {
  PanelTruth truth;
  truth.beta = cfg.beta;
  truth.factors = std::move(core.factors);
  truth.loadings = std::move(core.loadings);
  truth.membership = std::move(core.membership);
  truth.bases = std::move(core.bases);
  return truth;
}

}  // namespace detail

// Setting 1: covariates correlated with both factors and loadings,
//   X_q = mu_q + c_q F Lambda' + tau Lambda' + eta_q,  eta_q ~ N(0,1),
// with mu_q all ones and tau the all-ones T x r matrix.
inline std::pair<PanelData, PanelTruth> gen_setting1(const Setting1Config& cfg,
                                                     std::uint64_t seed) {
  cfg.validate();
  if (cfg.p() != 0 && cfg.p() != 2)
    throw InvalidInput("setting 1 uses p = 2 covariates (or none)");
  Rng rng(seed);
  auto core = detail::generate_core(cfg, rng);
  std::vector<Matrix> X;
  if (cfg.p() == 2) {
    const int T = cfg.T, N = cfg.N();
    const Matrix tau_lam =
        Matrix::Ones(T, cfg.r) * core.loading_all.transpose();
    const double cs[2] = {cfg.c1, cfg.c2};
    for (int q = 0; q < 2; ++q) {
      Matrix xq = Matrix::Ones(T, N) + cs[q] * core.common + tau_lam +
                  rng.gaussian_matrix(T, N, 0.0, 1.0);
      X.push_back(std::move(xq));
    }
  }
  PanelData data = detail::assemble_panel(cfg, X, core.common, rng);
  return {std::move(data), detail::make_truth(cfg, std::move(core))};
}

// Setting 2(a): regressors independent of the factor structure,
// x_it ~ Uniform(-2, 2); everything else as Setting 1.
inline std::pair<PanelData, PanelTruth> gen_setting2a(const Setting1Config& cfg,
                                                      std::uint64_t seed) {
  cfg.validate();
  if (cfg.p() != 2) throw InvalidInput("setting 2(a) uses p = 2 covariates");
  Rng rng(seed);
  auto core = detail::generate_core(cfg, rng);
  std::vector<Matrix> X;
  for (int q = 0; q < 2; ++q)
    X.push_back(rng.uniform_matrix(cfg.T, cfg.N(), -2.0, 2.0));
  PanelData data = detail::assemble_panel(cfg, X, core.common, rng);
  return {std::move(data), detail::make_truth(cfg, std::move(core))};
}

// Setting 2(b): regressors correlated with the loadings through
// X_q = rho tau Lambda' + eta_q with eta_q ~ Uniform(-2, 2); rho = 0 reduces
// to Setting 2(a) distributionally.
inline std::pair<PanelData, PanelTruth> gen_setting2b(const Setting1Config& cfg,
                                                      double rho,
                                                      std::uint64_t seed) {
  cfg.validate();
  if (cfg.p() != 2) throw InvalidInput("setting 2(b) uses p = 2 covariates");
  if (rho < 0 || rho > 1) throw InvalidInput("rho must be in [0, 1]");
  Rng rng(seed);
  auto core = detail::generate_core(cfg, rng);
  const Matrix tau_lam = Matrix::Ones(cfg.T, cfg.r) * core.loading_all.transpose();
  std::vector<Matrix> X;
  for (int q = 0; q < 2; ++q)
    X.push_back(rho * tau_lam +
                rng.uniform_matrix(cfg.T, cfg.N(), -2.0, 2.0));
  PanelData data = detail::assemble_panel(cfg, X, core.common, rng);
  return {std::move(data), detail::make_truth(cfg, std::move(core))};
}

// Minimum mismatch rate over all k! relabelings of the estimate.
inline double misclassification_rate(const std::vector<int>& g_hat,
                                     const std::vector<int>& g_true, int k) {
  if (g_hat.size() != g_true.size())
    throw InvalidInput("membership vectors differ in length");
  if (k < 1 || k > 8)
    throw InvalidInput("misclassification_rate supports 1 <= k <= 8");
  const int N = static_cast<int>(g_hat.size());
  for (int i = 0; i < N; ++i)
    if (g_hat[i] < 0 || g_hat[i] >= k || g_true[i] < 0 || g_true[i] >= k)
      throw InvalidInput("membership label out of range");

  // Count agreement per (estimated, true) label pair once, then search
  // permutations on the k x k table.
  std::vector<int> table(static_cast<std::size_t>(k) * k, 0);
  for (int i = 0; i < N; ++i) ++table[g_hat[i] * k + g_true[i]];
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  int best_match = -1;
  do {
    int match = 0;
    for (int a = 0; a < k; ++a) match += table[a * k + perm[a]];
    best_match = std::max(best_match, match);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(N - best_match) / N;
}

struct ReplicationDiagnostics {
  double q = std::numeric_limits<double>::quiet_NaN();
  int n_iter = 0;
  bool converged = false;
  Vector beta_error;
  double misclass = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

struct ReplicationReport {
  Vector bias;           // |mean(beta_hat - beta0)| per parameter
  Vector rmse;           // sqrt(mean squared error) per parameter
  double mean_misclass = 0.0;
  int n_reps = 0;
  int n_failed = 0;
  std::vector<ReplicationDiagnostics> reps;
};

using PanelGenerator =
    std::function<std::pair<PanelData, PanelTruth>(std::uint64_t seed)>;

// Runs n_reps independent replications (substreams of the master seed),
// fitting each generated panel and aggregating errors against the truth.
// Replications that throw are excluded from the aggregates and counted.
inline ReplicationReport run_replications(const PanelGenerator& generate,
                                          const LsscConfig& estimator_cfg,
                                          int n_reps, std::uint64_t seed,
                                          int threads = 0) {
  if (n_reps < 1) throw InvalidInput("n_reps must be >= 1");
  ReplicationReport report;
  report.reps.resize(n_reps);
  report.n_reps = n_reps;

  parallel_for(n_reps, threads, [&](int rep) {
    auto& diag = report.reps[rep];
    try {
      const std::uint64_t rep_seed =
          Rng::derive(seed, static_cast<std::uint64_t>(rep));
      auto [data, truth] = generate(rep_seed);
      LsscConfig cfg = estimator_cfg;
      cfg.seed = Rng::derive(rep_seed, 0xf17ULL);
      const FitResult fit = fit_lssc(data, cfg);
      diag.q = fit.objective();
      diag.n_iter = fit.n_iter;
      diag.converged = fit.converged;
      diag.beta_error = fit.beta.beta - truth.beta;
      const int k = static_cast<int>(truth.factors.size());
      diag.misclass =
          misclassification_rate(fit.structure.membership, truth.membership, k);
    } catch (const std::exception& e) {
      diag.failed = true;
      diag.error = e.what();
    }
  });

  int p = -1;
  for (const auto& d : report.reps)
    if (!d.failed) {
      p = static_cast<int>(d.beta_error.size());
      break;
    }
  if (p < 0)
    throw EstimationError("all replications failed; first error: " +
                          report.reps.front().error);

  Vector err_sum = Vector::Zero(p), err_sq = Vector::Zero(p);
  double mis_sum = 0.0;
  int ok = 0;
  for (const auto& d : report.reps) {
    if (d.failed) {
      ++report.n_failed;
      continue;
    }
    err_sum += d.beta_error;
    err_sq += d.beta_error.cwiseProduct(d.beta_error);
    mis_sum += d.misclass;
    ++ok;
  }
  report.bias = (err_sum / ok).cwiseAbs();
  report.rmse = (err_sq / ok).cwiseSqrt();
  report.mean_misclass = ok > 0 ? mis_sum / ok : 0.0;
  return report;
}

}  // namespace lssc

// Model selection: number of subspaces via low-rank representation and the
// normalized-Laplacian singular value count, number of factors via a
// regularized singular-value criterion, and subspace dimensions via a
// penalized sum-of-squared-residuals search over candidate tuples.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lssc/estimator.hpp"
#include "lssc/panel.hpp"
#include "lssc/rng.hpp"

namespace lssc {

struct AdmmConfig {
  double mu0 = 1e-6;
  double rho = 1.1;
  double mu_max = 1e10;
  double tol = 1e-8;
  int max_iter = 1000;
};

struct LrrConfig {
  double lambda_lrr = 0.1;  // nuclear norm vs column-sparse error trade-off
  double tau_cut = 0.1;     // Laplacian singular value cut-off, in (0, 1)
  AdmmConfig admm;

  void validate() const {
    if (tau_cut <= 0 || tau_cut >= 1) throw InvalidInput("tau_cut must be in (0,1)");
    if (lambda_lrr <= 0 || admm.mu0 <= 0 || admm.rho <= 1 || admm.tol <= 0 ||
        admm.max_iter < 1)
      throw InvalidInput("invalid LRR solver parameters");
  }
};

namespace detail {

// Singular value soft-thresholding.
inline Matrix svt(const Matrix& A, double threshold) {
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i)
    s(i) = std::max(s(i) - threshold, 0.0);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

// Column-wise 2,1-norm proximal operator.
inline Matrix column_shrink(const Matrix& A, double threshold) {
  Matrix out = A;
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    const double norm = A.col(j).norm();
    if (norm > threshold)
      out.col(j) *= (norm - threshold) / norm;
    else
      out.col(j).setZero();
  }
  return out;
}

}  // namespace detail

// Low-rank representation affinity: solves
//   min ||Z||_* + lambda ||E||_{2,1}  s.t.  data = data Z + E
// by inexact augmented-Lagrangian iteration and returns the symmetric
// affinity W = (|Z| + |Z'|)/2 with a zero diagonal.
inline Matrix lrr_affinity(const Matrix& data, const LrrConfig& cfg) {
  cfg.validate();
  if (data.cwiseAbs().maxCoeff() <= 0) throw InvalidInput("LRR needs nonzero data");
  const int N = static_cast<int>(data.cols());

  const Matrix xtx = data.transpose() * data;
  const Eigen::LLT<Matrix> solver(Matrix::Identity(N, N) + xtx);

  Matrix Z = Matrix::Zero(N, N), J = Matrix::Zero(N, N);
  Matrix E = Matrix::Zero(data.rows(), N);
  Matrix Y1 = Matrix::Zero(data.rows(), N), Y2 = Matrix::Zero(N, N);
  double mu = cfg.admm.mu0;

  double primal = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.admm.max_iter; ++it) {
    J = detail::svt(Z + Y2 / mu, 1.0 / mu);
    Z = solver.solve(xtx - data.transpose() * E + J +
                     (data.transpose() * Y1 - Y2) / mu);
    E = detail::column_shrink(data - data * Z + Y1 / mu, cfg.lambda_lrr / mu);

    const Matrix R1 = data - data * Z - E;
    const Matrix R2 = Z - J;
    primal = R1.cwiseAbs().maxCoeff();
    const double dual = R2.cwiseAbs().maxCoeff();
    if (primal < cfg.admm.tol && dual < cfg.admm.tol) {
      Matrix W = 0.5 * (Z.cwiseAbs() + Z.transpose().cwiseAbs());
      W.diagonal().setZero();
      return W;
    }
    Y1 += mu * R1;
    Y2 += mu * R2;
    mu = std::min(cfg.admm.rho * mu, cfg.admm.mu_max);
  }
  throw EstimationError("LRR solver did not converge; primal residual " +
                        std::to_string(primal));
}

// Normalized graph Laplacian L = I - D^{-1/2} W D^{-1/2}; vertices with zero
// degree keep identity rows.
inline Matrix normalized_laplacian(const Matrix& W) {
  if (W.rows() != W.cols()) throw InvalidInput("affinity must be square");
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1 + W.cwiseAbs().maxCoeff()))
    throw InvalidInput("affinity must be symmetric");
  if (W.minCoeff() < 0) throw InvalidInput("affinity must be nonnegative");
  const int N = static_cast<int>(W.rows());
  Vector dinv_sqrt(N);
  for (int i = 0; i < N; ++i) {
    const double deg = W.row(i).sum();
    dinv_sqrt(i) = deg > 0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Matrix L = Matrix::Identity(N, N) -
             dinv_sqrt.asDiagonal() * W * dinv_sqrt.asDiagonal();
  return L;
}

// Cut-off count function: 1 above the threshold, log2(1 + sigma^2/tau^2)
// below; both branches agree at sigma = tau.
inline double f_tau(double sigma, double tau) {
  if (sigma >= tau) return 1.0;
  return std::log2(1.0 + (sigma * sigma) / (tau * tau));
}

// Number of subspaces: fit the clustering-free interactive-effects model,
// run LRR on the residual factor data y - x'beta, and count near-null
// singular values of the normalized Laplacian as
// k_hat = N - int[ sum f_tau(sigma_i) ].
inline int estimate_num_subspaces(const PanelData& data, int r,
                                  const LrrConfig& cfg) {
  data.validate();
  Matrix residual = data.Y;
  if (data.p() > 0) {
    LsscConfig single;
    single.k = 1;
    single.r = r;
    const FitResult fit = fit_lssc(data, single);
    for (int q = 0; q < data.p(); ++q) residual -= fit.beta.beta(q) * data.X[q];
  }
  const Matrix W = lrr_affinity(residual, cfg);
  const Matrix L = normalized_laplacian(W);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L);
  double count = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    count += f_tau(std::abs(eig.eigenvalues()(i)), cfg.tau_cut);
  const int k_hat = data.N() - static_cast<int>(std::llround(count));
  return std::max(k_hat, 1);
}

// Scaled singular values used by the factor-count criterion: the spectrum of
// Y/sqrt(NT) after normalizing the panel to unit mean square, so the squared
// values sum to one and the threshold gamma lives on a fixed scale.
inline Vector scaled_singular_values(const Matrix& Y) {
  const double rms = Y.norm();  // = sqrt(NT) * RMS entry
  if (rms <= 0) return Vector::Zero(std::min(Y.rows(), Y.cols()));
  Eigen::BDCSVD<Matrix> svd(Y / rms);
  return svd.singularValues();
}

// Threshold calibration for the factor-count criterion: the median scaled
// singular value of a pure-noise panel of the same shape, averaged over a
// fixed number of seeded draws.
inline double default_gamma(int T, int N, std::uint64_t seed = 20240101,
                            int draws = 20) {
  double total = 0.0;
  for (int d = 0; d < draws; ++d) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(d)));
    const Matrix noise = rng.gaussian_matrix(T, N, 0.0, 1.0);
    Vector s = scaled_singular_values(noise);
    std::vector<double> v(s.data(), s.data() + s.size());
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    total += v[v.size() / 2];
  }
  return total / draws;
}

// Number of factors over r in [0, rmax]:
//   argmin log[ 1 - sum_{j<=r} (D_jj - gamma)^2 ] + r g(N,T),
// g(N,T) = (N+T)/(NT) log(NT/(N+T)). Candidates whose log argument is not
// positive are excluded; ties resolve to the smaller r.
inline int estimate_num_factors(const PanelData& data, int rmax, double gamma) {
  data.validate();
  const int T = data.T(), N = data.N();
  if (rmax < 0 || rmax > std::min(T, N))
    throw InvalidInput("rmax must satisfy 0 <= rmax <= min(T, N)");
  if (gamma < 0 || gamma >= 1) throw InvalidInput("gamma must be in [0, 1)");
  const Vector D = scaled_singular_values(data.Y);
  const double nt = static_cast<double>(N) * T;
  const double g = (N + T) / nt * std::log(nt / (N + T));

  int best_r = 0;
  double best_val = std::numeric_limits<double>::infinity();
  double cum = 0.0;
  for (int r = 0; r <= rmax; ++r) {
    if (r > 0) {
      const double dev = D(r - 1) - gamma;
      cum += dev * dev;
    }
    const double arg = 1.0 - cum;
    if (arg <= 0) continue;
    const double val = std::log(arg) + r * g;
    if (val < best_val) {
      best_val = val;
      best_r = r;
    }
  }
  if (!std::isfinite(best_val))
    throw EstimationError("factor-count criterion undefined for all candidates");
  return best_r;
}

struct DimSelectionConfig {
  // SSR feasibility cut; when unset, the per-candidate default
  // 10 (d_1^3 + ... + d_{k-1}^3) / min(N, T) applies.
  std::optional<double> tolerance_tau;
  // Noise variance scale in the penalty; when unset, the SSR of the
  // full-dimension fit (all d_j = r - 1) is used.
  std::optional<double> sigma2_hat;
  LsscConfig base;  // iteration/seed/tolerance settings for candidate fits
};

struct DimCandidate {
  std::vector<int> dims;
  double ssr = std::numeric_limits<double>::quiet_NaN();
  double penalty = std::numeric_limits<double>::quiet_NaN();
  double criterion = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  bool feasible = false;
  bool fit_failed = false;
  std::string error;
};

struct DimSelectionResult {
  std::vector<int> dims;
  double sigma2_hat = 0.0;
  std::vector<DimCandidate> candidates;
};

namespace detail {

inline void enumerate_dim_tuples(int k, int r, std::vector<int>& prefix,
                                 std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == k) {
    out.push_back(prefix);
    return;
  }
  const int hi = prefix.empty() ? r - 1 : prefix.back();
  for (int d = hi; d >= 1; --d) {
    prefix.push_back(d);
    enumerate_dim_tuples(k, r, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace detail

// Selects subspace dimensions by enumerating non-increasing candidate tuples
// (labels are exchangeable), fitting each, and minimizing
//   SSR + sigma2 * sum_j d_j^2 (T + N_j)/(NT) log(T N_j)
// over candidates with SSR below the error tolerance.
inline DimSelectionResult select_dims(const PanelData& data, int k, int r,
                                      const DimSelectionConfig& cfg) {
  data.validate();
  if (k < 1 || r < 2) throw InvalidInput("select_dims needs k >= 1 and r >= 2");
  const double T = data.T(), N = data.N();
  const double nt = T * N;

  std::vector<std::vector<int>> tuples;
  std::vector<int> prefix;
  detail::enumerate_dim_tuples(k, r, prefix, tuples);

  LsscConfig fit_cfg = cfg.base;
  fit_cfg.k = k;
  fit_cfg.r = r;

  // Fit every candidate; the full-dimension tuple (the first one) supplies
  // the noise scale when none is given.
  std::vector<DimCandidate> cands(tuples.size());
  std::vector<FitResult> fits(tuples.size());
  for (std::size_t c = 0; c < tuples.size(); ++c) {
    cands[c].dims = tuples[c];
    LsscConfig cand_cfg = fit_cfg;
    cand_cfg.dims = tuples[c];
    cand_cfg.seed = Rng::derive(fit_cfg.seed, static_cast<std::uint64_t>(c));
    try {
      fits[c] = fit_lssc(data, cand_cfg);
      cands[c].ssr = fits[c].objective() / nt;
    } catch (const std::exception& e) {
      cands[c].fit_failed = true;
      cands[c].error = e.what();
    }
  }

  double sigma2;
  if (cfg.sigma2_hat) {
    sigma2 = *cfg.sigma2_hat;
  } else {
    if (cands.front().fit_failed)
      throw EstimationError("full-dimension fit failed: " + cands.front().error);
    sigma2 = cands.front().ssr;
  }

  double min_ssr = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t c = 0; c < tuples.size(); ++c) {
    auto& cand = cands[c];
    if (cand.fit_failed) continue;
    double tau;
    if (cfg.tolerance_tau) {
      tau = *cfg.tolerance_tau;
    } else {
      double cubes = 0.0;
      for (int j = 0; j + 1 < k; ++j) cubes += std::pow(cand.dims[j], 3);
      tau = 10.0 * cubes / std::min(T, N);
    }
    cand.tau = tau;
    min_ssr = std::min(min_ssr, cand.ssr);

    std::vector<int> group_sizes(k, 0);
    for (int g : fits[c].structure.membership) ++group_sizes[g];
    double penalty = 0.0;
    for (int j = 0; j < k; ++j) {
      const double nj = group_sizes[j];
      penalty += cand.dims[j] * cand.dims[j] * (T + nj) / nt * std::log(T * nj);
    }
    cand.penalty = sigma2 * penalty;
    cand.criterion = cand.ssr + cand.penalty;
    cand.feasible = cand.ssr < tau;
    if (cand.feasible &&
        (best < 0 || cand.criterion < cands[best].criterion)) {
      best = static_cast<int>(c);
    }
  }

  if (best < 0)
    throw InfeasibleTolerance(
        "no candidate dimension tuple meets the SSR tolerance (min SSR " +
            std::to_string(min_ssr) + ")",
        min_ssr);

  DimSelectionResult result;
  result.dims = cands[best].dims;
  result.sigma2_hat = sigma2;
  result.candidates = std::move(cands);
  return result;
}

}  // namespace lssc

// Balanced-panel data model and the least-squares building blocks of the
// estimator: pooled OLS, the pure factor model (principal components), the
// beta update given a factor structure, and the least-squares objective.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lssc/base.hpp"

namespace lssc {

// Balanced panel: Y is T x N (rows = periods, columns = units) and X holds
// one T x N slice per covariate.
struct PanelData {
  Matrix Y;
  std::vector<Matrix> X;
  std::vector<std::string> unit_ids;
  std::vector<std::string> time_ids;

  int T() const { return static_cast<int>(Y.rows()); }
  int N() const { return static_cast<int>(Y.cols()); }
  int p() const { return static_cast<int>(X.size()); }

  void validate() const {
    if (T() < 2) throw InvalidInput("panel needs T >= 2");
    if (N() < 1) throw InvalidInput("panel needs N >= 1");
    if (!all_finite(Y)) throw InvalidInput("panel outcome has non-finite entries");
    for (const auto& slice : X) {
      if (slice.rows() != Y.rows() || slice.cols() != Y.cols())
        throw InvalidInput("covariate slice dimensions do not match outcome");
      if (!all_finite(slice))
        throw InvalidInput("covariate has non-finite entries");
    }
    if (static_cast<int>(unit_ids.size()) != N() ||
        static_cast<int>(time_ids.size()) != T())
      throw InvalidInput("label counts do not match panel dimensions");
  }

  // T-major stack of the covariates for unit i: rows t = x_it'.
  Matrix unit_regressors(int i) const {
    Matrix xi(T(), p());
    for (int q = 0; q < p(); ++q) xi.col(q) = X[q].col(i);
    return xi;
  }
};

struct RegressionCoefficients {
  Vector beta;
  int p() const { return static_cast<int>(beta.size()); }
};

// Per-subspace factor matrices F_j (T x r, F_j'F_j/T = I_r), loading
// matrices Lambda_j (N_j x r), and the unit-to-subspace membership.
// Loadings of subspace j are ordered by increasing unit index.
struct FactorStructure {
  std::vector<Matrix> factors;
  std::vector<Matrix> loadings;
  std::vector<int> membership;  // 0-based subspace index per unit

  int k() const { return static_cast<int>(factors.size()); }
  int n_units() const { return static_cast<int>(membership.size()); }

  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> g(k());
    for (int i = 0; i < n_units(); ++i) g[membership[i]].push_back(i);
    return g;
  }

  // T x N matrix whose column i is F_{g_i} lambda_{g_i,i}.
  Matrix common_component(int T, int N) const {
    Matrix C = Matrix::Zero(T, N);
    std::vector<int> row_in_group(k(), 0);
    for (int i = 0; i < N; ++i) {
      const int j = membership[i];
      C.col(i) = factors[j] * loadings[j].row(row_in_group[j]).transpose();
      ++row_in_group[j];
    }
    return C;
  }

  void validate(double tol = 1e-8) const {
    if (factors.size() != loadings.size())
      throw InvalidInput("factor/loading list size mismatch");
    std::vector<int> counts(k(), 0);
    for (int g : membership) {
      if (g < 0 || g >= k()) throw InvalidInput("membership label out of range");
      ++counts[g];
    }
    for (int j = 0; j < k(); ++j) {
      if (counts[j] < 1) throw InvalidInput("empty subspace in factor structure");
      if (loadings[j].rows() != counts[j])
        throw InvalidInput("loading rows do not match subspace size");
      const auto& F = factors[j];
      const double T = static_cast<double>(F.rows());
      const Matrix gram = F.transpose() * F / T;
      const double dev =
          (gram - Matrix::Identity(F.cols(), F.cols())).cwiseAbs().maxCoeff();
      if (dev > tol) throw InvalidInput("F'F/T deviates from identity");
      const Matrix ll = loadings[j].transpose() * loadings[j];
      const double diag_max = ll.diagonal().cwiseAbs().maxCoeff();
      double off = 0.0;
      for (int a = 0; a < ll.rows(); ++a)
        for (int b = 0; b < ll.cols(); ++b)
          if (a != b) off = std::max(off, std::abs(ll(a, b)));
      if (diag_max > 0 && off > tol * diag_max)
        throw InvalidInput("Lambda'Lambda is not diagonal");
    }
  }
};

struct PanelRow {
  std::string unit;
  std::string time;
  double y = 0.0;
  std::vector<double> x;
};

namespace detail {

// Labels sort numerically when every label parses as a number, otherwise
// lexicographically.
inline std::vector<std::string> sorted_labels(
    const std::vector<std::string>& raw) {
  std::vector<std::string> labels(raw);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  bool numeric = true;
  std::vector<double> values(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    try {
      std::size_t pos = 0;
      values[i] = std::stod(labels[i], &pos);
      if (pos != labels[i].size()) numeric = false;
    } catch (...) {
      numeric = false;
    }
    if (!numeric) break;
  }
  if (numeric) {
    std::vector<std::size_t> order(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] != values[b] ? values[a] < values[b]
                                    : labels[a] < labels[b];
    });
    std::vector<std::string> out(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) out[i] = labels[order[i]];
    return out;
  }
  return labels;
}

}  // namespace detail

// Assembles a balanced panel from long-format rows. Rejects duplicate cells,
// incomplete unit-by-time grids, and non-finite values; the resulting layout
// is deterministic (units sorted by label, times ascending).
inline PanelData load_panel(const std::vector<PanelRow>& rows) {
  if (rows.empty()) throw InvalidInput("no rows");
  const std::size_t p = rows.front().x.size();
  std::vector<std::string> units_raw, times_raw;
  units_raw.reserve(rows.size());
  times_raw.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.x.size() != p)
      throw InvalidInput("inconsistent covariate count at unit " + r.unit +
                         ", time " + r.time);
    units_raw.push_back(r.unit);
    times_raw.push_back(r.time);
  }
  const auto units = detail::sorted_labels(units_raw);
  const auto times = detail::sorted_labels(times_raw);
  const int N = static_cast<int>(units.size());
  const int T = static_cast<int>(times.size());

  std::map<std::string, int> unit_idx, time_idx;
  for (int i = 0; i < N; ++i) unit_idx[units[i]] = i;
  for (int t = 0; t < T; ++t) time_idx[times[t]] = t;

  PanelData data;
  data.Y = Matrix::Constant(T, N, std::numeric_limits<double>::quiet_NaN());
  data.X.assign(p, Matrix::Zero(T, N));
  std::vector<bool> seen(static_cast<std::size_t>(T) * N, false);
  for (const auto& r : rows) {
    const int i = unit_idx.at(r.unit);
    const int t = time_idx.at(r.time);
    const std::size_t cell = static_cast<std::size_t>(t) * N + i;
    if (seen[cell])
      throw InvalidInput("duplicate cell (" + r.unit + ", " + r.time + ")");
    seen[cell] = true;
    if (!std::isfinite(r.y))
      throw InvalidInput("non-finite outcome at (" + r.unit + ", " + r.time + ")");
    data.Y(t, i) = r.y;
    for (std::size_t q = 0; q < p; ++q) {
      if (!std::isfinite(r.x[q]))
        throw InvalidInput("non-finite covariate x" + std::to_string(q + 1) +
                           " at (" + r.unit + ", " + r.time + ")");
      data.X[q](t, i) = r.x[q];
    }
  }
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < N; ++i)
      if (!seen[static_cast<std::size_t>(t) * N + i])
        throw InvalidInput("unbalanced panel: missing (" + units[i] + ", " +
                           times[t] + ")");
  data.unit_ids = units;
  data.time_ids = times;
  data.validate();
  return data;
}

namespace detail {

// Rank-revealing least squares for the stacked panel regression. Throws when
// the regressors are rank deficient, naming the dependent column set.
inline Vector solve_stacked_ls(const Matrix& A, const Vector& b,
                               double rank_tol = 1e-12) {
  if (A.cols() == 0) return Vector(0);
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(rank_tol);
  if (qr.rank() < A.cols()) {
    const auto perm = qr.colsPermutation().indices();
    std::ostringstream oss;
    oss << "rank-deficient regressors; dependent columns {";
    for (int q = qr.rank(); q < A.cols(); ++q)
      oss << (q > qr.rank() ? "," : "") << "x" << perm[q] + 1;
    oss << "}";
    throw EstimationError(oss.str());
  }
  return qr.solve(b);
}

inline Matrix stacked_regressors(const PanelData& data) {
  const int T = data.T(), N = data.N(), p = data.p();
  Matrix A(static_cast<Eigen::Index>(T) * N, p);
  for (int q = 0; q < p; ++q)
    A.col(q) = data.X[q].reshaped();  // column-major: unit-major blocks
  return A;
}

// Deterministic orthonormal completion of the columns of U (assumed
// orthonormal) up to `total` columns, drawing from coordinate vectors.
inline Matrix orthonormal_completion(const Matrix& U, int total) {
  const int n = static_cast<int>(U.rows());
  Matrix out(n, total);
  int have = static_cast<int>(U.cols());
  out.leftCols(have) = U;
  for (int e = 0; e < n && have < total; ++e) {
    Vector w = Vector::Zero(n);
    w(e) = 1.0;
    w -= out.leftCols(have) * (out.leftCols(have).transpose() * w);
    const double nw = w.norm();
    if (nw > 0.5) {
      out.col(have) = w / nw;
      ++have;
    }
  }
  if (have < total)
    throw EstimationError("orthonormal completion failed");
  return out;
}

}  // namespace detail

// Step-1 initial value: pooled OLS of y_it on x_it ignoring any factor
// structure. p = 0 yields an empty coefficient vector.
inline RegressionCoefficients ols_ignore_factors(const PanelData& data) {
  if (data.p() == 0) return {Vector(0)};
  const Matrix A = detail::stacked_regressors(data);
  const Vector b = data.Y.reshaped();
  return {detail::solve_stacked_ls(A, b)};
}

// Pure factor model by principal components: F = sqrt(T) x top-r left
// singular vectors of ystar, Lambda = ystar'F/T. Columns of F are sign-fixed
// so the largest-magnitude entry is positive (first index on ties), making
// the output reproducible; F Lambda' is the best rank-r approximation.
inline std::pair<Matrix, Matrix> fit_pure_factor_model(const Matrix& ystar,
                                                       int r) {
  const int T = static_cast<int>(ystar.rows());
  const int N = static_cast<int>(ystar.cols());
  if (r < 1 || r > std::min(T, N))
    throw InvalidInput("factor count r must satisfy 1 <= r <= min(T, N)");

  Matrix U(T, r);
  if (T <= N) {
    const Matrix gram = ystar * ystar.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    for (int j = 0; j < r; ++j) U.col(j) = eig.eigenvectors().col(T - 1 - j);
  } else {
    const Matrix gram = ystar.transpose() * ystar;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const double max_eval = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double sigma_max = std::sqrt(max_eval);
    int have = 0;
    Matrix U_known(T, r);
    for (int j = 0; j < r; ++j) {
      const double eval = eig.eigenvalues()(N - 1 - j);
      const double sigma = eval > 0 ? std::sqrt(eval) : 0.0;
      if (sigma > 1e-7 * sigma_max && sigma > 0) {
        U_known.col(have++) = ystar * eig.eigenvectors().col(N - 1 - j) / sigma;
      }
    }
    U = detail::orthonormal_completion(U_known.leftCols(have), r);
  }

  // Sign convention: largest-magnitude entry of each column positive.
  for (int j = 0; j < r; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int t = 0; t < T; ++t) {
      const double a = std::abs(U(t, j));
      if (a > best) {
        best = a;
        arg = t;
      }
    }
    if (U(arg, j) < 0) U.col(j) = -U.col(j);
  }

  const Matrix F = std::sqrt(static_cast<double>(T)) * U;
  const Matrix Lambda = ystar.transpose() * F / static_cast<double>(T);
  return {F, Lambda};
}

// Step-5 beta update: least squares of y_i - F_{g_i} lambda_{g_i,i} on x_i
// jointly over all units.
inline RegressionCoefficients update_beta(const PanelData& data,
                                          const FactorStructure& fs) {
  if (data.p() == 0) return {Vector(0)};
  if (fs.n_units() != data.N())
    throw InvalidInput("factor structure does not match panel width");
  const Matrix resid = data.Y - fs.common_component(data.T(), data.N());
  const Matrix A = detail::stacked_regressors(data);
  const Vector b = resid.reshaped();
  return {detail::solve_stacked_ls(A, b)};
}

// Q(beta, F, Lambda, G) = sum_i || y_i - x_i'beta - F_{g_i} lambda_{g_i,i} ||^2.
inline double objective_q(const PanelData& data, const Vector& beta,
                          const FactorStructure& fs) {
  if (static_cast<int>(beta.size()) != data.p())
    throw InvalidInput("beta length does not match covariate count");
  if (fs.n_units() != data.N())
    throw InvalidInput("factor structure does not match panel width");
  Matrix resid = data.Y - fs.common_component(data.T(), data.N());
  for (int q = 0; q < data.p(); ++q) resid -= beta(q) * data.X[q];
  return resid.squaredNorm();
}

}  // namespace lssc

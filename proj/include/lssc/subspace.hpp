// Algebraic subspace clustering for factor loadings: Veronese embedding,
// vanishing-polynomial estimation, gradient-based normal voting, point
// assignment, and the subspace metrics used by the clustering consistency
// analysis (symmetric distance, angle deviation, Hausdorff distance,
// within-cluster objective).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "lssc/base.hpp"
#include "lssc/rng.hpp"

namespace lssc {

// A subspace S of dimension d in R^r, represented by an orthonormal basis B
// of its orthogonal complement (r x (r-d)); S = null(B').
struct SubspaceBasis {
  Matrix complement;
  int dim = 0;

  int ambient() const { return static_cast<int>(complement.rows()); }
  int codim() const { return static_cast<int>(complement.cols()); }

  // Orthonormal basis of S itself (r x d), via full QR of the complement.
  Matrix span_basis() const {
    const int r = ambient();
    Eigen::HouseholderQR<Matrix> qr(complement);
    const Matrix Q = qr.householderQ();
    return Q.rightCols(r - codim());
  }

  void validate(double tol = 1e-10) const {
    if (dim <= 0 || dim >= ambient())
      throw InvalidInput("subspace dimension must satisfy 0 < d < r");
    if (codim() != ambient() - dim)
      throw InvalidInput("complement width does not match codimension");
    const Matrix gram = complement.transpose() * complement;
    const double dev =
        (gram - Matrix::Identity(codim(), codim())).cwiseAbs().maxCoeff();
    if (dev > tol) throw InvalidInput("complement basis is not orthonormal");
  }
};

struct SubspaceArrangement {
  std::vector<SubspaceBasis> bases;

  int k() const { return static_cast<int>(bases.size()); }
  int ambient() const { return bases.empty() ? 0 : bases.front().ambient(); }
  std::vector<int> dims() const {
    std::vector<int> d(bases.size());
    for (std::size_t j = 0; j < bases.size(); ++j) d[j] = bases[j].dim;
    return d;
  }
};

// Coefficients of homogeneous degree-k polynomials vanishing on the data;
// columns are orthonormal coefficient vectors in monomial coordinates.
struct VanishingPolynomialSet {
  int degree = 0;
  Matrix coeffs;  // M_k(r) x m

  int embed_dim() const { return static_cast<int>(coeffs.rows()); }
  int count() const { return static_cast<int>(coeffs.cols()); }
};

// M_k(r) = C(k+r-1, r-1), the number of degree-k monomials in r variables.
inline long veronese_dim(int k, int r) {
  if (k < 1 || r < 1) throw InvalidInput("veronese_dim needs k >= 1, r >= 1");
  long result = 1;
  for (int i = 1; i <= r - 1; ++i)
    result = result * (k + i) / i;  // exact: product of consecutive ratios
  return result;
}

namespace detail {

// Exponent tuples (k_1..k_r) with sum k, in descending lexicographic order:
// for r=2, k=2 the order is (2,0), (1,1), (0,2).
inline void enumerate_exponents(int k, int r, std::vector<int>& prefix,
                                std::vector<std::vector<int>>& out) {
  if (static_cast<int>(prefix.size()) == r - 1) {
    prefix.push_back(k);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int e = k; e >= 0; --e) {
    prefix.push_back(e);
    enumerate_exponents(k - e, r, prefix, out);
    prefix.pop_back();
  }
}

inline std::vector<std::vector<int>> veronese_exponents(int k, int r) {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  out.reserve(static_cast<std::size_t>(veronese_dim(k, r)));
  enumerate_exponents(k, r, prefix, out);
  return out;
}

// Precomputed monomial machinery for one (k, r): the exponent tuples, the
// degree-(k-1) tuples, and for every monomial/variable pair the index of the
// reduced monomial, so gradients evaluate off a shared v_{k-1} vector.
struct VeroneseTable {
  int degree = 0;
  int r = 0;
  std::vector<std::vector<int>> exps;
  std::vector<std::vector<int>> exps_lower;  // degree k-1 (empty for k == 1)
  std::vector<std::vector<int>> reduce;      // [monomial][var] -> lower index

  VeroneseTable(int k_, int r_) : degree(k_), r(r_) {
    exps = veronese_exponents(degree, r);
    if (degree > 1) exps_lower = veronese_exponents(degree - 1, r);
    reduce.assign(exps.size(), std::vector<int>(r, -1));
    for (std::size_t m = 0; m < exps.size(); ++m) {
      for (int s = 0; s < r; ++s) {
        if (exps[m][s] == 0) continue;
        if (degree == 1) {
          reduce[m][s] = 0;  // v_0 = (1)
          continue;
        }
        std::vector<int> e = exps[m];
        --e[s];
        const auto it =
            std::lower_bound(exps_lower.begin(), exps_lower.end(), e,
                             [](const std::vector<int>& a,
                                const std::vector<int>& b) { return a > b; });
        reduce[m][s] = static_cast<int>(it - exps_lower.begin());
      }
    }
  }

  Eigen::Index size() const {
    return static_cast<Eigen::Index>(exps.size());
  }

  Vector embed(const Vector& lambda) const {
    Vector v(size());
    for (std::size_t m = 0; m < exps.size(); ++m) {
      double prod = 1.0;
      for (int s = 0; s < r; ++s)
        for (int e = 0; e < exps[m][s]; ++e) prod *= lambda(s);
      v(static_cast<Eigen::Index>(m)) = prod;
    }
    return v;
  }

  Vector embed_lower(const Vector& lambda) const {
    if (degree == 1) return Vector::Ones(1);
    Vector v(static_cast<Eigen::Index>(exps_lower.size()));
    for (std::size_t m = 0; m < exps_lower.size(); ++m) {
      double prod = 1.0;
      for (int s = 0; s < r; ++s)
        for (int e = 0; e < exps_lower[m][s]; ++e) prod *= lambda(s);
      v(static_cast<Eigen::Index>(m)) = prod;
    }
    return v;
  }

  // Gradient of c'v_k at lambda given the precomputed lower embedding.
  Vector gradient(const Vector& c, const Vector& lower) const {
    Vector g = Vector::Zero(r);
    for (std::size_t m = 0; m < exps.size(); ++m) {
      const double cm = c(static_cast<Eigen::Index>(m));
      if (cm == 0.0) continue;
      for (int s = 0; s < r; ++s) {
        const int ks = exps[m][s];
        if (ks == 0) continue;
        g(s) += cm * ks * lower(reduce[m][s]);
      }
    }
    return g;
  }
};

// Squared-cross-product distance without orthonormality checks, for inner
// loops where both bases are orthonormal by construction.
inline double distance_unchecked(const Matrix& U, const Matrix& V) {
  const double cross = (U.transpose() * V).squaredNorm();
  const double m = static_cast<double>(std::max(U.cols(), V.cols()));
  return std::sqrt(std::max(m - cross, 0.0));
}

}  // namespace detail

// Veronese map of degree k: all monomials lambda_1^{k_1}...lambda_r^{k_r}
// with sum k_s = k, in descending-lexicographic exponent order.
inline Vector veronese(const Vector& lambda, int k) {
  const detail::VeroneseTable table(k, static_cast<int>(lambda.size()));
  return table.embed(lambda);
}

// Embedded data matrix V_k(r) = [v_k(lambda_1), ..., v_k(lambda_N)].
// Points are unit-normalized before embedding; points with norm below
// `degenerate_tol` are excluded from the embedding and their indices
// reported through `degenerate` (they cannot pin down any subspace).
inline Matrix embedded_matrix(const Matrix& points, int k,
                              std::vector<int>* degenerate = nullptr,
                              double degenerate_tol = 1e-12) {
  const int N = static_cast<int>(points.rows());
  const int r = static_cast<int>(points.cols());
  if (N < 1) throw InvalidInput("embedded_matrix needs at least one point");
  const detail::VeroneseTable table(k, r);
  std::vector<int> keep;
  keep.reserve(N);
  for (int i = 0; i < N; ++i) {
    if (points.row(i).norm() < degenerate_tol) {
      if (degenerate) degenerate->push_back(i);
    } else {
      keep.push_back(i);
    }
  }
  Matrix V(table.size(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const Vector unit = points.row(keep[c]).transpose().normalized();
    V.col(static_cast<Eigen::Index>(c)) = table.embed(unit);
  }
  return V;
}

// Orthonormal basis of the left null space of V at a relative singular value
// threshold: the coefficient vectors of all degree-k polynomials vanishing
// on the embedded data.
namespace detail {

// Left singular directions of V whose singular values fall under the
// relative threshold, floored at min_count directions (the smallest ones).
inline Matrix small_left_directions(const Matrix& V, double rank_tol,
                                    int min_count) {
  if (V.cols() < 1) throw InvalidInput("empty embedded matrix");
  // Direct SVD rather than the Gram eigenproblem: exact null directions must
  // come out at machine precision, not sqrt(eps).
  Eigen::JacobiSVD<Matrix> svd(V, Eigen::ComputeFullU);
  const int M = static_cast<int>(V.rows());
  const int n_sv = static_cast<int>(svd.singularValues().size());
  const double sigma_max = n_sv > 0 ? svd.singularValues()(0) : 0.0;
  int m = M - n_sv;  // columns beyond min(M, N) have singular value zero
  for (int j = n_sv - 1; j >= 0; --j) {
    if (svd.singularValues()(j) <= rank_tol * sigma_max)
      ++m;
    else
      break;
  }
  m = std::min(std::max(m, min_count), M);
  return svd.matrixU().rightCols(m);
}

}  // namespace detail

inline VanishingPolynomialSet vanishing_polynomials(const Matrix& V,
                                                    double rank_tol) {
  const Matrix coeffs = detail::small_left_directions(V, rank_tol, 0);
  if (coeffs.cols() == 0)
    throw EstimationError(
        "no vanishing polynomial at tolerance " + std::to_string(rank_tol));
  VanishingPolynomialSet out;
  out.coeffs = coeffs;
  return out;
}

// Analytic gradient of p(lambda) = c' v_k(lambda).
inline Vector polynomial_gradient(const Vector& c, const Vector& lambda,
                                  int k) {
  const detail::VeroneseTable table(k, static_cast<int>(lambda.size()));
  if (c.size() != table.size())
    throw InvalidInput("coefficient length does not match veronese dimension");
  return table.gradient(c, table.embed_lower(lambda));
}

namespace detail {

inline void check_orthonormal(const Matrix& B, const char* name) {
  const Matrix gram = B.transpose() * B;
  const double dev =
      (gram - Matrix::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-8)
    throw InvalidInput(std::string(name) + " basis is not orthonormal");
}

}  // namespace detail

// Symmetric subspace distance D(U, V) = sqrt(max(m, n) - sum (v_j'u_i)^2)
// between the spans of two orthonormal bases; satisfies the triangle
// inequality and separates subspaces of different dimensions.
inline double subspace_distance(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows())
    throw InvalidInput("subspace bases have different ambient dimensions");
  detail::check_orthonormal(U, "left");
  detail::check_orthonormal(V, "right");
  const double cross = (U.transpose() * V).squaredNorm();
  const double m = static_cast<double>(std::max(U.cols(), V.cols()));
  return std::sqrt(std::max(m - cross, 0.0));
}

// Angle deviation Delta(U, V) = sqrt(min(m, n) - sum (v_j'u_i)^2): projects
// the lower-dimensional subspace onto the higher one, so containment gives 0.
// For a unit vector against a subspace this equals sin(theta).
inline double angle_deviation(const Matrix& U, const Matrix& V) {
  if (U.rows() != V.rows())
    throw InvalidInput("subspace bases have different ambient dimensions");
  detail::check_orthonormal(U, "left");
  detail::check_orthonormal(V, "right");
  const double cross = (U.transpose() * V).squaredNorm();
  const double m = static_cast<double>(std::min(U.cols(), V.cols()));
  return std::sqrt(std::max(m - cross, 0.0));
}

// Hausdorff distance between two arrangements under D, treating each
// arrangement as a finite set of subspaces.
inline double hausdorff_distance(const SubspaceArrangement& A,
                                 const SubspaceArrangement& B) {
  if (A.k() == 0 || B.k() == 0)
    throw InvalidInput("hausdorff_distance needs non-empty arrangements");
  std::vector<Matrix> spans_a, spans_b;
  for (const auto& s : A.bases) spans_a.push_back(s.span_basis());
  for (const auto& s : B.bases) spans_b.push_back(s.span_basis());
  double worst = 0.0;
  for (const auto& a : spans_a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : spans_b) best = std::min(best, subspace_distance(a, b));
    worst = std::max(worst, best);
  }
  for (const auto& b : spans_b) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : spans_a) best = std::min(best, subspace_distance(b, a));
    worst = std::max(worst, best);
  }
  return worst;
}

// Index of the subspace minimizing || B_j' lambda || on the unit-normalized
// point; ties go to the smallest index, and near-zero points go to index 0
// by convention.
inline int assign(const Vector& lambda, const SubspaceArrangement& arr) {
  if (arr.k() == 0) throw InvalidInput("assign needs a non-empty arrangement");
  const double norm = lambda.norm();
  if (norm < 1e-12) return 0;
  const Vector unit = lambda / norm;
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int j = 0; j < arr.k(); ++j) {
    const double v = (arr.bases[j].complement.transpose() * unit).norm();
    if (v < best_val) {
      best_val = v;
      best = j;
    }
  }
  return best;
}

// W_N = (1/N) sum_i min_j phi(Delta(lambda_i, S_j)) over unit-normalized
// points; phi must be continuous, nondecreasing, with phi(0) = 0.
inline double within_cluster_objective(
    const Matrix& points, const SubspaceArrangement& arr,
    const std::function<double(double)>& phi = [](double t) { return t * t; }) {
  const int N = static_cast<int>(points.rows());
  if (N == 0) throw InvalidInput("within_cluster_objective needs points");
  std::vector<Matrix> spans;
  for (const auto& s : arr.bases) spans.push_back(s.span_basis());
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    const double norm = points.row(i).norm();
    if (norm < 1e-12) continue;  // zero vectors deviate from nothing
    const Matrix unit = points.row(i).transpose() / norm;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : spans) best = std::min(best, angle_deviation(unit, s));
    total += phi(best);
  }
  return total / N;
}

namespace detail {

// Degree-k vanishing count of a generic arrangement with the given
// dimension profile. A geometric invariant of (k, r, dims): measured once by
// embedding a synthetic generic arrangement (fixed internal draw) and
// counting its exact null directions. Serves as the floor on the number of
// polynomials to keep when noise hides the spectral gap.
inline int generic_vanishing_count_uncached(int k, int r,
                                            const std::vector<int>& dims) {
  Rng rng(0x67656e65726963ULL);
  const long M = veronese_dim(k, r);
  const int per_subspace = static_cast<int>(M) + 5;
  Matrix points(per_subspace * k, r);
  int row = 0;
  for (int d : dims) {
    const Matrix raw = rng.gaussian_matrix(r, d, 0.0, 1.0);
    Eigen::HouseholderQR<Matrix> qr(raw);
    const Matrix span = Matrix(qr.householderQ()).leftCols(d);
    for (int i = 0; i < per_subspace; ++i) {
      Vector coef(d);
      for (int q = 0; q < d; ++q) coef(q) = rng.normal();
      points.row(row++) = (span * coef).transpose();
    }
  }
  const Matrix V = embedded_matrix(points, k);
  Eigen::JacobiSVD<Matrix> svd(V);
  const double sigma_max = svd.singularValues()(0);
  int count = static_cast<int>(M) - static_cast<int>(svd.singularValues().size());
  for (Eigen::Index j = svd.singularValues().size() - 1; j >= 0; --j) {
    if (svd.singularValues()(j) <= 1e-8 * sigma_max)
      ++count;
    else
      break;
  }
  return std::max(count, 1);
}

inline int generic_vanishing_count(int k, int r, const std::vector<int>& dims) {
  struct Key {
    int k, r;
    std::vector<int> dims;
    bool operator<(const Key& o) const {
      return std::tie(k, r, dims) < std::tie(o.k, o.r, o.dims);
    }
  };
  static std::map<Key, int> cache;
  static std::mutex mutex;
  const Key key{k, r, dims};
  {
    std::lock_guard<std::mutex> lock(mutex);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const int count = generic_vanishing_count_uncached(k, r, dims);
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, count);
  return count;
}

struct VoteCluster {
  Matrix basis;     // representative complement basis (first seen)
  int created = 0;  // creation order, for deterministic ties
  std::vector<std::pair<int, double>> votes;  // (point index, weight)
  Matrix projector_sum;  // weighted sum of member candidate projectors

  double weight(const std::vector<bool>& claimed) const {
    double total = 0.0;
    for (const auto& [i, w] : votes)
      if (!claimed[i]) total += w;
    return total;
  }

  // Weighted mean-projector representative: tighter than the first-seen
  // candidate under noise.
  Matrix refined(int codim) const {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(projector_sum);
    const int r = static_cast<int>(projector_sum.rows());
    Matrix out(r, codim);
    for (int j = 0; j < codim; ++j)
      out.col(j) = eig.eigenvectors().col(r - 1 - j);
    return out;
  }
};

}  // namespace detail

// Recovers the arrangement from points near a union of subspaces with known
// dimensions. Fits the vanishing polynomials of degree k, evaluates their
// gradients at every point, and lets each point vote one candidate
// complement basis per candidate co-dimension class; votes are weighted by
// the gradient support sigma_c/sigma_1 so a point only backs co-dimensions
// its gradients actually span. Representatives are then selected greedily by
// vote mass, most specific co-dimension first; each selection claims its
// voters, whose ballots in the remaining classes no longer count (a point
// belongs to one subspace), which keeps coherent side-votes of an already
// selected subspace from masquerading as a further one.
inline SubspaceArrangement estimate_bases(const Matrix& points, int k,
                                          const std::vector<int>& dims,
                                          double rank_tol,
                                          double vote_radius = 0.1) {
  const int N = static_cast<int>(points.rows());
  const int r = static_cast<int>(points.cols());
  if (static_cast<int>(dims.size()) != k)
    throw InvalidInput("dims size must equal k");
  int max_codim = 0;
  for (int d : dims) {
    if (d <= 0 || d >= r)
      throw InvalidInput("subspace dims must satisfy 0 < d < r");
    max_codim = std::max(max_codim, r - d);
  }
  if (N < k * max_codim + k)
    throw InvalidInput("too few points to identify the arrangement");

  std::vector<int> degenerate;
  const Matrix V = embedded_matrix(points, k, &degenerate);
  // Noise can push every singular value of V over the threshold; keep at
  // least as many polynomials as a generic arrangement of this profile
  // vanishes on, so the gradient spans can fill the complements.
  const int floor_m = detail::generic_vanishing_count(k, r, dims);
  VanishingPolynomialSet polys;
  polys.degree = k;
  polys.coeffs = detail::small_left_directions(V, rank_tol, floor_m);
  const int m = polys.count();

  // Candidate co-dimension classes, processed from most specific (highest
  // co-dimension) down.
  std::vector<int> codims;
  for (int d : dims) codims.push_back(r - d);
  std::vector<int> classes(codims);
  std::sort(classes.begin(), classes.end(), std::greater<int>());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  const detail::VeroneseTable table(k, r);
  std::vector<std::vector<detail::VoteCluster>> clusters(classes.size());
  int created = 0;
  for (int i = 0; i < N; ++i) {
    const double norm = points.row(i).norm();
    if (norm < 1e-12) continue;
    const Vector unit = points.row(i).transpose() / norm;
    const Vector lower = table.embed_lower(unit);
    Matrix grads(r, m);  // columns: gradients of each vanishing polynomial
    for (int l = 0; l < m; ++l)
      grads.col(l) = table.gradient(polys.coeffs.col(l), lower);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(grads * grads.transpose());
    const double s1 = std::sqrt(std::max(eig.eigenvalues()(r - 1), 0.0));
    if (s1 <= 0) continue;  // gradients vanish; the point carries no normal

    for (std::size_t ci = 0; ci < classes.size(); ++ci) {
      const int c = classes[ci];
      Matrix cand(r, c);
      for (int j = 0; j < c; ++j)
        cand.col(j) = eig.eigenvectors().col(r - 1 - j);
      const double sc = std::sqrt(std::max(eig.eigenvalues()(r - c), 0.0));
      const double weight = sc / s1;
      // Merge into the nearest existing cluster within the vote radius.
      int hit = -1;
      double hit_dist = vote_radius;
      for (std::size_t q = 0; q < clusters[ci].size(); ++q) {
        const double dist =
            detail::distance_unchecked(cand, clusters[ci][q].basis);
        if (dist <= hit_dist) {
          hit_dist = dist;
          hit = static_cast<int>(q);
        }
      }
      if (hit >= 0) {
        clusters[ci][hit].votes.emplace_back(i, weight);
        clusters[ci][hit].projector_sum += weight * cand * cand.transpose();
      } else {
        detail::VoteCluster cl;
        cl.basis = cand;
        cl.created = created++;
        cl.votes.emplace_back(i, weight);
        cl.projector_sum = weight * cand * cand.transpose();
        clusters[ci].push_back(std::move(cl));
      }
    }
  }

  std::vector<std::pair<int, Matrix>> selected;  // (codim, complement)
  std::vector<bool> claimed(N, false);
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const int c = classes[ci];
    const int want =
        static_cast<int>(std::count(codims.begin(), codims.end(), c));
    std::vector<bool> used(clusters[ci].size(), false);
    for (int taken = 0; taken < want; ++taken) {
      int pick = -1;
      double pick_weight = 0.0;
      for (std::size_t q = 0; q < clusters[ci].size(); ++q) {
        if (used[q]) continue;
        const auto& cl = clusters[ci][q];
        bool duplicate = false;
        for (const auto& sel : selected)
          if (sel.first == c &&
              detail::distance_unchecked(cl.basis, sel.second) <= vote_radius) {
            duplicate = true;
            break;
          }
        if (duplicate) {
          used[q] = true;
          continue;
        }
        const double w = cl.weight(claimed);
        if (pick < 0 || w > pick_weight ||
            (w == pick_weight && cl.created < clusters[ci][pick].created)) {
          pick = static_cast<int>(q);
          pick_weight = w;
        }
      }
      if (pick < 0 || pick_weight <= 0.0)
        throw EstimationError(
            "arrangement not identifiable: insufficient distinct vote "
            "clusters for co-dimension " + std::to_string(c));
      used[pick] = true;
      selected.emplace_back(c, clusters[ci][pick].refined(c));
      for (const auto& [i, w] : clusters[ci][pick].votes) claimed[i] = true;
    }
  }

  // Emit bases in the order of the requested dims, consuming selected
  // representatives per co-dimension in vote order.
  SubspaceArrangement arr;
  std::vector<bool> taken(selected.size(), false);
  for (int j = 0; j < k; ++j) {
    const int c = r - dims[j];
    for (std::size_t q = 0; q < selected.size(); ++q) {
      if (!taken[q] && selected[q].first == c) {
        arr.bases.push_back({selected[q].second, dims[j]});
        taken[q] = true;
        break;
      }
    }
  }

  // Assign-and-refit polish: project points to their nearest subspace and
  // re-estimate each complement as the bottom principal directions of the
  // cluster scatter, which drives down the within-cluster deviation the
  // clustering criterion minimizes. A few rounds suffice; clusters too small
  // to pin down a complement keep their basis.
  for (int round = 0; round < 5; ++round) {
    std::vector<int> members(N);
    for (int i = 0; i < N; ++i)
      members[i] = assign(points.row(i).transpose(), arr);
    std::vector<Matrix> scatter(k, Matrix::Zero(r, r));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < N; ++i) {
      const double norm = points.row(i).norm();
      if (norm < 1e-12) continue;
      const Vector unit = points.row(i).transpose() / norm;
      scatter[members[i]] += unit * unit.transpose();
      ++counts[members[i]];
    }
    bool moved = false;
    for (int j = 0; j < k; ++j) {
      if (counts[j] <= arr.bases[j].dim) continue;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter[j]);
      Matrix comp(r, arr.bases[j].codim());
      for (int q = 0; q < arr.bases[j].codim(); ++q)
        comp.col(q) = eig.eigenvectors().col(q);
      if (detail::distance_unchecked(comp, arr.bases[j].complement) > 1e-12)
        moved = true;
      arr.bases[j].complement = std::move(comp);
    }
    if (!moved) break;
  }
  return arr;
}

}  // namespace lssc

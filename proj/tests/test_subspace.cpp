#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "lssc/rng.hpp"
#include "lssc/subspace.hpp"

using namespace lssc;

namespace {

long binomial_oracle(int n, int k) {
  if (k < 0 || k > n) return 0;
  long num = 1, den = 1;
  for (int i = 0; i < k; ++i) {
    num *= n - i;
    den *= i + 1;
  }
  return num / den;
}

Matrix random_orthonormal(Rng& rng, int rows, int cols) {
  const Matrix raw = rng.gaussian_matrix(rows, cols, 0.0, 1.0);
  Eigen::HouseholderQR<Matrix> qr(raw);
  return Matrix(qr.householderQ()).leftCols(cols);
}

// Independent distance oracle via projector traces:
// D^2 = max(m, n) - tr(P_U P_V).
double distance_projector_oracle(const Matrix& U, const Matrix& V) {
  const Matrix pu = U * U.transpose();
  const Matrix pv = V * V.transpose();
  const double cross = (pu * pv).trace();
  return std::sqrt(std::max(
      static_cast<double>(std::max(U.cols(), V.cols())) - cross, 0.0));
}

// Points drawn on the given subspaces (standard normal coefficients),
// optionally perturbed.
Matrix sample_arrangement_points(Rng& rng, const std::vector<Matrix>& spans,
                                 const std::vector<int>& counts,
                                 double noise_sd, std::vector<int>* labels) {
  const int r = static_cast<int>(spans.front().rows());
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  Matrix points(total, r);
  int row = 0;
  for (std::size_t j = 0; j < spans.size(); ++j) {
    for (int i = 0; i < counts[j]; ++i) {
      Vector coef = Vector::Zero(spans[j].cols());
      for (Eigen::Index q = 0; q < coef.size(); ++q) coef(q) = rng.normal();
      Vector x = spans[j] * coef;
      if (noise_sd > 0)
        for (int q = 0; q < r; ++q) x(q) += noise_sd * rng.normal();
      points.row(row) = x.transpose();
      if (labels) labels->push_back(static_cast<int>(j));
      ++row;
    }
  }
  return points;
}

// Test-side expansion of a product of linear forms into monomial
// coefficients, for the factorizable-polynomial identity.
Vector product_coefficients(const std::vector<Vector>& forms, int r) {
  const int k = static_cast<int>(forms.size());
  const auto exps = lssc::detail::veronese_exponents(k, r);
  Vector coef = Vector::Zero(static_cast<Eigen::Index>(exps.size()));
  std::vector<int> pick(k, 0);
  for (;;) {
    double prod = 1.0;
    std::vector<int> e(r, 0);
    for (int j = 0; j < k; ++j) {
      prod *= forms[j](pick[j]);
      ++e[pick[j]];
    }
    for (std::size_t m = 0; m < exps.size(); ++m)
      if (exps[m] == e) {
        coef(static_cast<Eigen::Index>(m)) += prod;
        break;
      }
    int pos = k - 1;
    while (pos >= 0 && ++pick[pos] == r) pick[pos--] = 0;
    if (pos < 0) break;
  }
  return coef;
}

}  // namespace

TEST_CASE("veronese dimension matches the binomial identity", "[subspace]") {
  CHECK(veronese_dim(1, 5) == 5);
  CHECK(veronese_dim(2, 2) == 3);
  CHECK(veronese_dim(3, 3) == 10);
  for (int k = 1; k <= 8; ++k)
    for (int r = 1; r <= 8; ++r)
      CHECK(veronese_dim(k, r) == binomial_oracle(k + r - 1, r - 1));
}

TEST_CASE("veronese embedding follows degree-lexicographic order", "[subspace]") {
  Vector ab(2);
  ab << 3.0, 5.0;
  const Vector v = veronese(ab, 2);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == Catch::Approx(9.0));   // a^2
  CHECK(v(1) == Catch::Approx(15.0));  // ab
  CHECK(v(2) == Catch::Approx(25.0));  // b^2

  Vector xyz(3);
  xyz << 1.0, 2.0, 3.0;
  const Vector w = veronese(xyz, 2);
  REQUIRE(w.size() == 6);
  const double expected[] = {1, 2, 3, 4, 6, 9};
  for (int i = 0; i < 6; ++i) CHECK(w(i) == Catch::Approx(expected[i]));

  CHECK(veronese(Vector::Zero(4), 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("veronese homogeneity and length", "[subspace]") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = 2 + static_cast<int>(rng.uniform(0, 4));
    const int k = 1 + static_cast<int>(rng.uniform(0, 4));
    Vector lam(r);
    for (int i = 0; i < r; ++i) lam(i) = rng.normal();
    const double t = rng.uniform(0.2, 3.0);
    const Vector a = veronese(t * lam, k);
    const Vector b = std::pow(t, k) * veronese(lam, k);
    REQUIRE(a.size() == veronese_dim(k, r));
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("factorizable polynomials evaluate through the embedding",
          "[subspace]") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int r = 2 + static_cast<int>(rng.uniform(0, 3));
    const int k = 1 + static_cast<int>(rng.uniform(0, 3));
    std::vector<Vector> forms;
    for (int j = 0; j < k; ++j) {
      Vector b(r);
      for (int i = 0; i < r; ++i) b(i) = rng.normal();
      forms.push_back(b);
    }
    const Vector coef = product_coefficients(forms, r);
    Vector lam(r);
    for (int i = 0; i < r; ++i) lam(i) = rng.normal();
    double direct = 1.0;
    for (const auto& b : forms) direct *= b.dot(lam);
    const double embedded = coef.dot(veronese(lam, k));
    CHECK(embedded == Catch::Approx(direct).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("embedded matrix normalizes and flags degenerate points",
          "[subspace]") {
  Matrix one_point(1, 2);
  one_point << 3.0, 4.0;
  const Matrix V1 = embedded_matrix(one_point, 1);
  CHECK(std::abs(V1(0, 0) - 0.6) < 1e-12);
  CHECK(std::abs(V1(1, 0) - 0.8) < 1e-12);

  // Collinear points embed to a rank-1 matrix.
  Matrix line(3, 2);
  line << 1, 1, -2, -2, 0.5, 0.5;
  const Matrix V2 = embedded_matrix(line, 2);
  Eigen::JacobiSVD<Matrix> svd(V2);
  CHECK(svd.singularValues()(1) < 1e-12);

  // Two lines in the plane: rank 2, one vanishing direction.
  Rng rng(5);
  std::vector<int> labels;
  const Matrix spans0 = (Matrix(2, 1) << 1, 0).finished();
  const Matrix spans1 = (Matrix(2, 1) << 0, 1).finished();
  const Matrix pts = sample_arrangement_points(rng, {spans0, spans1}, {5, 5},
                                               0.0, &labels);
  const Matrix V3 = embedded_matrix(pts, 2);
  Eigen::JacobiSVD<Matrix> svd3(V3);
  CHECK(svd3.singularValues()(1) > 1e-6);
  CHECK(svd3.singularValues()(2) < 1e-12);

  // Zero rows are excluded and reported.
  Matrix with_zero(3, 2);
  with_zero << 1, 0, 0, 0, 0, 1;
  std::vector<int> degenerate;
  const Matrix V4 = embedded_matrix(with_zero, 1, &degenerate);
  CHECK(V4.cols() == 2);
  REQUIRE(degenerate.size() == 1);
  CHECK(degenerate[0] == 1);
}

TEST_CASE("vanishing polynomials of two orthogonal lines", "[subspace]") {
  Matrix pts(8, 2);
  pts << 1, 0, -1, 0, 2, 0, -0.5, 0, 0, 1, 0, -1, 0, 2, 0, -3;
  const Matrix V = embedded_matrix(pts, 2);
  const auto polys = vanishing_polynomials(V, 1e-8);
  REQUIRE(polys.count() == 1);
  // Monomial order (2,0),(1,1),(0,2): the polynomial is proportional to xy.
  const Vector c = polys.coeffs.col(0);
  CHECK(std::abs(c(0)) < 1e-10);
  CHECK(std::abs(std::abs(c(1)) - 1.0) < 1e-10);
  CHECK(std::abs(c(2)) < 1e-10);

  Rng rng(99);
  const Matrix full_rank = rng.gaussian_matrix(40, 2, 0.0, 1.0);
  CHECK_THROWS_WITH(
      vanishing_polynomials(embedded_matrix(full_rank, 1), 1e-12),
      Catch::Matchers::ContainsSubstring("no vanishing polynomial"));
}

TEST_CASE("single hyperplane at degree one recovers its normal", "[subspace]") {
  Rng rng(7);
  const int r = 4;
  const Matrix frame = random_orthonormal(rng, r, r - 1);
  Eigen::HouseholderQR<Matrix> qr(frame);
  const Vector normal = Matrix(qr.householderQ()).col(r - 1);
  const Matrix pts = sample_arrangement_points(rng, {frame}, {30}, 0.0, nullptr);
  const auto polys = vanishing_polynomials(embedded_matrix(pts, 1), 1e-8);
  REQUIRE(polys.count() == 1);
  const double align = std::abs(polys.coeffs.col(0).dot(normal));
  CHECK(align == Catch::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("noisy loadings still yield a usable polynomial set", "[subspace]") {
  // Setting-1 scale loadings (coordinates N(1,1) on a Gaussian basis draw,
  // sd 0.316 noise) push every singular value of the embedding over the
  // 1e-2 cut; the arrangement fit falls back to the smallest directions and
  // must still cluster the bulk correctly.
  Rng rng(11);
  std::vector<int> labels;
  Matrix pts(300, 3);
  int row = 0;
  for (int j = 0; j < 3; ++j) {
    const Matrix alpha = rng.gaussian_matrix(3, 1, 0.0, 1.0);
    const Matrix coords = rng.gaussian_matrix(100, 1, 1.0, 1.0);
    pts.middleRows(row, 100) =
        coords * alpha.transpose() + rng.gaussian_matrix(100, 3, 0.0, 0.1);
    for (int i = 0; i < 100; ++i) labels.push_back(j);
    row += 100;
  }
  const auto arr = estimate_bases(pts, 3, {1, 1, 1}, 1e-2);
  REQUIRE(arr.k() == 3);
  int agree = 0;
  std::vector<int> got(pts.rows());
  for (int i = 0; i < pts.rows(); ++i)
    got[i] = assign(pts.row(i).transpose(), arr);
  for (int j = 0; j < 3; ++j) {
    std::vector<int> counts(3, 0);
    for (int i = 0; i < pts.rows(); ++i)
      if (labels[i] == j) ++counts[got[i]];
    agree += *std::max_element(counts.begin(), counts.end());
  }
  CHECK(agree >= 240);  // most points land with their own subspace
}

TEST_CASE("polynomial gradient matches hand cases", "[subspace]") {
  // p = xy in two variables.
  Vector c_xy(3);
  c_xy << 0, 1, 0;
  Vector at(2);
  at << 1, 0;
  const Vector g = polynomial_gradient(c_xy, at, 2);
  CHECK(g(0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(g(1) == Catch::Approx(1.0));

  // p = x^2: gradient (2a, 0).
  Vector c_x2(3);
  c_x2 << 1, 0, 0;
  Vector ab(2);
  ab << 1.7, -2.3;
  const Vector g2 = polynomial_gradient(c_x2, ab, 2);
  CHECK(g2(0) == Catch::Approx(2 * 1.7));
  CHECK(g2(1) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("polynomial gradient matches central differences", "[subspace]") {
  Rng rng(13);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 2 + trial % 3;
    const int k = 1 + trial % 4;
    const long M = veronese_dim(k, r);
    Vector c(M);
    for (long i = 0; i < M; ++i) c(i) = rng.normal();
    Vector lam(r);
    for (int i = 0; i < r; ++i) lam(i) = rng.uniform(-1.5, 1.5);
    const Vector grad = polynomial_gradient(c, lam, k);
    const double h = 1e-6;
    for (int s = 0; s < r; ++s) {
      Vector up = lam, dn = lam;
      up(s) += h;
      dn(s) -= h;
      const double fd =
          (c.dot(veronese(up, k)) - c.dot(veronese(dn, k))) / (2 * h);
      const double scale = std::max(std::abs(grad(s)), 1.0);
      CHECK(std::abs(fd - grad(s)) <= 1e-5 * scale);
      ++checked;
    }
  }
  CHECK(checked >= 1000);
}

TEST_CASE("subspace distance basics and containment", "[subspace]") {
  Matrix e1 = (Matrix(2, 1) << 1, 0).finished();
  Matrix e2 = (Matrix(2, 1) << 0, 1).finished();
  CHECK(subspace_distance(e1, e1) == Catch::Approx(0.0).margin(1e-12));
  CHECK(subspace_distance(e1, e2) == Catch::Approx(1.0));

  Matrix line = (Matrix(3, 1) << 1, 0, 0).finished();
  Matrix plane(3, 2);
  plane << 1, 0, 0, 1, 0, 0;
  CHECK(subspace_distance(line, plane) == Catch::Approx(1.0));
  CHECK(angle_deviation(line, plane) == Catch::Approx(0.0).margin(1e-12));

  Matrix e1_3 = (Matrix(3, 1) << 1, 0, 0).finished();
  Matrix e2_3 = (Matrix(3, 1) << 0, 1, 0).finished();
  CHECK(angle_deviation(e1_3, e2_3) == Catch::Approx(1.0));

  // Unit vector 30 degrees from a line: deviation sin(30) = 1/2.
  Matrix dir(2, 1);
  dir << std::cos(M_PI / 6), std::sin(M_PI / 6);
  CHECK(angle_deviation(dir, e1) == Catch::Approx(0.5).epsilon(1e-12));

  Matrix not_orthonormal = (Matrix(2, 1) << 1, 1).finished();
  CHECK_THROWS_AS(subspace_distance(not_orthonormal, e1), InvalidInput);
}

TEST_CASE("subspace distance metric properties", "[subspace]") {
  Rng rng(17);
  for (int trial = 0; trial < 10000; ++trial) {
    const int r = 3 + trial % 3;
    const int da = 1 + static_cast<int>(rng.uniform(0, r - 1));
    const int db = 1 + static_cast<int>(rng.uniform(0, r - 1));
    const int dc = 1 + static_cast<int>(rng.uniform(0, r - 1));
    const Matrix A = random_orthonormal(rng, r, da);
    const Matrix B = random_orthonormal(rng, r, db);
    const Matrix C = random_orthonormal(rng, r, dc);
    const double ab = subspace_distance(A, B);
    const double bc = subspace_distance(B, C);
    const double ac = subspace_distance(A, C);
    REQUIRE(ab >= 0.0);
    CHECK(ab == Catch::Approx(subspace_distance(B, A)).margin(1e-12));
    CHECK(ac <= ab + bc + 1e-10);
    // D dominates the angle deviation, so D < delta implies Delta < delta.
    CHECK(angle_deviation(A, B) <= ab + 1e-12);
  }
  // Oracle cross-check through projector traces (slower; fewer trials).
  for (int trial = 0; trial < 200; ++trial) {
    const int r = 3 + trial % 3;
    const Matrix A = random_orthonormal(rng, r, 1 + trial % (r - 1));
    const Matrix B = random_orthonormal(rng, r, 1 + (trial / 2) % (r - 1));
    CHECK(subspace_distance(A, B) ==
          Catch::Approx(distance_projector_oracle(A, B)).margin(1e-9));
  }
  // Identity of indiscernibles at tolerance.
  const Matrix U = random_orthonormal(rng, 4, 2);
  CHECK(subspace_distance(U, U) < 1e-10);
}

TEST_CASE("hausdorff distance cases and oracle", "[subspace]") {
  auto line = [](double x, double y) {
    Matrix m(2, 1);
    m << x, y;
    m.col(0).normalize();
    return m;
  };
  // Complements in R^2: the complement of span{e1} is span{e2}.
  SubspaceArrangement A, B;
  A.bases.push_back({line(0, 1), 1});  // subspace e1-line
  B.bases.push_back({line(0, 1), 1});
  B.bases.push_back({line(1, 0), 1});  // subspace e2-line
  CHECK(hausdorff_distance(A, A) == Catch::Approx(0.0).margin(1e-12));
  CHECK(hausdorff_distance(A, B) == Catch::Approx(1.0));
  CHECK(hausdorff_distance(B, A) == Catch::Approx(1.0));

  // Random arrangements against a naive double-loop oracle on projectors.
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = 3 + trial % 2;
    SubspaceArrangement X, Y;
    const int ka = 1 + trial % 3, kb = 1 + (trial / 2) % 3;
    for (int j = 0; j < ka; ++j) {
      const int d = 1 + static_cast<int>(rng.uniform(0, r - 1));
      X.bases.push_back({random_orthonormal(rng, r, r - d), d});
    }
    for (int j = 0; j < kb; ++j) {
      const int d = 1 + static_cast<int>(rng.uniform(0, r - 1));
      Y.bases.push_back({random_orthonormal(rng, r, r - d), d});
    }
    double forward = 0.0;
    for (const auto& a : X.bases) {
      double best = 1e300;
      for (const auto& b : Y.bases)
        best = std::min(best, distance_projector_oracle(a.span_basis(),
                                                        b.span_basis()));
      forward = std::max(forward, best);
    }
    double backward = 0.0;
    for (const auto& b : Y.bases) {
      double best = 1e300;
      for (const auto& a : X.bases)
        best = std::min(best, distance_projector_oracle(b.span_basis(),
                                                        a.span_basis()));
      backward = std::max(backward, best);
    }
    const double oracle = std::max(forward, backward);
    CHECK(hausdorff_distance(X, Y) == Catch::Approx(oracle).margin(1e-10));
  }
}

TEST_CASE("assign picks the nearest subspace with deterministic ties",
          "[subspace]") {
  SubspaceArrangement arr;
  arr.bases.push_back({(Matrix(2, 1) << 0, 1).finished(), 1});  // e1-line
  arr.bases.push_back({(Matrix(2, 1) << 1, 0).finished(), 1});  // e2-line
  Vector e1(2);
  e1 << 1, 0;
  CHECK(assign(e1, arr) == 0);
  Vector diag(2);
  diag << 1, 1;  // equidistant: smaller index wins
  CHECK(assign(diag, arr) == 0);
  Vector zero = Vector::Zero(2);
  CHECK(assign(zero, arr) == 0);
  // Positive rescaling never changes the assignment.
  Vector v(2);
  v << 0.2, 0.9;
  CHECK(assign(v, arr) == assign(100.0 * v, arr));
}

TEST_CASE("assign agrees with the projection-residual oracle", "[subspace]") {
  Rng rng(23);
  std::vector<Matrix> spans = {random_orthonormal(rng, 3, 1),
                               random_orthonormal(rng, 3, 2)};
  SubspaceArrangement arr;
  for (const auto& s : spans) {
    Eigen::HouseholderQR<Matrix> qr(s);
    const Matrix full = qr.householderQ();
    arr.bases.push_back(
        {full.rightCols(3 - s.cols()), static_cast<int>(s.cols())});
  }
  std::vector<int> labels;
  const Matrix pts =
      sample_arrangement_points(rng, spans, {500, 500}, 0.01, &labels);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vector lam = pts.row(i).transpose();
    const int got = assign(lam, arr);
    // Oracle: direct projection residual onto each span.
    const Vector unit = lam.normalized();
    int best = 0;
    double best_resid = 1e300;
    for (std::size_t j = 0; j < spans.size(); ++j) {
      const Vector proj = spans[j] * (spans[j].transpose() * unit);
      const double resid = (unit - proj).norm();
      if (resid < best_resid) {
        best_resid = resid;
        best = static_cast<int>(j);
      }
    }
    agree += (got == best) ? 1 : 0;
  }
  CHECK(agree >= 990);
}

TEST_CASE("estimate_bases recovers two orthogonal lines", "[subspace]") {
  Rng rng(29);
  const Matrix s0 = (Matrix(2, 1) << 1, 0).finished();
  const Matrix s1 = (Matrix(2, 1) << 0, 1).finished();
  std::vector<int> labels;
  const Matrix pts =
      sample_arrangement_points(rng, {s0, s1}, {20, 20}, 0.0, &labels);
  const auto arr = estimate_bases(pts, 2, {1, 1}, 1e-8);
  REQUIRE(arr.k() == 2);
  const double d00 = subspace_distance(arr.bases[0].complement, s1);
  const double d11 = subspace_distance(arr.bases[1].complement, s0);
  const double d01 = subspace_distance(arr.bases[0].complement, s0);
  const double d10 = subspace_distance(arr.bases[1].complement, s1);
  const bool direct = d00 < 1e-6 && d11 < 1e-6;
  const bool swapped = d01 < 1e-6 && d10 < 1e-6;
  CHECK((direct || swapped));
}

TEST_CASE("estimate_bases recovers a plane and a line in R^3", "[subspace]") {
  Rng rng(31);
  const Matrix plane = random_orthonormal(rng, 3, 2);
  const Matrix line = random_orthonormal(rng, 3, 1);
  std::vector<int> labels;
  const Matrix pts = sample_arrangement_points(rng, {plane, line}, {40, 40},
                                               0.0, &labels);
  const auto arr = estimate_bases(pts, 2, {2, 1}, 1e-8);
  SubspaceArrangement truth;
  {
    Eigen::HouseholderQR<Matrix> qp(plane);
    truth.bases.push_back({Matrix(qp.householderQ()).rightCols(1), 2});
    Eigen::HouseholderQR<Matrix> ql(line);
    truth.bases.push_back({Matrix(ql.householderQ()).rightCols(2), 1});
  }
  CHECK(hausdorff_distance(arr, truth) < 1e-6);
  // Membership recovery is exact on noiseless data.
  int errors = 0;
  for (int i = 0; i < pts.rows(); ++i) {
    const int got = assign(pts.row(i).transpose(), arr);
    const int want = arr.bases[0].dim == 2 ? labels[i] : 1 - labels[i];
    errors += (got != want) ? 1 : 0;
  }
  CHECK(errors == 0);
}

TEST_CASE("estimate_bases with one subspace matches the PCA oracle",
          "[subspace]") {
  Rng rng(37);
  const int r = 4;
  const Matrix span = random_orthonormal(rng, r, r - 1);
  const Matrix pts = sample_arrangement_points(rng, {span}, {50}, 0.0, nullptr);
  const auto arr = estimate_bases(pts, 1, {r - 1}, 1e-8);
  REQUIRE(arr.k() == 1);

  // PCA oracle: the smallest principal direction of the normalized cloud.
  Matrix scatter = Matrix::Zero(r, r);
  for (int i = 0; i < pts.rows(); ++i) {
    const Vector u = pts.row(i).transpose().normalized();
    scatter += u * u.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter);
  const Matrix smallest = eig.eigenvectors().leftCols(1);
  CHECK(subspace_distance(arr.bases[0].complement, smallest) < 1e-8);
}

TEST_CASE("estimate_bases errors on unidentifiable arrangements", "[subspace]") {
  Rng rng(41);
  // Duplicate subspaces cannot produce two distinct vote clusters.
  const Matrix s = random_orthonormal(rng, 3, 1);
  const Matrix pts =
      sample_arrangement_points(rng, {s, s}, {30, 30}, 0.0, nullptr);
  CHECK_THROWS_WITH(estimate_bases(pts, 2, {1, 1}, 1e-8),
                    Catch::Matchers::ContainsSubstring("not identifiable"));
  CHECK_THROWS_AS(estimate_bases(pts, 3, {1, 1}, 1e-8), InvalidInput);
}

TEST_CASE("noiseless exact recovery across dimension profiles", "[subspace]") {
  Rng rng(43);
  const std::vector<std::vector<int>> profiles = {{1, 1}, {2, 1}, {2, 2, 1}};
  for (const auto& dims : profiles) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<Matrix> spans;
      for (int d : dims) spans.push_back(random_orthonormal(rng, 3, d));
      std::vector<int> counts;
      for (int d : dims) counts.push_back(10 * (3 - d) + 20);
      std::vector<int> labels;
      const Matrix pts =
          sample_arrangement_points(rng, spans, counts, 0.0, &labels);
      const auto arr =
          estimate_bases(pts, static_cast<int>(dims.size()), dims, 1e-8);
      // Any same-truth pair split across clusters counts as a mismatch;
      // the check is free of label permutations.
      int mismatches = 0;
      std::vector<int> got(pts.rows());
      for (int i = 0; i < pts.rows(); ++i)
        got[i] = assign(pts.row(i).transpose(), arr);
      for (std::size_t j = 0; j < spans.size(); ++j) {
        std::vector<int> seen;
        for (int i = 0; i < pts.rows(); ++i)
          if (labels[i] == static_cast<int>(j)) seen.push_back(got[i]);
        for (std::size_t q = 1; q < seen.size(); ++q)
          if (seen[q] != seen[0]) ++mismatches;
      }
      CHECK(mismatches == 0);
    }
  }
}

TEST_CASE("within-cluster objective matches the loop oracle", "[subspace]") {
  Rng rng(47);
  SubspaceArrangement arr;
  arr.bases.push_back({random_orthonormal(rng, 3, 2), 1});
  arr.bases.push_back({random_orthonormal(rng, 3, 1), 2});

  // All points exactly on the subspaces: objective zero.
  std::vector<Matrix> spans = {arr.bases[0].span_basis(),
                               arr.bases[1].span_basis()};
  const Matrix exact =
      sample_arrangement_points(rng, spans, {10, 10}, 0.0, nullptr);
  CHECK(within_cluster_objective(exact, arr) < 1e-12);

  // One point at a known angle with identity phi: value sin(theta).
  SubspaceArrangement single;
  single.bases.push_back({(Matrix(2, 1) << 0, 1).finished(), 1});
  const double theta = 0.37;
  Matrix pt(1, 2);
  pt << std::cos(theta), std::sin(theta);
  const double w =
      within_cluster_objective(pt, single, [](double t) { return t; });
  CHECK(w == Catch::Approx(std::sin(theta)).epsilon(1e-12));

  // Random instance vs a per-point loop oracle.
  const Matrix noisy =
      sample_arrangement_points(rng, spans, {15, 15}, 0.2, nullptr);
  double oracle = 0.0;
  for (int i = 0; i < noisy.rows(); ++i) {
    const Vector unit = noisy.row(i).transpose().normalized();
    double best = 1e300;
    for (const auto& span : spans) {
      const Vector proj = span * (span.transpose() * unit);
      const double s2 = std::max(1.0 - proj.squaredNorm(), 0.0);
      best = std::min(best, s2);  // phi(sin) = sin^2
    }
    oracle += best;
  }
  oracle /= noisy.rows();
  CHECK(within_cluster_objective(noisy, arr) ==
        Catch::Approx(oracle).margin(1e-10));
}

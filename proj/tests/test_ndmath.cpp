#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "drmdit/ndmath.hpp"
#include "support.hpp"

using namespace drmdit;
using drmdit::testing::random_matrix;

TEST(Matrix, ShapeAndAccess) {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.column(1), (std::vector<double>{2, 5}));
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ParameterError);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), ParameterError);
}

TEST(Matrix, Products) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0, 1}, {1, 0}};
  EXPECT_EQ(matmul(a, b), (Matrix{{2, 1}, {4, 3}}));
  EXPECT_EQ(matmul_bt(a, a), matmul(a, transpose(a)));
  EXPECT_EQ(matmul_at(a, a), matmul(transpose(a), a));
  EXPECT_THROW(matmul(a, Matrix(3, 1)), ParameterError);
  EXPECT_DOUBLE_EQ(trace(a), 5.0);
}

TEST(TransposeView, TracksBase) {
  Matrix w{{1, 2, 3}, {4, 5, 6}};
  TransposeView v(w);
  EXPECT_EQ(v.rows(), 3u);
  EXPECT_EQ(v.cols(), 2u);
  EXPECT_EQ(v(2, 1), 6.0);
  w(1, 2) = -7.5;
  EXPECT_EQ(v(2, 1), -7.5);
}

TEST(GaussianGram, SingleSampleIsKernelConstant) {
  const auto g = gaussian_gram(Matrix{{0.0}}, 1.0);
  EXPECT_NEAR(g.raw(0, 0), 0.3989422804, 1e-10);
}

TEST(GaussianGram, IdenticalSamplesShareValue) {
  const auto g = gaussian_gram(Matrix{{1.5, -2.0}, {1.5, -2.0}}, 0.3);
  EXPECT_EQ(g.raw(0, 1), g.raw(0, 0));
}

TEST(GaussianGram, HandValueAtDistanceTwo) {
  const auto g = gaussian_gram(Matrix{{0.0}, {2.0}}, 1.0);
  const double oracle = 1.0 / std::sqrt(2.0 * M_PI) * std::exp(-2.0);
  EXPECT_NEAR(g.raw(0, 1), oracle, 1e-15);
  EXPECT_NEAR(g.raw(0, 1), 0.0539909665, 1e-10);
}

TEST(GaussianGram, MultivariateConstant) {
  const double sigma = 0.7;
  const auto g = gaussian_gram(Matrix{{0.0, 0.0, 0.0}}, sigma);
  EXPECT_NEAR(g.raw(0, 0), std::pow(2.0 * M_PI * sigma * sigma, -1.5), 1e-14);
}

TEST(GaussianGram, Errors) {
  EXPECT_THROW(gaussian_gram(Matrix{{1.0}}, 0.0), ParameterError);
  EXPECT_THROW(gaussian_gram(Matrix{{1.0}}, -1.0), ParameterError);
  EXPECT_THROW(gaussian_gram(Matrix(0, 2), 1.0), ParameterError);
  EXPECT_THROW(gaussian_gram(Matrix{{NAN}}, 1.0), DataError);
}

TEST(GaussianGram, SymmetricAndPermutationEquivariant) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = random_matrix(9, 3, rng);
    const auto g = gaussian_gram(x, 0.8);
    std::vector<std::size_t> perm(9);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(9, 3);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 3; ++j) xp(i, j) = x(perm[i], j);
    const auto gp = gaussian_gram(xp, 0.8);
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_GT(g.raw(i, i), 0.0);
      for (std::size_t j = 0; j < 9; ++j) {
        EXPECT_LE(std::abs(g.raw(i, j) - g.raw(j, i)), 1e-12);
        EXPECT_EQ(gp.raw(i, j), g.raw(perm[i], perm[j]));
      }
    }
  }
}

TEST(NormalizeGram, Examples) {
  EXPECT_EQ(normalized_gaussian_gram(Matrix{{3.0}}, 1.0).mat, (Matrix{{1.0}}));
  const auto same = normalized_gaussian_gram(Matrix{{1.0}, {1.0}, {1.0}}, 0.5);
  for (double v : same.mat.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  const double a = 2.0;
  const double c = 0.6;
  const auto n = normalize_gram(GramMatrix{Matrix{{a, c}, {c, a}}, 1.0});
  EXPECT_DOUBLE_EQ(n.mat(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(n.mat(0, 1), c / (2 * a));
  EXPECT_DOUBLE_EQ(n.mat(1, 0), c / (2 * a));
}

TEST(NormalizeGram, ZeroDiagonalIsDegenerate) {
  EXPECT_THROW(normalize_gram(GramMatrix{Matrix{{0.0, 0.0}, {0.0, 1.0}}, 1.0}), DegeneracyError);
}

TEST(NormalizeGram, UnitTraceAndBoundedEntries) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rng() % 40;
    const auto g = normalized_gaussian_gram(random_matrix(n, 1 + rng() % 5, rng), 0.05 + 0.01 * (rng() % 100));
    EXPECT_NEAR(trace(g.mat), 1.0, 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(g.mat(i, i), 1.0 / static_cast<double>(n));
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_LE(std::abs(g.mat(i, j)), 1.0 / static_cast<double>(n));
        EXPECT_EQ(g.mat(i, j), g.mat(j, i));
      }
    }
  }
}

TEST(Hadamard, Examples) {
  const Matrix eye4 = [] {
    Matrix m = Matrix::identity(4);
    for (double& v : m.values()) v *= 0.25;
    return m;
  }();
  EXPECT_EQ(hadamard_normalized(eye4, eye4), eye4);
  const Matrix h = hadamard_normalized(Matrix{{0.5, 0.1}, {0.1, 0.5}}, Matrix{{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_NEAR(h(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(h(0, 1), 0.1, 1e-15);
  EXPECT_NEAR(h(1, 0), 0.1, 1e-15);
  EXPECT_NEAR(h(1, 1), 0.5, 1e-15);
  EXPECT_THROW(hadamard_normalized(eye4, Matrix(4, 4)), DegeneracyError);
  EXPECT_THROW(hadamard_normalized(eye4, Matrix(3, 3)), ParameterError);
}

TEST(Hadamard, UnitTraceProperty) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng() % 20;
    const auto a = normalized_gaussian_gram(random_matrix(n, 2, rng), 0.5);
    const auto b = normalized_gaussian_gram(random_matrix(n, 3, rng), 1.5);
    EXPECT_NEAR(trace(hadamard_normalized(a.mat, b.mat)), 1.0, 1e-12);
  }
}

TEST(RidgeInverse, Examples) {
  EXPECT_EQ(ridge_inverse(Matrix::identity(3), 0.0), Matrix::identity(3));
  const Matrix inv = ridge_inverse(Matrix{{2, 0}, {0, 4}}, 0.0);
  EXPECT_DOUBLE_EQ(inv(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(inv(1, 1), 0.25);
  EXPECT_EQ(inv(0, 1), 0.0);
  const Matrix z = ridge_inverse(Matrix(2, 2), 1e-6);
  EXPECT_NEAR(z(0, 0), 1e6, 1e-6);
  EXPECT_NEAR(z(1, 1), 1e6, 1e-6);
  EXPECT_EQ(z(0, 1), 0.0);
}

TEST(RidgeInverse, Errors) {
  EXPECT_THROW(ridge_inverse(Matrix(2, 2), 0.0), SingularityError);
  EXPECT_THROW(ridge_inverse(Matrix{{1, 2}, {0, 1}}, 0.0), ParameterError);
  EXPECT_THROW(ridge_inverse(Matrix(2, 3), 0.0), ParameterError);
  EXPECT_THROW(ridge_inverse(Matrix::identity(2), -1.0), ParameterError);
}

TEST(RidgeInverse, RandomPsdComposesToIdentity) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = 1 + rng() % 32;
    // Rank-deficient PSD when fewer rows than columns.
    const Matrix a = random_matrix(1 + rng() % 40, k, rng);
    Matrix m = matmul_at(a, a);
    const double eps = 1e-2;
    const Matrix inv = ridge_inverse(m, eps);
    for (std::size_t i = 0; i < k; ++i) m(i, i) += eps;
    const Matrix prod = matmul(m, inv);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_NEAR(prod(i, j), i == j ? 1.0 : 0.0, 1e-8);
        EXPECT_NEAR(inv(i, j), inv(j, i), 1e-9);
      }
  }
}

TEST(QuadraticForm, Diagonal) {
  const std::vector<double> v{1.0, 1.0};
  EXPECT_DOUBLE_EQ(quadratic_form(Matrix{{4, 0}, {0, 1}}, v), 5.0);
}

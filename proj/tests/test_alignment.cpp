#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adalign/alignment.hpp"
#include "adalign/synthetic.hpp"

using namespace adalign;

namespace {

EmbeddingMatrix gaussian(Eigen::Index n, Eigen::Index d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return EmbeddingMatrix(std::move(m));
}

EmbeddingMatrix whitened(const EmbeddingMatrix& x) { return apply_whitening(x, fit_whitening(x, 0.0)); }

}  // namespace

TEST(Encoder, IdentityFixedLinearExternal) {
  const EmbeddingMatrix x = gaussian(5, 3, 1);
  EXPECT_EQ(apply_encoder(x, SharedEncoder::identity()).data(), x.data());
  EXPECT_EQ(apply_encoder(x, SharedEncoder::external()).data(), x.data());

  RowMatrix one(1, 2);
  one << 1, 1;
  const auto y = apply_encoder(EmbeddingMatrix(one), SharedEncoder::fixed_linear(2.0 * Matrix::Identity(2, 2)));
  EXPECT_EQ(y.data()(0, 0), 2.0);
  EXPECT_EQ(y.data()(0, 1), 2.0);

  Matrix w(2, 3);
  w << 1, 2, 3, -1, 0, 4;
  EXPECT_THROW(SharedEncoder::fixed_linear(w), Error);  // 2x3 cannot have full column rank
  Matrix w2(3, 2);
  w2 << 1, 2, 3, -1, 0, 4;
  const EmbeddingMatrix x2 = gaussian(4, 2, 2);
  const auto out = apply_encoder(x2, SharedEncoder::fixed_linear(w2));
  ASSERT_EQ(out.dims(), 3);
  for (int i = 0; i < 4; ++i)
    for (int r = 0; r < 3; ++r)
      EXPECT_NEAR(out.data()(i, r), w2(r, 0) * x2.data()(i, 0) + w2(r, 1) * x2.data()(i, 1), 1e-14);
  try {
    apply_encoder(x, SharedEncoder::fixed_linear(w2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(Covariance, SameDataGivesEqualBlocks) {
  const EmbeddingMatrix x = gaussian(300, 4, 3);
  const auto b = compute_covariances(x, x, RowAlignment::identity(300));
  ASSERT_TRUE(b.sigma12.has_value());
  EXPECT_LT((b.sigma11 - b.sigma22).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b.sigma11 - *b.sigma12).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(b.n_pairs, 300u);
}

TEST(Covariance, IndependentSamplesHaveSmallCross) {
  const auto b = compute_covariances(gaussian(100000, 3, 4), gaussian(100000, 3, 5), RowAlignment::identity(100000));
  EXPECT_LT(b.sigma12->cwiseAbs().maxCoeff(), 0.02);
}

TEST(Covariance, UnpairedPathAndInvariants) {
  const auto b = compute_covariances(gaussian(50, 3, 1), gaussian(70, 3, 2));
  EXPECT_FALSE(b.sigma12.has_value());
  EXPECT_EQ(b.sigma11.rows(), 3);
  for (const Matrix* s : {&b.sigma11, &b.sigma22}) {
    EXPECT_LT((*s - s->transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(*s).eigenvalues().minCoeff(), -1e-8);
  }
  try {
    alignment_fnorm(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingCrossCovariance);
  }
}

TEST(Covariance, DivisorIsN) {
  RowMatrix a(2, 1), c(2, 1);
  a << 1, 3;
  c << 2, 6;
  const auto b = compute_covariances(EmbeddingMatrix(a), EmbeddingMatrix(c), RowAlignment::identity(2));
  EXPECT_DOUBLE_EQ(b.sigma11(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(b.sigma22(0, 0), 4.0);
  EXPECT_DOUBLE_EQ((*b.sigma12)(0, 0), 2.0);
}

TEST(Covariance, Errors) {
  const auto x = gaussian(10, 3, 1);
  try {
    compute_covariances(x, gaussian(10, 4, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  try {
    compute_covariances(x, x, RowAlignment{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyPairing);
  }
}

TEST(AlignmentFnorm, IdenticalStandardisedViewsGiveZero) {
  const EmbeddingMatrix w = whitened(gaussian(500, 4, 8));
  EXPECT_LT(alignment_fnorm(compute_covariances(w, w, RowAlignment::identity(500))), 1e-8);
}

TEST(AlignmentFnorm, IndependentViewsNearSqrtD) {
  const auto b = compute_covariances(gaussian(200000, 16, 1), gaussian(200000, 16, 2), RowAlignment::identity(200000));
  EXPECT_NEAR(alignment_fnorm(b), 4.0, 0.1);
}

TEST(AlignmentFnorm, PermutedDimensions) {
  const EmbeddingMatrix w = whitened(gaussian(2000, 6, 3));
  // Swap dims 0<->1 and cycle 2->3->4->2; 5 dims moved.
  const std::vector<int> perm{1, 0, 3, 4, 2, 5};
  RowMatrix p(w.rows(), 6);
  for (int j = 0; j < 6; ++j) p.col(j) = w.data().col(perm[j]);
  const double f = alignment_fnorm(compute_covariances(w, EmbeddingMatrix(p), RowAlignment::identity(2000)));
  EXPECT_NEAR(f, std::sqrt(2.0 * 5.0), 1e-8);
}

TEST(AlignmentFnorm, InvariantToPerDimensionScaling) {
  const auto x = gaussian(1000, 4, 5);
  RowMatrix y = x.data() + 0.5 * gaussian(1000, 4, 6).data();
  const double f0 = alignment_fnorm(compute_covariances(x, EmbeddingMatrix(y), RowAlignment::identity(1000)));
  y.col(2) *= 3.0;
  RowMatrix xs = x.data();
  xs.col(0) *= 3.0;
  const double f1 =
      alignment_fnorm(compute_covariances(EmbeddingMatrix(xs), EmbeddingMatrix(y), RowAlignment::identity(1000)));
  EXPECT_LT(std::abs(f0 - f1), 1e-8);
}

TEST(AlignmentFnorm, AxisAlignedBeatsRotated) {
  const EmbeddingMatrix z = sample_sources(5000, 8, {}, 1);
  const Matrix rot = make_random_mixing(8, 8, 3);
  const SyntheticDataset aligned = generate_views(z, Matrix::Identity(8, 8), Matrix::Identity(8, 8), 0.1, 2);
  const SyntheticDataset rotated = generate_views(z, Matrix::Identity(8, 8), rot, 0.1, 2);
  const double fa = alignment_fnorm(compute_covariances(aligned.view_s, aligned.view_e, RowAlignment::identity(5000)));
  const double fr = alignment_fnorm(compute_covariances(rotated.view_s, rotated.view_e, RowAlignment::identity(5000)));
  EXPECT_LT(fa, fr);
}

TEST(AlignmentFnorm, ZeroVarianceDimension) {
  RowMatrix a = gaussian(20, 2, 1).data();
  a.col(1).setConstant(1.0);
  try {
    alignment_fnorm(compute_covariances(EmbeddingMatrix(a), gaussian(20, 2, 2), RowAlignment::identity(20)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroVarianceDimension);
  }
}

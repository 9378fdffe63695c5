#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "macekit/project.hpp"
#include "test_util.hpp"

namespace macekit {
namespace {

using testing::error_of;

Matrix clusters(std::uint64_t seed, int per_cluster, int d, double sep) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  Matrix x(3 * per_cluster, d);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      for (int j = 0; j < d; ++j) x(c * per_cluster + i, j) = z(gen) + (j == c ? sep : 0.0);
    }
  }
  return x;
}

TEST(Pca, RecoversDominantAxis) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  const int n = 200;
  Matrix x(n, 3);
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    t[i] = 5.0 * z(gen);
    const double u = 0.5 * z(gen);
    const double w = 0.01 * z(gen);
    x.row(i) << (t[i] + u) / std::sqrt(2.0), (t[i] - u) / std::sqrt(2.0), w;
  }
  const auto p = pca_2d(x);
  ASSERT_EQ(p.coords.rows(), n);
  ASSERT_EQ(p.coords.cols(), 2);
  const double tm = std::accumulate(t.begin(), t.end(), 0.0) / n;
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(p.coords(i, 0) - (t[i] - tm)));
  // The noise direction u is orthogonal, so only the tiny w leaks in.
  EXPECT_LT(err, 0.05);
  EXPECT_NEAR(p.coords.col(0).dot(p.coords.col(1)), 0.0, 1e-8 * n);
  EXPECT_GT(p.coords.col(0).squaredNorm(), p.coords.col(1).squaredNorm());
}

TEST(Pca, SignAndShiftInvariant) {
  const Matrix x = clusters(1, 20, 4, 3.0);
  const auto a = pca_2d(x);
  const auto b = pca_2d(x.rowwise() + Eigen::RowVectorXd::Constant(4, 10.0));
  EXPECT_LT((a.coords - b.coords).norm(), 1e-8);
  EXPECT_EQ(error_of([] { pca_2d(Matrix::Zero(2, 3)); }), Errc::TooFewSamples);
  EXPECT_EQ(error_of([&] { pca_2d(x, {"a"}); }), Errc::DimensionMismatch);
}

TEST(Perplexity, MatchesTargetEntropy) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (double perp : {2.0, 5.0, 30.0}) {
    std::vector<double> d(99);
    for (auto& v : d) v = u(gen);
    const auto fit = perplexity_calibration(d, perp);
    EXPECT_FALSE(fit.unachievable);
    EXPECT_NEAR(std::exp2(fit.entropy_bits), perp, perp * 1e-4);
    double sum = 0.0, h = 0.0;
    for (double p : fit.probabilities) {
      sum += p;
      if (p > 0) h -= p * std::log2(p);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_NEAR(h, fit.entropy_bits, 1e-9);
    // Closer neighbors get more mass.
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[i] < d[j]) EXPECT_GE(fit.probabilities[i], fit.probabilities[j]);
      }
    }
  }
}

TEST(Perplexity, Unachievable) {
  const std::vector<double> d{1.0, 2.0, 3.0};
  EXPECT_TRUE(perplexity_calibration(d, 10.0).unachievable);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(error_of([&] { perplexity_calibration(zeros, 2.0); }), Errc::DegenerateRow);
  EXPECT_EQ(error_of([&] { perplexity_calibration(d, 0.0); }), Errc::InvalidArgument);
}

TEST(JointProbabilities, SymmetricAndNormalized) {
  const Matrix x = clusters(2, 10, 3, 4.0);
  const Matrix p = joint_probabilities(x, 5.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_LT((p - p.transpose()).norm(), 1e-15);
  EXPECT_EQ(p.diagonal().norm(), 0.0);
  EXPECT_EQ(p, joint_probabilities(x, 5.0, 3));
}

TEST(KlGradient, MatchesFiniteDifferences) {
  const Matrix x = clusters(5, 4, 3, 2.0);
  const Matrix p = joint_probabilities(x, 3.0);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  Matrix y(x.rows(), 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = z(gen);
  const Matrix g = kl_gradient(p, y);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Matrix yp = y, ym = y;
    yp.data()[i] += h;
    ym.data()[i] -= h;
    const double numeric = (kl_divergence(p, yp) - kl_divergence(p, ym)) / (2 * h);
    EXPECT_NEAR(g.data()[i], numeric, 1e-6 * (1.0 + std::abs(numeric)));
  }
}

TEST(Tsne, ReducesDivergenceDeterministically) {
  const Matrix x = clusters(7, 50, 5, 6.0);
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  const auto a = tsne_2d(x, cfg);
  EXPECT_LT(a.final_kl, a.initial_kl);
  EXPECT_TRUE(a.projection.coords.allFinite());
  cfg.threads = 3;
  const auto b = tsne_2d(x, cfg);
  EXPECT_EQ(a.projection.coords, b.projection.coords);

  // Clusters stay apart: each point's nearest neighbor shares its cluster.
  const Matrix& y = a.projection.coords;
  int same = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::Index best = -1;
    double bd = INFINITY;
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      if (j == i) continue;
      const double d = (y.row(i) - y.row(j)).squaredNorm();
      if (d < bd) bd = d, best = j;
    }
    same += (best / 50 == i / 50);
  }
  EXPECT_GE(same, 140);
}

TEST(Tsne, Errors) {
  EXPECT_EQ(error_of([] { tsne_2d(Matrix::Random(9, 3)); }), Errc::TooFewSamples);
  TsneConfig cfg;
  cfg.perplexity = 30.0;
  EXPECT_EQ(error_of([&] { tsne_2d(Matrix::Random(60, 3), cfg); }), Errc::PerplexityTooLarge);
  cfg.perplexity = 5.0;
  cfg.learning_rate = 0.0;
  EXPECT_EQ(error_of([&] { tsne_2d(Matrix::Random(60, 3), cfg); }), Errc::InvalidArgument);
}

}  // namespace
}  // namespace macekit

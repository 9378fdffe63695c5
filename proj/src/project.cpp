#include "macekit/project.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "macekit/error.hpp"
#include "macekit/rng.hpp"
#include "macekit/stats.hpp"

namespace macekit {

namespace {

void check_labels(const std::vector<std::string>& labels, Eigen::Index n) {
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != n) {
    fail(Errc::DimensionMismatch, "label count differs from row count");
  }
}

}  // namespace

Projection2D pca_2d(const Matrix& x, std::vector<std::string> labels) {
  if (x.rows() < 3) fail(Errc::TooFewSamples, "PCA needs at least 3 rows");
  if (!x.allFinite()) fail(Errc::NonFiniteInput, "PCA input has non-finite entries");
  check_labels(labels, x.rows());

  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) fail(Errc::EigenFailure, "PCA eigensolver did not converge");

  Matrix axes = Matrix::Zero(x.cols(), 2);
  const Eigen::Index d = x.cols();
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, d); ++k) {
    Vector v = eig.eigenvectors().col(d - 1 - k);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    axes.col(k) = v;
  }
  return {centered * axes, std::move(labels)};
}

PerplexityFit perplexity_calibration(std::span<const double> sq_distances, double perplexity) {
  if (sq_distances.empty()) fail(Errc::DegenerateRow, "empty distance row");
  if (!(perplexity > 0.0)) fail(Errc::InvalidArgument, "perplexity must be positive");
  const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
  const double dmax = *std::max_element(sq_distances.begin(), sq_distances.end());
  if (!(dmax > 0.0)) fail(Errc::DegenerateRow, "all distances are zero");

  const double target = std::log2(perplexity);
  PerplexityFit fit;
  fit.probabilities.resize(sq_distances.size());

  auto evaluate = [&](double sigma) {
    const double scale = 1.0 / (2.0 * sigma * sigma);
    double sum = 0.0;
    for (std::size_t j = 0; j < sq_distances.size(); ++j) {
      fit.probabilities[j] = std::exp(-(sq_distances[j] - dmin) * scale);
      sum += fit.probabilities[j];
    }
    double h = 0.0;
    for (auto& p : fit.probabilities) {
      p /= sum;
      if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
  };

  double log_lo = std::log(1e-20), log_hi = std::log(1e20);
  double sigma = 1.0;
  double h = evaluate(sigma);
  for (int it = 0; it < 50 && std::abs(h - target) >= 1e-5; ++it) {
    // Entropy grows with sigma.
    (h < target ? log_lo : log_hi) = std::log(sigma);
    sigma = std::exp(0.5 * (log_lo + log_hi));
    h = evaluate(sigma);
  }
  fit.sigma = sigma;
  fit.entropy_bits = h;
  fit.unachievable = std::abs(h - target) >= 1e-5;
  return fit;
}

Matrix joint_probabilities(const Matrix& x, double perplexity, unsigned threads) {
  const Eigen::Index n = x.rows();
  const Vector norms = x.rowwise().squaredNorm();
  Matrix d2 = (norms.replicate(1, n) + norms.transpose().replicate(n, 1) - 2.0 * x * x.transpose()).cwiseMax(0.0);

  Matrix cond = Matrix::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist.push_back(d2(i, j));
    }
    const auto fit = perplexity_calibration(dist, perplexity);
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) cond(i, j) = fit.probabilities[k++];
    }
  });
  return (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
}

namespace {

// Unnormalized Student-t kernel; diagonal zero.
Matrix student_kernel(const Matrix& y) {
  const Eigen::Index n = y.rows();
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

}  // namespace

double kl_divergence(const Matrix& p, const Matrix& y) {
  const Matrix w = student_kernel(y);
  const double z = w.sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (i != j && p(i, j) > 0.0) kl += p(i, j) * std::log(p(i, j) / std::max(w(i, j) / z, 1e-300));
    }
  }
  return kl;
}

Matrix kl_gradient(const Matrix& p, const Matrix& y) {
  const Matrix w = student_kernel(y);
  const double z = w.sum();
  const Eigen::Index n = y.rows();
  Matrix grad = Matrix::Zero(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double mult = (p(i, j) - w(i, j) / z) * w(i, j);
      grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
    }
  }
  return grad;
}

TsneResult tsne_2d(const Matrix& x, const TsneConfig& cfg, std::vector<std::string> labels) {
  const Eigen::Index n = x.rows();
  if (n < 10) fail(Errc::TooFewSamples, "t-SNE needs at least 10 rows");
  if (n > 5000) fail(Errc::InvalidArgument, "exact t-SNE is limited to 5000 rows");
  if (!(cfg.perplexity > 1.0)) fail(Errc::InvalidArgument, "perplexity must exceed 1");
  if (!(cfg.perplexity < static_cast<double>(n) / 3.0)) {
    fail(Errc::PerplexityTooLarge, "perplexity must be below n/3 = " + std::to_string(static_cast<double>(n) / 3.0));
  }
  if (!(cfg.learning_rate > 0.0) || cfg.iterations < 0) fail(Errc::InvalidArgument, "invalid t-SNE schedule");
  check_labels(labels, n);

  const Matrix p = joint_probabilities(x, cfg.perplexity, cfg.threads);

  Matrix y = pca_2d(x).coords;
  const double sd0 = std::sqrt((y.col(0).array() - y.col(0).mean()).square().sum() / static_cast<double>(n - 1));
  if (sd0 > 0.0) {
    y *= 1e-4 / sd0;
  } else {
    y.setZero();
  }
  if (cfg.jitter > 0.0 || sd0 == 0.0) {
    CounterRng rng(cfg.seed, 0x7473'6e65ULL);
    const double amp = 1e-4 * (cfg.jitter > 0.0 ? cfg.jitter : 1.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] += amp * (2.0 * rng.uniform() - 1.0);
  }

  TsneResult out;
  out.initial_kl = kl_divergence(p, y);

  Matrix update = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  Matrix pe = p * cfg.exaggeration;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool exaggerated = iter < cfg.exaggeration_iters;
    const double momentum = iter < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    const Matrix grad = kl_gradient(exaggerated ? pe : p, y);
    for (Eigen::Index k = 0; k < grad.size(); ++k) {
      double& g = gains.data()[k];
      const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
      g = same_sign ? g * 0.8 : g + 0.2;
      g = std::max(g, 0.01);
      update.data()[k] = momentum * update.data()[k] - cfg.learning_rate * g * grad.data()[k];
    }
    y += update;
    y.rowwise() -= y.colwise().mean();
  }
  out.final_kl = kl_divergence(p, y);
  out.projection = {std::move(y), std::move(labels)};
  return out;
}

}  // namespace macekit

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "macekit/ingest.hpp"

namespace macekit {

struct Projection2D {
  Matrix coords;  // n x 2
  std::vector<std::string> labels;
};

// Scores on the top two principal axes of the centered data. Each axis is
// oriented so its first nonzero loading is positive.
Projection2D pca_2d(const Matrix& x, std::vector<std::string> labels = {});

struct PerplexityFit {
  double sigma = 0.0;
  double entropy_bits = 0.0;
  bool unachievable = false;
  std::vector<double> probabilities;  // conditional distribution over the row
};

// Bandwidth search for one row of squared distances (self excluded):
// geometric bisection on sigma over [1e-20, 1e20] until 2^H matches the
// perplexity (|H - log2 perplexity| < 1e-5) or 50 halvings are spent.
PerplexityFit perplexity_calibration(std::span<const double> sq_distances, double perplexity);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  std::uint64_t seed = 17;
  // Optional seeded perturbation of the PCA start, as a fraction of its scale.
  double jitter = 0.0;
  // Threads for the affinity computation; the descent loop is sequential.
  unsigned threads = 1;
};

struct TsneResult {
  Projection2D projection;
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

// Symmetrized joint affinities P = (P_cond + P_cond^T) / 2n.
Matrix joint_probabilities(const Matrix& x, double perplexity, unsigned threads = 1);

// KL(P || Q) for the Student-t similarities Q of the layout y (n x 2).
double kl_divergence(const Matrix& p, const Matrix& y);
Matrix kl_gradient(const Matrix& p, const Matrix& y);

// Exact O(n^2) t-SNE; intended for n <= 5000.
TsneResult tsne_2d(const Matrix& x, const TsneConfig& cfg = {}, std::vector<std::string> labels = {});

}  // namespace macekit

#pragma once

#include <cstdint>
#include <vector>

#include "macekit/ingest.hpp"
#include "macekit/stats.hpp"

namespace macekit {

// Gaussian fit of an embedding collection.
struct GaussianMoments {
  Vector mean;
  Matrix cov;  // symmetric, regularized
  Eigen::Index n = 0;

  Eigen::Index d() const { return mean.size(); }
};

// Squared Frechet distance between the Gaussian fits of two collections.
struct MaceScore {
  double value = 0.0;
  Eigen::Index d = 0;
  Eigen::Index n_a = 0;
  Eigen::Index n_b = 0;
  // Set when either side has fewer samples than dimensions; the estimate then
  // leans on the covariance regularizer.
  bool undersampled = false;
};

// Covariance regularizer: cov += eps * I with eps = kCovRidge * max(trace/d, 1e-30).
inline constexpr double kCovRidge = 1e-6;

GaussianMoments fit_gaussian(const Matrix& rows);
inline GaussianMoments fit_gaussian(const EmbeddingSet& set) { return fit_gaussian(set.matrix); }

// Principal square root of a symmetric positive semidefinite matrix.
// Eigenvalues below -1e-10 * trace/d are treated as a real failure; smaller
// negative rounding residue is clamped to zero.
Matrix matrix_sqrt_psd(const Matrix& s);

MaceScore frechet_distance(const GaussianMoments& a, const GaussianMoments& b);

MaceScore mace_between(const Matrix& a, const Matrix& b);
inline MaceScore mace_between(const EmbeddingSet& a, const EmbeddingSet& b) {
  return mace_between(a.matrix, b.matrix);
}

// Row indices per resampling unit. Video units group rows by the video id of
// their keys; sets without keys fall back to single rows.
std::vector<std::vector<Eigen::Index>> resampling_units(const EmbeddingSet& set, ResampleUnit unit);

struct MaceBootstrap {
  MaceScore score;              // on the full sets
  std::vector<double> samples;  // one value per resample
};

// Resamples units of `a` on stream `stream_a` and of `b` on `stream_b`.
MaceBootstrap bootstrap_mace(const EmbeddingSet& a, const EmbeddingSet& b, const BootstrapConfig& cfg,
                             std::uint64_t stream_a = 0, std::uint64_t stream_b = 1);

}  // namespace macekit

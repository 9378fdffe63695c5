#include "macekit/mace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Eigenvalues>

#include "macekit/error.hpp"

namespace macekit {

GaussianMoments fit_gaussian(const Matrix& rows) {
  if (rows.rows() < 2) fail(Errc::TooFewSamples, "need at least 2 rows, got " + std::to_string(rows.rows()));
  if (!rows.allFinite()) fail(Errc::NonFiniteInput, "embedding matrix has non-finite entries");

  GaussianMoments g;
  g.n = rows.rows();
  g.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - g.mean.transpose();
  Matrix c = (centered.transpose() * centered) / static_cast<double>(g.n - 1);
  c = 0.5 * (c + c.transpose());
  const double eps = kCovRidge * std::max(c.trace() / static_cast<double>(c.rows()), 1e-30);
  c.diagonal().array() += eps;
  g.cov = std::move(c);
  return g;
}

Matrix matrix_sqrt_psd(const Matrix& s) {
  if (s.rows() != s.cols()) fail(Errc::DimensionMismatch, "matrix is not square");
  if (s.size() == 0) return s;
  const double scale = s.norm();
  if (!s.allFinite()) fail(Errc::NonFiniteInput, "matrix has non-finite entries");
  if ((s - s.transpose()).norm() > 1e-9 * scale) fail(Errc::NotSymmetric, "asymmetry exceeds 1e-9 relative");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success) fail(Errc::EigenFailure, "symmetric eigensolver did not converge");

  const auto& lambda = eig.eigenvalues();
  const double d = static_cast<double>(s.rows());
  // Floor at the solver's own rounding level so tiny-trace inputs dominated by
  // one large eigenvalue are not rejected spuriously.
  const double rounding = d * std::numeric_limits<double>::epsilon() * lambda.cwiseAbs().maxCoeff();
  const double tol = std::max(1e-10 * std::abs(s.trace()) / d, rounding);
  if (lambda.minCoeff() < -tol) {
    fail(Errc::EigenFailure, "eigenvalue " + std::to_string(lambda.minCoeff()) + " is materially negative");
  }
  const Vector root = lambda.cwiseMax(0.0).cwiseSqrt();
  Matrix r = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

MaceScore frechet_distance(const GaussianMoments& a, const GaussianMoments& b) {
  if (a.d() != b.d()) {
    fail(Errc::DimensionMismatch, "dimensions " + std::to_string(a.d()) + " and " + std::to_string(b.d()));
  }
  const Matrix root_a = matrix_sqrt_psd(a.cov);
  Matrix inner = root_a * b.cov * root_a;
  inner = 0.5 * (inner + inner.transpose());
  const double cross = matrix_sqrt_psd(inner).trace();

  MaceScore score;
  score.d = a.d();
  score.n_a = a.n;
  score.n_b = b.n;
  score.undersampled = a.n < a.d() || b.n < b.d();
  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross;
  score.value = std::max(0.0, mean_term + std::max(0.0, trace_term));
  return score;
}

MaceScore mace_between(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(Errc::DimensionMismatch, "dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.cols()));
  }
  return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

std::vector<std::vector<Eigen::Index>> resampling_units(const EmbeddingSet& set, ResampleUnit unit) {
  std::vector<std::vector<Eigen::Index>> units;
  if (unit == ResampleUnit::Frame || set.keys.empty()) {
    units.resize(static_cast<std::size_t>(set.n()));
    for (Eigen::Index i = 0; i < set.n(); ++i) units[static_cast<std::size_t>(i)].push_back(i);
    return units;
  }
  std::map<std::string, std::size_t> slot;
  for (Eigen::Index i = 0; i < set.n(); ++i) {
    const auto& vid = set.keys[static_cast<std::size_t>(i)].video_id;
    auto [it, fresh] = slot.try_emplace(vid, units.size());
    if (fresh) units.emplace_back();
    units[it->second].push_back(i);
  }
  return units;
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::vector<Eigen::Index>>& units,
                   std::span<const std::size_t> picks) {
  Eigen::Index rows = 0;
  for (std::size_t u : picks) rows += static_cast<Eigen::Index>(units[u].size());
  Matrix out(rows, m.cols());
  Eigen::Index r = 0;
  for (std::size_t u : picks) {
    for (Eigen::Index i : units[u]) out.row(r++) = m.row(i);
  }
  return out;
}

}  // namespace

MaceBootstrap bootstrap_mace(const EmbeddingSet& a, const EmbeddingSet& b, const BootstrapConfig& cfg,
                             std::uint64_t stream_a, std::uint64_t stream_b) {
  MaceBootstrap out;
  out.score = mace_between(a, b);
  const auto units_a = resampling_units(a, cfg.unit);
  const auto units_b = resampling_units(b, cfg.unit);
  auto result = bootstrap_map<double>(cfg, [&](std::size_t r) -> std::optional<double> {
    const auto pick_a = resample_units(units_a.size(), cfg, r, stream_a);
    const auto pick_b = resample_units(units_b.size(), cfg, r, stream_b);
    const Matrix ra = gather_rows(a.matrix, units_a, pick_a);
    const Matrix rb = gather_rows(b.matrix, units_b, pick_b);
    if (ra.rows() < 2 || rb.rows() < 2) return std::nullopt;
    return mace_between(ra, rb).value;
  });
  out.samples = std::move(result.values);
  return out;
}

}  // namespace macekit

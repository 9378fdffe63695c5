#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "macekit/error.hpp"

namespace macekit {

// Resampling unit for embedding bootstraps: whole videos, or single frames.
enum class ResampleUnit { Video, Frame };

struct BootstrapConfig {
  std::size_t n_resamples = 1000;
  std::uint64_t seed = 17;
  ResampleUnit unit = ResampleUnit::Video;
  // Worker threads for resample evaluation; results do not depend on it.
  unsigned threads = 1;
};

enum class Decision { Reject, FailToReject };
std::string_view to_string(Decision d) noexcept;

inline constexpr double kPValueFloor = 1e-8;
inline constexpr double kDefaultMargin = 0.015;

struct TestResult {
  double statistic = 0.0;
  // Clamped to kPValueFloor when the tail is smaller; see p_floored.
  double p_value = 1.0;
  bool p_floored = false;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  Decision decision = Decision::FailToReject;
  std::optional<double> margin;
  double mean = 0.0;  // bootstrap mean of the tested quantity
};

// Unit indices for resample `resample_idx`, drawn with replacement from a
// generator keyed by (cfg.seed, resample_idx, stream). `stream` separates
// independent resampling of distinct datasets under one seed.
std::vector<std::size_t> resample_units(std::size_t n_units, const BootstrapConfig& cfg, std::size_t resample_idx,
                                        std::uint64_t stream = 0);

template <typename T>
struct BootstrapOutput {
  std::vector<T> values;  // in resample order, NotEstimable resamples omitted
  std::size_t dropped = 0;
};

// Runs fn(i) for i in [0, n) on `threads` workers; fn must be pure.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

// Evaluates `fn(resample_idx)` for every resample. An empty optional marks a
// NotEstimable resample; more than half dropped raises TooFewValidResamples.
template <typename T, typename Fn>
BootstrapOutput<T> bootstrap_map(const BootstrapConfig& cfg, Fn&& fn) {
  if (cfg.n_resamples < 2) fail(Errc::InvalidArgument, "n_resamples must be >= 2");
  std::vector<std::optional<T>> slots(cfg.n_resamples);
  parallel_for(cfg.n_resamples, cfg.threads, [&](std::size_t i) { slots[i] = fn(i); });
  BootstrapOutput<T> out;
  out.values.reserve(slots.size());
  for (auto& s : slots) {
    if (s) {
      out.values.push_back(std::move(*s));
    } else {
      ++out.dropped;
    }
  }
  if (2 * out.dropped > cfg.n_resamples) {
    fail(Errc::TooFewValidResamples,
         std::to_string(out.dropped) + " of " + std::to_string(cfg.n_resamples) + " resamples not estimable");
  }
  return out;
}

using UnitStatistic = std::function<std::optional<double>(std::span<const std::size_t> units)>;

BootstrapOutput<double> bootstrap_distribution(const UnitStatistic& stat_fn, std::size_t n_units,
                                               const BootstrapConfig& cfg);

// Type-7 quantile (linear interpolation at 1 + q(n-1) on the sorted sample).
double quantile(std::span<const double> samples, double q);
std::pair<double, double> percentile_ci(std::span<const double> samples, double level);

double sample_mean(std::span<const double> x);
double sample_variance(std::span<const double> x);  // n - 1 denominator

// Two-sided z-test on the difference of two bootstrap distributions.
TestResult z_test_two_sided(std::span<const double> samples_a, std::span<const double> samples_b,
                            double alpha = 0.05);

// One-sided tests on bootstrap differences (positive favours the candidate).
// Decisions use the lower `alpha` percentile; the normal-tail p is advisory.
// ci = (q_alpha, q_{1-alpha}).
TestResult superiority_one_sided(std::span<const double> delta_samples, double alpha = 0.05);
TestResult non_inferiority(std::span<const double> delta_samples, double margin = kDefaultMargin,
                           double alpha = 0.05);

// Upper normal tail P(Z > z).
double normal_upper_tail(double z);

}  // namespace macekit

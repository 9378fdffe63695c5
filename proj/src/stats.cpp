#include "macekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "macekit/rng.hpp"

namespace macekit {

std::string_view to_string(Decision d) noexcept { return d == Decision::Reject ? "Reject" : "FailToReject"; }

std::vector<std::size_t> resample_units(std::size_t n_units, const BootstrapConfig& cfg, std::size_t resample_idx,
                                        std::uint64_t stream) {
  if (n_units == 0) fail(Errc::InvalidArgument, "cannot resample zero units");
  CounterRng rng(cfg.seed, resample_idx, stream);
  std::vector<std::size_t> out(n_units);
  for (auto& u : out) u = static_cast<std::size_t>(rng.below(n_units));
  return out;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

BootstrapOutput<double> bootstrap_distribution(const UnitStatistic& stat_fn, std::size_t n_units,
                                               const BootstrapConfig& cfg) {
  return bootstrap_map<double>(cfg, [&](std::size_t i) { return stat_fn(resample_units(n_units, cfg, i)); });
}

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) fail(Errc::EmptySamples, "quantile of an empty sample");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::pair<double, double> percentile_ci(std::span<const double> samples, double level) {
  if (samples.size() < 2) fail(Errc::EmptySamples, "percentile CI needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) fail(Errc::InvalidArgument, "level must lie in (0,1)");
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, tail), quantile(samples, 1.0 - tail)};
}

double sample_mean(std::span<const double> x) {
  if (x.empty()) fail(Errc::EmptySamples, "mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

void set_p(TestResult& r, double p) {
  if (!(p >= kPValueFloor)) {
    r.p_value = kPValueFloor;
    r.p_floored = true;
  } else {
    r.p_value = std::min(p, 1.0);
  }
}

// mean / sd with the degenerate-spread convention: zero spread gives +-inf
// for a nonzero numerator and 0 otherwise.
double ratio(double num, double sd) {
  if (sd > 0.0) return num / sd;
  if (num > 0.0) return std::numeric_limits<double>::infinity();
  if (num < 0.0) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

// Quantile of the normal distribution by bisection on erfc; only used for
// the z-test interval.
double normal_quantile_upper(double alpha) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_upper_tail(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TestResult z_test_two_sided(std::span<const double> samples_a, std::span<const double> samples_b, double alpha) {
  if (samples_a.empty() || samples_b.empty()) fail(Errc::EmptySamples, "z-test needs nonempty samples");
  TestResult r;
  const double diff = sample_mean(samples_a) - sample_mean(samples_b);
  const double sd = std::sqrt(sample_variance(samples_a) + sample_variance(samples_b));
  r.mean = diff;
  r.statistic = ratio(diff, sd);
  set_p(r, 2.0 * normal_upper_tail(std::abs(r.statistic)));
  const double half = normal_quantile_upper(alpha / 2.0) * sd;
  r.ci_lo = diff - half;
  r.ci_hi = diff + half;
  if (sd > 0.0) {
    r.decision = 2.0 * normal_upper_tail(std::abs(r.statistic)) < alpha ? Decision::Reject : Decision::FailToReject;
  } else {
    r.decision = diff != 0.0 ? Decision::Reject : Decision::FailToReject;
  }
  return r;
}

TestResult superiority_one_sided(std::span<const double> delta_samples, double alpha) {
  if (delta_samples.empty()) fail(Errc::EmptySamples, "superiority test needs samples");
  TestResult r;
  r.mean = sample_mean(delta_samples);
  r.statistic = ratio(r.mean, std::sqrt(sample_variance(delta_samples)));
  set_p(r, normal_upper_tail(r.statistic));
  r.ci_lo = quantile(delta_samples, alpha);
  r.ci_hi = quantile(delta_samples, 1.0 - alpha);
  r.decision = r.ci_lo > 0.0 ? Decision::Reject : Decision::FailToReject;
  return r;
}

TestResult non_inferiority(std::span<const double> delta_samples, double margin, double alpha) {
  if (delta_samples.empty()) fail(Errc::EmptySamples, "non-inferiority test needs samples");
  if (!(margin > 0.0)) fail(Errc::InvalidArgument, "margin must be > 0");
  TestResult r;
  r.margin = margin;
  r.mean = sample_mean(delta_samples);
  r.statistic = ratio(r.mean + margin, std::sqrt(sample_variance(delta_samples)));
  set_p(r, normal_upper_tail(r.statistic));
  r.ci_lo = quantile(delta_samples, alpha);
  r.ci_hi = quantile(delta_samples, 1.0 - alpha);
  r.decision = r.ci_lo > -margin ? Decision::Reject : Decision::FailToReject;
  return r;
}

}  // namespace macekit

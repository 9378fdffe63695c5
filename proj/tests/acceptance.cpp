// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <unistd.h>

#include "macekit/cli.hpp"
#include "macekit/deteval.hpp"
#include "macekit/error.hpp"
#include "macekit/ingest.hpp"
#include "macekit/mace.hpp"
#include "macekit/project.hpp"
#include "macekit/stats.hpp"
#include "macekit/synth.hpp"

namespace fs = std::filesystem;
using namespace macekit;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::string t = (fs::temp_directory_path() / "macekit-accept-XXXXXX").string();
    if (mkdtemp(t.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = t;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---- MACE -----------------------------------------------------------------

GroupSpec diag_group(std::string name, Vector mean, Vector var, Eigen::Index n) {
  GroupSpec g;
  g.name = std::move(name);
  g.mean = std::move(mean);
  g.var = std::move(var);
  g.n = n;
  return g;
}

// Two d=8 diagonal groups with seeded means and variances.
std::pair<GroupSpec, GroupSpec> reference_pair(Eigen::Index n) {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> z(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Vector ma(8), mb(8), va(8), vb(8);
  for (int i = 0; i < 8; ++i) {
    ma(i) = z(gen);
    mb(i) = z(gen);
    va(i) = u(gen);
    vb(i) = u(gen);
  }
  return {diag_group("A", ma, va, n), diag_group("B", mb, vb, n)};
}

double reference_value() {
  const auto [a, b] = reference_pair(2);
  return planted_mace(a, b);
}

Verdict mace_closed_form() {
  const auto [a, b] = reference_pair(50000);
  ShiftScenario s;
  s.groups = {a, b};
  s.seed = 1;
  const auto sets = gen_embeddings(s);
  const auto t0 = Clock::now();
  const double got = mace_between(sets.at("A").matrix, sets.at("B").matrix).value;
  const double secs = seconds_since(t0);
  const double expect = planted_mace(a, b);
  const double rel = std::abs(got - expect) / expect;
  return {rel < 0.05 && secs < 10.0, fmt("mace=%.5f closed_form=%.5f rel_err=%.4f time=%.3fs", got, expect, rel, secs)};
}

Verdict mace_self_distance() {
  const auto [a, b] = reference_pair(50000);
  const double moment = frechet_distance(spec_moments(a), spec_moments(a)).value;
  ShiftScenario s;
  auto a2 = a;
  a2.name = "A2";
  s.groups = {a, a2};
  s.seed = 2;
  const auto sets = gen_embeddings(s);
  const auto fitted = fit_gaussian(sets.at("A").matrix);
  const double fitted_self = frechet_distance(fitted, fitted).value;
  const double sampled = mace_between(sets.at("A").matrix, sets.at("A2").matrix).value;
  const double ref = reference_value();
  const bool pass = moment < 1e-8 && fitted_self < 1e-8 && sampled < 0.02 * ref;
  return {pass, fmt("moment=%.2e fitted=%.2e sampled=%.5f (%.3f%% of reference)", moment, fitted_self, sampled,
                    100.0 * sampled / ref)};
}

Matrix random_orthogonal(std::mt19937_64& gen, Eigen::Index d) {
  std::normal_distribution<double> z;
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = z(gen);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Sign fix makes Q Haar distributed.
  for (Eigen::Index i = 0; i < d; ++i) {
    if (qr.matrixQR()(i, i) < 0) q.col(i) *= -1.0;
  }
  return q;
}

Verdict rotation_invariance() {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> dims(2, 64);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = trial == 0 ? 64 : dims(gen);
    const Eigen::Index n = 4 * d + 50;
    Matrix a(n, d), b(n, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(gen);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.5 + 1.5 * z(gen);
    // Correlate the columns so the covariances are not diagonal.
    Matrix mix = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] += 0.3 * z(gen) / std::sqrt(static_cast<double>(d));
    a = a * mix;
    const Matrix q = random_orthogonal(gen, d);
    const double base = mace_between(a, b).value;
    const double rotated = mace_between(a * q, b * q).value;
    worst = std::max(worst, std::abs(rotated - base) / base);
  }
  return {worst < 1e-8, fmt("worst relative change %.2e over 20 trials", worst)};
}

Verdict matrix_sqrt() {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<int> dims(1, 64);
  std::normal_distribution<double> z;
  double worst = 0.0;
  int deficient = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = trial == 0 ? 64 : dims(gen);
    // Every fourth matrix is rank deficient.
    const Eigen::Index r = trial % 4 == 3 ? std::max<Eigen::Index>(1, d / 2) : d + 3;
    if (r < d) ++deficient;
    Matrix g(d, r);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = z(gen);
    const Matrix s = g * g.transpose();
    const Matrix root = matrix_sqrt_psd(s);
    worst = std::max(worst, (root * root - s).norm() / s.norm());
  }
  return {worst < 1e-6, fmt("worst relative Frobenius error %.2e (100 matrices, %.0f rank deficient)", worst, deficient)};
}

// ---- median filter --------------------------------------------------------

Flags brute_force_filter(const Flags& in, int window, int votes) {
  const int n = static_cast<int>(in.size()), half = window / 2;
  Flags out(in.size(), 0);
  for (int i = 0; i < n; ++i) {
    int c = 0;
    for (int j = i - half; j <= i + half; ++j) c += (j >= 0 && j < n && in[static_cast<std::size_t>(j)]) ? 1 : 0;
    out[static_cast<std::size_t>(i)] = c >= votes ? 1 : 0;
  }
  return out;
}

Verdict median_filter_oracle() {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> len(0, 500);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  const int windows[] = {1, 3, 5, 7, 9};
  std::size_t checks = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int window = windows[trial % 5];
    const double p = density(gen);
    Flags s(static_cast<std::size_t>(len(gen)));
    for (auto& v : s) v = density(gen) < p ? 1 : 0;
    for (int votes = 1; votes <= window; ++votes) {
      ++checks;
      if (median_filter(s, FilterConfig{window, votes, 0.5}) != brute_force_filter(s, window, votes)) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%.0f stream/vote combinations, %.0f mismatches", static_cast<double>(checks),
                               static_cast<double>(mismatches))};
}

// ---- detection ------------------------------------------------------------

Verdict planted_detector() {
  DetectorScenario s;
  s.n_videos = 400;
  s.minutes_per_video = 5.0;
  s.polyps_min = 8;
  s.polyps_max = 16;
  s.hit = {0.8, 0.8, 0.8};
  s.fa_per_minute = 0.5;
  s.seed = 606;
  const auto g = gen_detection_bundle(s);
  const auto table = EvalTable::build(g.bundle, {FilterConfig{7, 4, 0.5}}, MatchConfig{}, {}, false, 4);
  const auto t = table.totals(table.all_videos(), 0);
  const double tpr = static_cast<double>(t.detected) / static_cast<double>(t.polyps);
  const double fapm = static_cast<double>(t.fa_events) / t.minutes;
  const bool pass = t.minutes >= 1000.0 && std::abs(tpr - 0.8) <= 0.02 && std::abs(fapm - 0.5) <= 0.05;
  return {pass, fmt("minutes=%.0f polyps=%.0f tpr=%.4f fapm=%.4f", t.minutes, static_cast<double>(t.polyps), tpr, fapm)};
}

DetectorScenario trial_scenario(std::uint64_t seed, double hit) {
  DetectorScenario s;
  s.n_videos = 50;
  s.minutes_per_video = 2.0;
  s.polyps_min = 3;
  s.polyps_max = 6;
  s.hit = {hit, hit, hit};
  s.seed = seed;
  return s;
}

Verdict bootstrap_coverage() {
  const auto t0 = Clock::now();
  const FilterConfig fixed{7, 4, 0.5};
  int covered = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const auto g = gen_detection_bundle(trial_scenario(1000 + static_cast<std::uint64_t>(trial), 0.8));
    const auto table = EvalTable::build(g.bundle, {fixed}, MatchConfig{});
    BootstrapConfig cfg;
    cfg.n_resamples = 200;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto boot = bootstrap_map<double>(cfg, [&](std::size_t i) -> std::optional<double> {
      const auto t = table.totals(resample_units(table.n_videos(), cfg, i), 0);
      if (t.polyps == 0) return std::nullopt;
      return static_cast<double>(t.detected) / static_cast<double>(t.polyps);
    });
    const auto [lo, hi] = percentile_ci(boot.values, 0.95);
    if (lo <= 0.8 && 0.8 <= hi) ++covered;
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(covered) / trials;
  return {rate >= 0.90 && secs < 300.0, fmt("coverage=%.3f over %.0f trials, time=%.1fs", rate, trials, secs)};
}

std::vector<FilterConfig> reduced_sweep() {
  std::vector<FilterConfig> sweep;
  for (int votes = 1; votes <= 7; votes += 2) {
    for (int k = 5; k <= 9; ++k) sweep.push_back({7, votes, k / 10.0});
  }
  return sweep;
}

Verdict non_inferiority_behavior() {
  const auto t0 = Clock::now();
  const auto sweep = reduced_sweep();
  const std::vector<double> points{1.0};
  int identical_ni = 0, deficit_rejected = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    auto base = trial_scenario(5000 + static_cast<std::uint64_t>(trial), 0.8);
    base.n_videos = 500;
    base.polyps_min = 14;
    base.polyps_max = 18;
    auto worse = base;
    worse.seed += 100000;
    worse.hit = {0.7, 0.7, 0.7};
    const auto a = gen_detection_bundle(base).bundle;
    const auto b = gen_detection_bundle(worse).bundle;
    BootstrapConfig cfg;
    cfg.n_resamples = 200;
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.threads = 4;
    const auto same = compare_datasets(a, a, points, cfg, CompareMode::NonInferiority, 0.015, sweep);
    const auto lower = compare_datasets(a, b, points, cfg, CompareMode::NonInferiority, 0.015, sweep);
    if (same[0].decision == Decision::Reject) ++identical_ni;
    if (lower[0].decision == Decision::FailToReject) ++deficit_rejected;
  }
  const bool pass = identical_ni >= 95 && deficit_rejected >= 95;
  return {pass, fmt("identical: non-inferior in %.0f/100; 0.10 deficit: non-inferiority rejected in %.0f/100; "
                    "time=%.1fs",
                    identical_ni, deficit_rejected, seconds_since(t0))};
}

// ---- MACE ordering --------------------------------------------------------

Verdict mace_ordering() {
  const Eigen::Index d = 16;
  int ok_runs = 0;
  std::string first_failure;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ShiftScenario s;
    s.seed = seed;
    const std::pair<const char*, double> groups[] = {{"REF", 0.0}, {"WL", 0.5}, {"NBI", 1.0}, {"CE", 1.5}};
    for (const auto& [name, shift] : groups) {
      auto g = diag_group(name, Vector::Constant(d, shift / 4.0), Vector::Constant(d, 1.0 + shift), 2000);
      g.frames_per_unit = 10;
      s.groups.push_back(g);
    }
    const auto sets = gen_embeddings(s);
    BootstrapConfig cfg;
    cfg.n_resamples = 1000;
    cfg.seed = seed;
    cfg.threads = 4;
    std::vector<MaceBootstrap> boots;
    for (std::size_t i = 0; i < 3; ++i) boots.push_back(bootstrap_mace(sets.at("REF"), sets.at(groups[i + 1].first), cfg, 0, 1 + i));
    const bool ordered = boots[2].score.value > boots[1].score.value && boots[1].score.value > boots[0].score.value;
    bool all_reject = true;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = i + 1; j < 3; ++j) {
        all_reject = all_reject && z_test_two_sided(boots[i].samples, boots[j].samples).decision == Decision::Reject;
      }
    }
    if (ordered && all_reject) {
      ++ok_runs;
    } else if (first_failure.empty()) {
      first_failure = " first failure at seed " + std::to_string(seed);
    }
  }
  return {ok_runs == 20, fmt("CE > NBI > WL with all z-tests rejecting in %.0f/20 runs", ok_runs) + first_failure};
}

// ---- t-SNE ----------------------------------------------------------------

double silhouette(const Matrix& y, const std::vector<int>& label) {
  const Eigen::Index n = y.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double sum[2] = {0, 0};
    int cnt[2] = {0, 0};
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const int l = label[static_cast<std::size_t>(j)];
      sum[l] += (y.row(i) - y.row(j)).norm();
      ++cnt[l];
    }
    const int own = label[static_cast<std::size_t>(i)];
    const double a = sum[own] / cnt[own], b = sum[1 - own] / cnt[1 - own];
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

Verdict tsne_sanity() {
  std::mt19937_64 gen(10);
  std::normal_distribution<double> z;
  const Eigen::Index n = 500, d = 10;
  Matrix x(n, d);
  std::vector<int> label(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    label[static_cast<std::size_t>(i)] = i < n / 2 ? 0 : 1;
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = z(gen) + (label[static_cast<std::size_t>(i)] == 1 && j < 2 ? 4.0 : 0.0);
  }
  TsneConfig cfg;
  cfg.threads = 1;
  const auto t0 = Clock::now();
  const auto one = tsne_2d(x, cfg);
  const double secs = seconds_since(t0);
  cfg.threads = 4;
  const auto four = tsne_2d(x, cfg);
  const bool same = one.projection.coords == four.projection.coords;
  const double sil = silhouette(one.projection.coords, label);
  const bool pass = one.final_kl < one.initial_kl && same && sil > 0.5 && secs < 60.0;
  return {pass, fmt("kl %.4f -> %.4f, silhouette=%.3f, time=%.1fs", one.initial_kl, one.final_kl, sil, secs) +
                    (same ? ", identical across 1 and 4 threads" : ", DIFFERS across threads")};
}

// ---- end to end -----------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict end_to_end_determinism() {
  ScratchDir dir;
  std::ofstream(dir.path() / "scenario.json") << R"({
    "detection": {"n_videos": 30, "minutes_per_video": 2.0, "p_nbi": 0.3, "p_ce": 0.2},
    "embeddings": {"dim": 8, "groups": [
      {"name": "ref", "n": 600, "frames_per_unit": 20},
      {"name": "wl", "n": 600, "frames_per_unit": 20, "mean": 0.1},
      {"name": "nbi", "n": 600, "frames_per_unit": 20, "mean": 0.3},
      {"name": "ce", "n": 600, "frames_per_unit": 20, "mean": 0.6}]}
  })";
  const std::vector<std::string> reports{"synth.json", "eval.json", "curve.csv", "mace_test.json", "mace_test.csv"};
  std::vector<std::string> runs[2];
  for (int r = 0; r < 2; ++r) {
    const auto root = dir.path() / ("run" + std::to_string(r));
    const std::string out = root.string(), threads = r == 0 ? "1" : "3";
    if (run_cli({"--seed", "42", "--out", out, "synth", "--scenario", (dir.path() / "scenario.json").string()}) != 0 ||
        run_cli({"--seed", "42", "--resamples", "300", "--threads", threads, "--out", out, "eval", "--data",
                 (root / "bundle").string()}) != 0 ||
        run_cli({"--seed", "42", "--resamples", "300", "--threads", threads, "--out", out, "mace-test", "--ref",
                 (root / "embeddings" / "ref.mace").string(), "--group", "WL=" + (root / "embeddings" / "wl.mace").string(),
                 "--group", "NBI=" + (root / "embeddings" / "nbi.mace").string(), "--group",
                 "CE=" + (root / "embeddings" / "ce.mace").string()}) != 0) {
      return {false, "pipeline run " + std::to_string(r) + " failed"};
    }
    for (const auto& f : reports) runs[r].push_back(slurp(root / f));
  }
  std::string differing;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (runs[0][i].empty() || runs[0][i] != runs[1][i]) differing += " " + reports[i];
  }
  if (!differing.empty()) return {false, "reports differ:" + differing};
  return {true, std::to_string(reports.size()) + " reports byte-identical across two runs (1 vs 3 threads)"};
}

// ---- format fidelity ------------------------------------------------------

std::vector<std::byte> sample_file(std::mt19937_64& gen, std::uint32_t n, std::uint32_t d) {
  EmbeddingSet s;
  s.matrix.resize(n, d);
  std::normal_distribution<float> z;
  for (Eigen::Index i = 0; i < s.matrix.size(); ++i) s.matrix.data()[i] = z(gen);
  return write_embeddings(s);
}

void put_u32(std::vector<std::byte>& b, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b[at + static_cast<std::size_t>(k)] = static_cast<std::byte>((v >> (8 * k)) & 0xFF);
}

struct Malformed {
  std::vector<std::byte> bytes;
  Errc expected;
};

// Every corpus entry is invalid by construction and names the error it must raise.
std::vector<Malformed> malformed_corpus() {
  std::mt19937_64 gen(12);
  std::vector<Malformed> out;
  for (int k = 0; k < 50; ++k) {
    const auto n = static_cast<std::uint32_t>(2 + gen() % 20), d = static_cast<std::uint32_t>(1 + gen() % 12);
    auto b = sample_file(gen, n, d);
    const std::size_t payload = static_cast<std::size_t>(n) * d * 4;
    switch (k % 10) {
      case 0:  // corrupted magic byte
        b[gen() % 4] ^= std::byte{static_cast<unsigned char>(1 + gen() % 255)};
        out.push_back({b, Errc::BadMagic});
        break;
      case 1:  // cut inside the header
        b.resize(4 + gen() % 12);
        out.push_back({b, Errc::TruncatedPayload});
        break;
      case 2:  // cut inside the payload
        b.resize(16 + gen() % payload);
        out.push_back({b, Errc::TruncatedPayload});
        break;
      case 3:  // trailing garbage
        for (std::size_t i = 0, extra = 1 + gen() % 7; i < extra; ++i) b.push_back(std::byte{0x5A});
        out.push_back({b, Errc::TruncatedPayload});
        break;
      case 4:  // unknown version
        b[4] = std::byte{static_cast<unsigned char>(2 + gen() % 250)};
        out.push_back({b, Errc::VersionUnsupported});
        break;
      case 5:  // reserved field set
        b[6 + gen() % 2] = std::byte{static_cast<unsigned char>(1 + gen() % 255)};
        out.push_back({b, Errc::VersionUnsupported});
        break;
      case 6:  // n inflated
        put_u32(b, 8, n + 1 + static_cast<std::uint32_t>(gen() % 1000));
        out.push_back({b, Errc::TruncatedPayload});
        break;
      case 7:  // d = 0
        put_u32(b, 12, 0);
        out.push_back({b, Errc::BadHeader});
        break;
      case 8: {  // NaN or infinity in the payload
        const std::size_t at = 16 + 4 * (gen() % (payload / 4));
        put_u32(b, at, gen() % 2 ? 0x7FC00000u : 0xFF800000u);
        out.push_back({b, Errc::NonFiniteValue});
        break;
      }
      default:  // huge header dimensions
        put_u32(b, 8, 0xFFFFFFFFu);
        put_u32(b, 12, 0xFFFFFFFFu);
        out.push_back({b, Errc::TruncatedPayload});
        break;
    }
  }
  return out;
}

Verdict format_fidelity() {
  ScratchDir dir;
  std::mt19937_64 gen(3);
  int exact = 0;
  for (int k = 0; k < 20; ++k) {
    const auto bytes = sample_file(gen, static_cast<std::uint32_t>(gen() % 50), static_cast<std::uint32_t>(1 + gen() % 64));
    const auto path = dir.path() / ("ok" + std::to_string(k) + ".mace");
    write_file_bytes(path, bytes);
    const auto set = read_embeddings(path);
    save_embeddings(set, dir.path() / "copy.mace");
    if (read_file_bytes(dir.path() / "copy.mace") == bytes && write_embeddings(set) == bytes) ++exact;
  }

  const auto corpus = malformed_corpus();
  int named = 0;
  std::string first_problem;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto path = dir.path() / ("bad" + std::to_string(k) + ".mace");
    write_file_bytes(path, corpus[k].bytes);
    std::string problem;
    try {
      load_embedding_set(path);
      problem = "accepted";
    } catch (const Error& e) {
      if (e.code() == corpus[k].expected) {
        ++named;
      } else {
        problem = std::string("raised ") + std::string(to_string(e.code())) + ", expected " +
                  std::string(to_string(corpus[k].expected));
      }
    } catch (const std::exception& e) {
      problem = std::string("unnamed exception: ") + e.what();
    }
    if (!problem.empty() && first_problem.empty()) first_problem = "; file " + std::to_string(k) + " " + problem;
  }
  const bool pass = exact == 20 && named == static_cast<int>(corpus.size()) && corpus.size() == 50;
  return {pass, fmt("%.0f/20 byte-exact round trips, %.0f/%.0f malformed files raised the expected named error", exact,
                    named, static_cast<double>(corpus.size())) +
                    first_problem};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"mace_closed_form", mace_closed_form},
      {"mace_self_distance", mace_self_distance},
      {"rotation_invariance", rotation_invariance},
      {"matrix_sqrt_reconstruction", matrix_sqrt},
      {"median_filter_oracle", median_filter_oracle},
      {"planted_detector_recovery", planted_detector},
      {"bootstrap_coverage", bootstrap_coverage},
      {"non_inferiority_behavior", non_inferiority_behavior},
      {"mace_ordering_test", mace_ordering},
      {"tsne_sanity", tsne_sanity},
      {"end_to_end_determinism", end_to_end_determinism},
      {"format_fidelity", format_fidelity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << (i + 1) << " " << criteria[i].first << " (" << v.detail << ")"
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}

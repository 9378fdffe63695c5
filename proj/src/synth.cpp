#include "macekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "macekit/error.hpp"
#include "macekit/rng.hpp"

namespace macekit {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Stream tags under the scenario seed.
constexpr std::uint64_t kEmbeddingStream = 0x454D4244;  // "EMBD"
constexpr std::uint64_t kVideoStream = 0x5649444F;      // "VIDO"
// Frames kept free around every alarm; wider than any median window in use.
constexpr std::int64_t kAlarmGap = 16;

std::int64_t uniform_int(CounterRng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double uniform_real(CounterRng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

// ---- embeddings -----------------------------------------------------------

void validate(const ShiftScenario& scenario) {
  for (const auto& g : scenario.groups) {
    if (g.name.empty()) fail(Errc::InvalidArgument, "embedding group without name");
    if (g.n < 2) fail(Errc::InvalidArgument, "group " + g.name + " needs n >= 2");
    if (g.frames_per_unit < 1) fail(Errc::InvalidArgument, "group " + g.name + ": frames_per_unit must be >= 1");
    const auto d = g.mean.size();
    if (d < 1) fail(Errc::InvalidArgument, "group " + g.name + " has empty mean");
    if (g.cov) {
      if (g.cov->rows() != d || g.cov->cols() != d) fail(Errc::DimensionMismatch, "group " + g.name + ": covariance shape");
      Eigen::LLT<Matrix> llt(*g.cov);
      if (llt.info() != Eigen::Success) fail(Errc::InvalidArgument, "group " + g.name + ": covariance not positive definite");
    } else {
      if (g.var.size() != d) fail(Errc::DimensionMismatch, "group " + g.name + ": variance length");
      if ((g.var.array() < 0.0).any()) fail(Errc::InvalidArgument, "group " + g.name + ": negative variance");
    }
    if (d != scenario.groups.front().mean.size()) fail(Errc::DimensionMismatch, "groups differ in dimension");
  }
}

std::map<std::string, EmbeddingSet> gen_embeddings(const ShiftScenario& scenario) {
  validate(scenario);
  std::map<std::string, EmbeddingSet> out;
  for (std::size_t gi = 0; gi < scenario.groups.size(); ++gi) {
    const auto& g = scenario.groups[gi];
    const auto d = g.mean.size();
    Matrix factor = g.cov ? Matrix(Eigen::LLT<Matrix>(*g.cov).matrixL()) : Matrix(g.var.cwiseSqrt().asDiagonal());
    CounterRng rng(scenario.seed, kEmbeddingStream, gi);
    std::normal_distribution<double> normal;
    EmbeddingSet set;
    set.matrix.resize(g.n, d);
    Vector z(d);
    for (Eigen::Index i = 0; i < g.n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
      // Stored at float32 precision so the in-memory set equals its file form.
      set.matrix.row(i) = (g.mean + factor * z).cast<float>().cast<double>().transpose();
      set.keys.push_back({g.name + "-u" + std::to_string(i / g.frames_per_unit), i % g.frames_per_unit});
    }
    if (!out.emplace(g.name, std::move(set)).second) fail(Errc::DuplicateKey, "embedding group " + g.name);
  }
  return out;
}

GaussianMoments spec_moments(const GroupSpec& spec) {
  GaussianMoments m;
  m.mean = spec.mean;
  m.cov = spec.cov ? *spec.cov : Matrix(spec.var.asDiagonal());
  m.n = spec.n;
  return m;
}

double planted_mace(const GroupSpec& a, const GroupSpec& b) {
  if (a.cov || b.cov) fail(Errc::InvalidArgument, "closed form needs diagonal covariances");
  if (a.mean.size() != b.mean.size()) fail(Errc::DimensionMismatch, "group dimensions differ");
  return (a.mean - b.mean).squaredNorm() + (a.var.cwiseSqrt() - b.var.cwiseSqrt()).squaredNorm();
}

// ---- detection bundles ----------------------------------------------------

void validate(const DetectorScenario& s) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (s.n_videos < 1) fail(Errc::InvalidArgument, "n_videos must be >= 1");
  if (!(s.fps > 0.0) || !(s.minutes_per_video > 0.0)) fail(Errc::InvalidArgument, "fps and minutes must be > 0");
  if (s.polyps_min < 0 || s.polyps_max < s.polyps_min) fail(Errc::InvalidArgument, "invalid polyp count range");
  if (s.track_min_frames < 1 || s.track_max_frames < s.track_min_frames) {
    fail(Errc::InvalidArgument, "invalid track length range");
  }
  if (!prob(s.p_ce) || !prob(s.p_nbi) || s.p_ce + s.p_nbi > 1.0) fail(Errc::InvalidArgument, "invalid modality mix");
  if (!prob(s.coverage_min) || !prob(s.coverage_max) || s.coverage_max < s.coverage_min) {
    fail(Errc::InvalidArgument, "invalid coverage range");
  }
  if (!prob(s.hit.wl) || !prob(s.hit.nbi) || !prob(s.hit.ce)) fail(Errc::InvalidArgument, "hit probability outside [0,1]");
  if (!(s.fa_per_minute >= 0.0)) fail(Errc::InvalidArgument, "false-alarm rate must be >= 0");
  if (s.fa_min_frames < 1 || s.fa_max_frames < s.fa_min_frames) fail(Errc::InvalidArgument, "invalid alarm length range");
  if (s.outside_frames < 0) fail(Errc::InvalidArgument, "outside_frames must be >= 0");
  if (!(s.box_size > 0.0 && s.box_size <= 0.4)) fail(Errc::InvalidArgument, "box_size must lie in (0, 0.4]");
}

namespace {

Box clamp_box(double x0, double y0, double size) {
  x0 = std::clamp(x0, 0.0, 1.0 - size);
  y0 = std::clamp(y0, 0.0, 1.0 - size);
  return {x0, y0, x0 + size, y0 + size};
}

// Detector boxes live in the right half, GT boxes in the left half, so a
// mislocalized or spurious box never overlaps ground truth.
Box spurious_box(CounterRng& rng, double size) {
  return clamp_box(uniform_real(rng, 0.55, 1.0 - size), uniform_real(rng, 0.0, 1.0 - size), size);
}

}  // namespace

SyntheticBundle gen_detection_bundle(const DetectorScenario& s) {
  validate(s);
  SyntheticBundle out;
  BundleParts parts;
  const int width = std::max(3, static_cast<int>(std::to_string(s.n_videos - 1).size()));

  for (int v = 0; v < s.n_videos; ++v) {
    CounterRng rng(s.seed, kVideoStream, static_cast<std::uint64_t>(v));
    const std::string digits = std::to_string(v);
    const std::string vid =
        s.video_prefix + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, digits.size()), '0') + digits;
    const auto n_frames = std::max<std::int64_t>(1, std::llround(s.minutes_per_video * 60.0 * s.fps));
    parts.videos.push_back({vid, s.fps, n_frames, s.site});

    std::int64_t in_begin = s.outside_frames, in_end = n_frames - s.outside_frames;
    if (in_end - in_begin < s.track_max_frames) {
      in_begin = 0;
      in_end = n_frames;
    }
    std::map<std::int64_t, FrameMeta> metas;
    auto meta = [&](std::int64_t f) -> FrameMeta& {
      auto [it, inserted] = metas.try_emplace(f);
      if (inserted) {
        it->second.key = {vid, f};
        it->second.ce = false;
      }
      return it->second;
    };
    for (std::int64_t f = 0; f < n_frames; ++f) {
      if (f < in_begin || f >= in_end) meta(f).inside_body = false;
    }

    std::map<std::int64_t, std::vector<ScoredBox>> dets;
    auto emit = [&](std::int64_t f, const Box& b, double score) { dets[f].push_back({b, score}); };

    // Frame intervals [begin, end) already holding a polyp or an alarm.
    std::vector<std::pair<std::int64_t, std::int64_t>> busy;

    // Polyps occupy disjoint segments of the inside-body span.
    const auto n_polyps = uniform_int(rng, s.polyps_min, s.polyps_max);
    const std::int64_t span = in_end - in_begin;
    const bool segmented = n_polyps > 0 && span / n_polyps >= s.track_max_frames;
    for (std::int64_t p = 0; p < n_polyps; ++p) {
      const auto len = std::min<std::int64_t>(uniform_int(rng, s.track_min_frames, s.track_max_frames), span);
      std::int64_t seg_begin = in_begin, seg_end = in_end;
      if (segmented) {
        seg_begin = in_begin + p * (span / n_polyps);
        seg_end = seg_begin + span / n_polyps;
      }
      const auto start = uniform_int(rng, seg_begin, seg_end - len);
      busy.emplace_back(start, start + len);

      PolypTrack track;
      track.polyp_id = vid + "-p" + std::to_string(p);
      track.video_id = vid;
      const Box gt = clamp_box(uniform_real(rng, 0.0, 0.45 - s.box_size),
                               uniform_real(rng, 0.0, 1.0 - s.box_size), s.box_size);

      const double u = rng.uniform();
      const int modality = u < s.p_ce ? 2 : (u < s.p_ce + s.p_nbi ? 1 : 0);
      const double coverage = uniform_real(rng, s.coverage_min, s.coverage_max);
      const auto flagged = modality == 0 ? 0 : std::max<std::int64_t>(1, std::llround(coverage * static_cast<double>(len)));
      const auto flag_start = start + uniform_int(rng, 0, len - flagged);

      const double hit_p = modality == 2 ? s.hit.ce : (modality == 1 ? s.hit.nbi : s.hit.wl);
      const bool hit = rng.uniform() < hit_p;
      const double score = hit ? (s.graded_scores ? uniform_real(rng, 0.5, 1.0) : 0.9) : uniform_real(rng, 0.05, 0.45);
      const Box miss_box = spurious_box(rng, s.box_size);
      if (hit) ++out.planted_hits;

      for (std::int64_t f = start; f < start + len; ++f) {
        track.visible_frames.push_back({f, {track.polyp_id, gt}});
        auto& m = meta(f);
        m.polyp_ids.push_back(track.polyp_id);
        const bool in_modality = f >= flag_start && f < flag_start + flagged;
        if (in_modality) m.nbi = true;
        const bool ce = in_modality && modality == 2;
        if (s.ce_from_pixels) {
          m.ce.reset();
          out.pixel_frames[{vid, f}] = ce;
        } else if (ce) {
          m.ce = true;
        }
        if (hit) {
          const double dx = uniform_real(rng, -0.1, 0.1) * s.box_size;
          const double dy = uniform_real(rng, -0.1, 0.1) * s.box_size;
          emit(f, clamp_box(gt.x0 + dx, gt.y0 + dy, s.box_size), score);
        } else if (s.miss_boxes) {
          emit(f, miss_box, score);
        }
      }
      parts.tracks.push_back(std::move(track));
    }

    // Spurious alarm runs arrive as a Poisson process over the whole video.
    // Each is placed away from polyp tracks and earlier alarms so that it
    // survives evaluation as exactly one event.
    std::poisson_distribution<int> poisson(s.fa_per_minute * static_cast<double>(n_frames) / (60.0 * s.fps));
    const int n_alarms = s.fa_per_minute > 0.0 ? poisson(rng) : 0;
    for (int a = 0; a < n_alarms; ++a) {
      const auto len = std::min<std::int64_t>(uniform_int(rng, s.fa_min_frames, s.fa_max_frames), in_end - in_begin);
      std::int64_t start = -1;
      for (int attempt = 0; attempt < 100 && start < 0; ++attempt) {
        const auto candidate = uniform_int(rng, in_begin, in_end - len);
        const bool clear = std::none_of(busy.begin(), busy.end(), [&](const auto& iv) {
          return candidate < iv.second + kAlarmGap && iv.first < candidate + len + kAlarmGap;
        });
        if (clear) start = candidate;
      }
      const double score = s.graded_scores ? uniform_real(rng, 0.5, 1.0) : 0.9;
      const Box b = spurious_box(rng, s.box_size);
      if (start < 0) continue;
      busy.emplace_back(start, start + len);
      for (std::int64_t f = start; f < start + len; ++f) emit(f, b, score);
      ++out.planted_fa_events;
    }

    for (auto& [f, m] : metas) parts.frames.push_back(std::move(m));
    for (auto& [f, boxes] : dets) parts.detections.emplace(FrameKey{vid, f}, std::move(boxes));
  }
  out.bundle = validate_bundle(std::move(parts));
  return out;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Frame render_ce_fixture(bool ce, std::uint64_t seed, int width, int height) {
  Frame frame{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width * height * 3))};
  CounterRng rng(seed);
  // Dye share well above / well below the default 5% decision fraction.
  const double dye_share = ce ? 0.6 : 0.0;
  for (int i = 0; i < width * height; ++i) {
    const bool dye = rng.uniform() < dye_share;
    const auto rgb = dye ? hsv_to_rgb(uniform_real(rng, 215.0, 245.0), uniform_real(rng, 0.5, 0.9), uniform_real(rng, 0.4, 0.8))
                         : hsv_to_rgb(uniform_real(rng, 0.0, 25.0), uniform_real(rng, 0.3, 0.7), uniform_real(rng, 0.5, 0.9));
    for (int c = 0; c < 3; ++c) frame.rgb[static_cast<std::size_t>(i * 3 + c)] = static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
  }
  return frame;
}

// ---- scenario files -------------------------------------------------------

namespace {

template <typename T>
void read_opt(const json& obj, const char* name, T& field) {
  if (!obj.contains(name)) return;
  try {
    field = obj.at(name).get<T>();
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, std::string("scenario field \"") + name + "\": " + e.what());
  }
}

Vector read_vector(const json& v, Eigen::Index dim, const char* what) {
  if (v.is_number()) return Vector::Constant(dim, v.get<double>());
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != dim) {
    fail(Errc::InvalidArgument, std::string("scenario: \"") + what + "\" must be a number or an array of length dim");
  }
  Vector out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) out(i) = v[static_cast<std::size_t>(i)].get<double>();
  return out;
}

ShiftScenario parse_shift(const json& obj, std::uint64_t seed) {
  ShiftScenario s;
  s.seed = seed;
  read_opt(obj, "seed", s.seed);
  Eigen::Index dim = 0;
  read_opt(obj, "dim", dim);
  if (dim < 1) fail(Errc::InvalidArgument, "scenario: embeddings.dim must be >= 1");
  if (!obj.contains("groups") || !obj["groups"].is_array()) fail(Errc::InvalidArgument, "scenario: embeddings.groups");
  for (const auto& gj : obj["groups"]) {
    GroupSpec g;
    read_opt(gj, "name", g.name);
    read_opt(gj, "n", g.n);
    read_opt(gj, "frames_per_unit", g.frames_per_unit);
    g.mean = gj.contains("mean") ? read_vector(gj["mean"], dim, "mean") : Vector::Zero(dim);
    g.var = gj.contains("var") ? read_vector(gj["var"], dim, "var") : Vector::Ones(dim);
    s.groups.push_back(std::move(g));
  }
  validate(s);
  return s;
}

DetectorScenario parse_detector(const json& obj, std::uint64_t seed) {
  DetectorScenario s;
  s.seed = seed;
  read_opt(obj, "seed", s.seed);
  read_opt(obj, "video_prefix", s.video_prefix);
  read_opt(obj, "site", s.site);
  read_opt(obj, "n_videos", s.n_videos);
  read_opt(obj, "fps", s.fps);
  read_opt(obj, "minutes_per_video", s.minutes_per_video);
  read_opt(obj, "polyps_min", s.polyps_min);
  read_opt(obj, "polyps_max", s.polyps_max);
  read_opt(obj, "track_min_frames", s.track_min_frames);
  read_opt(obj, "track_max_frames", s.track_max_frames);
  read_opt(obj, "p_ce", s.p_ce);
  read_opt(obj, "p_nbi", s.p_nbi);
  read_opt(obj, "coverage_min", s.coverage_min);
  read_opt(obj, "coverage_max", s.coverage_max);
  if (obj.contains("hit")) {
    const auto& h = obj["hit"];
    if (h.is_number()) {
      s.hit = {h.get<double>(), h.get<double>(), h.get<double>()};
    } else {
      read_opt(h, "wl", s.hit.wl);
      read_opt(h, "nbi", s.hit.nbi);
      read_opt(h, "ce", s.hit.ce);
    }
  }
  read_opt(obj, "fa_per_minute", s.fa_per_minute);
  read_opt(obj, "fa_min_frames", s.fa_min_frames);
  read_opt(obj, "fa_max_frames", s.fa_max_frames);
  read_opt(obj, "outside_frames", s.outside_frames);
  read_opt(obj, "box_size", s.box_size);
  read_opt(obj, "graded_scores", s.graded_scores);
  read_opt(obj, "miss_boxes", s.miss_boxes);
  read_opt(obj, "ce_from_pixels", s.ce_from_pixels);
  validate(s);
  return s;
}

}  // namespace

SynthScenario parse_synth_scenario(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(Errc::InvalidArgument, std::string("scenario: ") + e.what());
  }
  if (!obj.is_object()) fail(Errc::InvalidArgument, "scenario must be a JSON object");
  SynthScenario s;
  read_opt(obj, "seed", s.seed);
  if (obj.contains("detection")) s.detection = parse_detector(obj["detection"], s.seed);
  if (obj.contains("embeddings")) s.embeddings = parse_shift(obj["embeddings"], s.seed);
  if (!s.detection && !s.embeddings) fail(Errc::InvalidArgument, "scenario has neither detection nor embeddings");
  return s;
}

void write_synth_tree(const SynthScenario& scenario, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  if (scenario.detection) {
    const auto gen = gen_detection_bundle(*scenario.detection);
    write_bundle(gen.bundle, out_dir / "bundle");
    std::uint64_t counter = 0;
    for (const auto& [key, ce] : gen.pixel_frames) {
      const auto path = frame_path(out_dir / "frames", key);
      fs::create_directories(path.parent_path());
      const auto fixture_seed = derive_key(scenario.detection->seed, 0x505045ULL, counter++);
      write_file_bytes(path, write_ppm(render_ce_fixture(ce, fixture_seed)));
    }
  }
  if (scenario.embeddings) {
    fs::create_directories(out_dir / "embeddings");
    for (const auto& [name, set] : gen_embeddings(*scenario.embeddings)) {
      save_embeddings(set, out_dir / "embeddings" / (name + ".mace"));
    }
  }
}

}  // namespace macekit

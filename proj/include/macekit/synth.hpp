#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macekit/ingest.hpp"
#include "macekit/mace.hpp"
#include "macekit/modality.hpp"

namespace macekit {

// ---- embeddings -----------------------------------------------------------

struct GroupSpec {
  std::string name;
  Vector mean;
  Vector var;                // diagonal covariance, used when `cov` is empty
  std::optional<Matrix> cov;  // full covariance
  Eigen::Index n = 0;
  // Consecutive rows sharing one synthetic video id, the resampling unit.
  Eigen::Index frames_per_unit = 1;
};

struct ShiftScenario {
  std::vector<GroupSpec> groups;
  std::uint64_t seed = 17;
};

void validate(const ShiftScenario& scenario);

// Keys are ("<group>-u<k>", row within unit).
std::map<std::string, EmbeddingSet> gen_embeddings(const ShiftScenario& scenario);

// Exact moments of a spec (no regularizer).
GaussianMoments spec_moments(const GroupSpec& spec);

// sum (mu_a - mu_b)^2 + sum (sqrt(var_a) - sqrt(var_b))^2; diagonal specs only.
double planted_mace(const GroupSpec& a, const GroupSpec& b);

// ---- detection bundles ----------------------------------------------------

struct HitProbability {
  double wl = 0.8;
  double nbi = 0.8;
  double ce = 0.8;
};

struct DetectorScenario {
  std::string video_prefix = "v";
  std::string site = "synthetic";
  int n_videos = 20;
  double fps = 30.0;
  double minutes_per_video = 5.0;
  int polyps_min = 1;
  int polyps_max = 3;
  int track_min_frames = 30;
  int track_max_frames = 120;
  // Probability that a polyp is seen under CE (else NBI, else whitelight).
  double p_ce = 0.0;
  double p_nbi = 0.0;
  // Share of a modality polyp's visible frames carrying the modality.
  double coverage_min = 0.2;
  double coverage_max = 1.0;
  HitProbability hit;
  // Alarm runs avoid polyp tracks and each other, so each counts as one event.
  double fa_per_minute = 0.5;
  int fa_min_frames = 8;
  int fa_max_frames = 30;
  int outside_frames = 150;  // at each end of a video
  double box_size = 0.15;
  // One score per polyp / alarm from U(0.5, 1); otherwise a fixed 0.9.
  bool graded_scores = true;
  // Missed polyps get mislocalized boxes scored below 0.5.
  bool miss_boxes = true;
  // Leave "ce" unset on polyp frames and provide pixel fixtures instead.
  bool ce_from_pixels = false;
  std::uint64_t seed = 17;
};

void validate(const DetectorScenario& scenario);

struct SyntheticBundle {
  DatasetBundle bundle;
  // Frames whose CE flag must come from pixels, with the planted truth.
  std::map<FrameKey, bool> pixel_frames;
  std::int64_t planted_hits = 0;
  std::int64_t planted_fa_events = 0;
};

SyntheticBundle gen_detection_bundle(const DetectorScenario& scenario);

// (h, s, v) with h in degrees to RGB channels in [0,1].
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// Small two-tone frame: CE fixtures are dominated by dye-blue pixels, others
// by tissue tones.
Frame render_ce_fixture(bool ce, std::uint64_t seed, int width = 16, int height = 12);

// ---- scenario files -------------------------------------------------------

struct SynthScenario {
  std::uint64_t seed = 17;
  std::optional<DetectorScenario> detection;
  std::optional<ShiftScenario> embeddings;
};

SynthScenario parse_synth_scenario(std::string_view json_text);

// Writes bundle/, embeddings/ and frames/ under `out_dir`.
void write_synth_tree(const SynthScenario& scenario, const std::filesystem::path& out_dir);

}  // namespace macekit

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "macekit/ingest.hpp"
#include "macekit/stats.hpp"

namespace macekit {

using Flags = std::vector<std::uint8_t>;

// Majority vote over a centered window of per-frame detection indicators.
struct FilterConfig {
  int window = 7;
  int votes = 4;
  double score_threshold = 0.5;

  auto operator<=>(const FilterConfig&) const = default;
};

void validate(const FilterConfig& cfg);

struct MatchConfig {
  double iou_threshold = 0.2;
};

struct CurvePoint {
  double fapm = 0.0;
  double tpr = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

// Points strictly increasing in fapm with increasing tpr (Pareto upper envelope).
using Curve = std::vector<CurvePoint>;

// ---- per-frame pipeline (one video, frames in index order) ----------------

struct BinarizedFrames {
  Flags positive;
  std::vector<std::vector<ScoredBox>> retained;
};

// A frame is positive iff it is inside the body and has a box scoring >= t.
BinarizedFrames binarize_frames(std::span<const std::vector<ScoredBox>> dets, std::span<const std::uint8_t> inside,
                                double score_threshold);

// out[i] = 1 iff at least `votes` ones fall in the window centered at i;
// positions outside the stream count as zero.
Flags median_filter(std::span<const std::uint8_t> stream, const FilterConfig& cfg);

// Retained boxes on frames the filter kept; other frames carry no boxes.
std::vector<std::vector<ScoredBox>> filtered_boxes(const BinarizedFrames& frames, std::span<const std::uint8_t> keep);

double iou(const Box& a, const Box& b);

// `filtered` is indexed by frame_idx of the track's video.
bool polyp_detected(const PolypTrack& track, std::span<const std::vector<ScoredBox>> filtered, const MatchConfig& m);

// Number of maximal runs of consecutive false-positive frames; a frame is
// false-positive when it keeps a box and none of its boxes matches a GT box.
std::int64_t false_alarm_events(std::span<const std::vector<ScoredBox>> filtered, std::span<const std::vector<Box>> gt,
                                const MatchConfig& m);

// ---- dataset evaluation ---------------------------------------------------

struct VideoCounts {
  std::int64_t detected = 0;
  std::int64_t polyps = 0;
  std::int64_t fa_events = 0;
  double minutes = 0.0;

  VideoCounts& operator+=(const VideoCounts& o) {
    detected += o.detected;
    polyps += o.polyps;
    fa_events += o.fa_events;
    minutes += o.minutes;
    return *this;
  }
  bool operator==(const VideoCounts&) const = default;
};

// Polyp eligibility for cohort evaluation; empty means every polyp counts.
using PolypFilter = std::function<bool(const PolypTrack&)>;

// Dense per-video arrays for the frame pipeline above.
struct DenseVideo {
  std::int64_t n_frames = 0;
  double minutes = 0.0;
  Flags inside;
  std::vector<std::vector<ScoredBox>> dets;
  std::vector<std::vector<Box>> gt;
  std::vector<const PolypTrack*> tracks;
};

DenseVideo dense_video(const DatasetBundle& bundle, const std::string& video_id);

// Reference composition of binarize -> filter -> match over dense arrays.
VideoCounts evaluate_video_dense(const DenseVideo& video, const FilterConfig& f, const MatchConfig& m,
                                 const PolypFilter& eligible = {});

// Sparse evaluator: precomputes match scores once per video so that each
// filter configuration costs O(frames with boxes).
class VideoEvaluator {
 public:
  VideoEvaluator(const DatasetBundle& bundle, const std::string& video_id, const MatchConfig& m,
                 const PolypFilter& eligible = {});

  VideoCounts counts(const FilterConfig& f) const;
  std::int64_t eligible_polyps() const { return eligible_polyps_; }

 private:
  struct BoxFrame {
    std::int64_t idx = 0;
    double max_score = -1.0;
    double matched_score = -1.0;
    std::vector<std::pair<std::size_t, double>> polyp_scores;  // (eligible track slot, best matching score)
  };
  std::vector<BoxFrame> frames_;  // inside-body frames with boxes, sorted by idx
  std::int64_t eligible_polyps_ = 0;
  double minutes_ = 0.0;
};

struct TprFapm {
  double tpr = 0.0;
  double fapm = 0.0;
  VideoCounts totals;
};

// Aggregates counts (with multiplicity); NotEstimable without polyps,
// ZeroDuration without minutes.
TprFapm rates(const VideoCounts& totals);

// `videos` may repeat ids; each occurrence counts.
TprFapm dataset_tpr_fapm(const DatasetBundle& bundle, std::span<const std::string> videos, const FilterConfig& f,
                         const MatchConfig& m);

// window 7, votes 1..7, thresholds k/50 for k = 1..50.
std::vector<FilterConfig> default_sweep(int window = 7);

Curve make_envelope(std::vector<CurvePoint> points);

Curve build_curve(const DatasetBundle& bundle, std::span<const std::string> videos, std::span<const FilterConfig> sweep,
                  const MatchConfig& m);

struct InterpolatedTpr {
  double tpr = 0.0;
  bool clamped = false;
};

InterpolatedTpr tpr_at_fapm(const Curve& curve, double target_fapm);

// Per-video x per-configuration count table; resampled curves are sums of rows.
class EvalTable {
 public:
  // With `exclude_videos_without_eligible`, videos holding no eligible polyp
  // contribute neither polyps nor alarms nor minutes.
  static EvalTable build(const DatasetBundle& bundle, std::vector<FilterConfig> sweep, const MatchConfig& m,
                         const PolypFilter& eligible = {}, bool exclude_videos_without_eligible = false,
                         unsigned threads = 1);

  std::size_t n_videos() const { return video_ids_.size(); }
  std::size_t n_configs() const { return sweep_.size(); }
  const std::vector<std::string>& video_ids() const { return video_ids_; }
  const std::vector<FilterConfig>& sweep() const { return sweep_; }
  bool included(std::size_t video) const { return included_[video] != 0; }
  const VideoCounts& at(std::size_t video, std::size_t config) const { return cells_[video * sweep_.size() + config]; }

  // Totals for config `c` over a video multiset (indices into video_ids()).
  VideoCounts totals(std::span<const std::size_t> videos, std::size_t config) const;
  // Empty when the multiset holds no eligible polyp.
  std::optional<Curve> curve(std::span<const std::size_t> videos) const;
  std::optional<Curve> curve() const;
  std::vector<std::size_t> all_videos() const;

 private:
  std::vector<std::string> video_ids_;
  std::vector<FilterConfig> sweep_;
  std::vector<std::uint8_t> included_;
  std::vector<VideoCounts> cells_;
};

enum class CompareMode { Superiority, NonInferiority };

struct DeltaBootstrap {
  std::vector<double> fapm_points;
  std::vector<double> tpr_a;                // point estimates on the full data
  std::vector<double> tpr_b;
  std::vector<std::vector<double>> deltas;  // [point][resample], tpr_b - tpr_a
  std::size_t dropped = 0;
};

// Resamples videos of both tables and records tpr_b - tpr_a at each operating
// point. Paired mode draws one multiset for both tables (same video set);
// otherwise each table is resampled on its own stream.
DeltaBootstrap bootstrap_deltas(const EvalTable& a, const EvalTable& b, std::span<const double> fapm_points,
                                const BootstrapConfig& cfg, bool paired);

struct TprBootstrap {
  std::vector<double> fapm_points;
  std::vector<double> tpr;                  // point estimates
  std::vector<std::vector<double>> samples;  // [point][resample]
  std::size_t dropped = 0;
};

TprBootstrap bootstrap_tpr(const EvalTable& table, std::span<const double> fapm_points, const BootstrapConfig& cfg);

std::vector<TestResult> compare_datasets(const DatasetBundle& a, const DatasetBundle& b,
                                         std::span<const double> fapm_points, const BootstrapConfig& cfg,
                                         CompareMode mode, double margin = kDefaultMargin,
                                         std::span<const FilterConfig> sweep = {}, const MatchConfig& m = {});

}  // namespace macekit

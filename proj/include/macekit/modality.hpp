#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "macekit/ingest.hpp"

namespace macekit {

struct Hsv {
  double h = 0.0;  // degrees in [0, 360)
  double s = 0.0;
  double v = 0.0;
};

// Hexcone conversion of channels in [0,1]; gray pixels get hue 0.
Hsv rgb_to_hsv(double r, double g, double b);

enum class ColorSpace { Rgb, Hsv };

struct ChannelRange {
  double min = 0.0;
  double max = 1.0;
};

// Normalized crop rectangle scanned by the classifier.
struct Roi {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

// Inclusive per-channel bounds. For HSV the first channel is hue in degrees
// and min > max denotes a wrap-around interval.
struct PixelRangeRule {
  ColorSpace space = ColorSpace::Hsv;
  std::array<ChannelRange, 3> bounds{ChannelRange{200.0, 260.0}, ChannelRange{0.3, 1.0}, ChannelRange{0.15, 1.0}};
  double min_fraction = 0.05;
  Roi roi;
};

PixelRangeRule default_ce_rule();
PixelRangeRule parse_pixel_rule(std::string_view json_text);
PixelRangeRule load_pixel_rule(const std::filesystem::path& path);
std::string to_json(const PixelRangeRule& rule);

bool pixel_in_range(const PixelRangeRule& rule, std::uint8_t r, std::uint8_t g, std::uint8_t b);
double in_range_fraction(const Frame& frame, const PixelRangeRule& rule);
bool ce_classify_frame(const Frame& frame, const PixelRangeRule& rule);

enum class Modality { Nbi, Ce };
std::string_view to_string(Modality m) noexcept;
Modality parse_modality(std::string_view name);

struct FrameFlags {
  bool nbi = false;
  bool ce = false;
  bool inside = true;
};

// Per-frame modality flags for one bundle. Ingested "ce" values take
// precedence; frames without one are classified from <frames_root>/<video>/<idx>.ppm
// when a root is given, otherwise counted as unresolved and treated as whitelight.
class ModalityFlags {
 public:
  explicit ModalityFlags(const DatasetBundle& bundle, const std::optional<std::filesystem::path>& frames_root = {},
                         const PixelRangeRule& rule = default_ce_rule());

  FrameFlags at(const FrameKey& key) const;
  bool flagged(const FrameKey& key, Modality m) const;
  std::size_t classified_from_pixels() const { return classified_; }
  std::size_t unresolved() const { return unresolved_; }

 private:
  std::map<FrameKey, FrameFlags> flags_;
  std::size_t classified_ = 0;
  std::size_t unresolved_ = 0;
};

// Share of the track's visible frames carrying the modality.
double lesion_modality_fraction(const PolypTrack& track, const ModalityFlags& flags, Modality which);

struct TrackFraction {
  std::string polyp_id;
  double fraction = 0.0;
};

std::vector<TrackFraction> lesion_fractions(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which);

// Fractions are compared with a 1e-9 slack so that thresholds built as k * step
// keep tracks sitting exactly on them.
std::vector<std::string> cohort_by_fraction(std::span<const TrackFraction> tracks, double threshold);

struct CohortStep {
  double threshold = 0.0;
  std::vector<std::string> polyp_ids;
};

// Thresholds step, 2*step, ... while the cohort keeps at least min_cohort polyps.
std::vector<CohortStep> fraction_sweep(std::span<const TrackFraction> tracks, double step = 0.1,
                                       std::size_t min_cohort = 100);

struct VideoFraction {
  std::string video_id;
  double fraction = 0.0;  // flagged inside-body frames / inside-body frames
  bool has_polyp = false;
};

std::vector<VideoFraction> video_fractions(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> total;
  std::vector<std::size_t> with_polyp;
  std::vector<std::size_t> without_polyp;
};

// Bins are [e_k, e_{k+1}) with the last bin closed; edges must cover [0,1].
Histogram video_modality_histogram(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which,
                                   std::span<const double> bin_edges);
Histogram histogram_of(std::span<const VideoFraction> videos, std::span<const double> bin_edges);

std::size_t count_at_least(std::span<const VideoFraction> videos, double cut);

}  // namespace macekit

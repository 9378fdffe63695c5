#include "macekit/modality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "macekit/error.hpp"

namespace macekit {

using json = nlohmann::json;

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == r) {
    h = std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = (b - r) / delta + 2.0;
  } else {
    h = (r - g) / delta + 4.0;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

PixelRangeRule default_ce_rule() { return PixelRangeRule{}; }

namespace {

ChannelRange read_range(const json& v, const char* name) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(Errc::InvalidArgument, std::string("pixel rule: \"") + name + "\" must be [min, max]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

double read_number(const json& obj, const char* name, double fallback) {
  if (!obj.contains(name)) return fallback;
  if (!obj[name].is_number()) fail(Errc::InvalidArgument, std::string("pixel rule: \"") + name + "\" must be a number");
  return obj[name].get<double>();
}

}  // namespace

PixelRangeRule parse_pixel_rule(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(Errc::InvalidArgument, std::string("pixel rule: ") + e.what());
  }
  if (!obj.is_object()) fail(Errc::InvalidArgument, "pixel rule must be a JSON object");
  PixelRangeRule rule;
  const auto space = obj.value("space", std::string("hsv"));
  if (space == "hsv") {
    rule.space = ColorSpace::Hsv;
    if (obj.contains("hue")) rule.bounds[0] = read_range(obj["hue"], "hue");
    if (obj.contains("sat")) rule.bounds[1] = read_range(obj["sat"], "sat");
    if (obj.contains("val")) rule.bounds[2] = read_range(obj["val"], "val");
    rule.bounds[1].min = read_number(obj, "sat_min", rule.bounds[1].min);
    rule.bounds[1].max = read_number(obj, "sat_max", rule.bounds[1].max);
    rule.bounds[2].min = read_number(obj, "val_min", rule.bounds[2].min);
    rule.bounds[2].max = read_number(obj, "val_max", rule.bounds[2].max);
  } else if (space == "rgb") {
    rule.space = ColorSpace::Rgb;
    rule.bounds = {ChannelRange{}, ChannelRange{}, ChannelRange{}};
    const char* names[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) {
      if (obj.contains(names[c])) rule.bounds[c] = read_range(obj[names[c]], names[c]);
    }
  } else {
    fail(Errc::InvalidArgument, "pixel rule: unknown space \"" + space + "\"");
  }
  rule.min_fraction = read_number(obj, "min_fraction", rule.min_fraction);
  if (obj.contains("roi")) {
    const auto& r = obj["roi"];
    if (!r.is_array() || r.size() != 4) fail(Errc::InvalidArgument, "pixel rule: \"roi\" must be [x0,y0,x1,y1]");
    rule.roi = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
  }

  if (!(rule.min_fraction > 0.0 && rule.min_fraction <= 1.0)) {
    fail(Errc::InvalidArgument, "pixel rule: min_fraction must lie in (0,1]");
  }
  for (int c = (rule.space == ColorSpace::Hsv ? 1 : 0); c < 3; ++c) {
    if (rule.bounds[c].min > rule.bounds[c].max) fail(Errc::InvalidArgument, "pixel rule: channel min exceeds max");
  }
  if (rule.space == ColorSpace::Hsv) {
    for (double h : {rule.bounds[0].min, rule.bounds[0].max}) {
      if (!(h >= 0.0 && h <= 360.0)) fail(Errc::InvalidArgument, "pixel rule: hue bounds must lie in [0,360]");
    }
  }
  return rule;
}

PixelRangeRule load_pixel_rule(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pixel_rule(ss.str());
}

std::string to_json(const PixelRangeRule& rule) {
  nlohmann::ordered_json o;
  if (rule.space == ColorSpace::Hsv) {
    o["space"] = "hsv";
    o["hue"] = {rule.bounds[0].min, rule.bounds[0].max};
    o["sat"] = {rule.bounds[1].min, rule.bounds[1].max};
    o["val"] = {rule.bounds[2].min, rule.bounds[2].max};
  } else {
    o["space"] = "rgb";
    o["r"] = {rule.bounds[0].min, rule.bounds[0].max};
    o["g"] = {rule.bounds[1].min, rule.bounds[1].max};
    o["b"] = {rule.bounds[2].min, rule.bounds[2].max};
  }
  o["min_fraction"] = rule.min_fraction;
  o["roi"] = {rule.roi.x0, rule.roi.y0, rule.roi.x1, rule.roi.y1};
  return o.dump();
}

bool pixel_in_range(const PixelRangeRule& rule, std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  auto within = [](double x, const ChannelRange& c) { return x >= c.min && x <= c.max; };
  if (rule.space == ColorSpace::Rgb) {
    return within(r, rule.bounds[0]) && within(g, rule.bounds[1]) && within(b, rule.bounds[2]);
  }
  const auto hsv = rgb_to_hsv(r, g, b);
  const auto& hue = rule.bounds[0];
  const bool hue_ok = hue.min <= hue.max ? within(hsv.h, hue) : (hsv.h >= hue.min || hsv.h <= hue.max);
  return hue_ok && within(hsv.s, rule.bounds[1]) && within(hsv.v, rule.bounds[2]);
}

double in_range_fraction(const Frame& frame, const PixelRangeRule& rule) {
  const auto px0 = static_cast<long>(std::lround(std::clamp(rule.roi.x0, 0.0, 1.0) * frame.width));
  const auto px1 = static_cast<long>(std::lround(std::clamp(rule.roi.x1, 0.0, 1.0) * frame.width));
  const auto py0 = static_cast<long>(std::lround(std::clamp(rule.roi.y0, 0.0, 1.0) * frame.height));
  const auto py1 = static_cast<long>(std::lround(std::clamp(rule.roi.y1, 0.0, 1.0) * frame.height));
  if (px1 <= px0 || py1 <= py0) fail(Errc::EmptyROI, "crop region contains no pixels");
  std::size_t hits = 0;
  for (long y = py0; y < py1; ++y) {
    for (long x = px0; x < px1; ++x) {
      const auto* p = &frame.rgb[static_cast<std::size_t>((y * frame.width + x) * 3)];
      if (pixel_in_range(rule, p[0], p[1], p[2])) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>((px1 - px0) * (py1 - py0));
}

bool ce_classify_frame(const Frame& frame, const PixelRangeRule& rule) {
  return in_range_fraction(frame, rule) >= rule.min_fraction;
}

std::string_view to_string(Modality m) noexcept { return m == Modality::Nbi ? "nbi" : "ce"; }

Modality parse_modality(std::string_view name) {
  if (name == "nbi" || name == "NBI") return Modality::Nbi;
  if (name == "ce" || name == "CE") return Modality::Ce;
  fail(Errc::InvalidArgument, "unknown modality \"" + std::string(name) + "\"");
}

ModalityFlags::ModalityFlags(const DatasetBundle& bundle, const std::optional<std::filesystem::path>& frames_root,
                             const PixelRangeRule& rule) {
  for (const auto& [key, meta] : bundle.frames) {
    FrameFlags f{meta.nbi, false, meta.inside_body};
    if (meta.ce) {
      f.ce = *meta.ce;
    } else if (frames_root && std::filesystem::exists(frame_path(*frames_root, key))) {
      f.ce = ce_classify_frame(read_ppm(frame_path(*frames_root, key)), rule);
      ++classified_;
    } else {
      ++unresolved_;
    }
    flags_.emplace(key, f);
  }
}

FrameFlags ModalityFlags::at(const FrameKey& key) const {
  auto it = flags_.find(key);
  return it == flags_.end() ? FrameFlags{} : it->second;
}

bool ModalityFlags::flagged(const FrameKey& key, Modality m) const {
  const auto f = at(key);
  return m == Modality::Nbi ? f.nbi : f.ce;
}

double lesion_modality_fraction(const PolypTrack& track, const ModalityFlags& flags, Modality which) {
  if (track.visible_frames.empty()) fail(Errc::InvalidArgument, "polyp " + track.polyp_id + " has no visible frames");
  std::size_t hits = 0;
  for (const auto& f : track.visible_frames) {
    if (flags.flagged({track.video_id, f.frame_idx}, which)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(track.visible_frames.size());
}

std::vector<TrackFraction> lesion_fractions(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which) {
  std::vector<TrackFraction> out;
  out.reserve(bundle.tracks.size());
  for (const auto& [id, t] : bundle.tracks) out.push_back({id, lesion_modality_fraction(t, flags, which)});
  return out;
}

namespace {
constexpr double kFractionSlack = 1e-9;
}

std::vector<std::string> cohort_by_fraction(std::span<const TrackFraction> tracks, double threshold) {
  std::vector<std::string> out;
  for (const auto& t : tracks) {
    if (t.fraction >= threshold - kFractionSlack) out.push_back(t.polyp_id);
  }
  return out;
}

std::vector<CohortStep> fraction_sweep(std::span<const TrackFraction> tracks, double step, std::size_t min_cohort) {
  if (!(step > 0.0 && step <= 1.0)) fail(Errc::InvalidArgument, "step must lie in (0,1]");
  std::vector<CohortStep> out;
  for (int k = 1; k * step <= 1.0 + kFractionSlack; ++k) {
    // Snapped to 1e-12 so reported thresholds read 0.3 rather than 0.30000000000000004.
    const double threshold = std::round(k * step * 1e12) / 1e12;
    auto cohort = cohort_by_fraction(tracks, threshold);
    if (cohort.size() < min_cohort) break;
    out.push_back({threshold, std::move(cohort)});
  }
  return out;
}

std::vector<VideoFraction> video_fractions(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which) {
  std::vector<VideoFraction> out;
  for (const auto& [id, v] : bundle.videos) {
    std::int64_t inside = v.n_frames;
    std::int64_t hits = 0;
    for (auto it = bundle.frames.lower_bound({id, 0}); it != bundle.frames.end() && it->first.video_id == id; ++it) {
      const auto f = flags.at(it->first);
      if (!f.inside) {
        --inside;
      } else if (which == Modality::Nbi ? f.nbi : f.ce) {
        ++hits;
      }
    }
    VideoFraction vf{id, inside > 0 ? static_cast<double>(hits) / static_cast<double>(inside) : 0.0, false};
    vf.has_polyp = !bundle.tracks_of(id).empty();
    out.push_back(std::move(vf));
  }
  return out;
}

Histogram histogram_of(std::span<const VideoFraction> videos, std::span<const double> bin_edges) {
  if (bin_edges.size() < 2) fail(Errc::InvalidArgument, "histogram needs at least two edges");
  if (!std::is_sorted(bin_edges.begin(), bin_edges.end()) ||
      std::adjacent_find(bin_edges.begin(), bin_edges.end()) != bin_edges.end()) {
    fail(Errc::InvalidArgument, "histogram edges must be strictly increasing");
  }
  if (bin_edges.front() > 0.0 || bin_edges.back() < 1.0) fail(Errc::InvalidArgument, "histogram edges must cover [0,1]");
  Histogram h;
  h.edges.assign(bin_edges.begin(), bin_edges.end());
  const auto bins = bin_edges.size() - 1;
  h.total.assign(bins, 0);
  h.with_polyp.assign(bins, 0);
  h.without_polyp.assign(bins, 0);
  for (const auto& v : videos) {
    auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v.fraction);
    auto bin = static_cast<std::size_t>(std::distance(bin_edges.begin(), it));
    bin = bin == 0 ? 0 : std::min(bin - 1, bins - 1);
    ++h.total[bin];
    ++(v.has_polyp ? h.with_polyp : h.without_polyp)[bin];
  }
  return h;
}

Histogram video_modality_histogram(const DatasetBundle& bundle, const ModalityFlags& flags, Modality which,
                                   std::span<const double> bin_edges) {
  const auto vf = video_fractions(bundle, flags, which);
  return histogram_of(vf, bin_edges);
}

std::size_t count_at_least(std::span<const VideoFraction> videos, double cut) {
  return static_cast<std::size_t>(
      std::count_if(videos.begin(), videos.end(), [cut](const auto& v) { return v.fraction >= cut - kFractionSlack; }));
}

}  // namespace macekit

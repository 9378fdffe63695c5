#include "macekit/deteval.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace macekit {

void validate(const FilterConfig& cfg) {
  if (cfg.window < 1 || cfg.window % 2 == 0) fail(Errc::InvalidArgument, "filter window must be odd and >= 1");
  if (cfg.votes < 1 || cfg.votes > cfg.window) fail(Errc::InvalidArgument, "votes must lie in [1, window]");
  if (!(cfg.score_threshold >= 0.0 && cfg.score_threshold <= 1.0)) {
    fail(Errc::InvalidArgument, "score threshold must lie in [0,1]");
  }
}

BinarizedFrames binarize_frames(std::span<const std::vector<ScoredBox>> dets, std::span<const std::uint8_t> inside,
                                double score_threshold) {
  if (inside.size() != dets.size()) fail(Errc::DimensionMismatch, "inside flags and detections differ in length");
  BinarizedFrames out;
  out.positive.assign(dets.size(), 0);
  out.retained.resize(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!inside[i]) continue;
    for (const auto& b : dets[i]) {
      if (b.score >= score_threshold) out.retained[i].push_back(b);
    }
    out.positive[i] = out.retained[i].empty() ? 0 : 1;
  }
  return out;
}

Flags median_filter(std::span<const std::uint8_t> stream, const FilterConfig& cfg) {
  validate(cfg);
  const auto n = static_cast<std::ptrdiff_t>(stream.size());
  const std::ptrdiff_t h = cfg.window / 2;
  Flags out(stream.size(), 0);
  // Running count over [i - h, i + h].
  int count = 0;
  for (std::ptrdiff_t j = 0; j < std::min(h, n); ++j) count += stream[j] ? 1 : 0;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (i + h < n && stream[i + h]) ++count;
    if (i - h - 1 >= 0 && stream[i - h - 1]) --count;
    out[i] = count >= cfg.votes ? 1 : 0;
  }
  return out;
}

std::vector<std::vector<ScoredBox>> filtered_boxes(const BinarizedFrames& frames, std::span<const std::uint8_t> keep) {
  std::vector<std::vector<ScoredBox>> out(frames.retained.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (keep[i]) out[i] = frames.retained[i];
  }
  return out;
}

double iou(const Box& a, const Box& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool polyp_detected(const PolypTrack& track, std::span<const std::vector<ScoredBox>> filtered, const MatchConfig& m) {
  for (const auto& f : track.visible_frames) {
    if (f.frame_idx < 0 || static_cast<std::size_t>(f.frame_idx) >= filtered.size()) continue;
    for (const auto& b : filtered[static_cast<std::size_t>(f.frame_idx)]) {
      if (iou(b.box, f.gt.box) >= m.iou_threshold) return true;
    }
  }
  return false;
}

std::int64_t false_alarm_events(std::span<const std::vector<ScoredBox>> filtered, std::span<const std::vector<Box>> gt,
                                const MatchConfig& m) {
  std::int64_t events = 0;
  bool in_run = false;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    bool fp = !filtered[i].empty();
    if (fp && i < gt.size()) {
      for (const auto& b : filtered[i]) {
        for (const auto& g : gt[i]) {
          if (iou(b.box, g) >= m.iou_threshold) fp = false;
        }
      }
    }
    if (fp && !in_run) ++events;
    in_run = fp;
  }
  return events;
}

// ---- dataset evaluation ---------------------------------------------------

namespace {

template <typename Map>
auto video_range(const Map& map, const std::string& video_id) {
  return std::pair{map.lower_bound(FrameKey{video_id, 0}), map.upper_bound(FrameKey{video_id, INT64_MAX})};
}

}  // namespace

DenseVideo dense_video(const DatasetBundle& bundle, const std::string& video_id) {
  const auto& rec = bundle.videos.at(video_id);
  DenseVideo v;
  v.n_frames = rec.n_frames;
  v.minutes = rec.duration_minutes();
  const auto n = static_cast<std::size_t>(rec.n_frames);
  v.inside.assign(n, 1);
  v.dets.resize(n);
  v.gt.resize(n);
  auto [fb, fe] = video_range(bundle.frames, video_id);
  for (auto it = fb; it != fe; ++it) v.inside[static_cast<std::size_t>(it->first.frame_idx)] = it->second.inside_body;
  auto [db, de] = video_range(bundle.detections, video_id);
  for (auto it = db; it != de; ++it) v.dets[static_cast<std::size_t>(it->first.frame_idx)] = it->second;
  v.tracks = bundle.tracks_of(video_id);
  for (const auto* t : v.tracks) {
    for (const auto& f : t->visible_frames) v.gt[static_cast<std::size_t>(f.frame_idx)].push_back(f.gt.box);
  }
  return v;
}

VideoCounts evaluate_video_dense(const DenseVideo& video, const FilterConfig& f, const MatchConfig& m,
                                 const PolypFilter& eligible) {
  const auto bin = binarize_frames(video.dets, video.inside, f.score_threshold);
  const auto keep = median_filter(bin.positive, f);
  const auto boxes = filtered_boxes(bin, keep);
  VideoCounts c;
  c.minutes = video.minutes;
  for (const auto* t : video.tracks) {
    if (eligible && !eligible(*t)) continue;
    ++c.polyps;
    if (polyp_detected(*t, boxes, m)) ++c.detected;
  }
  c.fa_events = false_alarm_events(boxes, video.gt, m);
  return c;
}

VideoEvaluator::VideoEvaluator(const DatasetBundle& bundle, const std::string& video_id, const MatchConfig& m,
                               const PolypFilter& eligible) {
  minutes_ = bundle.videos.at(video_id).duration_minutes();

  // frame -> (eligible slot or npos, GT box)
  constexpr std::size_t kIneligible = static_cast<std::size_t>(-1);
  std::map<std::int64_t, std::vector<std::pair<std::size_t, Box>>> gt;
  for (const auto* t : bundle.tracks_of(video_id)) {
    std::size_t slot = kIneligible;
    if (!eligible || eligible(*t)) slot = static_cast<std::size_t>(eligible_polyps_++);
    for (const auto& f : t->visible_frames) gt[f.frame_idx].emplace_back(slot, f.gt.box);
  }

  auto [db, de] = video_range(bundle.detections, video_id);
  for (auto it = db; it != de; ++it) {
    if (it->second.empty()) continue;
    if (auto meta = bundle.frames.find(it->first); meta != bundle.frames.end() && !meta->second.inside_body) continue;
    BoxFrame frame;
    frame.idx = it->first.frame_idx;
    const auto gts = gt.find(frame.idx);
    for (const auto& b : it->second) {
      frame.max_score = std::max(frame.max_score, b.score);
      if (gts == gt.end()) continue;
      for (const auto& [slot, box] : gts->second) {
        if (iou(b.box, box) < m.iou_threshold) continue;
        frame.matched_score = std::max(frame.matched_score, b.score);
        if (slot == kIneligible) continue;
        auto ps = std::find_if(frame.polyp_scores.begin(), frame.polyp_scores.end(),
                               [s = slot](const auto& p) { return p.first == s; });
        if (ps == frame.polyp_scores.end()) {
          frame.polyp_scores.emplace_back(slot, b.score);
        } else {
          ps->second = std::max(ps->second, b.score);
        }
      }
    }
    frames_.push_back(std::move(frame));
  }
}

VideoCounts VideoEvaluator::counts(const FilterConfig& f) const {
  VideoCounts c;
  c.minutes = minutes_;
  c.polyps = eligible_polyps_;
  const double t = f.score_threshold;
  const std::int64_t h = f.window / 2;

  std::vector<const BoxFrame*> pos;
  pos.reserve(frames_.size());
  for (const auto& fr : frames_) {
    if (fr.max_score >= t) pos.push_back(&fr);
  }

  std::vector<std::uint8_t> detected(static_cast<std::size_t>(eligible_polyps_), 0);
  std::size_t lo = 0, hi = 0;
  std::int64_t last_fp = -2;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    const auto idx = pos[j]->idx;
    while (pos[lo]->idx < idx - h) ++lo;
    while (hi < pos.size() && pos[hi]->idx <= idx + h) ++hi;
    if (static_cast<int>(hi - lo) < f.votes) continue;
    if (pos[j]->matched_score >= t) {
      for (const auto& [slot, score] : pos[j]->polyp_scores) {
        if (score >= t) detected[slot] = 1;
      }
    } else {
      if (last_fp != idx - 1) ++c.fa_events;
      last_fp = idx;
    }
  }
  c.detected = std::count(detected.begin(), detected.end(), 1);
  return c;
}

TprFapm rates(const VideoCounts& totals) {
  if (totals.polyps == 0) fail(Errc::NotEstimable, "no polyps in the evaluated videos");
  if (!(totals.minutes > 0.0)) fail(Errc::ZeroDuration, "evaluated videos have zero duration");
  return {static_cast<double>(totals.detected) / static_cast<double>(totals.polyps),
          static_cast<double>(totals.fa_events) / totals.minutes, totals};
}

TprFapm dataset_tpr_fapm(const DatasetBundle& bundle, std::span<const std::string> videos, const FilterConfig& f,
                         const MatchConfig& m) {
  validate(f);
  if (videos.empty()) fail(Errc::InvalidArgument, "empty video subset");
  std::map<std::string, VideoCounts> cache;
  VideoCounts total;
  for (const auto& id : videos) {
    if (!bundle.videos.contains(id)) fail(Errc::DanglingVideoRef, "video " + id);
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, VideoEvaluator(bundle, id, m).counts(f)).first;
    total += it->second;
  }
  return rates(total);
}

std::vector<FilterConfig> default_sweep(int window) {
  std::vector<FilterConfig> out;
  for (int votes = 1; votes <= window; ++votes) {
    for (int k = 1; k <= 50; ++k) out.push_back({window, votes, k / 50.0});
  }
  return out;
}

Curve make_envelope(std::vector<CurvePoint> points) {
  std::sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.fapm != b.fapm ? a.fapm < b.fapm : a.tpr > b.tpr;
  });
  Curve out;
  for (const auto& p : points) {
    // Within equal fapm the first point carries the highest tpr.
    if (out.empty() || p.tpr > out.back().tpr) out.push_back(p);
  }
  return out;
}

Curve build_curve(const DatasetBundle& bundle, std::span<const std::string> videos, std::span<const FilterConfig> sweep,
                  const MatchConfig& m) {
  if (sweep.empty()) fail(Errc::InvalidArgument, "empty filter sweep");
  if (videos.empty()) fail(Errc::InvalidArgument, "empty video subset");
  for (const auto& f : sweep) validate(f);
  std::map<std::string, VideoEvaluator> evaluators;
  for (const auto& id : videos) {
    if (!bundle.videos.contains(id)) fail(Errc::DanglingVideoRef, "video " + id);
    if (!evaluators.contains(id)) evaluators.emplace(id, VideoEvaluator(bundle, id, m));
  }
  std::vector<CurvePoint> points;
  for (const auto& f : sweep) {
    std::map<std::string, VideoCounts> per_video;
    for (const auto& [id, ev] : evaluators) per_video.emplace(id, ev.counts(f));
    VideoCounts total;
    for (const auto& id : videos) total += per_video.at(id);
    const auto r = rates(total);
    points.push_back({r.fapm, r.tpr});
  }
  return make_envelope(std::move(points));
}

InterpolatedTpr tpr_at_fapm(const Curve& curve, double target) {
  if (curve.empty()) fail(Errc::EmptyCurve, "cannot interpolate an empty curve");
  if (target < curve.front().fapm) return {curve.front().tpr, true};
  if (target > curve.back().fapm) return {curve.back().tpr, true};
  auto hi = std::lower_bound(curve.begin(), curve.end(), target,
                             [](const CurvePoint& p, double v) { return p.fapm < v; });
  if (hi->fapm == target) return {hi->tpr, false};
  const auto lo = hi - 1;
  const double w = (target - lo->fapm) / (hi->fapm - lo->fapm);
  return {lo->tpr + w * (hi->tpr - lo->tpr), false};
}

// ---- tables and bootstrap -------------------------------------------------

EvalTable EvalTable::build(const DatasetBundle& bundle, std::vector<FilterConfig> sweep, const MatchConfig& m,
                           const PolypFilter& eligible, bool exclude_videos_without_eligible, unsigned threads) {
  if (sweep.empty()) fail(Errc::InvalidArgument, "empty filter sweep");
  for (const auto& f : sweep) validate(f);
  std::sort(sweep.begin(), sweep.end());
  sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());

  EvalTable t;
  t.sweep_ = std::move(sweep);
  for (const auto& [id, v] : bundle.videos) t.video_ids_.push_back(id);
  t.included_.assign(t.video_ids_.size(), 1);
  t.cells_.resize(t.video_ids_.size() * t.sweep_.size());
  parallel_for(t.video_ids_.size(), threads, [&](std::size_t v) {
    const VideoEvaluator ev(bundle, t.video_ids_[v], m, eligible);
    if (exclude_videos_without_eligible && ev.eligible_polyps() == 0) {
      t.included_[v] = 0;
      return;
    }
    for (std::size_t c = 0; c < t.sweep_.size(); ++c) t.cells_[v * t.sweep_.size() + c] = ev.counts(t.sweep_[c]);
  });
  return t;
}

VideoCounts EvalTable::totals(std::span<const std::size_t> videos, std::size_t config) const {
  VideoCounts total;
  for (auto v : videos) {
    if (included_[v]) total += at(v, config);
  }
  return total;
}

std::optional<Curve> EvalTable::curve(std::span<const std::size_t> videos) const {
  std::vector<CurvePoint> points;
  points.reserve(sweep_.size());
  for (std::size_t c = 0; c < sweep_.size(); ++c) {
    const auto total = totals(videos, c);
    if (total.polyps == 0 || !(total.minutes > 0.0)) return std::nullopt;
    const auto r = rates(total);
    points.push_back({r.fapm, r.tpr});
  }
  return make_envelope(std::move(points));
}

std::vector<std::size_t> EvalTable::all_videos() const {
  std::vector<std::size_t> all(video_ids_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

std::optional<Curve> EvalTable::curve() const { return curve(all_videos()); }

namespace {

std::vector<double> tprs_at(const Curve& curve, std::span<const double> points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (double p : points) out.push_back(tpr_at_fapm(curve, p).tpr);
  return out;
}

template <typename T>
std::vector<std::vector<T>> transpose(const std::vector<std::vector<T>>& rows, std::size_t width) {
  std::vector<std::vector<T>> out(width);
  for (auto& col : out) col.reserve(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < width; ++j) out[j].push_back(r[j]);
  }
  return out;
}

}  // namespace

DeltaBootstrap bootstrap_deltas(const EvalTable& a, const EvalTable& b, std::span<const double> fapm_points,
                                const BootstrapConfig& cfg, bool paired) {
  if (fapm_points.empty()) fail(Errc::InvalidArgument, "no operating points");
  if (a.n_videos() == 0 || b.n_videos() == 0) fail(Errc::NotEstimable, "dataset without videos");
  if (paired && a.video_ids() != b.video_ids()) fail(Errc::InvalidArgument, "paired comparison needs one video set");
  const auto curve_a = a.curve();
  const auto curve_b = b.curve();
  if (!curve_a || !curve_b) fail(Errc::NotEstimable, "no eligible polyps in a compared dataset");

  DeltaBootstrap out;
  out.fapm_points.assign(fapm_points.begin(), fapm_points.end());
  out.tpr_a = tprs_at(*curve_a, fapm_points);
  out.tpr_b = tprs_at(*curve_b, fapm_points);

  auto boot = bootstrap_map<std::vector<double>>(cfg, [&](std::size_t i) -> std::optional<std::vector<double>> {
    const auto units_a = resample_units(a.n_videos(), cfg, i, 0);
    const auto units_b = paired ? units_a : resample_units(b.n_videos(), cfg, i, 1);
    const auto ca = a.curve(units_a);
    const auto cb = b.curve(units_b);
    if (!ca || !cb) return std::nullopt;
    auto ta = tprs_at(*ca, fapm_points);
    auto tb = tprs_at(*cb, fapm_points);
    for (std::size_t j = 0; j < tb.size(); ++j) tb[j] -= ta[j];
    return tb;
  });
  out.deltas = transpose(boot.values, fapm_points.size());
  out.dropped = boot.dropped;
  return out;
}

TprBootstrap bootstrap_tpr(const EvalTable& table, std::span<const double> fapm_points, const BootstrapConfig& cfg) {
  if (fapm_points.empty()) fail(Errc::InvalidArgument, "no operating points");
  if (table.n_videos() == 0) fail(Errc::NotEstimable, "dataset without videos");
  const auto full = table.curve();
  if (!full) fail(Errc::NotEstimable, "no eligible polyps");
  TprBootstrap out;
  out.fapm_points.assign(fapm_points.begin(), fapm_points.end());
  out.tpr = tprs_at(*full, fapm_points);
  auto boot = bootstrap_map<std::vector<double>>(cfg, [&](std::size_t i) -> std::optional<std::vector<double>> {
    const auto c = table.curve(resample_units(table.n_videos(), cfg, i, 0));
    if (!c) return std::nullopt;
    return tprs_at(*c, fapm_points);
  });
  out.samples = transpose(boot.values, fapm_points.size());
  out.dropped = boot.dropped;
  return out;
}

std::vector<TestResult> compare_datasets(const DatasetBundle& a, const DatasetBundle& b,
                                         std::span<const double> fapm_points, const BootstrapConfig& cfg,
                                         CompareMode mode, double margin, std::span<const FilterConfig> sweep,
                                         const MatchConfig& m) {
  std::vector<FilterConfig> configs(sweep.begin(), sweep.end());
  if (configs.empty()) configs = default_sweep();
  const auto ta = EvalTable::build(a, configs, m, {}, false, cfg.threads);
  const auto tb = EvalTable::build(b, configs, m, {}, false, cfg.threads);
  const auto boot = bootstrap_deltas(ta, tb, fapm_points, cfg, false);
  std::vector<TestResult> out;
  for (const auto& d : boot.deltas) {
    out.push_back(mode == CompareMode::Superiority ? superiority_one_sided(d) : non_inferiority(d, margin));
  }
  return out;
}

}  // namespace macekit

#include "macekit/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "macekit/error.hpp"

namespace macekit {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(const FrameKey& key) { return key.video_id + "#" + std::to_string(key.frame_idx); }

bool EmbeddingSet::operator==(const EmbeddingSet& other) const {
  return matrix.rows() == other.matrix.rows() && matrix.cols() == other.matrix.cols() &&
         matrix == other.matrix && keys == other.keys;
}

FrameMeta DatasetBundle::frame_meta(const FrameKey& key) const {
  if (auto it = frames.find(key); it != frames.end()) return it->second;
  FrameMeta meta;
  meta.key = key;
  meta.ce = false;
  return meta;
}

std::vector<const PolypTrack*> DatasetBundle::tracks_of(const std::string& video_id) const {
  std::vector<const PolypTrack*> out;
  for (const auto& [id, track] : tracks) {
    if (track.video_id == video_id) out.push_back(&track);
  }
  return out;
}

// ---- byte helpers ---------------------------------------------------------

namespace {

std::uint16_t load_u16(const std::byte* p) {
  return static_cast<std::uint16_t>(std::to_integer<unsigned>(p[0]) | (std::to_integer<unsigned>(p[1]) << 8));
}

std::uint32_t load_u32(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(p[i]);
  return v;
}

void store_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xFF));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void store_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFF));
}

constexpr std::byte kMagic[4] = {std::byte{'M'}, std::byte{'A'}, std::byte{'C'}, std::byte{'E'}};

}  // namespace

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(Errc::Io, "read error on " + path.string());
  std::vector<std::byte> out(buf.size());
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

void write_file_bytes(const fs::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::Io, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::Io, "write error on " + path.string());
}

// ---- embedding binary -----------------------------------------------------

EmbeddingSet parse_embeddings(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, std::begin(kMagic))) {
    fail(Errc::BadMagic, "embedding file does not start with \"MACE\"");
  }
  if (bytes.size() < kEmbeddingHeaderSize) {
    fail(Errc::TruncatedPayload, "header is " + std::to_string(bytes.size()) + " bytes, expected 16");
  }
  const auto version = load_u16(bytes.data() + 4);
  if (version != kEmbeddingFormatVersion) {
    fail(Errc::VersionUnsupported, "version " + std::to_string(version));
  }
  if (load_u16(bytes.data() + 6) != 0) fail(Errc::VersionUnsupported, "reserved header field is nonzero");
  const std::uint64_t n = load_u32(bytes.data() + 8);
  const std::uint64_t d = load_u32(bytes.data() + 12);
  if (d == 0) fail(Errc::BadHeader, "dimension d = 0");
  const std::uint64_t payload = bytes.size() - kEmbeddingHeaderSize;
  if (payload != n * d * 4) {
    fail(Errc::TruncatedPayload, "payload is " + std::to_string(payload) + " bytes, header implies " +
                                     std::to_string(n * d * 4));
  }
  EmbeddingSet set;
  set.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const std::byte* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j, p += 4) {
      const float v = std::bit_cast<float>(load_u32(p));
      if (!std::isfinite(v)) {
        fail(Errc::NonFiniteValue, "row " + std::to_string(i) + ", column " + std::to_string(j));
      }
      set.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return set;
}

std::vector<std::byte> write_embeddings(const EmbeddingSet& set) {
  std::vector<std::byte> out;
  out.reserve(kEmbeddingHeaderSize + static_cast<std::size_t>(set.matrix.size()) * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  store_u16(out, kEmbeddingFormatVersion);
  store_u16(out, 0);
  store_u32(out, static_cast<std::uint32_t>(set.n()));
  store_u32(out, static_cast<std::uint32_t>(set.d()));
  for (Eigen::Index i = 0; i < set.n(); ++i) {
    for (Eigen::Index j = 0; j < set.d(); ++j) {
      store_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(set.matrix(i, j))));
    }
  }
  return out;
}

EmbeddingSet read_embeddings(const fs::path& path) { return parse_embeddings(read_file_bytes(path)); }

void save_embeddings(const EmbeddingSet& set, const fs::path& path) {
  write_file_bytes(path, write_embeddings(set));
  if (!set.keys.empty()) {
    std::ofstream out(keys_sidecar_path(path));
    if (!out) fail(Errc::Io, "cannot create " + keys_sidecar_path(path).string());
    write_embedding_keys(out, set.keys);
  }
}

fs::path keys_sidecar_path(const fs::path& embeddings_path) {
  auto p = embeddings_path;
  p.replace_extension(".keys.jsonl");
  return p;
}

// ---- JSONL helpers --------------------------------------------------------

namespace {

class LineReader {
 public:
  LineReader(std::istream& in, const ParseOptions& opts) : in_(in), opts_(opts) {}

  // Next nonblank line parsed as a JSON object; false at end of stream.
  bool next(json& obj) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        malformed(std::string("invalid JSON (") + e.what() + ")");
      }
      if (!obj.is_object()) malformed("expected a JSON object");
      return true;
    }
    if (in_.bad()) fail(Errc::Io, "read error");
    return false;
  }

  [[noreturn]] void malformed(const std::string& what) const {
    fail(Errc::MalformedLine, "line " + std::to_string(line_no_) + ": " + what);
  }

  [[noreturn]] void range(const std::string& what) const {
    fail(Errc::RangeError, "line " + std::to_string(line_no_) + ": " + what);
  }

  void check_fields(const json& obj, std::initializer_list<std::string_view> allowed) const {
    if (!opts_.strict) return;
    for (const auto& [k, v] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        fail(Errc::UnknownField, "line " + std::to_string(line_no_) + ": unknown field \"" + k + "\"");
      }
    }
  }

  const json& field(const json& obj, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) malformed(std::string("missing field \"") + name + "\"");
    return *it;
  }

  std::string get_string(const json& obj, const char* name, bool nonempty = true) const {
    const auto& v = field(obj, name);
    if (!v.is_string()) malformed(std::string("field \"") + name + "\" must be a string");
    auto s = v.get<std::string>();
    if (nonempty && s.empty()) range(std::string("field \"") + name + "\" is empty");
    return s;
  }

  std::int64_t get_int(const json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_number_integer()) malformed(std::string("field \"") + name + "\" must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      range(std::string("field \"") + name + "\" overflows");
    }
    return v.get<std::int64_t>();
  }

  double get_number(const json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_number()) malformed(std::string("field \"") + name + "\" must be a number");
    return v.get<double>();
  }

  bool get_bool(const json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_boolean()) malformed(std::string("field \"") + name + "\" must be a boolean");
    return v.get<bool>();
  }

  FrameKey get_key(const json& obj) const {
    FrameKey key{get_string(obj, "video_id"), get_int(obj, "frame_idx")};
    if (key.frame_idx < 0) range("frame_idx must be >= 0");
    return key;
  }

  Box get_box(const json& obj) const {
    Box b{get_number(obj, "x0"), get_number(obj, "y0"), get_number(obj, "x1"), get_number(obj, "y1")};
    for (double c : {b.x0, b.y0, b.x1, b.y1}) {
      if (!(c >= 0.0 && c <= 1.0)) range("box coordinate outside [0,1]");
    }
    if (!(b.x0 < b.x1 && b.y0 < b.y1)) range("box requires x0 < x1 and y0 < y1");
    return b;
  }

  const json& get_array(const json& obj, const char* name) const {
    const auto& v = field(obj, name);
    if (!v.is_array()) malformed(std::string("field \"") + name + "\" must be an array");
    return v;
  }

  void require_object(const json& v) const {
    if (!v.is_object()) malformed("array element must be an object");
  }

  int line_no() const { return line_no_; }

 private:
  std::istream& in_;
  const ParseOptions& opts_;
  int line_no_ = 0;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) fail(Errc::Io, "cannot create " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(Errc::Io, "cannot open " + p.string());
  return in;
}

}  // namespace

std::vector<FrameKey> parse_embedding_keys(std::istream& in, const ParseOptions& opts) {
  LineReader reader(in, opts);
  std::vector<FrameKey> keys;
  json obj;
  while (reader.next(obj)) {
    reader.check_fields(obj, {"video_id", "frame_idx"});
    keys.push_back(reader.get_key(obj));
  }
  return keys;
}

void write_embedding_keys(std::ostream& out, std::span<const FrameKey> keys) {
  for (const auto& k : keys) {
    ordered_json obj;
    obj["video_id"] = k.video_id;
    obj["frame_idx"] = k.frame_idx;
    out << obj.dump() << '\n';
  }
}

EmbeddingSet load_embedding_set(const fs::path& path, const ParseOptions& opts) {
  auto set = read_embeddings(path);
  const auto sidecar = keys_sidecar_path(path);
  if (fs::exists(sidecar)) {
    auto in = open_in(sidecar);
    set.keys = parse_embedding_keys(in, opts);
    if (static_cast<Eigen::Index>(set.keys.size()) != set.n()) {
      fail(Errc::EmbeddingKeyMismatch, sidecar.filename().string() + " has " + std::to_string(set.keys.size()) +
                                           " keys for " + std::to_string(set.n()) + " rows");
    }
  }
  return set;
}

std::vector<VideoRecord> parse_videos(std::istream& in, const ParseOptions& opts) {
  LineReader reader(in, opts);
  std::vector<VideoRecord> out;
  std::set<std::string> seen;
  json obj;
  while (reader.next(obj)) {
    reader.check_fields(obj, {"video_id", "fps", "n_frames", "site"});
    VideoRecord v;
    v.video_id = reader.get_string(obj, "video_id");
    v.fps = reader.get_number(obj, "fps");
    v.n_frames = reader.get_int(obj, "n_frames");
    v.site = reader.get_string(obj, "site", false);
    if (!(v.fps > 0.0)) reader.range("fps must be > 0");
    if (v.n_frames < 1) reader.range("n_frames must be >= 1");
    if (!seen.insert(v.video_id).second) {
      fail(Errc::DuplicateKey, "line " + std::to_string(reader.line_no()) + ": video " + v.video_id);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<FrameMeta> parse_frames_meta(std::istream& in, const ParseOptions& opts) {
  LineReader reader(in, opts);
  std::vector<FrameMeta> out;
  std::set<FrameKey> seen;
  json obj;
  while (reader.next(obj)) {
    reader.check_fields(obj, {"video_id", "frame_idx", "nbi", "ce", "inside", "polyp_ids"});
    FrameMeta m;
    m.key = reader.get_key(obj);
    m.nbi = reader.get_bool(obj, "nbi");
    if (obj.contains("ce") && !obj["ce"].is_null()) m.ce = reader.get_bool(obj, "ce");
    m.inside_body = reader.get_bool(obj, "inside");
    for (const auto& id : reader.get_array(obj, "polyp_ids")) {
      if (!id.is_string() || id.get<std::string>().empty()) reader.malformed("polyp_ids must hold nonempty strings");
      m.polyp_ids.push_back(id.get<std::string>());
    }
    std::sort(m.polyp_ids.begin(), m.polyp_ids.end());
    m.polyp_ids.erase(std::unique(m.polyp_ids.begin(), m.polyp_ids.end()), m.polyp_ids.end());
    if (!seen.insert(m.key).second) {
      fail(Errc::DuplicateKey, "line " + std::to_string(reader.line_no()) + ": frame " + to_string(m.key));
    }
    out.push_back(std::move(m));
  }
  return out;
}

DetectionMap parse_detections(std::istream& in, const ParseOptions& opts) {
  LineReader reader(in, opts);
  DetectionMap out;
  json obj;
  while (reader.next(obj)) {
    reader.check_fields(obj, {"video_id", "frame_idx", "boxes"});
    auto key = reader.get_key(obj);
    std::vector<ScoredBox> boxes;
    for (const auto& b : reader.get_array(obj, "boxes")) {
      reader.require_object(b);
      reader.check_fields(b, {"x0", "y0", "x1", "y1", "score"});
      ScoredBox sb{reader.get_box(b), reader.get_number(b, "score")};
      if (!(sb.score >= 0.0 && sb.score <= 1.0)) reader.range("score outside [0,1]");
      boxes.push_back(sb);
    }
    if (!out.emplace(key, std::move(boxes)).second) {
      fail(Errc::DuplicateKey, "line " + std::to_string(reader.line_no()) + ": frame " + to_string(key));
    }
  }
  return out;
}

std::vector<PolypTrack> parse_annotations(std::istream& in, const ParseOptions& opts) {
  LineReader reader(in, opts);
  std::set<FrameKey> seen;
  std::map<std::string, PolypTrack> tracks;
  json obj;
  while (reader.next(obj)) {
    reader.check_fields(obj, {"video_id", "frame_idx", "gt"});
    auto key = reader.get_key(obj);
    if (!seen.insert(key).second) {
      fail(Errc::DuplicateKey, "line " + std::to_string(reader.line_no()) + ": frame " + to_string(key));
    }
    for (const auto& g : reader.get_array(obj, "gt")) {
      reader.require_object(g);
      reader.check_fields(g, {"polyp_id", "x0", "y0", "x1", "y1"});
      GtBox gt{reader.get_string(g, "polyp_id"), reader.get_box(g)};
      auto [it, inserted] = tracks.try_emplace(gt.polyp_id);
      auto& track = it->second;
      if (inserted) {
        track.polyp_id = gt.polyp_id;
        track.video_id = key.video_id;
      } else if (track.video_id != key.video_id) {
        fail(Errc::CrossVideoPolyp, "line " + std::to_string(reader.line_no()) + ": polyp " + gt.polyp_id +
                                        " appears in " + track.video_id + " and " + key.video_id);
      }
      track.visible_frames.push_back({key.frame_idx, std::move(gt)});
    }
  }
  std::vector<PolypTrack> out;
  out.reserve(tracks.size());
  for (auto& [id, track] : tracks) {
    auto& vf = track.visible_frames;
    std::sort(vf.begin(), vf.end(), [](const auto& a, const auto& b) { return a.frame_idx < b.frame_idx; });
    for (std::size_t i = 1; i < vf.size(); ++i) {
      if (vf[i].frame_idx == vf[i - 1].frame_idx) {
        fail(Errc::DuplicateKey, "polyp " + id + " annotated twice on frame " + std::to_string(vf[i].frame_idx));
      }
    }
    out.push_back(std::move(track));
  }
  return out;
}

// ---- bundle ---------------------------------------------------------------

namespace {

void check_box(const Box& b, const std::string& where) {
  for (double c : {b.x0, b.y0, b.x1, b.y1}) {
    if (!(c >= 0.0 && c <= 1.0)) fail(Errc::RangeError, where + ": box coordinate outside [0,1]");
  }
  if (!(b.x0 < b.x1 && b.y0 < b.y1)) fail(Errc::RangeError, where + ": box requires x0 < x1 and y0 < y1");
}

}  // namespace

DatasetBundle validate_bundle(BundleParts parts) {
  DatasetBundle bundle;

  for (auto& v : parts.videos) {
    if (v.video_id.empty()) fail(Errc::RangeError, "video with empty id");
    if (!(v.fps > 0.0) || v.n_frames < 1) fail(Errc::RangeError, "video " + v.video_id + ": invalid fps or n_frames");
    auto id = v.video_id;
    if (!bundle.videos.emplace(id, std::move(v)).second) fail(Errc::DuplicateKey, "video " + id);
  }

  auto resolve = [&](const FrameKey& key, const char* stream) {
    auto it = bundle.videos.find(key.video_id);
    if (it == bundle.videos.end()) {
      fail(Errc::DanglingVideoRef, std::string(stream) + ": frame " + to_string(key) + " references unknown video");
    }
    if (key.frame_idx < 0 || key.frame_idx >= it->second.n_frames) {
      fail(Errc::FrameOutOfRange, std::string(stream) + ": frame " + to_string(key) + " outside video of " +
                                      std::to_string(it->second.n_frames) + " frames");
    }
  };

  // Tracks first: frame metas are checked against the declared polyps.
  std::map<std::string, std::set<std::string>> polyps_by_video;
  for (auto& t : parts.tracks) {
    if (t.visible_frames.empty()) fail(Errc::RangeError, "polyp " + t.polyp_id + " has no visible frames");
    for (std::size_t i = 0; i < t.visible_frames.size(); ++i) {
      const auto& f = t.visible_frames[i];
      if (i > 0 && f.frame_idx <= t.visible_frames[i - 1].frame_idx) {
        fail(Errc::RangeError, "polyp " + t.polyp_id + ": frame indices not strictly increasing");
      }
      resolve({t.video_id, f.frame_idx}, "annotations");
      check_box(f.gt.box, "annotations: polyp " + t.polyp_id);
    }
    auto id = t.polyp_id;
    polyps_by_video[t.video_id].insert(id);
    if (!bundle.tracks.emplace(id, std::move(t)).second) fail(Errc::DuplicateKey, "polyp " + id);
  }

  for (auto& m : parts.frames) {
    resolve(m.key, "frames");
    std::sort(m.polyp_ids.begin(), m.polyp_ids.end());
    m.polyp_ids.erase(std::unique(m.polyp_ids.begin(), m.polyp_ids.end()), m.polyp_ids.end());
    const auto& declared = polyps_by_video[m.key.video_id];
    for (const auto& p : m.polyp_ids) {
      if (!declared.contains(p)) {
        fail(Errc::DanglingPolypRef, "frames: frame " + to_string(m.key) + " lists polyp " + p +
                                         " which has no annotations in video " + m.key.video_id);
      }
    }
    auto key = m.key;
    if (!bundle.frames.emplace(key, std::move(m)).second) fail(Errc::DuplicateKey, "frames: " + to_string(key));
  }

  for (const auto& [key, boxes] : parts.detections) {
    resolve(key, "detections");
    for (const auto& b : boxes) {
      check_box(b.box, "detections: frame " + to_string(key));
      if (!(b.score >= 0.0 && b.score <= 1.0)) fail(Errc::RangeError, "detections: frame " + to_string(key) + ": score");
    }
  }
  bundle.detections = std::move(parts.detections);

  for (auto& [name, set] : parts.embeddings) {
    if (set.d() < 1) fail(Errc::BadHeader, "embeddings " + name + ": dimension 0");
    if (!set.matrix.allFinite()) fail(Errc::NonFiniteValue, "embeddings " + name);
    if (static_cast<Eigen::Index>(set.keys.size()) != set.n()) {
      fail(Errc::EmbeddingKeyMismatch, "embeddings " + name + ": " + std::to_string(set.keys.size()) + " keys for " +
                                           std::to_string(set.n()) + " rows");
    }
    std::set<FrameKey> seen;
    for (const auto& k : set.keys) {
      if (!bundle.frames.contains(k)) {
        fail(Errc::EmbeddingKeyMismatch, "embeddings " + name + ": frame " + to_string(k) + " has no frame metadata");
      }
      if (!seen.insert(k).second) fail(Errc::DuplicateKey, "embeddings " + name + ": frame " + to_string(k));
    }
  }
  bundle.embeddings = std::move(parts.embeddings);
  return bundle;
}

BundleParts read_bundle_parts(const fs::path& dir, const ParseOptions& opts) {
  BundleParts parts;
  {
    auto in = open_in(dir / kVideosFile);
    parts.videos = parse_videos(in, opts);
  }
  if (fs::exists(dir / kFramesFile)) {
    auto in = open_in(dir / kFramesFile);
    parts.frames = parse_frames_meta(in, opts);
  }
  if (fs::exists(dir / kDetectionsFile)) {
    auto in = open_in(dir / kDetectionsFile);
    parts.detections = parse_detections(in, opts);
  }
  if (fs::exists(dir / kAnnotationsFile)) {
    auto in = open_in(dir / kAnnotationsFile);
    parts.tracks = parse_annotations(in, opts);
  }
  return parts;
}

DatasetBundle load_bundle(const fs::path& dir, const ParseOptions& opts) {
  return validate_bundle(read_bundle_parts(dir, opts));
}

namespace {

ordered_json box_json(const Box& b) {
  ordered_json o;
  o["x0"] = b.x0;
  o["y0"] = b.y0;
  o["x1"] = b.x1;
  o["y1"] = b.y1;
  return o;
}

}  // namespace

void write_videos(std::ostream& out, const DatasetBundle& bundle) {
  for (const auto& [id, v] : bundle.videos) {
    ordered_json o;
    o["video_id"] = v.video_id;
    o["fps"] = v.fps;
    o["n_frames"] = v.n_frames;
    o["site"] = v.site;
    out << o.dump() << '\n';
  }
}

void write_frames_meta(std::ostream& out, const DatasetBundle& bundle) {
  for (const auto& [key, m] : bundle.frames) {
    ordered_json o;
    o["video_id"] = key.video_id;
    o["frame_idx"] = key.frame_idx;
    o["nbi"] = m.nbi;
    if (m.ce) o["ce"] = *m.ce;
    o["inside"] = m.inside_body;
    o["polyp_ids"] = m.polyp_ids;
    out << o.dump() << '\n';
  }
}

void write_detections(std::ostream& out, const DatasetBundle& bundle) {
  for (const auto& [key, boxes] : bundle.detections) {
    ordered_json o;
    o["video_id"] = key.video_id;
    o["frame_idx"] = key.frame_idx;
    o["boxes"] = ordered_json::array();
    for (const auto& b : boxes) {
      auto bj = box_json(b.box);
      bj["score"] = b.score;
      o["boxes"].push_back(std::move(bj));
    }
    out << o.dump() << '\n';
  }
}

void write_annotations(std::ostream& out, const DatasetBundle& bundle) {
  std::map<FrameKey, std::vector<const GtBox*>> by_frame;
  for (const auto& [id, t] : bundle.tracks) {
    for (const auto& f : t.visible_frames) by_frame[{t.video_id, f.frame_idx}].push_back(&f.gt);
  }
  for (const auto& [key, gts] : by_frame) {
    ordered_json o;
    o["video_id"] = key.video_id;
    o["frame_idx"] = key.frame_idx;
    o["gt"] = ordered_json::array();
    for (const auto* g : gts) {
      ordered_json gj;
      gj["polyp_id"] = g->polyp_id;
      gj.update(box_json(g->box));
      o["gt"].push_back(std::move(gj));
    }
    out << o.dump() << '\n';
  }
}

void write_bundle(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / kVideosFile);
    write_videos(out, bundle);
  }
  {
    auto out = open_out(dir / kFramesFile);
    write_frames_meta(out, bundle);
  }
  {
    auto out = open_out(dir / kDetectionsFile);
    write_detections(out, bundle);
  }
  {
    auto out = open_out(dir / kAnnotationsFile);
    write_annotations(out, bundle);
  }
}

}  // namespace macekit

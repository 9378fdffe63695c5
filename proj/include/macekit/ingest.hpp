#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace macekit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct FrameKey {
  std::string video_id;
  std::int64_t frame_idx = 0;

  auto operator<=>(const FrameKey&) const = default;
  bool operator==(const FrameKey&) const = default;
};

std::string to_string(const FrameKey& key);

struct VideoRecord {
  std::string video_id;
  double fps = 0.0;
  std::int64_t n_frames = 0;
  std::string site;

  double duration_minutes() const { return static_cast<double>(n_frames) / (fps * 60.0); }
  bool operator==(const VideoRecord&) const = default;
};

struct FrameMeta {
  FrameKey key;
  bool nbi = false;
  // Absent: chromoendoscopy still to be classified from pixels.
  std::optional<bool> ce;
  bool inside_body = true;
  std::vector<std::string> polyp_ids;  // sorted, unique

  bool operator==(const FrameMeta&) const = default;
};

// Normalized image coordinates, x0 < x1 and y0 < y1.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const Box&) const = default;
};

struct ScoredBox {
  Box box;
  double score = 0.0;
  bool operator==(const ScoredBox&) const = default;
};

struct GtBox {
  std::string polyp_id;
  Box box;
  bool operator==(const GtBox&) const = default;
};

struct TrackFrame {
  std::int64_t frame_idx = 0;
  GtBox gt;
  bool operator==(const TrackFrame&) const = default;
};

struct PolypTrack {
  std::string polyp_id;
  std::string video_id;
  std::vector<TrackFrame> visible_frames;  // strictly increasing frame_idx

  bool operator==(const PolypTrack&) const = default;
};

// Row i of `matrix` is the embedding of frame keys[i]. `keys` may be empty
// when no sidecar was supplied.
struct EmbeddingSet {
  Matrix matrix;
  std::vector<FrameKey> keys;

  Eigen::Index n() const { return matrix.rows(); }
  Eigen::Index d() const { return matrix.cols(); }
  bool operator==(const EmbeddingSet& other) const;
};

using DetectionMap = std::map<FrameKey, std::vector<ScoredBox>>;

// Immutable, cross-validated view of one dataset. Containers are ordered by
// (video_id, frame_idx) so equal inputs in any line order compare equal.
struct DatasetBundle {
  std::map<std::string, VideoRecord> videos;
  std::map<FrameKey, FrameMeta> frames;
  DetectionMap detections;
  std::map<std::string, PolypTrack> tracks;
  std::map<std::string, EmbeddingSet> embeddings;

  bool operator==(const DatasetBundle&) const = default;

  // Frame metadata with the whitelight/inside-body default for frames that
  // have no record.
  FrameMeta frame_meta(const FrameKey& key) const;
  std::vector<const PolypTrack*> tracks_of(const std::string& video_id) const;
};

struct ParseOptions {
  // Reject unknown JSON fields.
  bool strict = false;
};

// ---- embedding binary -----------------------------------------------------

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 16;

EmbeddingSet parse_embeddings(std::span<const std::byte> bytes);
std::vector<std::byte> write_embeddings(const EmbeddingSet& set);

EmbeddingSet read_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// Sidecar: one {"video_id","frame_idx"} object per line, line i <-> row i.
std::vector<FrameKey> parse_embedding_keys(std::istream& in, const ParseOptions& opts = {});
void write_embedding_keys(std::ostream& out, std::span<const FrameKey> keys);

// Loads `<path>` and, if present, the sidecar `<stem>.keys.jsonl` next to it.
EmbeddingSet load_embedding_set(const std::filesystem::path& path, const ParseOptions& opts = {});
std::filesystem::path keys_sidecar_path(const std::filesystem::path& embeddings_path);

// ---- JSONL streams --------------------------------------------------------

std::vector<VideoRecord> parse_videos(std::istream& in, const ParseOptions& opts = {});
std::vector<FrameMeta> parse_frames_meta(std::istream& in, const ParseOptions& opts = {});
DetectionMap parse_detections(std::istream& in, const ParseOptions& opts = {});
std::vector<PolypTrack> parse_annotations(std::istream& in, const ParseOptions& opts = {});

// ---- PPM frames -----------------------------------------------------------

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  bool operator==(const Frame&) const = default;
};

Frame parse_ppm(std::span<const std::byte> bytes);
std::vector<std::byte> write_ppm(const Frame& frame);
Frame read_ppm(const std::filesystem::path& path);
std::filesystem::path frame_path(const std::filesystem::path& frames_root, const FrameKey& key);

// ---- bundle ---------------------------------------------------------------

struct BundleParts {
  std::vector<VideoRecord> videos;
  std::vector<FrameMeta> frames;
  DetectionMap detections;
  std::vector<PolypTrack> tracks;
  std::map<std::string, EmbeddingSet> embeddings;
};

DatasetBundle validate_bundle(BundleParts parts);

// Conventional file names inside a bundle directory.
inline constexpr const char* kVideosFile = "videos.jsonl";
inline constexpr const char* kFramesFile = "frames.jsonl";
inline constexpr const char* kDetectionsFile = "detections.jsonl";
inline constexpr const char* kAnnotationsFile = "annotations.jsonl";

BundleParts read_bundle_parts(const std::filesystem::path& dir, const ParseOptions& opts = {});
DatasetBundle load_bundle(const std::filesystem::path& dir, const ParseOptions& opts = {});

// Writes the four JSONL streams in canonical order.
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
void write_videos(std::ostream& out, const DatasetBundle& bundle);
void write_frames_meta(std::ostream& out, const DatasetBundle& bundle);
void write_detections(std::ostream& out, const DatasetBundle& bundle);
void write_annotations(std::ostream& out, const DatasetBundle& bundle);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace macekit

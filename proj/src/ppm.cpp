#include <cctype>
#include <limits>
#include <string>

#include "macekit/error.hpp"
#include "macekit/ingest.hpp"

namespace macekit {

namespace {

class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::byte> bytes) : bytes_(bytes) {}

  int peek() const { return pos_ < bytes_.size() ? std::to_integer<int>(bytes_[pos_]) : -1; }

  // Whitespace and '#' comments (which run to end of line).
  void skip_space() {
    for (;;) {
      const int c = peek();
      if (c == '#') {
        while (peek() != -1 && peek() != '\n' && peek() != '\r') ++pos_;
      } else if (c != -1 && std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long long number(const char* what) {
    skip_space();
    if (peek() == -1 || !std::isdigit(peek())) fail(Errc::BadHeader, std::string("expected ") + what);
    long long v = 0;
    while (peek() != -1 && std::isdigit(peek())) {
      v = v * 10 + (peek() - '0');
      if (v > std::numeric_limits<int>::max()) fail(Errc::BadHeader, std::string(what) + " too large");
      ++pos_;
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Frame parse_ppm(std::span<const std::byte> bytes) {
  if (bytes.size() < 2 || bytes[0] != std::byte{'P'} || bytes[1] != std::byte{'6'}) {
    fail(Errc::BadHeader, "missing P6 magic");
  }
  HeaderCursor cur(bytes.subspan(2));
  if (cur.peek() == -1 || !(std::isspace(cur.peek()) || cur.peek() == '#')) fail(Errc::BadHeader, "missing P6 magic");
  const auto width = cur.number("width");
  const auto height = cur.number("height");
  const auto maxval = cur.number("maxval");
  if (width < 1 || height < 1) fail(Errc::BadHeader, "zero image dimension");
  if (maxval != 255) fail(Errc::UnsupportedMaxval, "maxval " + std::to_string(maxval));
  // Exactly one whitespace byte separates maxval from the raster.
  if (cur.peek() == -1 || !std::isspace(cur.peek())) fail(Errc::BadHeader, "no separator after maxval");
  cur.advance();

  const std::size_t offset = 2 + cur.pos();
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - offset < need) {
    fail(Errc::TruncatedPixels, "have " + std::to_string(bytes.size() - offset) + " bytes, need " + std::to_string(need));
  }
  Frame frame;
  frame.width = static_cast<int>(width);
  frame.height = static_cast<int>(height);
  frame.rgb.resize(need);
  for (std::size_t i = 0; i < need; ++i) frame.rgb[i] = std::to_integer<std::uint8_t>(bytes[offset + i]);
  return frame;
}

std::vector<std::byte> write_ppm(const Frame& frame) {
  const auto header = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::byte> out;
  out.reserve(header.size() + frame.rgb.size());
  for (char c : header) out.push_back(static_cast<std::byte>(c));
  for (auto v : frame.rgb) out.push_back(static_cast<std::byte>(v));
  return out;
}

Frame read_ppm(const std::filesystem::path& path) { return parse_ppm(read_file_bytes(path)); }

std::filesystem::path frame_path(const std::filesystem::path& frames_root, const FrameKey& key) {
  return frames_root / key.video_id / (std::to_string(key.frame_idx) + ".ppm");
}

}  // namespace macekit

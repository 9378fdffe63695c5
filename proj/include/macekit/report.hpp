#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "macekit/deteval.hpp"
#include "macekit/stats.hpp"

namespace macekit {

using ordered_json = nlohmann::ordered_json;

// Shortest round-trip decimal form; "inf", "-inf" and "nan" for the rest.
std::string format_number(double v);

// Non-finite values become strings so reports stay valid JSON.
ordered_json number_json(double v);

std::string sha256_hex(std::span<const std::byte> bytes);
std::string file_sha256(const std::filesystem::path& path);

// {"statistic", "p_value" ("<1e-8" when floored), "ci", "decision", "margin"?, "mean"}
ordered_json to_json(const TestResult& r);
ordered_json to_json(const Curve& curve);

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool line = true;  // polyline, otherwise scatter
};

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       std::span<const SvgSeries> series);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace macekit

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace macekit::cli {

// Flags shared by every subcommand.
struct RunConfig {
  std::uint64_t seed = 17;
  std::size_t resamples = 1000;
  double margin = 0.015;
  std::vector<double> fapm_points{0.5, 1.0};
  int window = 7;
  double iou = 0.2;
  std::string ce_rule;  // pixel rule file; empty selects the built-in rule
  std::string out = ".";
  bool strict = false;
  bool svg = false;
  unsigned threads = 1;
};

void validate(const RunConfig& cfg);

// `args` excludes the program name. Returns the process exit code.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace macekit::cli

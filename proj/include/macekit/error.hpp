#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace macekit {

// Every failure the library reports carries one of these codes.
enum class Errc {
  // ingest
  BadMagic,
  VersionUnsupported,
  TruncatedPayload,
  NonFiniteValue,
  MalformedLine,
  DuplicateKey,
  UnknownField,
  RangeError,
  CrossVideoPolyp,
  BadHeader,
  UnsupportedMaxval,
  TruncatedPixels,
  DanglingVideoRef,
  DanglingPolypRef,
  FrameOutOfRange,
  EmbeddingKeyMismatch,
  // mace
  TooFewSamples,
  NonFiniteInput,
  NotSymmetric,
  EigenFailure,
  DimensionMismatch,
  // stats / deteval
  EmptySamples,
  TooFewValidResamples,
  NotEstimable,
  ZeroDuration,
  EmptyCurve,
  // modality / project
  EmptyROI,
  DegenerateRow,
  PerplexityTooLarge,
  // general
  InvalidArgument,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Process exit code for a failure: 2 validation, 3 I/O, 4 statistical
// non-estimability.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace macekit

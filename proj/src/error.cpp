#include "macekit/error.hpp"

namespace macekit {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::UnknownField: return "UnknownField";
    case Errc::RangeError: return "RangeError";
    case Errc::CrossVideoPolyp: return "CrossVideoPolyp";
    case Errc::BadHeader: return "BadHeader";
    case Errc::UnsupportedMaxval: return "UnsupportedMaxval";
    case Errc::TruncatedPixels: return "TruncatedPixels";
    case Errc::DanglingVideoRef: return "DanglingVideoRef";
    case Errc::DanglingPolypRef: return "DanglingPolypRef";
    case Errc::FrameOutOfRange: return "FrameOutOfRange";
    case Errc::EmbeddingKeyMismatch: return "EmbeddingKeyMismatch";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::EigenFailure: return "EigenFailure";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::TooFewValidResamples: return "TooFewValidResamples";
    case Errc::NotEstimable: return "NotEstimable";
    case Errc::ZeroDuration: return "ZeroDuration";
    case Errc::EmptyCurve: return "EmptyCurve";
    case Errc::EmptyROI: return "EmptyROI";
    case Errc::DegenerateRow: return "DegenerateRow";
    case Errc::PerplexityTooLarge: return "PerplexityTooLarge";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::Io:
      return 3;
    case Errc::TooFewValidResamples:
    case Errc::NotEstimable:
    case Errc::ZeroDuration:
    case Errc::EmptyCurve:
    case Errc::EmptySamples:
    case Errc::TooFewSamples:
      return 4;
    default:
      return 2;
  }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace macekit

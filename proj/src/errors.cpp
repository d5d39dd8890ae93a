#include "pixeldoc/errors.hpp"

namespace pixeldoc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::FontResolution: return "FontResolution";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::MissingTruth: return "MissingTruth";
    case ErrorKind::NoTruth: return "NoTruth";
    case ErrorKind::NoInk: return "NoInk";
    case ErrorKind::AllMasked: return "AllMasked";
    case ErrorKind::HeadMissing: return "HeadMissing";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::OneClassOnly: return "OneClassOnly";
    case ErrorKind::EmptyIndex: return "EmptyIndex";
  }
  return "Unknown";
}

}  // namespace pixeldoc

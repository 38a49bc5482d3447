#include "qstack/types.hpp"

namespace qstack {

std::string_view to_string(Priority p) {
  switch (p) {
    case Priority::High: return "High";
    case Priority::Low: return "Low";
    case Priority::Unset: return "Unset";
  }
  return "Unset";
}

Priority priority_from_string(std::string_view s) {
  if (s == "High" || s == "high") return Priority::High;
  if (s == "Low" || s == "low") return Priority::Low;
  if (s == "Unset" || s == "unset" || s == "Any" || s == "any") return Priority::Unset;
  throw Error(ErrorCode::InvalidConfig, "unknown priority '" + std::string(s) + "'");
}

std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownFlow: return "UnknownFlow";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::UnsupportedLayer: return "UnsupportedLayer";
    case ErrorCode::CallbackMismatch: return "CallbackMismatch";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
  }
  return "Unknown";
}

}  // namespace qstack

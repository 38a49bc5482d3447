#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qstack {

/// Virtual time and durations, integer nanoseconds.
using Nanos = std::int64_t;

inline constexpr Nanos kNsPerUs = 1'000;
inline constexpr Nanos kNsPerMs = 1'000'000;
inline constexpr Nanos kNsPerSec = 1'000'000'000;
inline constexpr Nanos kNever = INT64_MAX;

constexpr Nanos us(std::int64_t v) { return v * kNsPerUs; }
constexpr Nanos ms(std::int64_t v) { return v * kNsPerMs; }

using FlowId = std::uint32_t;
using QueueId = std::uint32_t;
using TaskId = std::uint32_t;
using CoreId = std::uint32_t;
using RequestId = std::uint64_t;

/// Scheduling label carried by packets, events and requests.
enum class Priority : std::uint8_t { Unset = 0, Low = 1, High = 2 };

/// Unset collapses to Low everywhere a class must be chosen.
constexpr Priority effective(Priority p) { return p == Priority::High ? Priority::High : Priority::Low; }

std::string_view to_string(Priority p);
Priority priority_from_string(std::string_view s);

enum class ErrorCode {
  UnknownFlow,
  OutOfBounds,
  UnsupportedLayer,
  CallbackMismatch,
  NoSamples,
  ZeroTotal,
  InvalidPlan,
  InvalidConfig,
  UnknownPreset,
};

std::string_view to_string(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qstack

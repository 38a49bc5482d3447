#pragma once

#include <map>
#include <string>
#include <vector>

#include "qstack/types.hpp"

namespace qstack {

/// Latency histogram: 1 us buckets below 1 ms, then 16 buckets per
/// doubling. Each bucket remembers its largest sample, which is what
/// percentile queries report.
class LatencyHistogram {
 public:
  static constexpr std::size_t kLinearBuckets = 1000;
  static constexpr int kLogSubBuckets = 16;

  void record(Nanos latency);

  std::uint64_t count() const { return count_; }
  Nanos min() const { return count_ ? min_ : 0; }
  Nanos max() const { return count_ ? max_ : 0; }
  double mean() const { return count_ ? static_cast<double>(sum_) / static_cast<double>(count_) : 0.0; }

  /// Nearest-rank percentile, p in (0, 100]. NoSamples if empty.
  Nanos percentile(double p) const;
  Nanos p99() const { return percentile(99.0); }
  Nanos p50() const { return percentile(50.0); }

  static std::size_t bucket_of(Nanos v);
  static Nanos bucket_lower(std::size_t b);
  static Nanos bucket_width(std::size_t b) { return bucket_lower(b + 1) - bucket_lower(b); }

 private:
  std::vector<std::uint64_t> counts_;
  std::vector<Nanos> bucket_max_;
  std::uint64_t count_ = 0;
  Nanos sum_ = 0;
  Nanos min_ = kNever;
  Nanos max_ = 0;
};

/// Minimum sample count for a p99 to be considered meaningful.
inline constexpr std::uint64_t kMinP99Samples = 100;

/// Cycle split for the efficiency metric.
struct CpuAccount {
  Nanos app_ns = 0;    // service work in application coroutines
  Nanos total_ns = 0;  // app + stack + checks + idle polling

  /// app_ns / total_ns; ZeroTotal when nothing was accounted.
  double efficiency() const;
};

/// Per-class latency histograms plus drop counters.
class Metrics {
 public:
  void record(const std::string& cls, Nanos latency) { classes_[cls].record(latency); }
  const LatencyHistogram& histogram(const std::string& cls) const;
  bool has(const std::string& cls) const { return classes_.count(cls) != 0; }
  Nanos p99(const std::string& cls) const { return histogram(cls).p99(); }
  const std::map<std::string, LatencyHistogram>& classes() const { return classes_; }

 private:
  std::map<std::string, LatencyHistogram> classes_;
};

}  // namespace qstack

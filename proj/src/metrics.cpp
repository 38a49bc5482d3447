#include "qstack/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace qstack {

std::size_t LatencyHistogram::bucket_of(Nanos v) {
  if (v < 0) v = 0;
  if (v < ms(1)) return static_cast<std::size_t>(v / kNsPerUs);
  // Walk doublings with integer arithmetic so bucket edges agree with bucket_lower.
  std::size_t b = kLinearBuckets + static_cast<std::size_t>(
                                       std::floor(kLogSubBuckets * std::log2(static_cast<double>(v) / ms(1))));
  while (b > kLinearBuckets && bucket_lower(b) > v) --b;
  while (bucket_lower(b + 1) <= v) ++b;
  return b;
}

Nanos LatencyHistogram::bucket_lower(std::size_t b) {
  if (b <= kLinearBuckets) return static_cast<Nanos>(b) * kNsPerUs;
  double exp = static_cast<double>(b - kLinearBuckets) / kLogSubBuckets;
  return static_cast<Nanos>(std::ceil(ms(1) * std::exp2(exp)));
}

void LatencyHistogram::record(Nanos latency) {
  std::size_t b = bucket_of(latency);
  if (b >= counts_.size()) {
    counts_.resize(b + 1, 0);
    bucket_max_.resize(b + 1, 0);
  }
  ++counts_[b];
  bucket_max_[b] = std::max(bucket_max_[b], latency);
  ++count_;
  sum_ += latency;
  min_ = std::min(min_, latency);
  max_ = std::max(max_, latency);
}

Nanos LatencyHistogram::percentile(double p) const {
  if (count_ == 0) throw Error(ErrorCode::NoSamples, "percentile of an empty histogram");
  auto rank = static_cast<std::uint64_t>(std::ceil(p / 100.0 * static_cast<double>(count_)));
  rank = std::clamp<std::uint64_t>(rank, 1, count_);
  std::uint64_t seen = 0;
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    seen += counts_[b];
    if (seen >= rank) return bucket_max_[b];
  }
  return max_;
}

double CpuAccount::efficiency() const {
  if (total_ns <= 0) throw Error(ErrorCode::ZeroTotal, "efficiency with zero accounted cycles");
  return static_cast<double>(app_ns) / static_cast<double>(total_ns);
}

const LatencyHistogram& Metrics::histogram(const std::string& cls) const {
  auto it = classes_.find(cls);
  if (it == classes_.end()) throw Error(ErrorCode::NoSamples, "no samples for class " + cls);
  return it->second;
}

}  // namespace qstack

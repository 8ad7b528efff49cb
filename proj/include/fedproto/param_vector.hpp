#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fedproto {

struct Segment {
  std::string name;
  std::size_t length = 0;
  bool operator==(const Segment&) const = default;
};

using Layout = std::vector<Segment>;

std::size_t layout_size(const Layout& layout);

/// Flat parameter vector partitioned into named segments. Immutable after
/// construction; all values are guaranteed finite.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Layout segments, std::vector<double> values);

  static ParamVector zeros(Layout segments);
  static ParamVector zeros_like(const ParamVector& other);

  const Layout& layout() const { return segments_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  bool layout_compatible(const ParamVector& other) const;
  std::size_t segment_offset(std::size_t segment_index) const;
  std::span<const double> segment_values(std::size_t segment_index) const;

  bool operator==(const ParamVector&) const = default;

 private:
  Layout segments_;
  std::vector<double> values_;
};

// Reductions accumulate left-to-right in the order the vectors are given;
// callers that need bit-reproducibility order inputs by client id first.
ParamVector weighted_sum(std::span<const ParamVector> vectors,
                         std::span<const double> weights);
ParamVector coordinate_mean(std::span<const ParamVector> vectors);
ParamVector coordinate_median(std::span<const ParamVector> vectors);
ParamVector subtract(const ParamVector& a, const ParamVector& b);

enum class SegmentPolicy { RobustAggregated, SampleWeightOnly };

/// One policy flag per segment of a layout.
struct SegmentPolicyMask {
  std::vector<SegmentPolicy> per_segment;

  static SegmentPolicyMask all_robust(const Layout& layout);
  void check_covers(const Layout& layout) const;

  bool operator==(const SegmentPolicyMask&) const = default;
};

}  // namespace fedproto

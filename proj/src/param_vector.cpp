#include "fedproto/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedproto {

std::size_t layout_size(const Layout& layout) {
  std::size_t total = 0;
  for (const auto& seg : layout) total += seg.length;
  return total;
}

ParamVector::ParamVector(Layout segments, std::vector<double> values)
    : segments_(std::move(segments)), values_(std::move(values)) {
  if (layout_size(segments_) != values_.size()) {
    throw std::invalid_argument(
        "ParamVector: value count does not match declared segment lengths");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("ParamVector: non-finite value");
    }
  }
}

ParamVector ParamVector::zeros(Layout segments) {
  std::vector<double> values(layout_size(segments), 0.0);
  return ParamVector(std::move(segments), std::move(values));
}

ParamVector ParamVector::zeros_like(const ParamVector& other) {
  return zeros(other.segments_);
}

bool ParamVector::layout_compatible(const ParamVector& other) const {
  return segments_ == other.segments_;
}

std::size_t ParamVector::segment_offset(std::size_t segment_index) const {
  if (segment_index >= segments_.size()) {
    throw std::out_of_range("ParamVector: segment index out of range");
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < segment_index; ++i) offset += segments_[i].length;
  return offset;
}

std::span<const double> ParamVector::segment_values(
    std::size_t segment_index) const {
  const std::size_t offset = segment_offset(segment_index);
  return std::span<const double>(values_).subspan(
      offset, segments_[segment_index].length);
}

namespace {

void require_compatible(std::span<const ParamVector> vectors) {
  if (vectors.empty()) {
    throw std::invalid_argument("empty vector list");
  }
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (!vectors[i].layout_compatible(vectors[0])) {
      throw std::invalid_argument("layout mismatch between parameter vectors");
    }
  }
}

}  // namespace

ParamVector weighted_sum(std::span<const ParamVector> vectors,
                         std::span<const double> weights) {
  require_compatible(vectors);
  if (weights.size() != vectors.size()) {
    throw std::invalid_argument("weighted_sum: weight count mismatch");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) {
      throw std::invalid_argument("weighted_sum: non-finite weight");
    }
  }
  std::vector<double> out(vectors[0].size(), 0.0);
  for (std::size_t c = 0; c < vectors.size(); ++c) {
    const auto vals = vectors[c].values();
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] += weights[c] * vals[j];
    }
  }
  for (double v : out) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("weighted_sum: non-finite result");
    }
  }
  return ParamVector(vectors[0].layout(), std::move(out));
}

ParamVector coordinate_mean(std::span<const ParamVector> vectors) {
  require_compatible(vectors);
  const double w = 1.0 / static_cast<double>(vectors.size());
  std::vector<double> weights(vectors.size(), w);
  return weighted_sum(vectors, weights);
}

ParamVector coordinate_median(std::span<const ParamVector> vectors) {
  require_compatible(vectors);
  const std::size_t n = vectors.size();
  std::vector<double> out(vectors[0].size());
  std::vector<double> column(n);
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t c = 0; c < n; ++c) column[c] = vectors[c][j];
    std::sort(column.begin(), column.end());
    if (n % 2 == 1) {
      out[j] = column[n / 2];
    } else {
      out[j] = 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
  }
  return ParamVector(vectors[0].layout(), std::move(out));
}

ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  if (!a.layout_compatible(b)) {
    throw std::invalid_argument("subtract: layout mismatch");
  }
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = a[j] - b[j];
  return ParamVector(a.layout(), std::move(out));
}

SegmentPolicyMask SegmentPolicyMask::all_robust(const Layout& layout) {
  return SegmentPolicyMask{std::vector<SegmentPolicy>(
      layout.size(), SegmentPolicy::RobustAggregated)};
}

void SegmentPolicyMask::check_covers(const Layout& layout) const {
  if (per_segment.size() != layout.size()) {
    throw std::invalid_argument(
        "SegmentPolicyMask: mask does not cover layout exactly");
  }
}

}  // namespace fedproto

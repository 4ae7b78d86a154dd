#pragma once

#include <cstddef>
#include <optional>

#include "spikedet/time_series.hpp"

namespace spikedet {

/// Exact-index confusion counts for one replicate. Components always sum
/// to the series length.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

/// Score detected spikes against inserted ones over a series of length n.
/// A detection counts as correct only at the exact inserted index.
ConfusionCounts score(const SpikeSet& inserted, const SpikeSet& detected,
                      std::size_t n);

/// tp / (tp + fn); empty when no spikes were inserted.
std::optional<double> sensitivity(const ConfusionCounts& c);

/// tn / (tn + fp); empty when every point carries a spike.
std::optional<double> specificity(const ConfusionCounts& c);

}  // namespace spikedet

#include "spikedet/metrics.hpp"

namespace spikedet {

ConfusionCounts score(const SpikeSet& inserted, const SpikeSet& detected,
                      std::size_t n) {
  inserted.validate(n);
  detected.validate(n);

  ConfusionCounts c;
  for (std::size_t i : detected.indices) {
    if (inserted.contains(i)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = inserted.size() - c.tp;
  c.tn = n - c.tp - c.fp - c.fn;
  return c;
}

std::optional<double> sensitivity(const ConfusionCounts& c) {
  const std::size_t denom = c.tp + c.fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

std::optional<double> specificity(const ConfusionCounts& c) {
  const std::size_t denom = c.tn + c.fp;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(c.tn) / static_cast<double>(denom);
}

}  // namespace spikedet

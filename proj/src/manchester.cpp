#include "evlc/manchester.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evlc {

Chips manchester_encode(std::span<const std::uint8_t> bits) {
  Chips chips;
  chips.reserve(bits.size() * 2);
  for (auto b : bits) {
    chips.push_back(b ? 0 : 1);
    chips.push_back(b ? 1 : 0);
  }
  return chips;
}

Bits manchester_decode(std::span<const std::uint8_t> chips) {
  if (chips.size() % 2 != 0) throw std::invalid_argument("odd Manchester chip count");
  Bits bits(chips.size() / 2);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = chips[2 * i + 1] ? 1 : 0;
  return bits;
}

std::vector<EdgePosition> expected_positive_edges(std::span<const std::uint8_t> bits,
                                                  std::uint8_t prev_bit) {
  std::vector<EdgePosition> edges;
  edges.reserve(bits.size());
  std::uint8_t prev = prev_bit ? 1 : 0;
  for (auto b : bits) {
    const std::uint8_t cur = b ? 1 : 0;
    if (cur == 1) {
      edges.push_back(EdgePosition::kMid);
    } else {
      edges.push_back(prev == 0 ? EdgePosition::kBoundary : EdgePosition::kNone);
    }
    prev = cur;
  }
  return edges;
}

std::vector<SlotObservation> ideal_observations(std::span<const std::uint8_t> bits,
                                                double edge_mass) {
  const auto edges = expected_positive_edges(bits, 0);
  std::vector<SlotObservation> obs(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] == EdgePosition::kBoundary) obs[i].boundary_weight = edge_mass;
    if (edges[i] == EdgePosition::kMid) obs[i].mid_weight = edge_mass;
  }
  return obs;
}

namespace {

// Upper quartile of the per-slot peak mass around each slot. Dark slots
// (a 0 after a 1) never occur twice in a row, so at least half of any window
// carries an edge and the upper quartile lands on edge mass.
std::vector<double> windowed_edge_mass(std::span<const SlotObservation> obs, int half_width) {
  const int n = static_cast<int>(obs.size());
  std::vector<double> peak(n);
  for (int i = 0; i < n; ++i) peak[i] = std::max(obs[i].boundary_weight, obs[i].mid_weight);
  std::vector<double> ref(n);
  std::vector<double> window;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half_width);
    const int hi = std::min(n - 1, i + half_width);
    window.assign(peak.begin() + lo, peak.begin() + hi + 1);
    const auto q = static_cast<std::size_t>(0.75 * static_cast<double>(window.size() - 1) + 0.5);
    std::nth_element(window.begin(), window.begin() + q, window.end());
    ref[i] = window[q];
  }
  return ref;
}

}  // namespace

ClusterSoftBits soft_demap(std::span<const SlotObservation> obs, double noise_floor) {
  DemapOptions options;
  options.noise_floor = noise_floor;
  return soft_demap(obs, options);
}

ClusterSoftBits soft_demap(std::span<const SlotObservation> obs, const DemapOptions& options,
                           DemapTrace* trace) {
  const double nf = options.noise_floor;
  if (!(nf > 0.0)) throw std::invalid_argument("noise_floor must be positive");
  for (const auto& o : obs) {
    if (!(o.boundary_weight >= 0.0) || !(o.mid_weight >= 0.0) || !std::isfinite(o.boundary_weight) ||
        !std::isfinite(o.mid_weight)) {
      throw std::invalid_argument("slot observations must be finite and non-negative");
    }
  }

  std::vector<double> edge_mass;
  if (options.edge_mass > 0.0) {
    edge_mass.assign(obs.size(), options.edge_mass);
  } else {
    edge_mass = windowed_edge_mass(obs, std::max(1, options.reference_window_bits));
  }

  ClusterSoftBits out;
  out.llrs.resize(obs.size());
  if (trace) {
    trace->branch.assign(obs.size(), ZeroBranch::kBlend);
    trace->after_zero_likelihood.assign(obs.size(), 0.0);
    trace->after_one_likelihood.assign(obs.size(), 0.0);
    trace->prev_zero_posterior.assign(obs.size(), 0.0);
  }

  double prev_zero = 1.0;  // P(previous bit = 0)
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double b = obs[k].boundary_weight;
    const double m = obs[k].mid_weight;
    const double absence = std::max(0.0, edge_mass[k] - m);

    // After a 0: a 0 rises at the boundary, a 1 rises mid-bit.
    const double s00 = b + nf;
    const double s01 = m + nf;
    // After a 1: a 0 stays dark, a 1 rises mid-bit.
    const double s10 = absence + nf;
    const double s11 = m + nf;

    const double after_zero = prev_zero * s00 / (s00 + s01);
    const double after_one = (1.0 - prev_zero) * s10 / (s10 + s11);
    const double one = prev_zero * s01 / (s00 + s01) + (1.0 - prev_zero) * s11 / (s10 + s11);

    double zero = after_zero + after_one;
    ZeroBranch branch = ZeroBranch::kBlend;
    if (b > 0.0 && absence > 0.0 && after_zero > 0.0 && after_one > 0.0) {
      // Both zero reconstructions are plausible; keep the stronger one.
      if (after_zero >= after_one) {
        zero = after_zero;
        branch = ZeroBranch::kAfterZero;
      } else {
        zero = after_one;
        branch = ZeroBranch::kAfterOne;
      }
    }

    out.llrs[k] = std::log(zero / one);
    if (trace) {
      trace->branch[k] = branch;
      trace->after_zero_likelihood[k] = after_zero;
      trace->after_one_likelihood[k] = after_one;
      trace->prev_zero_posterior[k] = prev_zero;
    }
    prev_zero = zero / (zero + one);
  }
  return out;
}

}  // namespace evlc

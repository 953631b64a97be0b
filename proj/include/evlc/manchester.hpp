#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evlc/frame.hpp"

namespace evlc {

// Bit 1 -> chips (0,1), rising edge mid-bit. Bit 0 -> chips (1,0).
Chips manchester_encode(std::span<const std::uint8_t> bits);
Bits manchester_decode(std::span<const std::uint8_t> chips);

enum class EdgePosition : std::uint8_t { kNone, kBoundary, kMid };

// Where a positive event is expected within each bit slot, given the bit
// transmitted before the first one.
std::vector<EdgePosition> expected_positive_edges(std::span<const std::uint8_t> bits,
                                                  std::uint8_t prev_bit);

struct SlotObservation {
  double boundary_weight = 0.0;  // first chip of the bit slot
  double mid_weight = 0.0;       // second chip
};

struct ClusterSoftBits {
  int cluster_index = 0;
  std::vector<double> llrs;  // > 0 favours bit 0
};

/*
 * Which zero-hypothesis explained a slot.
 *
 * kAfterZero: the previous bit was 0, so a 0 shows up as a boundary event.
 * kAfterOne: the previous bit was 1, so a 0 leaves the slot dark.
 * kBlend: only one branch carried mass and the two were summed.
 */
enum class ZeroBranch : std::uint8_t { kBlend, kAfterZero, kAfterOne };

struct DemapOptions {
  double noise_floor = 0.5;
  // Half-width, in bits, of the window used to estimate the event mass of a
  // single edge. The estimate tracks slow drifts such as a footprint moving
  // off the detected region.
  int reference_window_bits = 8;
  // Fixed edge mass; <= 0 selects the windowed upper-quartile estimate.
  double edge_mass = 0.0;
};

struct DemapTrace {
  std::vector<ZeroBranch> branch;
  std::vector<double> after_zero_likelihood;
  std::vector<double> after_one_likelihood;
  std::vector<double> prev_zero_posterior;
};

// Soft P1-P4 reconstruction. The frame start is treated as following a 0.
ClusterSoftBits soft_demap(std::span<const SlotObservation> obs, double noise_floor = 0.5);
ClusterSoftBits soft_demap(std::span<const SlotObservation> obs, const DemapOptions& options,
                           DemapTrace* trace = nullptr);

// Observation pattern of a noiseless reception: unit mass where an edge is
// expected.
std::vector<SlotObservation> ideal_observations(std::span<const std::uint8_t> bits,
                                                double edge_mass = 1.0);

}  // namespace evlc

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evlc/frame.hpp"
#include "evlc/polar.hpp"

namespace evlc {

// User bytes carried by one packet (CRC excluded).
int packet_capacity_bytes(const FrameLayout& layout, const PolarCodeConfig& fec);
// Bytes on air per packet, per-cluster CRC included (96 with defaults).
int frame_payload_bytes(const FrameLayout& layout, const PolarCodeConfig& fec);

Bits bytes_to_bits(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);

// Splits the payload across clusters (cluster 0 takes the first bits), adds
// each cluster's CRC and polar-encodes it.
std::vector<Bits> encode_packet(const Packet& packet, const FrameLayout& layout,
                                const PolarCodeConfig& fec);

// What one transmitter blinks: frames back to back separated by the layout's
// dark gap, starting at start_us.
struct TransmitterSignal {
  std::int64_t start_us = 0;
  std::int64_t chip_period_us = 100;
  std::vector<Chips> cluster_chips;

  std::int64_t end_us() const;
  // Chip of a cluster at time t; dark outside the signal.
  std::uint8_t chip_at(int cluster, std::int64_t t_us) const;
};

TransmitterSignal build_signal(std::span<const Packet> packets, const FrameLayout& layout,
                               const PolarCodeConfig& fec, std::int64_t start_us);

// Start time of frame k of a signal built by build_signal.
std::int64_t frame_start_us(const FrameLayout& layout, std::int64_t start_us, int frame_index);

}  // namespace evlc

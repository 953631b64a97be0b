#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evlc {

using Bits = std::vector<std::uint8_t>;
using Chips = std::vector<std::uint8_t>;

class SizeMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/*
 * Chip-level structure of one packet as blinked by a transmitter.
 *
 * A frame is the sync pattern followed by the body. The body interleaves
 * pilot blocks and Manchester-coded data chips: a pilot block is inserted
 * in front of data chip index p for every p in pilot_positions (repeats are
 * allowed and produce consecutive blocks). Every LED cluster shares the sync
 * and pilot chips and carries its own data chips.
 */
struct FrameLayout {
  std::int64_t chip_period_us = 100;
  std::vector<int> sync_pulse_slots = {0, 5, 9, 12};
  Chips pilot_chips = {1, 0, 1, 1, 0};
  std::vector<int> pilot_positions = {0};
  int data_chips_per_cluster = 256;
  int cluster_count = 16;
  // Dark slots between consecutive frames of one transmission.
  int inter_packet_gap_slots = 10;

  void validate() const;

  int sync_span() const { return sync_pulse_slots.empty() ? 0 : sync_pulse_slots.back() + 1; }
  int pilot_chip_count() const {
    return static_cast<int>(pilot_chips.size() * pilot_positions.size());
  }
  int total_slots() const { return sync_span() + pilot_chip_count() + data_chips_per_cluster; }
  int coded_bits_per_cluster() const { return data_chips_per_cluster / 2; }
  int last_sync_slot() const { return sync_pulse_slots.back(); }

  // Frame slot index of every data chip, in data order.
  std::vector<int> data_slot_indices() const;
  // For every frame slot: data chip index, or -1 for sync/pilot slots.
  std::vector<int> slot_to_data_index() const;
  // The chips shared by all clusters; data slots are set to 0.
  Chips shared_chips() const;
  // Rising edges that are fully determined by sync and pilot chips alone
  // (both the chip and its predecessor are known; slot 0 follows darkness).
  std::vector<int> known_edge_slots() const;
};

struct Packet {
  std::vector<std::uint8_t> payload;
  std::int64_t packet_id = 0;
};

struct ClusterChipSchedule {
  int cluster_index = 0;
  Chips chips;
};

Chips build_sync_pattern(const FrameLayout& layout);

// coded_bits[c] holds the polar codeword of cluster c.
std::vector<ClusterChipSchedule> assemble_frame(const Packet& packet,
                                                const std::vector<Bits>& coded_bits,
                                                const FrameLayout& layout);

// Inverse of the data-region mapping: Manchester-decodes the data chips of a
// noiseless schedule.
Bits extract_coded_bits(const ClusterChipSchedule& schedule, const FrameLayout& layout);

std::int64_t frame_duration_us(const FrameLayout& layout);

// Slot indices i where chips[i] == 1 and the previous chip is 0. The chip
// before index 0 is taken as `prev`.
std::vector<int> rising_edges(std::span<const std::uint8_t> chips, std::uint8_t prev = 0);

std::string layout_to_json(const FrameLayout& layout);
FrameLayout layout_from_json(const std::string& text);

}  // namespace evlc

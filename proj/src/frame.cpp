#include "evlc/frame.hpp"

#include <algorithm>
#include <string>

#include "evlc/manchester.hpp"

namespace evlc {

void FrameLayout::validate() const {
  if (chip_period_us <= 0) throw std::invalid_argument("chip_period_us must be positive");
  if (cluster_count < 1) throw std::invalid_argument("cluster_count must be >= 1");
  if (sync_pulse_slots.empty()) throw std::invalid_argument("sync pattern needs at least one pulse");
  if (sync_pulse_slots.front() < 0) throw std::invalid_argument("sync pulse slots must be >= 0");
  for (std::size_t i = 1; i < sync_pulse_slots.size(); ++i) {
    if (sync_pulse_slots[i] <= sync_pulse_slots[i - 1]) {
      throw std::invalid_argument("sync pulse slots must be strictly increasing");
    }
  }
  if (data_chips_per_cluster < 0 || data_chips_per_cluster % 2 != 0) {
    throw std::invalid_argument("data_chips_per_cluster must be even and non-negative");
  }
  for (auto c : pilot_chips) {
    if (c > 1) throw std::invalid_argument("pilot chips must be binary");
  }
  for (int p : pilot_positions) {
    if (p < 0 || p > data_chips_per_cluster) {
      throw std::invalid_argument("pilot position outside the data region");
    }
  }
  if (inter_packet_gap_slots < 0) throw std::invalid_argument("inter_packet_gap_slots must be >= 0");
}

namespace {

// Frame body as a sequence of tags: -1 - k for pilot chip k, >= 0 for a data
// chip index.
std::vector<int> body_map(const FrameLayout& layout) {
  std::vector<int> positions = layout.pilot_positions;
  std::sort(positions.begin(), positions.end());
  std::vector<int> body;
  body.reserve(layout.pilot_chip_count() + layout.data_chips_per_cluster);
  std::size_t next = 0;
  const int pilot_len = static_cast<int>(layout.pilot_chips.size());
  for (int d = 0; d <= layout.data_chips_per_cluster; ++d) {
    while (next < positions.size() && positions[next] == d) {
      for (int k = 0; k < pilot_len; ++k) body.push_back(-1 - k);
      ++next;
    }
    if (d < layout.data_chips_per_cluster) body.push_back(d);
  }
  return body;
}

}  // namespace

std::vector<int> FrameLayout::slot_to_data_index() const {
  std::vector<int> map(total_slots(), -1);
  const auto body = body_map(*this);
  const int base = sync_span();
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] >= 0) map[base + i] = body[i];
  }
  return map;
}

std::vector<int> FrameLayout::data_slot_indices() const {
  std::vector<int> slots(data_chips_per_cluster, -1);
  const auto map = slot_to_data_index();
  for (int s = 0; s < static_cast<int>(map.size()); ++s) {
    if (map[s] >= 0) slots[map[s]] = s;
  }
  return slots;
}

Chips FrameLayout::shared_chips() const {
  Chips chips(total_slots(), 0);
  const auto sync = build_sync_pattern(*this);
  std::copy(sync.begin(), sync.end(), chips.begin());
  const auto body = body_map(*this);
  const int base = sync_span();
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] < 0) chips[base + i] = pilot_chips[-1 - body[i]];
  }
  return chips;
}

std::vector<int> FrameLayout::known_edge_slots() const {
  const auto chips = shared_chips();
  const auto map = slot_to_data_index();
  std::vector<int> edges;
  for (int s = 0; s < static_cast<int>(chips.size()); ++s) {
    if (map[s] >= 0 || chips[s] == 0) continue;
    if (s == 0) {
      edges.push_back(s);
    } else if (map[s - 1] < 0 && chips[s - 1] == 0) {
      edges.push_back(s);
    }
  }
  return edges;
}

Chips build_sync_pattern(const FrameLayout& layout) {
  layout.validate();
  Chips pattern(layout.sync_span(), 0);
  for (int s : layout.sync_pulse_slots) pattern[s] = 1;
  return pattern;
}

std::vector<ClusterChipSchedule> assemble_frame(const Packet& /*packet*/,
                                                const std::vector<Bits>& coded_bits,
                                                const FrameLayout& layout) {
  layout.validate();
  if (static_cast<int>(coded_bits.size()) != layout.cluster_count) {
    throw SizeMismatchError("expected " + std::to_string(layout.cluster_count) +
                            " cluster codewords, got " + std::to_string(coded_bits.size()));
  }
  const Chips shared = layout.shared_chips();
  const auto data_slots = layout.data_slot_indices();
  std::vector<ClusterChipSchedule> schedules;
  schedules.reserve(coded_bits.size());
  for (int c = 0; c < layout.cluster_count; ++c) {
    const auto& bits = coded_bits[c];
    if (static_cast<int>(bits.size()) * 2 != layout.data_chips_per_cluster) {
      throw SizeMismatchError("cluster " + std::to_string(c) + ": " +
                              std::to_string(bits.size()) + " coded bits do not fill " +
                              std::to_string(layout.data_chips_per_cluster) + " data chips");
    }
    ClusterChipSchedule schedule{c, shared};
    const Chips data = manchester_encode(bits);
    for (std::size_t d = 0; d < data.size(); ++d) schedule.chips[data_slots[d]] = data[d];
    schedules.push_back(std::move(schedule));
  }
  return schedules;
}

Bits extract_coded_bits(const ClusterChipSchedule& schedule, const FrameLayout& layout) {
  if (static_cast<int>(schedule.chips.size()) != layout.total_slots()) {
    throw SizeMismatchError("schedule length does not match layout");
  }
  const auto data_slots = layout.data_slot_indices();
  Chips data(data_slots.size());
  for (std::size_t d = 0; d < data.size(); ++d) data[d] = schedule.chips[data_slots[d]];
  return manchester_decode(data);
}

std::int64_t frame_duration_us(const FrameLayout& layout) {
  return static_cast<std::int64_t>(layout.total_slots()) * layout.chip_period_us;
}

std::vector<int> rising_edges(std::span<const std::uint8_t> chips, std::uint8_t prev) {
  std::vector<int> edges;
  for (std::size_t i = 0; i < chips.size(); ++i) {
    if (chips[i] && !prev) edges.push_back(static_cast<int>(i));
    prev = chips[i];
  }
  return edges;
}

}  // namespace evlc

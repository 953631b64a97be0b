#include "evlc/transmitter.hpp"

#include <string>

namespace evlc {

int packet_capacity_bytes(const FrameLayout& layout, const PolarCodeConfig& fec) {
  const int bits = layout.cluster_count * fec.payload_length();
  if (bits % 8 != 0) throw std::invalid_argument("packet payload is not a whole number of bytes");
  return bits / 8;
}

int frame_payload_bytes(const FrameLayout& layout, const PolarCodeConfig& fec) {
  return layout.cluster_count * fec.info_length / 8;
}

Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
  Bits bits;
  bits.reserve(bytes.size() * 8);
  for (auto byte : bytes) {
    for (int i = 7; i >= 0; --i) bits.push_back((byte >> i) & 1u);
  }
  return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return bytes;
}

std::vector<Bits> encode_packet(const Packet& packet, const FrameLayout& layout,
                                const PolarCodeConfig& fec) {
  const int capacity = packet_capacity_bytes(layout, fec);
  if (static_cast<int>(packet.payload.size()) != capacity) {
    throw SizeMismatchError("packet payload is " + std::to_string(packet.payload.size()) +
                            " bytes, layout carries " + std::to_string(capacity));
  }
  if (fec.block_length * 2 != layout.data_chips_per_cluster) {
    throw SizeMismatchError("polar block length does not fill the data chips of a cluster");
  }
  const Bits bits = bytes_to_bits(packet.payload);
  const int per_cluster = fec.payload_length();
  std::vector<Bits> coded;
  coded.reserve(layout.cluster_count);
  for (int c = 0; c < layout.cluster_count; ++c) {
    const auto first = bits.begin() + static_cast<std::ptrdiff_t>(c) * per_cluster;
    const Bits chunk(first, first + per_cluster);
    coded.push_back(polar_encode_payload(chunk, fec));
  }
  return coded;
}

std::int64_t TransmitterSignal::end_us() const {
  const std::size_t len = cluster_chips.empty() ? 0 : cluster_chips.front().size();
  return start_us + static_cast<std::int64_t>(len) * chip_period_us;
}

std::uint8_t TransmitterSignal::chip_at(int cluster, std::int64_t t_us) const {
  if (t_us < start_us) return 0;
  const auto& chips = cluster_chips[cluster];
  const auto idx = static_cast<std::size_t>((t_us - start_us) / chip_period_us);
  return idx < chips.size() ? chips[idx] : 0;
}

TransmitterSignal build_signal(std::span<const Packet> packets, const FrameLayout& layout,
                               const PolarCodeConfig& fec, std::int64_t start_us) {
  TransmitterSignal signal;
  signal.start_us = start_us;
  signal.chip_period_us = layout.chip_period_us;
  signal.cluster_chips.assign(layout.cluster_count, {});
  for (std::size_t k = 0; k < packets.size(); ++k) {
    if (k > 0) {
      for (auto& chips : signal.cluster_chips) {
        chips.insert(chips.end(), static_cast<std::size_t>(layout.inter_packet_gap_slots), 0);
      }
    }
    const auto schedules = assemble_frame(packets[k], encode_packet(packets[k], layout, fec), layout);
    for (const auto& s : schedules) {
      auto& chips = signal.cluster_chips[s.cluster_index];
      chips.insert(chips.end(), s.chips.begin(), s.chips.end());
    }
  }
  return signal;
}

std::int64_t frame_start_us(const FrameLayout& layout, std::int64_t start_us, int frame_index) {
  const std::int64_t stride =
      static_cast<std::int64_t>(layout.total_slots() + layout.inter_packet_gap_slots) *
      layout.chip_period_us;
  return start_us + stride * frame_index;
}

}  // namespace evlc

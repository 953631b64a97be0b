#pragma once

#include <climits>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <span>
#include <stdexcept>
#include <vector>

#include "evlc/frame.hpp"
#include "evlc/manchester.hpp"
#include "evlc/polar.hpp"
#include "evlc/sensor.hpp"

namespace evlc {

class NoPeakError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BandTooThinError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AlignedEvent {
  std::int64_t t_aligned_us = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
};

/*
 * Result of replaying a positive event stream through the per-pixel interval
 * matcher. An event whose distance to the previous event of its pixel matches
 * one of the sync intervals is moved forward to where the final sync edge
 * would be, so all edges of one sync sequence collapse onto one instant.
 */
struct ShiftRecord {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> last_timestamp;  // per pixel; kNoEvent when unseen
  std::vector<std::uint32_t> counts;         // aligned events per pixel
  std::vector<AlignedEvent> aligned;         // in stream order

  static constexpr std::int64_t kNoEvent = INT64_MIN;

  std::uint32_t count_at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
};

// Interval (in chips) and the shift applied when it matches, from the layout's
// sync pulses: 5T -> +7T, 4T -> +3T, 3T -> 0 with the default pattern.
std::vector<std::pair<int, int>> sync_shift_table(const FrameLayout& layout);

ShiftRecord time_shift_record(std::span<const Event> events, std::int64_t chip_period_us,
                              std::int64_t tolerance_us, int width, int height);
ShiftRecord time_shift_record(std::span<const Event> events, const FrameLayout& layout,
                              std::int64_t tolerance_us, int width, int height);

struct RegionBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;
  double score = 0.0;  // aligned-event mass inside

  PixelRect rect() const { return {x_min, y_min, x_max, y_max}; }
  int height() const { return y_max - y_min + 1; }
  int width() const { return x_max - x_min + 1; }
  bool contains(int x, int y) const { return rect().contains(x, y); }
};

struct RegionParams {
  double sigma = 1.5;
  double count_threshold = 1.0;  // on the blurred count image
  int merge_gap_px = 8;
  long long min_area = 16;
  long long max_area = 200000;
  std::uint32_t hot_pixel_count = 2;  // raw aligned count that makes a pixel hot
  int min_hot_pixels = 16;
  // Border rows/columns with fewer hot pixels than this fraction of the
  // busiest one are trimmed; 0 disables.
  double edge_trim_fraction = 0.25;
};

std::vector<RegionBox> detect_regions(const ShiftRecord& record, const RegionParams& params = {});

// Rectangle merging step on its own: boxes closer than gap_px are joined
// until no pair qualifies.
std::vector<PixelRect> merge_rectangles(std::vector<PixelRect> boxes, int gap_px);

// Largest peak of the aligned-time histogram (bin width T/2, earliest bin on
// ties); returns the centre of that bin.
std::int64_t synchronize(const ShiftRecord& record, const RegionBox& region,
                         std::int64_t chip_period_us, std::uint32_t min_peak = 8);

// All peaks at least min_peak high and min_separation_us apart, by time.
std::vector<std::int64_t> find_sync_peaks(const ShiftRecord& record, const RegionBox& region,
                                          std::int64_t chip_period_us, std::uint32_t min_peak,
                                          std::int64_t min_separation_us);

// Mean aligned time within T/2 of a peak centre.
double refine_sync(const ShiftRecord& record, const RegionBox& region, std::int64_t peak_us,
                   std::int64_t chip_period_us);

// A preamble edge whose gap to the previous known edge repeats a sync
// interval aligns as if it were the final sync edge, so a peak can sit late by
// that edge's offset. Tries each such offset and keeps the sync time whose
// predicted known edges collect the most weight.
double resolve_sync_alias(std::span<const Event> events, const RegionBox& region, double t_sync_us,
                          const FrameLayout& layout);

struct PixelWeightMap {
  RegionBox region;
  std::vector<double> weights;  // row-major over the region

  double at(int x, int y) const {
    if (!region.contains(x, y)) return 0.0;
    return weights[static_cast<std::size_t>(y - region.y_min) * region.width() + (x - region.x_min)];
  }
};

// Fraction of the known preamble edges a pixel reproduced within T/2.
// t_sync_us is the time of the final sync edge.
PixelWeightMap pixel_weights(std::span<const Event> events, const RegionBox& region,
                             double t_sync_us, const FrameLayout& layout);

// Per cluster, per data bit. Region rows are split into cluster_count equal
// bands by pixel centre, top band first. Each chip collects events within half a chip of its
// nominal start, so an event on a window edge goes to the later chip.
std::vector<std::vector<SlotObservation>> accumulate_cluster_observations(
    std::span<const Event> events, const RegionBox& region, const PixelWeightMap& weights,
    double t_sync_us, const FrameLayout& layout);

struct DecodedPacket {
  std::vector<std::uint8_t> payload;
  std::vector<bool> crc_ok;
  std::optional<std::size_t> bit_errors_vs_truth;
  RegionBox region;
  double t_sync_us = 0.0;
  double t_proc_us = 0.0;  // wall clock spent decoding

  bool all_crc_ok() const;
};

struct ReceiverConfig {
  FrameLayout layout;
  PolarCodeConfig fec;
  RegionParams regions;
  DemapOptions demap;
  std::int64_t tolerance_us = 0;  // <= 0 selects T/4
  std::uint32_t min_peak = 8;
  bool parallel_regions = true;

  std::int64_t tolerance() const;
};

// Decodes the frame whose final sync edge is at t_sync_us.
DecodedPacket decode_frame(std::span<const Event> events, const RegionBox& region, double t_sync_us,
                           const ReceiverConfig& config);

// synchronize -> pixel_weights -> accumulate -> soft_demap -> SCL, on the
// strongest sync peak of the region.
DecodedPacket decode_region(std::span<const Event> events, const ShiftRecord& record,
                            const RegionBox& region, const ReceiverConfig& config);

struct RegionReception {
  RegionBox region;
  std::vector<DecodedPacket> packets;  // one per sync peak, by time
  std::string error;                   // set when the region could not be decoded
};

struct Reception {
  std::vector<RegionBox> regions;
  std::vector<RegionReception> per_region;
};

// Full receiver over a capture: record, detect, then every frame of every
// region, one worker per region.
Reception receive(std::span<const Event> events, int width, int height, const ReceiverConfig& config);

std::string packet_to_json_line(const DecodedPacket& packet);

}  // namespace evlc

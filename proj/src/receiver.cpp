#include "evlc/receiver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <map>
#include <numeric>

#include <json.hpp>

#include "evlc/transmitter.hpp"

namespace evlc {

std::vector<std::pair<int, int>> sync_shift_table(const FrameLayout& layout) {
  const auto& slots = layout.sync_pulse_slots;
  std::vector<std::pair<int, int>> table;
  for (std::size_t k = 1; k < slots.size(); ++k) {
    table.emplace_back(slots[k] - slots[k - 1], slots.back() - slots[k]);
  }
  return table;
}

namespace {

ShiftRecord record_with_table(std::span<const Event> events, std::int64_t period,
                              std::int64_t tolerance, int width, int height,
                              const std::vector<std::pair<int, int>>& table) {
  if (period <= 0) throw std::invalid_argument("chip period must be positive");
  if (tolerance < 0 || 2 * tolerance >= period) {
    throw std::invalid_argument("interval tolerance must lie in [0, T/2)");
  }
  ShiftRecord rec;
  rec.width = width;
  rec.height = height;
  const auto pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  rec.last_timestamp.assign(pixels, ShiftRecord::kNoEvent);
  rec.counts.assign(pixels, 0);
  for (const auto& e : events) {
    if (e.polarity <= 0) continue;
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) continue;
    const auto idx = static_cast<std::size_t>(e.y) * width + e.x;
    const std::int64_t last = rec.last_timestamp[idx];
    rec.last_timestamp[idx] = e.t_us;
    if (last == ShiftRecord::kNoEvent) continue;
    const std::int64_t delta = e.t_us - last;
    for (const auto& [interval, shift] : table) {
      if (std::llabs(delta - interval * period) <= tolerance) {
        rec.aligned.push_back({e.t_us + shift * period, e.x, e.y});
        ++rec.counts[idx];
        break;
      }
    }
  }
  return rec;
}

}  // namespace

ShiftRecord time_shift_record(std::span<const Event> events, std::int64_t chip_period_us,
                              std::int64_t tolerance_us, int width, int height) {
  FrameLayout layout;
  layout.chip_period_us = chip_period_us;
  return record_with_table(events, chip_period_us, tolerance_us, width, height,
                           sync_shift_table(layout));
}

ShiftRecord time_shift_record(std::span<const Event> events, const FrameLayout& layout,
                              std::int64_t tolerance_us, int width, int height) {
  return record_with_table(events, layout.chip_period_us, tolerance_us, width, height,
                           sync_shift_table(layout));
}

std::vector<PixelRect> merge_rectangles(std::vector<PixelRect> boxes, int gap_px) {
  const auto close = [gap_px](const PixelRect& a, const PixelRect& b) {
    const int gx = std::max(a.x_min, b.x_min) - std::min(a.x_max, b.x_max) - 1;
    const int gy = std::max(a.y_min, b.y_min) - std::min(a.y_max, b.y_max) - 1;
    return std::max({gx, gy, 0}) <= gap_px;
  };
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (close(boxes[i], boxes[j])) {
          boxes[i] = boxes[i].united(boxes[j]);
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }
  return boxes;
}

namespace {

// Drops border rows and columns whose hot-pixel count is a small fraction of
// the busiest row or column. Isolated noise pixels otherwise stretch the box
// and shift the cluster bands.
PixelRect trim_sparse_edges(const ShiftRecord& record, PixelRect box, const RegionParams& params) {
  if (params.edge_trim_fraction <= 0) return box;
  const auto hot = [&](int x, int y) { return record.count_at(x, y) >= params.hot_pixel_count; };
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<int> rows(static_cast<std::size_t>(box.y_max - box.y_min + 1), 0);
    std::vector<int> cols(static_cast<std::size_t>(box.x_max - box.x_min + 1), 0);
    for (int y = box.y_min; y <= box.y_max; ++y) {
      for (int x = box.x_min; x <= box.x_max; ++x) {
        if (!hot(x, y)) continue;
        ++rows[y - box.y_min];
        ++cols[x - box.x_min];
      }
    }
    const auto trim = [&](const std::vector<int>& counts, int& lo, int& hi) {
      const int peak = *std::max_element(counts.begin(), counts.end());
      const double keep = params.edge_trim_fraction * peak;
      const int base = lo;
      while (lo < hi && counts[lo - base] < keep) ++lo;
      while (hi > lo && counts[hi - base] < keep) --hi;
    };
    trim(rows, box.y_min, box.y_max);
    trim(cols, box.x_min, box.x_max);
  }
  return box;
}

}  // namespace

std::vector<RegionBox> detect_regions(const ShiftRecord& record, const RegionParams& params) {
  const int w = record.width;
  const int h = record.height;
  PixelRect support;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (record.count_at(x, y) > 0) support = support.united({x, y, x, y});
    }
  }
  if (support.empty()) return {};

  // Blur only the occupied part of the image, padded by the kernel radius.
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * params.sigma)));
  const PixelRect area =
      PixelRect{support.x_min - radius, support.y_min - radius, support.x_max + radius,
                support.y_max + radius}
          .intersected({0, 0, w - 1, h - 1});
  const int aw = area.x_max - area.x_min + 1;
  const int ah = area.y_max - area.y_min + 1;

  std::vector<double> kernel(2 * radius + 1, 1.0);
  if (params.sigma > 0) {
    for (int k = -radius; k <= radius; ++k) {
      kernel[k + radius] = std::exp(-0.5 * k * k / (params.sigma * params.sigma));
    }
  } else {
    std::fill(kernel.begin(), kernel.end(), 0.0);
    kernel[radius] = 1.0;
  }
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= norm;

  std::vector<double> tmp(static_cast<std::size_t>(aw) * ah, 0.0);
  std::vector<double> blurred(tmp.size(), 0.0);
  for (int y = 0; y < ah; ++y) {
    for (int x = 0; x < aw; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = x + k;
        if (xx < 0 || xx >= aw) continue;
        s += kernel[k + radius] * record.count_at(area.x_min + xx, area.y_min + y);
      }
      tmp[static_cast<std::size_t>(y) * aw + x] = s;
    }
  }
  for (int y = 0; y < ah; ++y) {
    for (int x = 0; x < aw; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = y + k;
        if (yy < 0 || yy >= ah) continue;
        s += kernel[k + radius] * tmp[static_cast<std::size_t>(yy) * aw + x];
      }
      blurred[static_cast<std::size_t>(y) * aw + x] = s;
    }
  }

  // 4-connected flood fill over the binarised image.
  std::vector<std::uint8_t> visited(blurred.size(), 0);
  std::vector<PixelRect> boxes;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < ah; ++y0) {
    for (int x0 = 0; x0 < aw; ++x0) {
      const auto i0 = static_cast<std::size_t>(y0) * aw + x0;
      if (visited[i0] || blurred[i0] < params.count_threshold) continue;
      PixelRect box{x0, y0, x0, y0};
      visited[i0] = 1;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        box = box.united({x, y, x, y});
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k];
          const int ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= aw || ny >= ah) continue;
          const auto ni = static_cast<std::size_t>(ny) * aw + nx;
          if (visited[ni] || blurred[ni] < params.count_threshold) continue;
          visited[ni] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      boxes.push_back({box.x_min + area.x_min, box.y_min + area.y_min, box.x_max + area.x_min,
                       box.y_max + area.y_min});
    }
  }

  boxes = merge_rectangles(std::move(boxes), params.merge_gap_px);

  std::vector<RegionBox> regions;
  for (const auto& b : boxes) {
    // Shrink to the raw hot pixels; blurring widens the binarised blob.
    PixelRect hot;
    int hot_pixels = 0;
    double score = 0.0;
    for (int y = b.y_min; y <= b.y_max; ++y) {
      for (int x = b.x_min; x <= b.x_max; ++x) {
        const auto c = record.count_at(x, y);
        score += c;
        if (c >= params.hot_pixel_count) {
          ++hot_pixels;
          hot = hot.united({x, y, x, y});
        }
      }
    }
    if (hot.empty() || hot_pixels < params.min_hot_pixels) continue;
    hot = trim_sparse_edges(record, hot, params);
    if (hot.area() < params.min_area || hot.area() > params.max_area) continue;
    regions.push_back({hot.x_min, hot.y_min, hot.x_max, hot.y_max, score});
  }
  std::stable_sort(regions.begin(), regions.end(),
                   [](const RegionBox& a, const RegionBox& b) { return a.score > b.score; });
  return regions;
}

namespace {

std::map<std::int64_t, std::uint32_t> aligned_histogram(const ShiftRecord& record,
                                                        const RegionBox& region,
                                                        std::int64_t bin_us) {
  std::map<std::int64_t, std::uint32_t> bins;
  for (const auto& a : record.aligned) {
    if (!region.contains(a.x, a.y)) continue;
    const std::int64_t t = a.t_aligned_us;
    const std::int64_t idx = (t >= 0) ? t / bin_us : -((-t + bin_us - 1) / bin_us);
    ++bins[idx];
  }
  return bins;
}

}  // namespace

std::int64_t synchronize(const ShiftRecord& record, const RegionBox& region,
                         std::int64_t chip_period_us, std::uint32_t min_peak) {
  const std::int64_t bin = std::max<std::int64_t>(1, chip_period_us / 2);
  const auto bins = aligned_histogram(record, region, bin);
  std::int64_t best_idx = 0;
  std::uint32_t best = 0;
  for (const auto& [idx, count] : bins) {
    if (count > best) {  // strict: the earliest bin wins ties
      best = count;
      best_idx = idx;
    }
  }
  if (best == 0 || best < min_peak) {
    throw NoPeakError("no synchronisation peak (max bin " + std::to_string(best) + " < " +
                      std::to_string(min_peak) + ")");
  }
  return best_idx * bin + bin / 2;
}

std::vector<std::int64_t> find_sync_peaks(const ShiftRecord& record, const RegionBox& region,
                                          std::int64_t chip_period_us, std::uint32_t min_peak,
                                          std::int64_t min_separation_us) {
  const std::int64_t bin = std::max<std::int64_t>(1, chip_period_us / 2);
  const auto bins = aligned_histogram(record, region, bin);
  std::vector<std::pair<std::int64_t, std::uint32_t>> sorted(bins.begin(), bins.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::int64_t> peaks;
  for (const auto& [idx, count] : sorted) {
    if (count < std::max<std::uint32_t>(1, min_peak)) break;
    const std::int64_t centre = idx * bin + bin / 2;
    const bool far = std::all_of(peaks.begin(), peaks.end(), [&](std::int64_t p) {
      return std::llabs(p - centre) >= min_separation_us;
    });
    if (far) peaks.push_back(centre);
  }
  std::sort(peaks.begin(), peaks.end());
  return peaks;
}

double refine_sync(const ShiftRecord& record, const RegionBox& region, std::int64_t peak_us,
                   std::int64_t chip_period_us) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : record.aligned) {
    if (!region.contains(a.x, a.y)) continue;
    if (2 * std::llabs(a.t_aligned_us - peak_us) > chip_period_us) continue;
    sum += static_cast<double>(a.t_aligned_us);
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : static_cast<double>(peak_us);
}

namespace {

std::span<const Event> time_slice(std::span<const Event> events, double t0, double t1) {
  const auto lo = std::lower_bound(events.begin(), events.end(), t0,
                                   [](const Event& e, double t) { return static_cast<double>(e.t_us) < t; });
  const auto hi = std::lower_bound(lo, events.end(), t1,
                                   [](const Event& e, double t) { return static_cast<double>(e.t_us) < t; });
  return {lo, hi};
}

}  // namespace

PixelWeightMap pixel_weights(std::span<const Event> events, const RegionBox& region,
                             double t_sync_us, const FrameLayout& layout) {
  PixelWeightMap map;
  map.region = region;
  map.weights.assign(static_cast<std::size_t>(std::max(0, region.width())) *
                         static_cast<std::size_t>(std::max(0, region.height())),
                     0.0);
  const auto edges = layout.known_edge_slots();
  if (edges.empty() || map.weights.empty()) return map;
  const double period = static_cast<double>(layout.chip_period_us);
  const double half = period / 2.0;
  std::vector<double> edge_times;
  for (int s : edges) edge_times.push_back(t_sync_us + (s - layout.last_sync_slot()) * period);

  std::vector<std::uint64_t> matched(map.weights.size(), 0);
  for (const auto& e : time_slice(events, edge_times.front() - half, edge_times.back() + half + 1)) {
    if (e.polarity <= 0 || !region.contains(e.x, e.y)) continue;
    const auto idx = static_cast<std::size_t>(e.y - region.y_min) * region.width() + (e.x - region.x_min);
    for (std::size_t k = 0; k < edge_times.size() && k < 64; ++k) {
      if (std::abs(static_cast<double>(e.t_us) - edge_times[k]) <= half) {
        matched[idx] |= (1ull << k);
        break;
      }
    }
  }
  const double expected = static_cast<double>(std::min<std::size_t>(edge_times.size(), 64));
  for (std::size_t i = 0; i < matched.size(); ++i) {
    map.weights[i] = std::clamp(std::popcount(matched[i]) / expected, 0.0, 1.0);
  }
  return map;
}

double resolve_sync_alias(std::span<const Event> events, const RegionBox& region, double t_sync_us,
                          const FrameLayout& layout) {
  const auto edges = layout.known_edge_slots();
  const auto table = sync_shift_table(layout);
  const int last = layout.last_sync_slot();
  const double period = static_cast<double>(layout.chip_period_us);
  auto score = [&](double t) {
    const auto map = pixel_weights(events, region, t, layout);
    return std::accumulate(map.weights.begin(), map.weights.end(), 0.0);
  };
  double best_t = t_sync_us;
  double best = score(t_sync_us);
  for (std::size_t j = 1; j < edges.size(); ++j) {
    if (edges[j] <= last) continue;
    const int gap = edges[j] - edges[j - 1];
    const bool aliases = std::any_of(table.begin(), table.end(), [&](const auto& e) { return e.first == gap; });
    if (!aliases) continue;
    const double t = t_sync_us - (edges[j] - last) * period;
    const double s = score(t);
    if (s > best) {
      best = s;
      best_t = t;
    }
  }
  return best_t;
}

std::vector<std::vector<SlotObservation>> accumulate_cluster_observations(
    std::span<const Event> events, const RegionBox& region, const PixelWeightMap& weights,
    double t_sync_us, const FrameLayout& layout) {
  const int clusters = layout.cluster_count;
  if (region.height() < clusters) {
    throw BandTooThinError("region is " + std::to_string(region.height()) + " rows high, need " +
                           std::to_string(clusters) + " cluster bands");
  }
  const int bits = layout.coded_bits_per_cluster();
  std::vector<std::vector<SlotObservation>> obs(clusters, std::vector<SlotObservation>(bits));
  const double period = static_cast<double>(layout.chip_period_us);
  const double frame0 = t_sync_us - layout.last_sync_slot() * period;
  const double window0 = frame0 - period / 2.0;
  const auto slot_map = layout.slot_to_data_index();
  const int total = layout.total_slots();

  for (const auto& e : time_slice(events, window0, window0 + total * period)) {
    if (e.polarity <= 0 || !region.contains(e.x, e.y)) continue;
    const double w = weights.at(e.x, e.y);
    if (w <= 0.0) continue;
    const auto slot = static_cast<int>(std::floor((static_cast<double>(e.t_us) - window0) / period));
    if (slot < 0 || slot >= total) continue;
    const int d = slot_map[slot];
    if (d < 0) continue;
    const int band = std::min(clusters - 1, static_cast<int>((e.y - region.y_min + 0.5) * clusters /
                                                              region.height()));
    auto& o = obs[band][d / 2];
    if (d % 2 == 0) {
      o.boundary_weight += w;
    } else {
      o.mid_weight += w;
    }
  }
  return obs;
}

bool DecodedPacket::all_crc_ok() const {
  return !crc_ok.empty() && std::all_of(crc_ok.begin(), crc_ok.end(), [](bool b) { return b; });
}

std::int64_t ReceiverConfig::tolerance() const {
  return tolerance_us > 0 ? tolerance_us : layout.chip_period_us / 4;
}

DecodedPacket decode_frame(std::span<const Event> events, const RegionBox& region, double t_sync_us,
                           const ReceiverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto& layout = config.layout;
  if (config.fec.block_length != layout.coded_bits_per_cluster()) {
    throw SizeMismatchError("polar block length does not match the layout's data chips");
  }
  const auto weights = pixel_weights(events, region, t_sync_us, layout);
  const auto obs = accumulate_cluster_observations(events, region, weights, t_sync_us, layout);

  DecodedPacket packet;
  packet.region = region;
  packet.t_sync_us = t_sync_us;
  const SclDecoder decoder(config.fec);
  Bits payload_bits;
  payload_bits.reserve(static_cast<std::size_t>(layout.cluster_count) * config.fec.payload_length());
  for (int c = 0; c < layout.cluster_count; ++c) {
    const auto soft = soft_demap(obs[c], config.demap);
    const auto result = decoder.decode(soft.llrs);
    packet.crc_ok.push_back(result.crc_ok);
    payload_bits.insert(payload_bits.end(), result.payload.begin(), result.payload.end());
  }
  packet.payload = bits_to_bytes(payload_bits);
  packet.t_proc_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return packet;
}

DecodedPacket decode_region(std::span<const Event> events, const ShiftRecord& record,
                            const RegionBox& region, const ReceiverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto peak = synchronize(record, region, config.layout.chip_period_us, config.min_peak);
  const double t_sync = resolve_sync_alias(
      events, region, refine_sync(record, region, peak, config.layout.chip_period_us), config.layout);
  auto packet = decode_frame(events, region, t_sync, config);
  packet.t_proc_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return packet;
}

namespace {

RegionReception receive_region(std::span<const Event> events, const ShiftRecord& record,
                               const RegionBox& region, const ReceiverConfig& config) {
  RegionReception out;
  out.region = region;
  try {
    const auto& layout = config.layout;
    const std::int64_t span = static_cast<std::int64_t>(layout.total_slots()) * layout.chip_period_us;
    const auto peaks = find_sync_peaks(record, region, layout.chip_period_us, config.min_peak, span);
    if (peaks.empty()) throw NoPeakError("no synchronisation peak in region");
    for (const auto peak : peaks) {
      const auto start = std::chrono::steady_clock::now();
      const double t_sync =
          resolve_sync_alias(events, region, refine_sync(record, region, peak, layout.chip_period_us), layout);
      auto packet = decode_frame(events, region, t_sync, config);
      packet.t_proc_us =
          std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
      out.packets.push_back(std::move(packet));
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

Reception receive(std::span<const Event> events, int width, int height, const ReceiverConfig& config) {
  config.layout.validate();
  Reception reception;
  const auto record = time_shift_record(events, config.layout, config.tolerance(), width, height);
  reception.regions = detect_regions(record, config.regions);
  if (config.parallel_regions && reception.regions.size() > 1) {
    std::vector<std::future<RegionReception>> workers;
    for (const auto& region : reception.regions) {
      workers.push_back(std::async(std::launch::async, receive_region, events, std::cref(record),
                                   std::cref(region), std::cref(config)));
    }
    for (auto& w : workers) reception.per_region.push_back(w.get());
  } else {
    for (const auto& region : reception.regions) {
      reception.per_region.push_back(receive_region(events, record, region, config));
    }
  }
  return reception;
}

std::string packet_to_json_line(const DecodedPacket& packet) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (auto b : packet.payload) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 0xf]);
  }
  nlohmann::json j = {
      {"payload_hex", hex},
      {"crc_ok", packet.crc_ok},
      {"all_crc_ok", packet.all_crc_ok()},
      {"region",
       {{"x_min", packet.region.x_min},
        {"y_min", packet.region.y_min},
        {"x_max", packet.region.x_max},
        {"y_max", packet.region.y_max},
        {"score", packet.region.score}}},
      {"t_sync_us", packet.t_sync_us},
      {"t_proc_us", packet.t_proc_us},
  };
  if (packet.bit_errors_vs_truth) j["bit_errors_vs_truth"] = *packet.bit_errors_vs_truth;
  return j.dump();
}

}  // namespace evlc

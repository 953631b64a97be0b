#include "evlc/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <ostream>
#include <random>
#include <sstream>

#include "evlc/json_io.hpp"

namespace evlc {

std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::kDistance: return "distance";
    case SweepVariable::kSpeed: return "speed";
    case SweepVariable::kTransmitters: return "transmitters";
    case SweepVariable::kPayloadPackets: return "payload_packets";
  }
  return "speed";
}

SweepVariable sweep_variable_from_string(const std::string& name) {
  for (auto v : {SweepVariable::kDistance, SweepVariable::kSpeed, SweepVariable::kTransmitters,
                 SweepVariable::kPayloadPackets}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown sweep variable '" + name + "'");
}

void ExperimentConfig::validate() const {
  scenario.validate();
  sensor.validate();
  layout.validate();
  fec.validate();
  if (sweep.values.empty()) throw std::invalid_argument("sweep needs at least one value");
  if (trials_per_point < 1) throw std::invalid_argument("trials_per_point must be >= 1");
  if (packets_per_transmitter < 1) throw std::invalid_argument("packets_per_transmitter must be >= 1");
  if (t_cmd_us < 0 || t_transfer_us < 0 || t_proc_model_us < 0) {
    throw std::invalid_argument("latency constants must be non-negative");
  }
}

ReceiverConfig ExperimentConfig::receiver() const {
  ReceiverConfig rc;
  rc.layout = layout;
  rc.fec = fec;
  rc.regions = regions;
  rc.demap = demap;
  rc.parallel_regions = parallel_regions;
  return rc;
}

LatencyBreakdown latency_model(int n_packets, const FrameLayout& layout, double t_cmd_us,
                               double t_transfer_us, double t_proc_us) {
  if (n_packets < 1) throw std::invalid_argument("latency model needs at least one packet");
  if (t_cmd_us < 0 || t_transfer_us < 0 || t_proc_us < 0) {
    throw std::invalid_argument("latency components must be non-negative");
  }
  LatencyBreakdown b;
  b.t_cmd_us = t_cmd_us;
  b.t_blink_us = static_cast<double>(n_packets) * static_cast<double>(frame_duration_us(layout)) +
                 static_cast<double>(n_packets - 1) * layout.inter_packet_gap_slots *
                     static_cast<double>(layout.chip_period_us);
  b.t_transfer_us = t_transfer_us;
  b.t_proc_us = t_proc_us;
  b.total_us = b.t_cmd_us + b.t_blink_us + b.t_transfer_us + b.t_proc_us;
  return b;
}

std::string EtsiReport::summary() const {
  std::ostringstream out;
  out << (pass ? "PASS" : "FAIL") << ": payload " << payload_bytes << " B (margin "
      << payload_margin_bytes << " B, " << (payload_ok ? "ok" : "too small") << "), latency "
      << total_us << " us (margin " << latency_margin_us << " us, " << (latency_ok ? "ok" : "over budget")
      << ")";
  return out.str();
}

EtsiReport etsi_check(const LatencyBreakdown& breakdown, int payload_bytes, int min_payload_bytes,
                      double budget_us) {
  EtsiReport r;
  r.payload_bytes = payload_bytes;
  r.total_us = breakdown.total_us;
  r.payload_margin_bytes = payload_bytes - min_payload_bytes;
  r.latency_margin_us = budget_us - breakdown.total_us;
  r.payload_ok = payload_bytes >= min_payload_bytes;
  r.latency_ok = breakdown.total_us <= budget_us;
  r.pass = r.payload_ok && r.latency_ok;
  return r;
}

int TrialResult::packets() const {
  int n = 0;
  for (const auto& t : transmitters) n += t.packets;
  return n;
}

int TrialResult::packet_errors() const {
  int n = 0;
  for (const auto& t : transmitters) n += t.packets - t.packets_ok;
  return n;
}

std::size_t TrialResult::bits() const {
  std::size_t n = 0;
  for (const auto& t : transmitters) n += t.bits;
  return n;
}

std::size_t TrialResult::bit_errors() const {
  std::size_t n = 0;
  for (const auto& t : transmitters) n += t.bit_errors;
  return n;
}

double TrialResult::min_iou() const {
  double m = transmitters.empty() ? 0.0 : 1.0;
  for (const auto& t : transmitters) m = std::min(m, t.best_iou);
  return m;
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& config, double value) {
  ExperimentConfig c = config;
  switch (config.sweep.variable) {
    case SweepVariable::kDistance:
      if (!(value > 0)) throw std::invalid_argument("distance must be positive");
      for (auto& tx : c.scenario.transmitters) tx.longitudinal_m = value;
      break;
    case SweepVariable::kSpeed:
      c.scenario.vehicle_speed_kmh = value;
      break;
    case SweepVariable::kTransmitters: {
      const auto n = static_cast<int>(std::lround(value));
      if (n < 1) throw std::invalid_argument("transmitter count must be >= 1");
      const Transmitter base = config.scenario.transmitters.front();
      c.scenario.transmitters.clear();
      for (int i = 0; i < n; ++i) {
        Transmitter tx = base;
        tx.lateral_offset_m = base.lateral_offset_m + config.transmitter_spacing_m * i;
        c.scenario.transmitters.push_back(tx);
      }
      break;
    }
    case SweepVariable::kPayloadPackets: {
      const auto n = static_cast<int>(std::lround(value));
      if (n < 1) throw std::invalid_argument("packet count must be >= 1");
      c.packets_per_transmitter = n;
      break;
    }
  }
  return c;
}

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::size_t popcount_xor(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::uint8_t other = i < b.size() ? b[i] : 0;
    n += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(a[i] ^ other)));
  }
  return n;
}

double region_t_proc(const RegionReception& r) {
  double t = 0.0;
  for (const auto& p : r.packets) t += p.t_proc_us;
  return t;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point_index, int trial) {
  return splitmix(splitmix(base_seed ^ 0x6576'6c63ull) + point_index * 0x100000001b3ull +
                  static_cast<std::uint64_t>(trial));
}

std::vector<std::vector<Packet>> make_payloads(const ExperimentConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int capacity = packet_capacity_bytes(config.layout, config.fec);
  std::vector<std::vector<Packet>> truth(config.scenario.transmitters.size());
  for (auto& packets : truth) {
    for (int k = 0; k < config.packets_per_transmitter; ++k) {
      Packet p;
      p.packet_id = static_cast<std::uint32_t>(k);
      p.payload.resize(static_cast<std::size_t>(capacity));
      for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng() >> 56);
      packets.push_back(std::move(p));
    }
  }
  return truth;
}

Capture make_capture(const ExperimentConfig& config, const std::vector<std::vector<Packet>>& payloads,
                     std::uint64_t seed) {
  if (payloads.size() != config.scenario.transmitters.size()) {
    throw SizeMismatchError("one packet list per transmitter expected");
  }
  Capture capture;
  capture.scenario = config.scenario;
  std::int64_t end = 0;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    const std::int64_t start = 1000 + config.transmitter_stagger_us * static_cast<std::int64_t>(i);
    capture.signals.push_back(build_signal(payloads[i], config.layout, config.fec, start));
    end = std::max(end, capture.signals.back().end_us());
  }
  capture.scenario.duration_us = end + 2000;
  capture.events = simulate(capture.scenario, capture.signals, config.sensor, splitmix(seed ^ 0x5e45u));
  return capture;
}

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  TrialResult result;
  result.seed = seed;
  result.packets_per_transmitter = config.packets_per_transmitter;
  const auto truth = make_payloads(config, seed);
  const auto n_tx = truth.size();
  const int capacity = packet_capacity_bytes(config.layout, config.fec);
  result.transmitters.resize(n_tx);
  for (std::size_t i = 0; i < n_tx; ++i) {
    auto& out = result.transmitters[i];
    out.packets = config.packets_per_transmitter;
    out.bits = static_cast<std::size_t>(out.packets) * static_cast<std::size_t>(capacity) * 8;
  }

  try {
    const auto capture = make_capture(config, truth, seed);
    const auto& scenario = capture.scenario;
    const auto& signals = capture.signals;
    const auto& sim = capture.events;
    result.events_generated = sim.generated.size();
    result.events_delivered = sim.delivered.size();
    result.peak_events_per_ms = peak_events_per_ms(sim.delivered);

    const auto rc = config.receiver();
    const auto rx = config.bipolar_baseline
                        ? receive_bipolar(sim.delivered, scenario.width, scenario.height, rc)
                        : receive(sim.delivered, scenario.width, scenario.height, rc);
    result.regions_detected = static_cast<int>(rx.regions.size());
    for (const auto& r : rx.per_region) result.wall_t_proc_us = std::max(result.wall_t_proc_us, region_t_proc(r));

    const double period = static_cast<double>(config.layout.chip_period_us);
    for (std::size_t i = 0; i < n_tx; ++i) {
      auto& out = result.transmitters[i];
      const auto swept = swept_footprint(scenario, scenario.transmitters[i], signals[i].start_us,
                                         signals[i].end_us());
      for (const auto& region : rx.regions) out.best_iou = std::max(out.best_iou, iou(region.rect(), swept));
      for (int k = 0; k < config.packets_per_transmitter; ++k) {
        const double expected = static_cast<double>(frame_start_us(config.layout, signals[i].start_us, k)) +
                                config.layout.last_sync_slot() * period;
        const DecodedPacket* best = nullptr;
        for (const auto& r : rx.per_region) {
          if (r.region.rect().intersected(swept).empty()) continue;
          for (const auto& p : r.packets) {
            if (std::abs(p.t_sync_us - expected) > period) continue;
            if (!best || std::abs(p.t_sync_us - expected) < std::abs(best->t_sync_us - expected)) best = &p;
          }
        }
        const auto& sent = truth[i][k].payload;
        if (best) {
          const auto errors = popcount_xor(sent, best->payload);
          out.bit_errors += errors;
          out.packets_ok += (best->all_crc_ok() && errors == 0) ? 1 : 0;
        } else {
          out.bit_errors += popcount_xor(sent, {});
        }
      }
    }
  } catch (const std::exception& e) {
    result.error = e.what();
    for (std::size_t i = 0; i < n_tx; ++i) {
      auto& out = result.transmitters[i];
      out.packets_ok = 0;
      out.bit_errors = 0;
      for (const auto& p : truth[i]) out.bit_errors += popcount_xor(p.payload, {});
    }
  }
  return result;
}

MetricsRow run_point(const ExperimentConfig& config, double sweep_value, std::uint64_t point_seed) {
  const auto c = apply_sweep_value(config, sweep_value);
  MetricsRow row;
  row.variable = to_string(config.sweep.variable);
  row.value = sweep_value;
  row.trials = c.trials_per_point;
  double regions = 0, generated = 0, delivered = 0, t_proc_sum = 0, t_proc_max = 0;
  row.min_iou = 1.0;
  for (int t = 0; t < c.trials_per_point; ++t) {
    auto trial = run_trial(c, trial_seed(point_seed, 0, t));
    row.failed_trials += trial.error.empty() ? 0 : 1;
    row.packets += trial.packets();
    row.packet_errors += trial.packet_errors();
    row.bits += trial.bits();
    row.bit_errors += trial.bit_errors();
    regions += trial.regions_detected;
    generated += static_cast<double>(trial.events_generated);
    delivered += static_cast<double>(trial.events_delivered);
    row.min_iou = std::min(row.min_iou, trial.min_iou());
    t_proc_sum += trial.wall_t_proc_us;
    t_proc_max = std::max(t_proc_max, trial.wall_t_proc_us);
    row.trial_results.push_back(std::move(trial));
  }
  const double n = c.trials_per_point;
  row.ber = row.bits ? static_cast<double>(row.bit_errors) / static_cast<double>(row.bits) : 0.0;
  row.per = row.packets ? static_cast<double>(row.packet_errors) / row.packets : 0.0;
  row.regions_mean = regions / n;
  row.events_generated_mean = generated / n;
  row.events_delivered_mean = delivered / n;
  const int packets = c.packets_per_transmitter;
  row.latency_model = latency_model(packets, c.layout, c.t_cmd_us, c.t_transfer_us, c.t_proc_model_us);
  row.wall_mean = latency_model(packets, c.layout, c.t_cmd_us, c.t_transfer_us, t_proc_sum / n);
  row.wall_max = latency_model(packets, c.layout, c.t_cmd_us, c.t_transfer_us, t_proc_max);
  return row;
}

std::vector<MetricsRow> run_sweep(const ExperimentConfig& config) {
  config.validate();
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < config.sweep.values.size(); ++i) {
    rows.push_back(run_point(config, config.sweep.values[i], trial_seed(config.seed, i + 1, -1)));
  }
  return rows;
}

std::vector<std::string> metrics_csv_columns() {
  return {"variable",          "value",          "trials",           "failed_trials",
          "packets",           "packet_errors",  "per",              "bits",
          "bit_errors",        "ber",            "regions_mean",     "min_iou",
          "events_generated",  "events_delivered", "t_cmd_us",       "t_blink_us",
          "t_transfer_us",     "t_proc_model_us", "total_model_us",  "wall_t_proc_mean_us",
          "wall_t_proc_max_us", "wall_total_mean_us", "wall_total_max_us"};
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  const auto cols = metrics_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    const std::vector<std::string> cells{
        r.variable,
        num(r.value),
        std::to_string(r.trials),
        std::to_string(r.failed_trials),
        std::to_string(r.packets),
        std::to_string(r.packet_errors),
        num(r.per),
        std::to_string(r.bits),
        std::to_string(r.bit_errors),
        num(r.ber),
        num(r.regions_mean),
        num(r.min_iou),
        num(r.events_generated_mean),
        num(r.events_delivered_mean),
        num(r.latency_model.t_cmd_us),
        num(r.latency_model.t_blink_us),
        num(r.latency_model.t_transfer_us),
        num(r.latency_model.t_proc_us),
        num(r.latency_model.total_us),
        num(r.wall_mean.t_proc_us),
        num(r.wall_max.t_proc_us),
        num(r.wall_mean.total_us),
        num(r.wall_max.total_us),
    };
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
}

std::string deterministic_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<bool> keep;
  std::ostringstream out;
  bool header = true;
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    if (header) {
      for (const auto& c : cells) keep.push_back(c.rfind("wall_", 0) != 0);
      header = false;
    }
    bool first = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      out << (first ? "" : ",") << cells[i];
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json sweep_summary(const ExperimentConfig& config, const std::vector<MetricsRow>& rows) {
  nlohmann::json j;
  j["config"] = config;
  j["latency_note"] =
      "t_cmd_us and t_transfer_us are placeholder constants; wall_* columns use measured decode time";
  auto& out = j["rows"];
  out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"variable", r.variable},
                   {"value", r.value},
                   {"ber", r.ber},
                   {"per", r.per},
                   {"packets", r.packets},
                   {"packet_errors", r.packet_errors},
                   {"failed_trials", r.failed_trials},
                   {"regions_mean", r.regions_mean},
                   {"min_iou", r.min_iou},
                   {"total_model_us", r.latency_model.total_us},
                   {"wall_total_mean_us", r.wall_mean.total_us}});
  }
  return j;
}

namespace {

DecodedPacket decode_frame_bipolar(std::span<const Event> events, const RegionBox& region, double t_sync_us,
                                   const ReceiverConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto& layout = config.layout;
  const auto weights = pixel_weights(events, region, t_sync_us, layout);
  const int clusters = layout.cluster_count;
  if (region.height() < clusters) throw BandTooThinError("region too thin for the cluster bands");
  const int bits = layout.coded_bits_per_cluster();
  std::vector<std::vector<double>> pos(clusters, std::vector<double>(bits, 0.0));
  auto neg = pos;
  const double period = static_cast<double>(layout.chip_period_us);
  const double window0 = t_sync_us - layout.last_sync_slot() * period - period / 2.0;
  const auto slot_map = layout.slot_to_data_index();
  const int total = layout.total_slots();
  const auto lo = std::lower_bound(events.begin(), events.end(), window0,
                                   [](const Event& e, double t) { return static_cast<double>(e.t_us) < t; });
  for (auto it = lo; it != events.end(); ++it) {
    const auto& e = *it;
    const auto slot = static_cast<int>(std::floor((static_cast<double>(e.t_us) - window0) / period));
    if (slot >= total) break;
    if (!region.contains(e.x, e.y)) continue;
    const int d = slot_map[slot];
    if (d < 0 || d % 2 == 0) continue;
    const double w = weights.at(e.x, e.y);
    if (w <= 0) continue;
    const int band =
        std::min(clusters - 1, static_cast<int>((e.y - region.y_min + 0.5) * clusters / region.height()));
    (e.polarity > 0 ? pos : neg)[band][d / 2] += w;
  }
  DecodedPacket packet;
  packet.region = region;
  packet.t_sync_us = t_sync_us;
  const SclDecoder decoder(config.fec);
  Bits payload;
  const double nf = config.demap.noise_floor;
  for (int c = 0; c < clusters; ++c) {
    std::vector<double> llr(bits);
    for (int i = 0; i < bits; ++i) llr[i] = std::log((neg[c][i] + nf) / (pos[c][i] + nf));
    const auto r = decoder.decode(llr);
    packet.crc_ok.push_back(r.crc_ok);
    payload.insert(payload.end(), r.payload.begin(), r.payload.end());
  }
  packet.payload = bits_to_bytes(payload);
  packet.t_proc_us =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return packet;
}

RegionReception receive_region_bipolar(std::span<const Event> events, const ShiftRecord& record,
                                       const RegionBox& region, const ReceiverConfig& config) {
  RegionReception out;
  out.region = region;
  try {
    const auto& layout = config.layout;
    const std::int64_t span = static_cast<std::int64_t>(layout.total_slots()) * layout.chip_period_us;
    const auto peaks = find_sync_peaks(record, region, layout.chip_period_us, config.min_peak, span);
    if (peaks.empty()) throw NoPeakError("no synchronisation peak in region");
    for (const auto peak : peaks) {
      const double t_sync =
          resolve_sync_alias(events, region, refine_sync(record, region, peak, layout.chip_period_us), layout);
      out.packets.push_back(decode_frame_bipolar(events, region, t_sync, config));
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

Reception receive_bipolar(std::span<const Event> events, int width, int height, const ReceiverConfig& config) {
  config.layout.validate();
  Reception reception;
  const auto record = time_shift_record(events, config.layout, config.tolerance(), width, height);
  reception.regions = detect_regions(record, config.regions);
  if (config.parallel_regions && reception.regions.size() > 1) {
    std::vector<std::future<RegionReception>> workers;
    for (const auto& region : reception.regions) {
      workers.push_back(std::async(std::launch::async, receive_region_bipolar, events, std::cref(record),
                                   std::cref(region), std::cref(config)));
    }
    for (auto& w : workers) reception.per_region.push_back(w.get());
  } else {
    for (const auto& region : reception.regions) {
      reception.per_region.push_back(receive_region_bipolar(events, record, region, config));
    }
  }
  return reception;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return nlohmann::json::parse(in).get<ExperimentConfig>();
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace evlc

#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "evlc/transmitter.hpp"

namespace evlc {

struct Event {
  std::int64_t t_us = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

// Stream order: time, then row, then column.
bool event_before(const Event& a, const Event& b);

using EventStream = std::vector<Event>;

// A vertical LED bar by the road. Positions are relative to the camera at
// t = 0: longitudinal along the direction of travel, lateral offset added to
// the scenario's lateral distance, height relative to the camera.
struct Transmitter {
  double longitudinal_m = 20.0;
  double lateral_offset_m = 0.0;
  double height_m = 0.0;
  double bar_height_m = 1.2;
  double bar_width_m = 0.1;
  int cluster_count = 16;
  int leds_per_cluster = 6;
};

struct ScenarioConfig {
  int width = 1280;
  int height = 720;
  std::vector<Transmitter> transmitters = {Transmitter{}};
  double vehicle_speed_kmh = 0.0;
  double lateral_distance_m = 2.0;
  double focal_px = 1200.0;
  // Angle between the optical axis and the direction of travel, towards the
  // roadside. 90 degrees is a side-looking camera.
  double camera_yaw_deg = 10.0;
  std::int64_t duration_us = 40000;
  double ambient_log_intensity = 0.0;
  double led_log_contrast = 1.0;
  // Time step used to sample motion; static scenes only break at chip edges.
  std::int64_t render_step_us = 10;

  void validate() const;
};

enum class PolarityMode { kPositiveOnly, kBipolar };

struct SensorConfig {
  double contrast_threshold = 0.3;
  std::int64_t refractory_us = 50;
  double jitter_sigma_us = 20.0;
  double background_noise_rate = 0.5;  // events / s / pixel
  double bandwidth_cap = std::numeric_limits<double>::infinity();  // events / s
  PolarityMode polarity_mode = PolarityMode::kPositiveOnly;

  void validate() const;
};

struct PixelRect {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  bool empty() const { return x_max < x_min || y_max < y_min; }
  long long area() const {
    return empty() ? 0 : static_cast<long long>(x_max - x_min + 1) * (y_max - y_min + 1);
  }
  bool contains(int x, int y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
  PixelRect united(const PixelRect& o) const;
  PixelRect intersected(const PixelRect& o) const;
};

double iou(const PixelRect& a, const PixelRect& b);

/*
 * Image-plane footprint of one transmitter at one instant. The bar is a
 * fronto-parallel rectangle [x0, x1) x [y0, y1) in continuous pixel
 * coordinates; cluster c covers the c-th of cluster_count equal horizontal
 * bands, top band first. A pixel is lit when its centre falls inside.
 */
struct Footprint {
  bool visible = false;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  int cluster_count = 16;
  PixelRect pixels;  // covered pixel centres, clipped to the sensor

  // Cluster covering the pixel, or -1.
  int cluster_at(int x, int y) const;
  // Pixel rows [first, last] lit by one cluster band.
  std::pair<int, int> band_rows(int cluster) const;
};

Footprint project_transmitter(const ScenarioConfig& scenario, const Transmitter& tx,
                              std::int64_t t_us);

// Horizontal image velocity of the footprint centre, px/s.
double horizontal_pixel_velocity(const ScenarioConfig& scenario, const Transmitter& tx,
                                 std::int64_t t_us);

// Bounding box of every pixel lit at any sampled instant of [t0, t1].
PixelRect swept_footprint(const ScenarioConfig& scenario, const Transmitter& tx,
                          std::int64_t t0_us, std::int64_t t1_us);

struct PixelTrace {
  int x = 0;
  int y = 0;
  double initial_level = 0.0;
  // (time, level from that time on), sorted by time.
  std::vector<std::pair<std::int64_t, double>> breakpoints;
};

// signals[i] drives scenario.transmitters[i].
std::vector<PixelTrace> render_traces(const ScenarioConfig& scenario,
                                      std::span<const TransmitterSignal> signals);

struct SensorExtent {
  int width = 0;
  int height = 0;
  std::int64_t duration_us = 0;
};

EventStream generate_events(std::span<const PixelTrace> traces, const SensorConfig& sensor,
                            const SensorExtent& extent, std::uint64_t seed);

EventStream apply_bandwidth_cap(std::span<const Event> stream, double cap_events_per_s);

// Largest number of events inside any half-open 1 ms window.
std::size_t peak_events_per_ms(std::span<const Event> stream);

struct SimulationResult {
  EventStream generated;
  EventStream delivered;  // after the bandwidth cap
};

SimulationResult simulate(const ScenarioConfig& scenario, std::span<const TransmitterSignal> signals,
                          const SensorConfig& sensor, std::uint64_t seed);

void write_events_csv(std::ostream& out, std::span<const Event> events);
EventStream read_events_csv(std::istream& in);
void write_events_csv(const std::string& path, std::span<const Event> events);
EventStream read_events_csv(const std::string& path);

}  // namespace evlc
